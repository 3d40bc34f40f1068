#pragma once

#include "verifix/corpus.hpp"

#include <string>

namespace bench {

inline std::string corpus(const std::string& f) { return std::string(VERIFIX_CORPUS_DIR) + "/" + f; }

inline verifix::CorpusCase load(const std::string& entry, const std::string& fix)
{
    auto e = verifix::load_entry(corpus(entry));
    for (const auto& f : e.fixes)
        if (f.patch_file == fix) return verifix::load_case(e, f);
    return verifix::load_case(e, e.fixes.front());
}

inline verifix::Trace seed_run(const std::string& entry, const std::string& fix)
{
    auto c = load(entry, fix);
    return verifix::replay(verifix::apply_fix(c.program, c.fix).program, c.seed, {});
}

} // namespace bench
