#include "verifix/corpus.hpp"

#include "verifix/error.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <sstream>

namespace verifix {

namespace fs = std::filesystem;

const char* verdict_class_name(VerdictClass c)
{
    switch (c) {
    case VerdictClass::Verified: return "verified";
    case VerdictClass::AV: return "av";
    case VerdictClass::DL: return "dl";
    case VerdictClass::AVDL: return "av+dl";
    case VerdictClass::Inconclusive: return "inconclusive";
    }
    return "?";
}

std::optional<VerdictClass> parse_verdict_class(const std::string& s)
{
    for (auto c : {VerdictClass::Verified, VerdictClass::AV, VerdictClass::DL, VerdictClass::AVDL,
                   VerdictClass::Inconclusive})
        if (s == verdict_class_name(c)) return c;
    return std::nullopt;
}

VerdictClass classify(const Verdict& v)
{
    bool av = v.has_av(), dl = v.has_dl();
    if (av && dl) return VerdictClass::AVDL;
    if (av) return VerdictClass::AV;
    if (dl) return VerdictClass::DL;
    return v.kind == VerdictKind::Verified ? VerdictClass::Verified : VerdictClass::Inconclusive;
}

CorpusEntry load_entry(const std::string& dir)
{
    CorpusEntry e;
    e.dir = dir;
    e.name = fs::path(dir).filename().string();
    if (e.name.empty()) e.name = fs::path(dir).parent_path().filename().string();
    std::istringstream in(read_file(dir + "/expected.txt"));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) {
            if (e.description.empty() && h == 0) {
                auto d = line.substr(1);
                d.erase(0, d.find_first_not_of(' '));
                e.description = d;
            }
            line.resize(h);
        }
        std::istringstream ls(line);
        std::string key, a, b;
        if (!(ls >> key)) continue;
        ls >> a >> b;
        if (key == "program" && !a.empty()) e.program_file = a;
        else if (key == "spec" && !a.empty()) e.spec_file = a;
        else if (key == "seed" && !a.empty()) e.seed_file = a;
        else if (key == "fix" && !b.empty()) {
            auto c = parse_verdict_class(b);
            if (!c) throw ParseError("unknown verdict class '" + b + "' in " + dir + "/expected.txt", lineno);
            e.fixes.push_back({a, *c});
        } else {
            throw ParseError("bad line in " + dir + "/expected.txt", lineno);
        }
    }
    return e;
}

std::vector<CorpusEntry> load_corpus(const std::string& root)
{
    std::vector<std::string> dirs;
    for (const auto& d : fs::directory_iterator(root))
        if (d.is_directory() && fs::exists(d.path() / "expected.txt")) dirs.push_back(d.path().string());
    std::sort(dirs.begin(), dirs.end());
    std::vector<CorpusEntry> out;
    for (const auto& d : dirs) out.push_back(load_entry(d));
    return out;
}

ScheduleInput load_seed(const std::string& file)
{
    std::string text = read_file(file);
    if (file.size() >= 6 && file.compare(file.size() - 6, 6, ".trace") == 0) return parse_trace(text).schedule_input();
    return parse_schedule(text);
}

CorpusCase load_case(const CorpusEntry& e, const CorpusFix& f)
{
    return {parse_program(read_file(e.path(e.program_file))), parse_patch(read_file(e.path(f.patch_file))),
            parse_region_spec(read_file(e.path(e.spec_file))), load_seed(e.path(e.seed_file))};
}

CorpusRow run_case(const CorpusEntry& e, const CorpusFix& f, ExploreConfig cfg)
{
    CorpusRow row;
    row.entry = e.name;
    row.fix = f.patch_file;
    row.expected = f.expected;
    if (f.expected == VerdictClass::AVDL) cfg.find_all = true;
    CorpusCase c = load_case(e, f);
    row.verdict = verify_fix(c.program, c.fix, c.seed, c.spec, cfg);
    row.actual = classify(row.verdict);
    return row;
}

std::vector<CorpusRow> run_corpus(const std::string& root, const std::string& filter, const ExploreConfig& cfg)
{
    std::vector<CorpusRow> rows;
    for (const auto& e : load_corpus(root)) {
        if (!filter.empty() && e.name.find(filter) == std::string::npos) continue;
        for (const auto& f : e.fixes) rows.push_back(run_case(e, f, cfg));
    }
    return rows;
}

std::string format_corpus_table(const std::vector<CorpusRow>& rows)
{
    std::ostringstream os;
    os << std::left << std::setw(16) << "entry" << std::setw(14) << "fix" << std::setw(10) << "expected"
       << std::setw(14) << "actual" << std::setw(8) << "paths" << std::setw(10) << "seconds"
       << "result\n";
    for (const auto& r : rows) {
        std::ostringstream secs;
        secs << std::fixed << std::setprecision(3) << r.verdict.seconds;
        os << std::setw(16) << r.entry << std::setw(14) << r.fix << std::setw(10) << verdict_class_name(r.expected)
           << std::setw(14) << verdict_class_name(r.actual) << std::setw(8) << r.verdict.paths_explored
           << std::setw(10) << secs.str() << (r.match() ? "ok" : "MISMATCH") << "\n";
    }
    return os.str();
}

} // namespace verifix
