#pragma once

#include "verifix/explorer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace verifix {

enum class VerdictClass : unsigned char { Verified, AV, DL, AVDL, Inconclusive };

const char* verdict_class_name(VerdictClass c);
std::optional<VerdictClass> parse_verdict_class(const std::string& s);
/// AV+DL only when both kinds of finding are present.
VerdictClass classify(const Verdict& v);

struct CorpusFix {
    std::string patch_file;  // relative to the entry directory
    VerdictClass expected = VerdictClass::Verified;
};

/// One directory: program, region spec, seed and the fixes with their expected
/// verdicts, all listed in expected.txt.
struct CorpusEntry {
    std::string name;
    std::string dir;
    std::string program_file = "program.ir";
    std::string spec_file = "spec.txt";
    std::string seed_file = "seed.sched";
    std::string description;
    std::vector<CorpusFix> fixes;

    std::string path(const std::string& file) const { return dir + "/" + file; }
};

CorpusEntry load_entry(const std::string& dir);
/// Every subdirectory of root with an expected.txt, sorted by name.
std::vector<CorpusEntry> load_corpus(const std::string& root);

/// Seed from a .trace file or a schedule file.
ScheduleInput load_seed(const std::string& file);

struct CorpusCase {
    Program program;
    FixPatch fix;
    AtomicRegionSpec spec;
    ScheduleInput seed;
};

CorpusCase load_case(const CorpusEntry& e, const CorpusFix& f);

struct CorpusRow {
    std::string entry;
    std::string fix;
    VerdictClass expected = VerdictClass::Verified;
    VerdictClass actual = VerdictClass::Inconclusive;
    Verdict verdict;
    bool match() const { return expected == actual; }
};

/// Runs every fix of every entry whose name contains filter. Entries expecting
/// AV+DL are run with find_all so both kinds can show up.
std::vector<CorpusRow> run_corpus(const std::string& root, const std::string& filter, const ExploreConfig& cfg);
CorpusRow run_case(const CorpusEntry& e, const CorpusFix& f, ExploreConfig cfg);

std::string format_corpus_table(const std::vector<CorpusRow>& rows);

} // namespace verifix
