// verifix command line: verify, replay, encode, deadlock, corpus.

#include "verifix/corpus.hpp"
#include "verifix/deadlock.hpp"
#include "verifix/encode.hpp"
#include "verifix/error.hpp"
#include "verifix/explorer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace verifix;

namespace {

enum Exit { kVerified = 0, kError = 1, kBug = 2, kTimeout = 3, kUnknown = 4 };

struct RunOptions {
    unsigned loop_depth = 5;
    unsigned parallel = 5;
    unsigned timeout_secs = 1200;
    std::string backend = "builtin";
    std::uint64_t seed = 0;
    bool find_all = false;
    std::string report_dir;
    bool verbose = false;
};

void add_run_options(CLI::App* cmd, RunOptions& o)
{
    cmd->add_option("--loop-depth", o.loop_depth, "loop unfolding bound")->envname("VERIFIX_LOOP_DEPTH")->capture_default_str();
    cmd->add_option("--parallel", o.parallel, "number of exploration workers")
        ->envname("VERIFIX_PARALLEL")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--timeout-secs", o.timeout_secs, "wall clock budget")
        ->envname("VERIFIX_TIMEOUT_SECS")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--backend", o.backend, "builtin or smt (z3 or $VERIFIX_SMT_SOLVER)")
        ->envname("VERIFIX_BACKEND")
        ->capture_default_str();
    cmd->add_option("--seed", o.seed, "seed for the scheduler once a schedule runs out")
        ->envname("VERIFIX_SEED")
        ->capture_default_str();
    cmd->add_flag("--find-all", o.find_all, "keep exploring after a bug")->envname("VERIFIX_FIND_ALL");
    cmd->add_option("--report-dir", o.report_dir, "write report.txt, verdict.json and witnesses here")
        ->envname("VERIFIX_REPORT_DIR");
    cmd->add_flag("-v,--verbose", o.verbose, "one line per explored path on stderr");
}

ExploreConfig explore_config(const RunOptions& o)
{
    auto backend = parse_backend(o.backend);
    if (!backend) throw Error("unknown backend '" + o.backend + "'");
    if (*backend == BackendKind::Smt && !SmtProcessSolver::available())
        throw Error("smt backend requested but no solver binary found");
    ExploreConfig cfg;
    cfg.exec.loop_unfold_depth = o.loop_depth;
    cfg.exec.random_seed = o.seed;
    cfg.parallelism = o.parallel;
    cfg.timeout = std::chrono::seconds(o.timeout_secs);
    cfg.backend = *backend;
    cfg.find_all = o.find_all;
    if (o.verbose) cfg.log = [](const std::string& line) { std::cerr << line << "\n"; };
    return cfg;
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
}

int exit_for(const Verdict& v)
{
    switch (v.kind) {
    case VerdictKind::Verified: return kVerified;
    case VerdictKind::AtomicityViolation:
    case VerdictKind::Deadlock: return kBug;
    case VerdictKind::Timeout: return kTimeout;
    case VerdictKind::Unknown: return kUnknown;
    }
    return kError;
}

std::string summary_line(const Verdict& v)
{
    std::string s = verdict_kind_name(v.kind);
    s += ", " + std::to_string(v.paths_explored) + (v.paths_explored == 1 ? " path" : " paths");
    if (!v.reason.empty()) s += " (" + v.reason + ")";
    return s;
}

const char* finding_kind(const Finding& f) { return f.kind == Finding::Kind::Atomicity ? "atomicity-violation" : "deadlock"; }

/// Report text has no timings so that reruns with the same seed give the same bytes.
std::string report_text(const Verdict& v)
{
    std::ostringstream os;
    os << "verdict: " << summary_line(v) << "\n";
    os << "bound hits: " << v.bound_hits << "\n";
    os << "paths:\n";
    for (const auto& p : v.paths)
        os << "  " << p.id << " prefix [" << canonical_prefix(p.prefix) << "] path [" << canonical_prefix(p.path)
           << "] " << outcome_to_string(p.outcome) << ", " << p.queries << " queries, " << p.generated
           << " new\n";
    if (!v.findings.empty()) os << "findings:\n";
    for (std::size_t k = 0; k < v.findings.size(); ++k) {
        const auto& f = v.findings[k];
        os << "  " << k + 1 << " " << finding_kind(f) << " on path " << f.path_id << ": " << f.description << "\n";
        os << "    witness run: " << outcome_to_string(f.trace.outcome) << "\n";
        std::istringstream w(serialize_schedule(f.witness));
        for (std::string line; std::getline(w, line);) os << "    " << line << "\n";
    }
    if (!v.warnings.empty()) os << "warnings:\n";
    for (const auto& w : v.warnings) os << "  " << w << "\n";
    return os.str();
}

json verdict_json(const Verdict& v)
{
    json j;
    j["verdict"] = verdict_kind_name(v.kind);
    j["class"] = verdict_class_name(classify(v));
    j["paths_explored"] = v.paths_explored;
    j["bound_hits"] = v.bound_hits;
    if (!v.reason.empty()) j["reason"] = v.reason;
    j["findings"] = json::array();
    for (std::size_t k = 0; k < v.findings.size(); ++k) {
        const auto& f = v.findings[k];
        json jf;
        jf["kind"] = finding_kind(f);
        jf["description"] = f.description;
        jf["path"] = f.path_id;
        jf["outcome"] = outcome_to_string(f.trace.outcome);
        jf["inputs"] = f.witness.inputs;
        jf["schedule"] = f.witness.schedule;
        jf["witness_file"] = "witness-" + std::to_string(k + 1) + ".sched";
        jf["trace_file"] = "witness-" + std::to_string(k + 1) + ".trace";
        j["findings"].push_back(std::move(jf));
    }
    j["explored"] = v.explored;
    j["warnings"] = v.warnings;
    return j;
}

void write_report(const std::string& dir, const Verdict& v)
{
    fs::create_directories(dir);
    write_file(fs::path(dir) / "report.txt", report_text(v));
    write_file(fs::path(dir) / "verdict.json", verdict_json(v).dump(2) + "\n");
    for (std::size_t k = 0; k < v.findings.size(); ++k) {
        std::string base = "witness-" + std::to_string(k + 1);
        write_file(fs::path(dir) / (base + ".sched"), serialize_schedule(v.findings[k].witness));
        write_file(fs::path(dir) / (base + ".trace"), serialize_trace(v.findings[k].trace));
    }
}

Program load_program(const std::string& file, const std::string& fix)
{
    Program p = parse_program(read_file(file));
    if (fix.empty()) return p;
    PatchResult r = apply_fix(p, parse_patch(read_file(fix)));
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    return std::move(r.program);
}

void check_trace_matches(const Program& p, const Trace& tr)
{
    for (const auto& e : tr.events) {
        std::string thread;
        if (!p.find_label(e.label, &thread) || thread != e.thread)
            throw Error("trace does not belong to the program: event " + std::to_string(e.index) + " (" + e.thread +
                        ":" + e.label + ") has no matching statement");
    }
}

int cmd_verify(const std::string& program, const std::string& fix, const std::string& spec, const std::string& seed,
               const RunOptions& o)
{
    ExploreConfig cfg = explore_config(o);
    Program p = parse_program(read_file(program));
    FixPatch f = parse_patch(read_file(fix));
    AtomicRegionSpec s = parse_region_spec(read_file(spec));
    ScheduleInput si = load_seed(seed);
    Verdict v = verify_fix(p, f, si, s, cfg);
    std::cout << summary_line(v) << "\n";
    for (const auto& fd : v.findings) std::cout << finding_kind(fd) << ": " << fd.description << "\n";
    for (const auto& w : v.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "time: " << v.seconds << "s\n";
    if (!o.report_dir.empty()) write_report(o.report_dir, v);
    return exit_for(v);
}

int cmd_replay(const std::string& program, const std::string& fix, const std::string& witness, const RunOptions& o)
{
    Program p = load_program(program, fix);
    ExecConfig cfg;
    cfg.loop_unfold_depth = o.loop_depth;
    cfg.random_seed = o.seed;
    Trace tr = replay(p, load_seed(witness), cfg);
    std::cout << serialize_trace(tr);
    std::cout << "outcome: " << outcome_to_string(tr.outcome) << "\n";
    if (tr.divergence) std::cout << "schedule diverged at position " << *tr.divergence << "\n";
    if (!o.report_dir.empty()) {
        fs::create_directories(o.report_dir);
        write_file(fs::path(o.report_dir) / "replay.trace", serialize_trace(tr));
    }
    switch (tr.outcome.kind) {
    case OutcomeKind::Completed: return kVerified;
    case OutcomeKind::StepLimit: return kUnknown;
    default: return kBug;
    }
}

int cmd_encode(const std::string& program, const std::string& fix, const std::string& trace, const std::string& emit)
{
    Program p = load_program(program, fix);
    Trace tr = parse_trace(read_file(trace));
    check_trace_matches(p, tr);
    Formula f;
    if (emit == "rw") f = encode_rw(tr);
    else if (emit == "sync") f = encode_sync(tr);
    else if (emit == "pc") f = encode_pc(tr);
    else f = encode_trace(tr);
    std::cout << (emit == "smtlib" ? emit_smtlib(f) : print_formula(f));
    return kVerified;
}

int cmd_deadlock(const std::string& program, const std::string& fix, const std::string& trace, const RunOptions& o)
{
    Program p = load_program(program, fix);
    Trace tr = parse_trace(read_file(trace));
    check_trace_matches(p, tr);
    ExploreConfig cfg = explore_config(o);
    auto solver = make_solver(cfg.backend);
    DlOptions opt;
    opt.program = &p;
    opt.exec = cfg.exec;
    opt.stop_at_first = false;
    opt.limits.deadline = std::chrono::steady_clock::now() + cfg.timeout;
    DlReport rep = check_dl(tr, *solver, opt);
    std::ostringstream os;
    os << rep.candidates.size() << (rep.candidates.size() == 1 ? " cycle" : " cycles") << "\n";
    std::size_t confirmed = 0;
    for (std::size_t k = 0; k < rep.candidates.size(); ++k) {
        const auto& c = rep.candidates[k];
        os << "cycle " << k + 1 << ": " << describe(c.cycle, tr) << "\n";
        os << "  hold-wait: " << c.formula << "\n";
        os << "  status: " << (c.confirmed ? "confirmed" : sat_status_name(c.status));
        if (!c.note.empty()) os << " (" << c.note << ")";
        os << "\n";
        if (c.confirmed) {
            ++confirmed;
            std::string base = "deadlock-" + std::to_string(k + 1);
            os << "  witness" << (o.report_dir.empty() ? "" : " " + base + ".sched") << ":\n";
            std::istringstream w(serialize_schedule(*c.witness));
            for (std::string line; std::getline(w, line);) os << "    " << line << "\n";
            if (c.replayed) os << "  replay: " << outcome_to_string(c.replayed->outcome) << "\n";
            if (!o.report_dir.empty()) {
                fs::create_directories(o.report_dir);
                write_file(fs::path(o.report_dir) / (base + ".sched"), serialize_schedule(*c.witness));
            }
        }
    }
    std::cout << os.str();
    if (!o.report_dir.empty()) {
        fs::create_directories(o.report_dir);
        write_file(fs::path(o.report_dir) / "deadlock.txt", os.str());
    }
    if (confirmed) return kBug;
    return rep.unknown ? kUnknown : kVerified;
}

int cmd_corpus(const std::string& root, const std::string& filter, const RunOptions& o)
{
    ExploreConfig cfg = explore_config(o);
    auto rows = run_corpus(root, filter, cfg);
    std::cout << format_corpus_table(rows);
    if (!o.report_dir.empty()) {
        for (const auto& r : rows) {
            std::string stem = fs::path(r.fix).stem().string();
            write_report((fs::path(o.report_dir) / r.entry / stem).string(), r.verdict);
        }
    }
    bool all = std::all_of(rows.begin(), rows.end(), [](const CorpusRow& r) { return r.match(); });
    if (rows.empty()) std::cerr << "no corpus entries matched\n";
    return all && !rows.empty() ? kVerified : kError;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"verifix: check that a lock-based fix removes an atomicity violation without adding a deadlock"};
    app.require_subcommand(1);
    RunOptions o;

    std::string program, fix, spec, seed, trace, witness, emit = "all", root = "corpus", filter;

    auto* verify = app.add_subcommand("verify", "explore the patched program from a seed run");
    verify->add_option("program", program, "program file")->required()->check(CLI::ExistingFile);
    verify->add_option("fix", fix, "patch file")->required()->check(CLI::ExistingFile);
    verify->add_option("spec", spec, "atomic region spec")->required()->check(CLI::ExistingFile);
    verify->add_option("seed-run", seed, "seed schedule or trace")->required()->check(CLI::ExistingFile);
    add_run_options(verify, o);

    auto* rep = app.add_subcommand("replay", "run a schedule and print the trace");
    rep->add_option("program", program, "program file")->required()->check(CLI::ExistingFile);
    rep->add_option("witness", witness, "schedule or trace file")->required()->check(CLI::ExistingFile);
    rep->add_option("--fix", fix, "apply this patch first")->check(CLI::ExistingFile);
    rep->add_option("--loop-depth", o.loop_depth)->envname("VERIFIX_LOOP_DEPTH");
    rep->add_option("--seed", o.seed)->envname("VERIFIX_SEED");
    rep->add_option("--report-dir", o.report_dir)->envname("VERIFIX_REPORT_DIR");

    auto* enc = app.add_subcommand("encode", "print the constraints of a trace");
    enc->add_option("program", program, "program file")->required()->check(CLI::ExistingFile);
    enc->add_option("trace", trace, "trace file")->required()->check(CLI::ExistingFile);
    enc->add_option("--fix", fix, "apply this patch first")->check(CLI::ExistingFile);
    enc->add_option("--emit", emit, "rw, sync, pc, all or smtlib")
        ->check(CLI::IsMember({"rw", "sync", "pc", "all", "smtlib"}))
        ->capture_default_str();

    auto* dl = app.add_subcommand("deadlock", "find and confirm lock cycles in a trace");
    dl->add_option("program", program, "program file")->required()->check(CLI::ExistingFile);
    dl->add_option("trace", trace, "trace file")->required()->check(CLI::ExistingFile);
    dl->add_option("--fix", fix, "apply this patch first")->check(CLI::ExistingFile);
    add_run_options(dl, o);

    auto* corpus = app.add_subcommand("corpus", "run the corpus and compare with the expected verdicts");
    corpus->add_option("root", root, "corpus directory")->check(CLI::ExistingDirectory)->capture_default_str();
    corpus->add_option("--filter", filter, "only entries whose name contains this");
    add_run_options(corpus, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kError;
    }

    try {
        if (*verify) return cmd_verify(program, fix, spec, seed, o);
        if (*rep) return cmd_replay(program, fix, witness, o);
        if (*enc) return cmd_encode(program, fix, trace, emit);
        if (*dl) return cmd_deadlock(program, fix, trace, o);
        if (*corpus) return cmd_corpus(root, filter, o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kError;
    }
    return kError;
}
