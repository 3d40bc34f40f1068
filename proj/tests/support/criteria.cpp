#include "criteria.hpp"

#include "generators.hpp"
#include "oracles.hpp"

#include "verifix/corpus.hpp"
#include "verifix/deadlock.hpp"
#include "verifix/encode.hpp"
#include "verifix/error.hpp"
#include "verifix/executor.hpp"
#include "verifix/explorer.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <thread>
#include <algorithm>

namespace verifix::testing {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Collector {
    std::vector<std::string> problems;
    std::ostringstream notes;

    void fail(const std::string& s) { problems.push_back(s); }
    CriterionResult done()
    {
        CriterionResult r;
        r.pass = problems.empty();
        r.detail = notes.str();
        for (std::size_t k = 0; k < problems.size() && k < 5; ++k) r.detail += "; " + problems[k];
        if (problems.size() > 5) r.detail += "; +" + std::to_string(problems.size() - 5) + " more";
        return r;
    }
};

CorpusCase motivating_case(const std::string& corpus, const std::string& fix)
{
    CorpusEntry e = load_entry(corpus + "/motivating");
    for (const auto& f : e.fixes)
        if (f.patch_file == fix) return load_case(e, f);
    throw Error("motivating has no " + fix);
}

} // namespace

CriterionResult check_motivating(const std::string& corpus)
{
    Collector c;
    auto t0 = Clock::now();
    ExploreConfig cfg;
    cfg.parallelism = 5;

    CorpusCase f1 = motivating_case(corpus, "fix1.patch");
    Verdict v1 = verify_fix(f1.program, f1.fix, f1.seed, f1.spec, cfg);
    if (!v1.bug() || !v1.has_av()) c.fail("fix1 without find_all gave " + std::string(verdict_kind_name(v1.kind)));
    ExploreConfig all = cfg;
    all.find_all = true;
    Verdict v1a = verify_fix(f1.program, f1.fix, f1.seed, f1.spec, all);
    if (!v1a.has_av() || !v1a.has_dl()) c.fail("fix1 find_all lacks an AV or a DL witness");
    Program p1 = apply_fix(f1.program, f1.fix).program;
    for (const auto& fd : v1a.findings) {
        Trace rt = replay(p1, fd.witness, cfg.exec);
        if (fd.kind == Finding::Kind::Deadlock && rt.outcome.kind != OutcomeKind::Blocked)
            c.fail("fix1 DL witness replays to " + outcome_to_string(rt.outcome));
    }

    CorpusCase f2 = motivating_case(corpus, "fix2.patch");
    Verdict v2 = verify_fix(f2.program, f2.fix, f2.seed, f2.spec, cfg);
    Program p2 = apply_fix(f2.program, f2.fix).program;
    Trace seed2 = replay(p2, f2.seed, cfg.exec);
    if (v2.kind != VerdictKind::AtomicityViolation || v2.findings.empty()) {
        c.fail("fix2 gave " + std::string(verdict_kind_name(v2.kind)));
    } else {
        // a remote write in the witness run that the seed run never performed
        bool outside = false;
        for (const auto& e : v2.findings.front().trace.events)
            if (e.kind == EventKind::Write && e.thread != f2.spec.thread && !seed2.find(e.thread, e.label, e.kind))
                outside = true;
        if (!outside) c.fail("fix2 witness uses no write outside the seed run");
        if (!v2.findings.front().trace.outcome.crashed() && v2.findings.front().trace.outcome.kind != OutcomeKind::Completed)
            c.fail("fix2 witness replay ended " + outcome_to_string(v2.findings.front().trace.outcome));
    }

    CorpusCase f3 = motivating_case(corpus, "fix3.patch");
    Verdict v3 = verify_fix(f3.program, f3.fix, f3.seed, f3.spec, cfg);
    if (v3.kind != VerdictKind::Verified) c.fail("fix3 gave " + std::string(verdict_kind_name(v3.kind)));
    long diff = static_cast<long>(v3.paths_explored) - 7;
    if (std::labs(diff) > 2) c.fail("fix3 explored " + std::to_string(v3.paths_explored) + " paths");
    double secs = since(t0);
    if (secs >= 30) c.fail("took " + std::to_string(secs) + "s");
    c.notes << "fix1 " << verdict_kind_name(v1.kind) << ", find_all " << v1a.findings.size() << " findings (av "
            << v1a.has_av() << " dl " << v1a.has_dl() << "); fix2 " << verdict_kind_name(v2.kind) << "; fix3 "
            << verdict_kind_name(v3.kind) << " after " << v3.paths_explored << " paths; " << secs << "s";
    return c.done();
}

CriterionResult check_prog_table(const std::string& corpus)
{
    Collector c;
    const std::vector<std::tuple<std::string, std::string, VerdictClass>> table = {
        {"prog1", "fix1.patch", VerdictClass::AV},   {"prog2", "fix2.patch", VerdictClass::AV},
        {"prog3", "fix3.patch", VerdictClass::DL},   {"prog4", "fix4.patch", VerdictClass::AVDL},
        {"prog4", "fix5.patch", VerdictClass::AV},
    };
    ExploreConfig cfg;
    cfg.parallelism = 5;
    double others = 0;
    for (const auto& [name, fix, want] : table) {
        auto t0 = Clock::now();
        CorpusEntry e = load_entry(corpus + "/" + name);
        CorpusFix f{fix, want};
        CorpusRow row = run_case(e, f, cfg);
        double s = since(t0);
        if (name != "prog3") others += s;
        c.notes << name << "/" << fix << " " << verdict_class_name(row.actual) << " (" << row.verdict.paths_explored
                << " paths); ";
        if (row.actual != want)
            c.fail(name + "/" + fix + " expected " + verdict_class_name(want) + " got " + verdict_class_name(row.actual));
        if (name == "prog3" && s > 1200) c.fail("prog3 over the timeout");
    }
    if (others >= 120) c.fail("prog1, prog2, prog4 took " + std::to_string(others) + "s");
    c.notes << "non-prog3 time " << others << "s";
    return c.done();
}

CriterionResult check_deadlock_oracle(unsigned traces, unsigned long seed)
{
    Collector c;
    Rng rng(seed);
    BuiltinSolver solver;
    std::size_t cycles = 0, sat = 0, blocked = 0;
    for (unsigned n = 0; n < traces; ++n) {
        std::string text = random_lock_program(rng);
        Program p = parse_program(text);
        Trace tr = random_run(p, rng);
        std::set<CycleKey> got;
        for (const auto& dl : potential_dls(tr)) {
            CycleKey k;
            for (const auto& e : dl.edges) k.emplace_back(e.from, e.to, e.thread, e.held, e.ex, e.ei);
            if (!got.insert(k).second) c.fail("duplicate cycle in case " + std::to_string(n));
        }
        std::set<CycleKey> want = oracle_unsafe_cycles(tr);
        if (got != want)
            c.fail("case " + std::to_string(n) + ": " + std::to_string(got.size()) + " cycles, oracle " +
                   std::to_string(want.size()));
        cycles += want.size();

        DlOptions opt;
        opt.stop_at_first = false;
        DlReport rep = check_dl(tr, solver, opt);
        for (const auto& cand : rep.candidates) {
            if (cand.status == SatStatus::Unknown) c.fail("unknown candidate in case " + std::to_string(n));
            if (cand.status != SatStatus::Sat) continue;
            ++sat;
            Trace rt = replay(p, *cand.witness, {});
            if (rt.outcome.kind == OutcomeKind::Blocked)
                ++blocked;
            else
                c.fail("case " + std::to_string(n) + " Sat witness replays to " + outcome_to_string(rt.outcome));
        }
    }
    if (sat == 0) c.fail("no Sat candidate in the sample");
    c.notes << traces << " traces, " << cycles << " unsafe cycles, " << sat << " Sat, " << blocked << " replayed Blocked";
    return c.done();
}

CriterionResult check_encoder_oracle(unsigned traces, unsigned long seed)
{
    Collector c;
    Rng rng(seed);
    BuiltinSolver solver;
    std::map<int, std::pair<std::size_t, std::size_t>> per_pattern;  // pattern -> (instances, violable)
    unsigned accepted = 0;
    std::size_t attempts = 0;
    while (accepted < traces && attempts < traces * 50ul) {
        ++attempts;
        std::string text = random_value_program(rng);
        Program p = parse_program(text);
        Trace tr = random_run(p, rng);
        if (tr.outcome.kind != OutcomeKind::Completed || tr.events.size() > 8) continue;
        ++accepted;
        std::string tag = "trace " + std::to_string(accepted);

        Formula phi = encode_trace(tr);
        SolverResult r = solver.check_sat(phi);
        if (r.status != SatStatus::Sat) {
            c.fail(tag + ": trace formula " + sat_status_name(r.status));
            continue;
        }
        Trace back = replay(p, model_to_schedule_input(r.model, tr), {});
        if (back.outcome.kind != OutcomeKind::Completed || canonical_prefix(back.path()) != canonical_prefix(tr.path()))
            c.fail(tag + ": decoded model runs " + canonical_prefix(back.path()));

        AtomicRegionSpec spec;
        spec.thread = "T1";
        for (const auto& s : p.find_thread("T1")->body) {
            spec.unit.push_back(s.label);
            for (const auto& b : s.then_body) spec.unit.push_back(b.label);
            for (const auto& b : s.else_body) spec.unit.push_back(b.label);
        }
        spec.locations = {"x", "y"};
        auto instances = find_av_instances(tr, spec);
        if (instances.empty()) continue;
        std::vector<Trace> runs = same_path_runs(p, tr);
        for (const auto& inst : instances) {
            auto roles = roles_of(tr, inst);
            bool oracle = false;
            for (const auto& run : runs) {
                auto v = oracle_violated(run, inst.pattern, roles);
                if (!v) c.fail(tag + ": same-path run lacks a role event");
                if (v && *v) {
                    oracle = true;
                    break;
                }
            }
            SolverResult q = solver.check_sat(av_query(tr, inst));
            if (q.status == SatStatus::Unknown) {
                c.fail(tag + ": AV query unknown");
                continue;
            }
            bool sat = q.status == SatStatus::Sat;
            auto& pp = per_pattern[inst.pattern];
            ++pp.first;
            if (oracle) ++pp.second;
            if (sat != oracle)
                c.fail(tag + " pattern " + std::to_string(inst.pattern) + ": solver " + sat_status_name(q.status) +
                       ", exhaustive search " + (oracle ? "violable" : "not violable"));
            if (sat) {
                Trace w = replay(p, model_to_schedule_input(q.model, tr), {});
                auto v = oracle_violated(w, inst.pattern, roles);
                if (!v || !*v) c.fail(tag + " pattern " + std::to_string(inst.pattern) + ": witness does not violate");
            }
        }
    }
    if (accepted < traces) c.fail("only " + std::to_string(accepted) + " traces generated");
    for (int k = 1; k <= 7; ++k)
        if (!per_pattern.count(k)) c.fail("pattern " + std::to_string(k) + " never occurred");
    c.notes << accepted << " traces;";
    for (const auto& [k, v] : per_pattern) c.notes << " p" << k << " " << v.second << "/" << v.first;
    return c.done();
}

CriterionResult check_split_counts(unsigned cases, unsigned long seed)
{
    Collector c;
    Rng rng(seed);
    std::size_t total = 0;
    for (unsigned n = 0; n < cases; ++n) {
        PrefixPath pp = random_prefix_path(rng);
        auto got = split(pp.prefix, pp.path);
        std::size_t want = expected_split_size(pp.prefix, pp.path);
        total += got.size();
        if (got.size() != want)
            c.fail("case " + std::to_string(n) + ": " + std::to_string(got.size()) + " vs " + std::to_string(want));
        std::set<std::string> distinct;
        for (const auto& s : got) distinct.insert(prefix_to_string(s));
        if (distinct.size() != got.size()) c.fail("case " + std::to_string(n) + ": repeated prefixes");
    }
    c.notes << cases << " cases, " << total << " prefixes";
    return c.done();
}

CriterionResult check_backends(unsigned formulas, unsigned long seed)
{
    Collector c;
    if (!SmtProcessSolver::available()) {
        c.fail("no SMT solver binary on PATH");
        return c.done();
    }
    Rng rng(seed);
    SmtProcessSolver smt;
    BuiltinSolver builtin;
    std::size_t sats = 0;
    for (unsigned n = 0; n < formulas; ++n) {
        Formula f = random_formula(rng, pick(rng, 0, 4), pick(rng, 1, 3), 3, pick(rng, 1, 3));
        SolverResult b = brute_force_sat(f);
        SolverResult s = smt.check_sat(f);
        SolverResult i = builtin.check_sat(f);
        std::string tag = "formula " + std::to_string(n);
        if (b.status == SatStatus::Unknown || s.status == SatStatus::Unknown) {
            c.fail(tag + ": unknown (" + b.reason + s.reason + ")");
            continue;
        }
        if (b.status != s.status) c.fail(tag + ": brute force " + sat_status_name(b.status) + ", smt " + sat_status_name(s.status));
        if (i.status != b.status) c.fail(tag + ": builtin " + std::string(sat_status_name(i.status)));
        if (b.status == SatStatus::Sat) ++sats;
        for (const auto* r : {&b, &s, &i})
            if (r->status == SatStatus::Sat && !evaluate(f, r->model)) c.fail(tag + ": model fails re-evaluation");
    }
    c.notes << formulas << " formulas, " << sats << " Sat";
    return c.done();
}

CriterionResult check_parallel(const std::string& corpus)
{
    Collector c;
    std::string largest;
    std::size_t most = 0;
    CorpusEntry largest_entry;
    CorpusFix largest_fix;
    for (const auto& e : load_corpus(corpus)) {
        for (const auto& f : e.fixes) {
            ExploreConfig seq;
            // five real threads even on a single core
            ExploreConfig par;
            par.parallelism = 5;
            par.limit_to_cores = false;
            CorpusRow a = run_case(e, f, seq);
            CorpusRow b = run_case(e, f, par);
            std::string tag = e.name + "/" + f.patch_file;
            if (a.actual != b.actual)
                c.fail(tag + ": sequential " + verdict_class_name(a.actual) + ", parallel " + verdict_class_name(b.actual));
            if (a.actual == VerdictClass::Verified && a.verdict.explored != b.verdict.explored)
                c.fail(tag + ": explored prefixes differ");
            if (a.verdict.paths_explored > most) {
                most = a.verdict.paths_explored;
                largest = tag;
                largest_entry = e;
                largest_fix = f;
            }
        }
    }

    // interleaved runs; N=5 must not be slower than the sequential median plus its spread
    const int reps = 9;
    std::vector<double> t1, t5, t5x;
    unsigned workers = 0;
    for (int k = 0; k < reps; ++k) {
        for (int mode = 0; mode < 3; ++mode) {
            ExploreConfig cfg;
            cfg.parallelism = mode == 0 ? 1 : 5;
            cfg.limit_to_cores = mode != 2;
            auto t0 = Clock::now();
            CorpusRow row = run_case(largest_entry, largest_fix, cfg);
            double s = since(t0);
            (mode == 0 ? t1 : mode == 1 ? t5 : t5x).push_back(s);
            if (mode == 1) workers = row.verdict.workers;
        }
    }
    auto quantile = [](std::vector<double> v, double q) {
        std::sort(v.begin(), v.end());
        return v[static_cast<std::size_t>(q * static_cast<double>(v.size() - 1) + 0.5)];
    };
    double m1 = quantile(t1, 0.5), m5 = quantile(t5, 0.5), m5x = quantile(t5x, 0.5);
    double spread = quantile(t1, 0.75) - quantile(t1, 0.25);
    if (m5 > m1 + spread)
        c.fail("N=5 median " + std::to_string(m5) + "s against sequential " + std::to_string(m1) + "s");
    c.notes << "largest " << largest << " (" << most << " paths), " << std::thread::hardware_concurrency()
            << " hardware threads: N=1 median " << m1 << "s (iqr " << spread << "s), N=5 median " << m5 << "s on "
            << workers << " workers, N=5 with 5 threads forced " << m5x << "s";
    return c.done();
}

CriterionResult check_witness_inputs(const std::string& corpus)
{
    Collector c;
    CorpusCase f1 = motivating_case(corpus, "fix1.patch");
    Program p = apply_fix(f1.program, f1.fix).program;
    Trace tr = replay(p, f1.seed, {});
    BuiltinSolver solver;

    DlOptions opt;
    opt.program = &p;
    DlReport rep = check_dl(tr, solver, opt);
    if (!rep.first_confirmed) {
        c.fail("no confirmed deadlock on the fix1 seed run");
    } else {
        const auto& w = *rep.candidates[*rep.first_confirmed].witness;
        c.notes << "deadlock i=" << w.inputs.at("i") << " j=" << w.inputs.at("j");
        if (w.inputs.at("i") != 2 || w.inputs.at("j") != 1) c.fail("deadlock witness has other inputs");
    }

    auto items = generate_new_si(tr, {}, solver, {});
    const std::string p1 = "T1: A !B !6 | T3: !16";
    bool found = false;
    for (const auto& it : items) {
        if (canonical_prefix(it.prefix) != p1) continue;
        found = true;
        Trace rt = guided_se(p, it.si, it.prefix, {});
        c.notes << "; [" << p1 << "] i=" << it.si.inputs.at("i") << " j=" << it.si.inputs.at("j") << " "
                << outcome_to_string(rt.outcome);
        if (it.si.inputs.at("i") != 0 || it.si.inputs.at("j") != 1) c.fail("p1 item has other inputs");
        if (rt.outcome.kind != OutcomeKind::NullDeref) c.fail("p1 item does not end in a null dereference");
    }
    if (!found) c.fail("no generated item for " + p1);
    return c.done();
}

} // namespace verifix::testing
