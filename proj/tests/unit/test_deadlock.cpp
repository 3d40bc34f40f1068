#include "criteria.hpp"
#include "generators.hpp"
#include "oracles.hpp"

#include "verifix/corpus.hpp"
#include "verifix/deadlock.hpp"
#include "verifix/error.hpp"

#include <gtest/gtest.h>

using namespace verifix;
namespace vt = verifix::testing;

namespace {

std::string corpus(const std::string& f) { return std::string(VERIFIX_CORPUS_DIR) + "/" + f; }

Program patched(const std::string& entry, const std::string& fix)
{
    Program p = parse_program(read_file(corpus(entry + "/program.ir")));
    return apply_fix(p, parse_patch(read_file(corpus(entry + "/" + fix)))).program;
}

const char* kOpposite = R"(lock a, b
main T1
thread T1 {
  1: lock(a)
  2: lock(b)
  3: unlock(b)
  4: unlock(a)
}
thread T2 {
  5: lock(b)
  6: lock(a)
  7: unlock(a)
  8: unlock(b)
}
)";

} // namespace

TEST(Deadlock, Fix1HasOneThreeLockCycle)
{
    Program p = patched("motivating", "fix1.patch");
    Trace tr = parse_trace(read_file(corpus("motivating/fix1.trace")));
    auto dls = potential_dls(tr);
    ASSERT_EQ(dls.size(), 1u);
    EXPECT_EQ(dls[0].threads(), (std::vector<std::string>{"T3", "T1", "T2"}));
    EXPECT_EQ(dls[0].locks(), (std::vector<std::string>{"l3", "l1", "l2"}));

    BuiltinSolver solver;
    DlOptions opt;
    opt.program = &p;
    DlReport rep = check_dl(tr, solver, opt);
    ASSERT_TRUE(rep.first_confirmed);
    const DlCandidate& c = rep.candidates[*rep.first_confirmed];
    // the three hold-wait atoms
    for (const char* atom : {"O_11 < O_5'", "O_19 < O_12", "O_5 < O_20"})
        EXPECT_NE(c.formula.find(atom), std::string::npos) << atom;
    ASSERT_TRUE(c.witness);
    EXPECT_EQ(c.witness->inputs.at("i"), 2u);
    EXPECT_EQ(c.witness->inputs.at("j"), 1u);
    ASSERT_TRUE(c.replayed);
    EXPECT_TRUE(blocks_on(*c.replayed, c.cycle));
}

TEST(Deadlock, SingleLockHasNoEdges)
{
    Program p = parse_program("lock a\nmain T1\nthread T1 {\n  1: lock(a)\n  2: unlock(a)\n}\n"
                              "thread T2 {\n  3: lock(a)\n  4: unlock(a)\n}\n");
    Trace tr = replay(p, {}, {});
    EXPECT_TRUE(build_lock_event_graph(tr).edges.empty());
    EXPECT_TRUE(potential_dls(tr).empty());
}

TEST(Deadlock, SameOrderNestingIsSafe)
{
    Program p = parse_program(R"(lock a, b
main T1
thread T1 {
  1: lock(a)
  2: lock(b)
  3: unlock(b)
  4: unlock(a)
}
thread T2 {
  5: lock(a)
  6: lock(b)
  7: unlock(b)
  8: unlock(a)
}
)");
    Trace tr = replay(p, {}, {});
    EXPECT_EQ(build_lock_event_graph(tr).edges.size(), 2u);
    EXPECT_TRUE(potential_dls(tr).empty());
}

TEST(Deadlock, OppositeOrderConfirmed)
{
    Program p = parse_program(kOpposite);
    Trace tr = replay(p, parse_schedule("order: T1 T1 T1 T1 T2 T2 T2 T2\n"), {});
    ASSERT_EQ(tr.outcome.kind, OutcomeKind::Completed);
    auto dls = potential_dls(tr);
    ASSERT_EQ(dls.size(), 1u);
    EXPECT_EQ(dls[0].pairs(), (std::vector<std::pair<std::size_t, std::size_t>>{{1, 2}, {5, 6}}));
    BuiltinSolver solver;
    DlOptions opt;
    opt.program = &p;
    DlReport rep = check_dl(tr, solver, opt);
    ASSERT_TRUE(rep.first_confirmed);
    EXPECT_EQ(rep.candidates[*rep.first_confirmed].replayed->outcome.kind, OutcomeKind::Blocked);
}

TEST(Deadlock, CycleWithinOneThreadIgnored)
{
    Program p = parse_program(R"(lock a, b
main T1
thread T1 {
  1: lock(a)
  2: lock(b)
  3: unlock(b)
  4: unlock(a)
  5: lock(b)
  6: lock(a)
  7: unlock(a)
  8: unlock(b)
}
)");
    Trace tr = replay(p, {}, {});
    EXPECT_EQ(build_lock_event_graph(tr).edges.size(), 2u);
    EXPECT_TRUE(potential_dls(tr).empty());
}

TEST(Deadlock, GateLockFiltersCycle)
{
    Program p = parse_program(R"(lock a, b, g
main T1
thread T1 {
  0: lock(g)
  1: lock(a)
  2: lock(b)
  3: unlock(b)
  4: unlock(a)
  9: unlock(g)
}
thread T2 {
  10: lock(g)
  5: lock(b)
  6: lock(a)
  7: unlock(a)
  8: unlock(b)
  11: unlock(g)
}
)");
    Trace tr = replay(p, {}, {});
    EXPECT_TRUE(potential_dls(tr).empty());
}

TEST(Deadlock, OrderingBySpawnIsUnsat)
{
    // T2 only starts once T1 is done, so the cycle cannot happen
    Program p = parse_program(R"(lock a, b
main T1
thread T1 {
  1: lock(a)
  2: lock(b)
  3: unlock(b)
  4: unlock(a)
  5: spawn T2
}
thread T2 {
  6: lock(b)
  7: lock(a)
  8: unlock(a)
  9: unlock(b)
}
)");
    Trace tr = replay(p, {}, {});
    ASSERT_EQ(potential_dls(tr).size(), 1u);
    BuiltinSolver solver;
    DlReport rep = check_dl(tr, solver);
    EXPECT_FALSE(rep.first_confirmed);
    ASSERT_EQ(rep.candidates.size(), 1u);
    EXPECT_EQ(rep.candidates[0].status, SatStatus::Unsat);
}

TEST(Deadlock, UnlockOfUnheldLockThrows)
{
    Trace tr = replay(parse_program(kOpposite), parse_schedule("order: T1 T1 T1 T1 T2 T2 T2 T2\n"), {});
    ASSERT_EQ(tr.events.front().kind, EventKind::Lock);
    // drop T1's first lock so its unlock of a has no acquire
    tr.events.erase(tr.events.begin());
    EXPECT_THROW(build_lock_event_graph(tr), Error);
}

TEST(Deadlock, Prog3WitnessIsTenThreadCycle)
{
    Program p = patched("prog3", "fix3.patch");
    ScheduleInput seed = load_seed(corpus("prog3/seed.sched"));
    // the seed path nests no locks in most threads
    EXPECT_TRUE(potential_dls(replay(p, seed, {})).empty());
    ScheduleInput zeros;
    for (const auto& [name, v] : seed.inputs) zeros.inputs[name] = 0;
    Trace tr = replay(p, zeros, {});
    ASSERT_EQ(tr.outcome.kind, OutcomeKind::Completed);
    BuiltinSolver solver;
    DlOptions opt;
    opt.program = &p;
    DlReport rep = check_dl(tr, solver, opt);
    ASSERT_TRUE(rep.first_confirmed);
    const DlCandidate& c = rep.candidates[*rep.first_confirmed];
    EXPECT_EQ(c.cycle.edges.size(), 10u);
    for (const auto& [name, v] : c.witness->inputs) EXPECT_EQ(v, 0u) << name;
}

TEST(Deadlock, AccountSerialRunBlocks)
{
    Program p = patched("account_pfix", "pfix.patch");
    Trace tr = parse_trace(read_file(corpus("account_pfix/serial.trace")));
    BuiltinSolver solver;
    DlOptions opt;
    opt.program = &p;
    DlReport rep = check_dl(tr, solver, opt);
    ASSERT_TRUE(rep.first_confirmed);
    const DlCandidate& c = rep.candidates[*rep.first_confirmed];
    EXPECT_EQ(c.cycle.threads().size(), 2u);
    EXPECT_EQ(c.replayed->outcome.kind, OutcomeKind::Blocked);
}

TEST(Deadlock, SubTraceStopsBeforeRequests)
{
    Program p = parse_program(kOpposite);
    Trace tr = replay(p, parse_schedule("order: T1 T1 T1 T1 T2 T2 T2 T2\n"), {});
    auto dls = potential_dls(tr);
    ASSERT_EQ(dls.size(), 1u);
    auto sub = deadlock_sub_trace(tr, dls[0], false);
    ASSERT_TRUE(sub);
    std::vector<std::string> labels;
    for (const auto& e : sub->events) labels.push_back(e.label);
    EXPECT_EQ(labels, (std::vector<std::string>{"1", "5"}));
}

TEST(Deadlock, OracleSample)
{
    auto r = vt::check_deadlock_oracle(60, 3);
    EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Deadlock, RandomCyclesMatchOracle)
{
    vt::Rng rng(41);
    for (int k = 0; k < 100; ++k) {
        Program p = parse_program(vt::random_lock_program(rng));
        Trace tr = vt::random_run(p, rng);
        if (tr.outcome.kind != OutcomeKind::Completed) continue;
        std::set<vt::CycleKey> got;
        for (const auto& d : potential_dls(tr)) {
            vt::CycleKey key;
            for (const auto& e : d.edges) key.push_back({e.from, e.to, e.thread, e.held, e.ex, e.ei});
            got.insert(key);
        }
        EXPECT_EQ(got, vt::oracle_unsafe_cycles(tr));
    }
}
