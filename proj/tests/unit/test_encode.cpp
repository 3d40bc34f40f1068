#include "criteria.hpp"
#include "generators.hpp"
#include "oracles.hpp"

#include "verifix/encode.hpp"
#include "verifix/executor.hpp"
#include "verifix/solver.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

using namespace verifix;
namespace vt = verifix::testing;

namespace {

std::string corpus(const std::string& f) { return std::string(VERIFIX_CORPUS_DIR) + "/" + f; }

Trace fix1_trace()
{
    Program p = parse_program(read_file(corpus("motivating/program.ir")));
    p = apply_fix(p, parse_patch(read_file(corpus("motivating/fix1.patch")))).program;
    return replay(p, parse_schedule(read_file(corpus("motivating/seed.sched"))), {});
}

std::vector<std::string> lines(const std::string& s)
{
    std::vector<std::string> out;
    std::size_t at = 0;
    while (at < s.size()) {
        auto nl = s.find('\n', at);
        out.push_back(s.substr(at, nl - at));
        at = nl == std::string::npos ? s.size() : nl + 1;
    }
    return out;
}

/// Every assignment of positions to the order variables and small values to the value variables.
template <class F>
void for_each_model(const SymbolTable& t, std::uint64_t max_value, F&& f)
{
    std::vector<int> orders, values;
    for (int i = 0; i < static_cast<int>(t.size()); ++i) (t[i].kind == VarKind::Order ? orders : values).push_back(i);
    std::vector<int> perm(orders.size());
    std::iota(perm.begin(), perm.end(), 1);
    do {
        std::vector<std::uint64_t> v(values.size(), 0);
        for (;;) {
            Model m;
            m.values.assign(t.size(), 0);
            for (std::size_t k = 0; k < orders.size(); ++k) m.values[static_cast<std::size_t>(orders[k])] = perm[k];
            for (std::size_t k = 0; k < values.size(); ++k)
                m.values[static_cast<std::size_t>(values[k])] = static_cast<std::int64_t>(v[k]);
            f(m);
            std::size_t k = 0;
            while (k < v.size() && v[k] == max_value) v[k++] = 0;
            if (k == v.size()) break;
            ++v[k];
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
}

} // namespace

TEST(Encode, ReadWithOnePriorWrite)
{
    Program p = parse_program(R"(shared x : int8 = 3
main T1
thread T1 {
  1: write(x, 7)
}
thread T2 {
  2: r = read(x)
}
)");
    Trace tr = replay(p, parse_schedule("order: T1 T2\n"), {});
    Formula rw = encode_rw(tr);
    const Event& w = tr.events[0];
    const Event& r = tr.events[1];
    // (V_r = 7 & O_w < O_r) | (V_r = 3 & O_r < O_w)
    for_each_model(*rw.symbols, 8, [&](const Model& m) {
        bool want = (m[r.value_var] == 7 && m[w.order_var] < m[r.order_var]) ||
                    (m[r.value_var] == 3 && m[r.order_var] < m[w.order_var]);
        // the write's own value and the value it overwrites are pinned
        if (m[w.value_var] != 7 || m[w.pre_var] != 3) return;
        EXPECT_EQ(evaluate(rw.root, m, 8), want);
    });
}

TEST(Encode, NoAccessesGivesTrue)
{
    Program p = parse_program("lock l\nmain T1\nthread T1 {\n  1: lock(l)\n  2: unlock(l)\n}\n");
    Trace tr = replay(p, {}, {});
    EXPECT_EQ(print_formula(encode_rw(tr)), "true\n");
    EXPECT_EQ(print_formula(encode_pc(tr)), "true\n");
}

TEST(Encode, WritePinsWrittenAndOverwrittenValues)
{
    Program p = parse_program("shared x : int8 = 0\nmain T1\nthread T1 {\n  1: write(x, 1)\n}\n");
    Trace tr = replay(p, {}, {});
    EXPECT_EQ(print_formula(encode_rw(tr)), "W_x@1 = 1\nR_x@1 = 0\n");
}

TEST(Encode, ProgramOrder)
{
    Program p = parse_program("shared x : int8 = 0\nmain T1\nthread T1 {\n  1: write(x, 1)\n  2: write(x, 2)\n}\n");
    Trace tr = replay(p, {}, {});
    Formula s = encode_sync(tr);
    EXPECT_EQ(print_formula(s), "O_1 < O_2\n");
}

TEST(Encode, LockSectionExclusion)
{
    Program p = parse_program(R"(lock l
main T1
thread T1 {
  1: lock(l)
  2: unlock(l)
}
thread T2 {
  3: lock(l)
  4: unlock(l)
}
)");
    Trace tr = replay(p, parse_schedule("order: T1 T1 T2 T2\n"), {});
    std::string s = print_formula(encode_sync(tr));
    EXPECT_NE(s.find("(O_2 < O_3 | O_4 < O_1)"), std::string::npos) << s;
}

TEST(Encode, Fix1PathCondition)
{
    Trace tr = fix1_trace();
    auto pc = lines(print_formula(encode_pc(tr)));
    // A, !B, both deref checks, D, !E
    EXPECT_EQ(pc.size(), 6u);
    EXPECT_NE(std::find(pc.begin(), pc.end(), "j == R_m@3 = 0"), pc.end());
    EXPECT_NE(std::find(pc.begin(), pc.end(), "i == 2 != 0"), pc.end());
    EXPECT_NE(std::find(pc.begin(), pc.end(), "R_p@6 != 0 != 0"), pc.end());
    EXPECT_NE(std::find(pc.begin(), pc.end(), "R_p@7 != 0 != 0"), pc.end());
}

TEST(Encode, StraightLineHasTruePathCondition)
{
    Program p = parse_program("shared x : int8 = 0\nmain T1\nthread T1 {\n  1: r = read(x)\n}\n");
    EXPECT_EQ(encode_pc(replay(p, {}, {})).root->kind, FormulaNode::Kind::True);
}

TEST(Encode, TraceFormulaIsConjunction)
{
    Trace tr = fix1_trace();
    Formula all = encode_trace(tr);
    ASSERT_EQ(all.root->kind, FormulaNode::Kind::And);
    std::size_t parts = 0;
    for (const Formula& f : {encode_rw(tr), encode_pc(tr), encode_sync(tr)})
        parts += f.root->kind == FormulaNode::Kind::And ? f.root->kids.size() : 1;
    EXPECT_EQ(all.root->kids.size(), parts);
    EXPECT_TRUE(evaluate(all, concrete_model(tr)));
}

TEST(Encode, SyncModelsReplayWithoutOverlap)
{
    Trace tr = fix1_trace();
    Program p = parse_program(read_file(corpus("motivating/program.ir")));
    p = apply_fix(p, parse_patch(read_file(corpus("motivating/fix1.patch")))).program;
    BuiltinSolver solver;
    SolverResult r = solver.check_sat(encode_trace(tr));
    ASSERT_EQ(r.status, SatStatus::Sat);
    ScheduleInput si = model_to_schedule_input(r.model, tr);
    Trace back = replay(p, si, {});
    EXPECT_FALSE(back.divergence);
    EXPECT_EQ(back.path(), tr.path());
    // no two threads inside a section of the same lock
    std::map<std::string, std::string> owner;
    for (const auto& e : back.events) {
        if (e.kind == EventKind::Lock) {
            EXPECT_EQ(owner.count(e.target), 0u) << e.label;
            owner[e.target] = e.thread;
        } else if (e.kind == EventKind::Unlock) {
            owner.erase(e.target);
        }
    }
}

TEST(Encode, SolvedInputsTakeTheSameBranches)
{
    vt::Rng rng(21);
    BuiltinSolver solver;
    int checked = 0;
    while (checked < 100) {
        Program p = parse_program(vt::random_value_program(rng));
        Trace tr = vt::random_run(p, rng);
        if (tr.outcome.kind != OutcomeKind::Completed) continue;
        ++checked;
        SolverResult r = solver.check_sat(encode_trace(tr));
        ASSERT_EQ(r.status, SatStatus::Sat);
        Trace back = replay(p, model_to_schedule_input(r.model, tr), {});
        EXPECT_EQ(canonical_prefix(back.path()), canonical_prefix(tr.path()));
    }
}

TEST(Encode, ModelCountMatchesRealisingRuns)
{
    // reader branches on the value it reads; count orders per path
    Program p = parse_program(R"(width 4
shared x : int4 = 0
main T1
thread T1 {
  1: write(x, 1)
}
thread T2 {
  2: r = read(x)
  A: branch (r == 1) {
    3: write(x, 2)
  }
}
)");
    for (const char* order : {"order: T1 T2 T2\n", "order: T2 T1\n"}) {
        Trace tr = replay(p, parse_schedule(order), {});
        Formula f = encode_trace(tr);
        std::set<std::vector<std::int64_t>> orders;
        for_each_model(*f.symbols, 2, [&](const Model& m) {
            if (!evaluate(f, m)) return;
            std::vector<std::pair<std::int64_t, std::size_t>> pos;
            for (const auto& e : tr.events)
                if (is_critical(e.kind)) pos.push_back({m[e.order_var], e.index});
            std::sort(pos.begin(), pos.end());
            std::vector<std::int64_t> key;
            for (auto& x : pos) key.push_back(static_cast<std::int64_t>(x.second));
            orders.insert(key);
        });
        std::set<std::vector<std::string>> runs;
        std::string want = canonical_prefix(tr.path());
        for (const auto& r : enumerate_all(p, {}, {})) {
            if (canonical_prefix(r.path()) != want) continue;
            std::vector<std::string> k;
            for (const auto& e : r.events)
                if (is_critical(e.kind)) k.push_back(e.label);
            runs.insert(k);
        }
        EXPECT_EQ(orders.size(), runs.size()) << order;
    }
}

TEST(Encode, RwMatchingsMatchEnumeration)
{
    Program p = parse_program(R"(shared x : int8 = 0
main T1
thread T1 {
  1: write(x, 1)
}
thread T2 {
  2: write(x, 2)
}
thread T3 {
  3: r = read(x)
}
)");
    Trace tr = replay(p, parse_schedule("order: T1 T2 T3\n"), {});
    std::set<std::uint64_t> enumerated;
    for (const auto& r : enumerate_all(p, {}, {})) enumerated.insert(r.find("T3", "3", EventKind::Read)->value);
    Formula f = encode_trace(tr);
    std::set<std::uint64_t> admitted;
    BuiltinSolver solver;
    const Event* rd = tr.find("T3", "3", EventKind::Read);
    for (std::uint64_t v = 0; v < 4; ++v) {
        auto t = std::make_shared<SymbolTable>(*f.symbols);
        Formula g = conjoin({f, Formula{t, f_eq(make_var(rd->value_var), make_const(v))}});
        if (solver.check_sat(g).status == SatStatus::Sat) admitted.insert(v);
    }
    EXPECT_EQ(admitted, enumerated);
}

TEST(Encode, Case1InstanceProperty)
{
    Trace tr = fix1_trace();
    AtomicRegionSpec spec = parse_region_spec(read_file(corpus("motivating/spec.txt")));
    auto inst = find_av_instances(tr, spec);
    const AvInstance* hit = nullptr;
    for (const auto& i : inst)
        if (i.pattern == 1 && event_at(tr, i.events[0]).label == "6" && event_at(tr, i.events[2]).label == "7")
            hit = &i;
    ASSERT_NE(hit, nullptr);
    AvEncoding enc = encode_av(tr, *hit);
    EXPECT_EQ(print_node(enc.phi_av.root, *enc.phi_av.symbols), "R_p@6 = R_p@7");
}

TEST(Encode, Fix1AvQuerySat)
{
    Trace tr = fix1_trace();
    AtomicRegionSpec spec = parse_region_spec(read_file(corpus("motivating/spec.txt")));
    BuiltinSolver solver;
    bool sat = false;
    for (const auto& i : find_av_instances(tr, spec)) {
        if (event_at(tr, i.events[1]).label != "24") continue;
        SolverResult r = solver.check_sat(av_query(tr, i));
        if (r.status != SatStatus::Sat) continue;
        sat = true;
        // the remote write lands between the two local reads
        auto o = [&](std::size_t role) { return r.model[event_at(tr, i.events[role]).order_var]; };
        EXPECT_LT(o(0), o(1));
        EXPECT_LT(o(1), o(2));
    }
    EXPECT_TRUE(sat);
}

TEST(Encode, Prog1Case3Instances)
{
    Trace tr = parse_trace(read_file(corpus("prog1/seed.trace")));
    AtomicRegionSpec spec = parse_region_spec(read_file(corpus("prog1/spec.txt")));
    int case3 = 0;
    std::set<std::string> remotes;
    for (const auto& i : find_av_instances(tr, spec))
        if (i.pattern == 3) {
            ++case3;
            remotes.insert(event_at(tr, i.events[1]).label);
        }
    EXPECT_EQ(case3, 2);
    EXPECT_EQ(remotes, (std::set<std::string>{"14", "18"}));
}

TEST(Encode, NoRemoteAccessNoInstance)
{
    Program p = parse_program(R"(shared x : int8 = 0
shared y : int8 = 0
main T1
thread T1 {
  1: r = read(x)
  2: s = read(x)
}
thread T2 {
  3: write(y, 1)
}
)");
    Trace tr = replay(p, {}, {});
    AtomicRegionSpec spec = parse_region_spec("thread = T1\nunit = 1 2\nlocations = x\n");
    EXPECT_TRUE(find_av_instances(tr, spec).empty());
}

TEST(Encode, TwoReadsThreeRemoteWrites)
{
    Program p = parse_program(R"(shared x : int8 = 0
main T1
thread T1 {
  1: r = read(x)
  2: s = read(x)
}
thread T2 {
  3: write(x, 1)
  4: write(x, 2)
}
thread T3 {
  5: write(x, 3)
}
)");
    Trace tr = replay(p, {}, {});
    AtomicRegionSpec spec = parse_region_spec("thread = T1\nunit = 1 2\nlocations = x\n");
    auto inst = find_av_instances(tr, spec);
    EXPECT_EQ(std::count_if(inst.begin(), inst.end(), [](const AvInstance& i) { return i.pattern == 1; }), 3);
}

TEST(Encode, SingleThreadScheduleIsProgramOrder)
{
    Program p = parse_program("shared x : int8 = 0\nmain T1\nthread T1 {\n  1: write(x, 1)\n  2: r = read(x)\n}\n");
    Trace tr = replay(p, {}, {});
    Model m;
    m.values.assign(tr.symbols.size(), 0);
    m.values[static_cast<std::size_t>(tr.events[0].order_var)] = 9;
    m.values[static_cast<std::size_t>(tr.events[1].order_var)] = 1;
    EXPECT_EQ(model_to_schedule_input(m, tr).schedule, (std::vector<std::string>{"T1", "T1"}));
}

TEST(Encode, FullySerialisedProgramHasNoViolation)
{
    Program p = parse_program(R"(shared x : int8 = 0
lock g
main T1
thread T1 {
  0: lock(g)
  1: r = read(x)
  2: s = read(x)
  9: unlock(g)
}
thread T2 {
  3: lock(g)
  4: write(x, 1)
  5: unlock(g)
}
)");
    Trace tr = replay(p, {}, {});
    AtomicRegionSpec spec = parse_region_spec("thread = T1\nunit = 1 2\nlocations = x\n");
    BuiltinSolver solver;
    auto inst = find_av_instances(tr, spec);
    ASSERT_FALSE(inst.empty());
    for (const auto& i : inst) EXPECT_EQ(solver.check_sat(av_query(tr, i)).status, SatStatus::Unsat);
}

TEST(Encode, OracleSample)
{
    auto r = vt::check_encoder_oracle(80, 5);
    EXPECT_TRUE(r.pass) << r.detail;
}
