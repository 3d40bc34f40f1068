#include "bench_common.hpp"

#include <benchmark/benchmark.h>

using namespace verifix;

static void BM_SolveTraceFormula(benchmark::State& st)
{
    Trace tr = bench::seed_run("motivating", "fix1.patch");
    Formula f = encode_trace(tr);
    BuiltinSolver s;
    for (auto _ : st) benchmark::DoNotOptimize(s.check_sat(f));
}
BENCHMARK(BM_SolveTraceFormula);

static void BM_SolveAvQueries(benchmark::State& st)
{
    auto c = bench::load("motivating", "fix1.patch");
    Trace tr = replay(apply_fix(c.program, c.fix).program, c.seed, {});
    std::vector<Formula> qs;
    for (const auto& i : find_av_instances(tr, c.spec)) qs.push_back(av_query(tr, i));
    BuiltinSolver s;
    for (auto _ : st)
        for (const auto& q : qs) benchmark::DoNotOptimize(s.check_sat(q));
    st.counters["queries"] = static_cast<double>(qs.size());
}
BENCHMARK(BM_SolveAvQueries);

static void BM_DeadlockCheck(benchmark::State& st)
{
    Trace tr = bench::seed_run("motivating", "fix1.patch");
    BuiltinSolver s;
    for (auto _ : st) benchmark::DoNotOptimize(check_dl(tr, s));
}
BENCHMARK(BM_DeadlockCheck);

static void BM_SolveTraceFormulaSmt(benchmark::State& st)
{
    if (!SmtProcessSolver::available()) {
        st.SkipWithError("no SMT solver on PATH");
        return;
    }
    Trace tr = bench::seed_run("motivating", "fix1.patch");
    Formula f = encode_trace(tr);
    SmtProcessSolver s;
    for (auto _ : st) benchmark::DoNotOptimize(s.check_sat(f));
}
BENCHMARK(BM_SolveTraceFormulaSmt)->Unit(benchmark::kMillisecond);
