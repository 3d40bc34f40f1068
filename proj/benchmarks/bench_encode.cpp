#include "bench_common.hpp"

#include <benchmark/benchmark.h>

using namespace verifix;

static void BM_ReplaySeed(benchmark::State& st)
{
    auto c = bench::load("motivating", "fix1.patch");
    Program p = apply_fix(c.program, c.fix).program;
    for (auto _ : st) benchmark::DoNotOptimize(replay(p, c.seed, {}));
}
BENCHMARK(BM_ReplaySeed);

static void BM_EncodeTrace(benchmark::State& st)
{
    Trace tr = bench::seed_run("motivating", "fix1.patch");
    for (auto _ : st) benchmark::DoNotOptimize(encode_trace(tr));
}
BENCHMARK(BM_EncodeTrace);

static void BM_FindAvInstances(benchmark::State& st)
{
    auto c = bench::load("boundedbuffer", "fix1.patch");
    Trace tr = replay(apply_fix(c.program, c.fix).program, c.seed, {});
    for (auto _ : st) benchmark::DoNotOptimize(find_av_instances(tr, c.spec));
}
BENCHMARK(BM_FindAvInstances);

static void BM_PotentialDeadlocks(benchmark::State& st)
{
    auto c = bench::load("prog3", "fix3.patch");
    ScheduleInput zeros;
    for (const auto& [name, v] : c.seed.inputs) zeros.inputs[name] = 0;
    Trace tr = replay(apply_fix(c.program, c.fix).program, zeros, {});
    for (auto _ : st) benchmark::DoNotOptimize(potential_dls(tr));
}
BENCHMARK(BM_PotentialDeadlocks);
