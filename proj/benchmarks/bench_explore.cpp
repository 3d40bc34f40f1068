#include "bench_common.hpp"

#include <benchmark/benchmark.h>

using namespace verifix;

namespace {

void explore(benchmark::State& st, const std::string& entry, const std::string& fix)
{
    auto c = bench::load(entry, fix);
    ExploreConfig cfg;
    cfg.parallelism = static_cast<unsigned>(st.range(0));
    cfg.limit_to_cores = false;
    std::size_t paths = 0;
    for (auto _ : st) paths = verify_fix(c.program, c.fix, c.seed, c.spec, cfg).paths_explored;
    st.counters["paths"] = static_cast<double>(paths);
}

} // namespace

static void BM_VerifyMotivatingFix3(benchmark::State& st) { explore(st, "motivating", "fix3.patch"); }
BENCHMARK(BM_VerifyMotivatingFix3)->Arg(1)->Arg(5)->UseRealTime()->Unit(benchmark::kMillisecond);

static void BM_VerifyMotivatingFix1(benchmark::State& st) { explore(st, "motivating", "fix1.patch"); }
BENCHMARK(BM_VerifyMotivatingFix1)->Arg(1)->Arg(5)->UseRealTime()->Unit(benchmark::kMillisecond);

static void BM_VerifyProg2(benchmark::State& st) { explore(st, "prog2", "fix2.patch"); }
BENCHMARK(BM_VerifyProg2)->Arg(1)->Arg(5)->UseRealTime()->Unit(benchmark::kMillisecond);

static void BM_VerifyBoundedBuffer(benchmark::State& st) { explore(st, "boundedbuffer", "fix2.patch"); }
BENCHMARK(BM_VerifyBoundedBuffer)->Arg(1)->Arg(5)->UseRealTime()->Unit(benchmark::kMillisecond);
