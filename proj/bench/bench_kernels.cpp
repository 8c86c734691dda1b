#include "mimo/dataset.hpp"
#include "mimo/receiver.hpp"

#include <benchmark/benchmark.h>

namespace {

mimo::NetworkConfig bench_config()
{
    mimo::NetworkConfig cfg = mimo::default_network_config();
    cfg.antennas = 16;
    return cfg;
}

struct RateFixture {
    mimo::NetworkConfig cfg = bench_config();
    mimo::PilotPlan plan = mimo::make_pilot_plan(cfg);
    mimo::Scenario scn;

    RateFixture()
    {
        mimo::Rng rng(11);
        scn = mimo::build_scenario(cfg, mimo::draw_positions(cfg, rng));
    }
};

void BM_RateMatrixParallel(benchmark::State& state)
{
    RateFixture f;
    const auto kind = static_cast<mimo::CombinerKind>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(mimo::rate_matrix(f.scn, f.plan, f.cfg, kind, 20, 7).r.sum());
}

void BM_RateMatrixSerial(benchmark::State& state)
{
    RateFixture f;
    const auto kind = static_cast<mimo::CombinerKind>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(mimo::rate_matrix_serial(f.scn, f.plan, f.cfg, kind, 20, 7).r.sum());
}

void BM_DatasetParallel(benchmark::State& state)
{
    const mimo::NetworkConfig cfg = bench_config();
    for (auto _ : state)
        benchmark::DoNotOptimize(mimo::generate_dataset(cfg, mimo::CombinerKind::mmse, 5, 8, 3).samples.size());
}

void BM_DatasetSerial(benchmark::State& state)
{
    const mimo::NetworkConfig cfg = bench_config();
    for (auto _ : state)
        benchmark::DoNotOptimize(
            mimo::generate_dataset_serial(cfg, mimo::CombinerKind::mmse, 5, 8, 3).samples.size());
}

}  // namespace

BENCHMARK(BM_RateMatrixParallel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RateMatrixSerial)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DatasetParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DatasetSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
