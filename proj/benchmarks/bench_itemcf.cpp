#include <benchmark/benchmark.h>

#include <random>

#include "recagent/recmodels.hpp"

using namespace recagent;

namespace {

std::vector<Interaction> random_log(std::size_t users, std::size_t items, double density, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution on(density);
    std::vector<Interaction> log;
    for (std::size_t u = 0; u < users; ++u)
        for (std::size_t i = 0; i < items; ++i)
            if (on(rng)) log.push_back({static_cast<UserId>(u + 1), static_cast<ItemId>(i), 0});
    return log;
}

void BM_BuildItemCf(benchmark::State& state) {
    auto items = static_cast<std::size_t>(state.range(0));
    auto log = random_log(items * 2, items, 0.02, 1);
    for (auto _ : state) benchmark::DoNotOptimize(build_itemcf(log, items));
    state.counters["interactions"] = static_cast<double>(log.size());
}
BENCHMARK(BM_BuildItemCf)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_SimilarityRow(benchmark::State& state) {
    auto items = static_cast<std::size_t>(state.range(0));
    auto model = build_itemcf(random_log(items * 2, items, 0.02, 2), items);
    ItemId a = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.similarity_row(a));
        a = static_cast<ItemId>((a + 1) % items);
    }
}
BENCHMARK(BM_SimilarityRow)->Arg(500)->Arg(2000);

void BM_ScoreBySeeds(benchmark::State& state) {
    const std::size_t items = 2000;
    auto model = build_itemcf(random_log(4000, items, 0.02, 3), items);
    std::vector<ItemId> candidates(items);
    for (ItemId i = 0; i < items; ++i) candidates[i] = i;
    std::vector<ItemId> seeds;
    for (int s = 0; s < state.range(0); ++s) seeds.push_back(static_cast<ItemId>(s * 37 % items));
    for (auto _ : state) benchmark::DoNotOptimize(score_by_seeds(model, seeds, candidates));
}
BENCHMARK(BM_ScoreBySeeds)->Arg(1)->Arg(5);

}  // namespace
BENCHMARK_MAIN();
