#include <benchmark/benchmark.h>

#include <random>

#include "recagent/catalog.hpp"
#include "recagent/evalharness.hpp"
#include "recagent/toolkit.hpp"

using namespace recagent;

namespace {

// n items with two tags each and skewed popularity.
Catalog make_catalog(std::size_t n) {
    const char* tags[] = {"RPG", "Indie", "Shooter", "Racing", "Puzzle", "Strategy"};
    std::vector<Item> items;
    for (std::size_t i = 0; i < n; ++i) {
        Item it;
        it.original_id = static_cast<std::int64_t>(i + 1);
        it.title = "Item " + std::to_string(i);
        it.tags = {tags[i % 6], tags[(i / 6) % 6]};
        it.price = static_cast<double>(i % 60);
        it.release_date = "20" + std::to_string(10 + i % 14) + "-01-01";
        items.push_back(std::move(it));
    }
    std::mt19937_64 rng(5);
    std::vector<RawInteraction> raw;
    for (UserId u = 1; u <= n; ++u)
        for (std::int64_t t = 0; t < 6; ++t)
            raw.push_back({u, static_cast<std::int64_t>(1 + (rng() % n) * (rng() % n) / n), t});
    return Catalog::build(std::move(items), raw);
}

struct Fixture {
    explicit Fixture(std::size_t n)
        : catalog(make_catalog(n)),
          model(build_itemcf(catalog.split().train, catalog.size())),
          ranker(model, catalog) {}
    Catalog catalog;
    SimilarityModel model;
    ItemCfRanker ranker;
    UserProfile profile;
    ToolRegistry registry = ToolRegistry::standard();
};

void BM_SqlRetrieval(benchmark::State& state) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto bus = reset_bus(f.catalog);
        ToolContext ctx{f.catalog, f.model, f.ranker, bus, f.profile};
        f.registry.run(tool_names::sql_retrieval, "tags LIKE '%RPG%' AND price < 40", ctx);
        benchmark::DoNotOptimize(bus.candidates.size());
    }
}
BENCHMARK(BM_SqlRetrieval)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

void BM_FullFunnel(benchmark::State& state) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto bus = reset_bus(f.catalog);
        ToolContext ctx{f.catalog, f.model, f.ranker, bus, f.profile};
        f.registry.run(tool_names::sql_retrieval, "price < 30", ctx);
        f.registry.run(tool_names::itemcf_retrieval, "['Item 3']", ctx);
        f.registry.run(tool_names::ranking, "{\"schema\": \"similarity\"}", ctx);
        benchmark::DoNotOptimize(f.registry.run(tool_names::candidate_fetching, "5", ctx).output.text);
    }
}
BENCHMARK(BM_FullFunnel)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

void BM_RandomRankingBaseline(benchmark::State& state) {
    Fixture f(200);
    for (auto _ : state)
        benchmark::DoNotOptimize(baseline(BaselineMode::random, OneTurnTask::ranking, f.catalog,
                                          kRankingCandidates, 1000, 1));
}
BENCHMARK(BM_RandomRankingBaseline)->Unit(benchmark::kMillisecond);

}  // namespace
