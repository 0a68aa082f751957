#include <benchmark/benchmark.h>

#include "recagent/planner.hpp"
#include "recagent/prompts.hpp"
#include "recagent/toolkit.hpp"

using namespace recagent;

namespace {

const std::string kNumbered =
    "1. SQL Retrieval Tool (SELECT * FROM items WHERE tags LIKE '%RPG%' AND price < 30); "
    "2. ItemCF Retrieval Tool (['The Witcher 3: Wild Hunt', 'Baldur's Gate 3']); "
    "3. Ranking Tool ({\"schema\": \"preference\", \"prefer\": [\"Hades (2020)\"]}); "
    "4. Candidate Fetching Tool (5)";

void BM_ParseNumberedPlan(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(parse_plan(kNumbered));
}
BENCHMARK(BM_ParseNumberedPlan);

void BM_ParseStructuredPlan(benchmark::State& state) {
    auto text = nlohmann::json(parse_plan(kNumbered)).dump();
    for (auto _ : state) benchmark::DoNotOptimize(parse_plan(text));
}
BENCHMARK(BM_ParseStructuredPlan);

void BM_ValidatePlan(benchmark::State& state) {
    auto registry = ToolRegistry::standard();
    auto plan = parse_plan(kNumbered);
    for (auto _ : state) benchmark::DoNotOptimize(validate_plan(plan, registry));
}
BENCHMARK(BM_ValidatePlan);

void BM_DemoSearch(benchmark::State& state) {
    DemoStore store;
    for (int i = 0; i < state.range(0); ++i)
        store.add("I want some TYPE games number " + std::to_string(i) + " released after DATE",
                  parse_plan(kNumbered));
    for (auto _ : state) benchmark::DoNotOptimize(store.search("cheap RPG games like Skyrim", 5));
}
BENCHMARK(BM_DemoSearch)->Arg(15)->Arg(500);

}  // namespace
