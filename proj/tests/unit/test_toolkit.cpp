#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "recagent/errors.hpp"
#include "recagent/toolkit.hpp"
#include "test_support.hpp"

using namespace recagent;
using recagent::testing::games_toy;
using recagent::testing::games_toy_model;
using recagent::testing::id_of;

namespace {

struct Harness {
    explicit Harness(const Catalog& c = *games_toy(), const SimilarityModel& m = *games_toy_model())
        : catalog(c), model(m), ranker(m, c), bus(reset_bus(c)), ctx{c, m, ranker, bus, profile} {}

    const ToolCallRecord& run(std::string_view tool, std::string_view input) {
        return registry.run(tool, input, ctx);
    }

    const Catalog& catalog;
    const SimilarityModel& model;
    ItemCfRanker ranker;
    CandidateBus bus;
    UserProfile profile;
    ToolContext ctx;
    ToolRegistry registry = ToolRegistry::standard();
};

}  // namespace

TEST(Toolkit, StandardRegistry) {
    auto reg = ToolRegistry::standard("movie");
    EXPECT_EQ(reg.names().size(), 6u);
    EXPECT_EQ(reg.tool_names_text(),
              "[Candidates Storing Tool, Query Tool, SQL Retrieval Tool, ItemCF Retrieval Tool, "
              "Ranking Tool, Candidate Fetching Tool]");
    auto desc = reg.describe();
    EXPECT_NE(desc.find("Tool Name: Ranking Tool\nTool Description: "), std::string::npos);
    EXPECT_NE(desc.find("movie"), std::string::npos);
    EXPECT_NE(desc.find("{ITEM}1"), std::string::npos);
    EXPECT_THROW(reg.add({"Query Tool", "", nullptr}), InputError);
}

TEST(Toolkit, SoftKeepCount) {
    EXPECT_EQ(soft_keep_count(0), 0u);
    EXPECT_EQ(soft_keep_count(1), 1u);
    EXPECT_EQ(soft_keep_count(3), 1u);
    EXPECT_EQ(soft_keep_count(20), 1u);
    EXPECT_EQ(soft_keep_count(21), 2u);
    EXPECT_EQ(soft_keep_count(100), 5u);
    EXPECT_EQ(soft_keep_count(1000), 50u);
}

TEST(Toolkit, SoftFilterKeepsTiesAtThreshold) {
    std::vector<double> scores(100, 0.0);
    std::vector<ItemId> ids(100);
    for (ItemId i = 0; i < 100; ++i) ids[i] = i;
    for (int i = 0; i < 4; ++i) scores[10 + i] = 0.9;
    scores[50] = 0.5;
    scores[51] = 0.5;
    auto keep = soft_filter(scores, ids);
    ASSERT_EQ(keep.size(), 6u);
    EXPECT_EQ(keep[0], 10u);
    EXPECT_EQ(keep[4], 50u);
    EXPECT_EQ(keep[5], 51u);
}

TEST(Toolkit, ParseTitleList) {
    using V = std::vector<std::string>;
    EXPECT_EQ(parse_title_list(R"(["Hades", "Celeste"])"), (V{"Hades", "Celeste"}));
    EXPECT_EQ(parse_title_list(R"(['Baldur\'s Gate 3', 'Hades'])"), (V{"Baldur's Gate 3", "Hades"}));
    EXPECT_EQ(parse_title_list(R"(["Baldur's Gate 3"])"), (V{"Baldur's Gate 3"}));
    EXPECT_EQ(parse_title_list("Hades; Celeste ;"), (V{"Hades", "Celeste"}));
    EXPECT_EQ(parse_title_list("[Hades, Celeste]"), (V{"Hades", "Celeste"}));
    EXPECT_TRUE(parse_title_list("  ").empty());
}

TEST(Toolkit, StoringReplacesBus) {
    Harness h;
    const auto& r = h.run(tool_names::candidates_storing, "Hades; celeste; Not A Game");
    EXPECT_FALSE(r.failed());
    EXPECT_EQ(h.bus.candidates, (std::vector<ItemId>{id_of("Hades"), id_of("Celeste")}));
    EXPECT_EQ(r.output.candidates_before, 20u);
    EXPECT_EQ(r.output.candidates_after, 2u);
    EXPECT_EQ(r.output.notes.size(), 1u);
    EXPECT_TRUE(h.run(tool_names::candidates_storing, "Nothing; Real").failed());
    EXPECT_TRUE(h.run(tool_names::candidates_storing, "").failed());
    EXPECT_EQ(h.bus.tracker.size(), 3u);
}

TEST(Toolkit, StoringAcceptsListSyntax) {
    Harness h;
    h.run(tool_names::candidates_storing, R"(["Portal 2", "Minecraft"])");
    EXPECT_EQ(h.bus.candidates.size(), 2u);
}

TEST(Toolkit, QueryDoesNotTouchBus) {
    Harness h;
    const auto& r = h.run(tool_names::query, "SELECT price FROM items WHERE title LIKE '%Cyberpunk%'");
    EXPECT_FALSE(r.failed());
    EXPECT_NE(r.output.text.find("129.99"), std::string::npos);
    EXPECT_EQ(h.bus.candidates.size(), 20u);
    const auto& bad = h.run(tool_names::query, "DROP TABLE items");
    EXPECT_EQ(bad.output.error_kind, "PolicyError");
    const auto& syn = h.run(tool_names::query, "SELECT nope FROM items");
    EXPECT_EQ(syn.output.error_kind, "SqlSyntaxError");
}

TEST(Toolkit, SqlRetrievalIntersectsBus) {
    Harness h;
    h.run(tool_names::candidates_storing, "Hades; The Witcher 3: Wild Hunt; Skyrim; Dark Souls III");
    const auto& r = h.run(tool_names::sql_retrieval, "SELECT * FROM items WHERE tags LIKE '%RPG%'");
    EXPECT_FALSE(r.failed());
    EXPECT_EQ(h.bus.candidates, (std::vector<ItemId>{id_of("The Witcher 3: Wild Hunt"), id_of("Dark Souls III")}));
    EXPECT_EQ(r.output.conditions, "SELECT id FROM items WHERE tags LIKE '%RPG%'");
}

TEST(Toolkit, SqlRetrievalErrorsLeaveBus) {
    Harness h;
    auto before = h.bus.candidates;
    EXPECT_EQ(h.run(tool_names::sql_retrieval, "price < 10 LIMIT 2").output.error_kind, "PolicyError");
    EXPECT_EQ(h.run(tool_names::sql_retrieval, "nosuchcol = 1").output.error_kind, "SqlSyntaxError");
    EXPECT_EQ(h.bus.candidates, before);
    const auto& empty = h.run(tool_names::sql_retrieval, "price > 100000");
    EXPECT_FALSE(empty.failed());
    EXPECT_TRUE(h.bus.candidates.empty());
}

TEST(Toolkit, SqlRetrievalCapsByPopularity) {
    std::vector<std::size_t> pop(2000);
    for (std::size_t i = 0; i < pop.size(); ++i) pop[i] = i % 7;
    auto cat = recagent::testing::synthetic_catalog(2000, pop);
    auto model = build_itemcf(cat.split().train, cat.size());
    Harness h(cat, model);
    const auto& r = h.run(tool_names::sql_retrieval, "price > 0");
    ASSERT_FALSE(r.failed());
    ASSERT_EQ(h.bus.candidates.size(), kHardRetrievalCap);
    std::int64_t min_kept = 1 << 30;
    std::set<ItemId> kept(h.bus.candidates.begin(), h.bus.candidates.end());
    for (auto id : kept) min_kept = std::min(min_kept, cat.item(id).popularity);
    for (ItemId i = 0; i < cat.size(); ++i)
        if (!kept.count(i)) EXPECT_LE(cat.item(i).popularity, min_kept);
    EXPECT_TRUE(std::is_sorted(h.bus.candidates.begin(), h.bus.candidates.end()));
    EXPECT_EQ(r.output.notes.size(), 1u);
}

TEST(Toolkit, ItemCfNarrowsToSimilar) {
    Harness h;
    const auto& r = h.run(tool_names::itemcf_retrieval, "['Hades']");
    ASSERT_FALSE(r.failed());
    EXPECT_EQ(r.output.seeds, std::vector<std::string>{"Hades"});
    EXPECT_GE(h.bus.candidates.size(), 1u);
    EXPECT_LT(h.bus.candidates.size(), 20u);
    auto scores = score_by_seeds(h.model, std::vector<ItemId>{id_of("Hades")}, h.bus.candidates);
    auto best = *std::max_element(scores.begin(), scores.end());
    auto all = reset_bus(h.catalog).candidates;
    auto all_scores = score_by_seeds(h.model, std::vector<ItemId>{id_of("Hades")}, all);
    EXPECT_EQ(best, *std::max_element(all_scores.begin(), all_scores.end()));
    EXPECT_TRUE(h.run(tool_names::itemcf_retrieval, "['Unknown']").failed());
}

TEST(Toolkit, RankingDefaultsAndUnwanted) {
    Harness h;
    const auto& pop = h.run(tool_names::ranking, "{}");
    EXPECT_EQ(pop.output.conditions, "schema=popularity");
    const auto& pref = h.run(tool_names::ranking, "{'prefer': ['Hades'], 'unwanted': ['Celeste', 'Ghost']}");
    EXPECT_FALSE(pref.failed());
    EXPECT_EQ(pref.output.conditions, "schema=preference");
    EXPECT_EQ(h.bus.candidates.size(), 19u);
    EXPECT_EQ(std::count(h.bus.candidates.begin(), h.bus.candidates.end(), id_of("Celeste")), 0);
    EXPECT_EQ(pref.output.notes, std::vector<std::string>{"unknown unwanted title: Ghost"});
    EXPECT_TRUE(h.run(tool_names::ranking, "not json").failed());
    EXPECT_TRUE(h.run(tool_names::ranking, "{\"schema\": \"random\"}").failed());
}

TEST(Toolkit, RankingUsesPriorItemCfSeeds) {
    Harness h;
    h.run(tool_names::sql_retrieval, "price >= 0");
    h.run(tool_names::itemcf_retrieval, "[\"Hades\"]");
    const auto& r = h.run(tool_names::ranking, "{}");
    EXPECT_EQ(r.output.conditions, "schema=similarity");
}

TEST(Toolkit, RankingMergesProfile) {
    Harness h;
    h.profile.dislike = {"Fortnite", "shooters"};
    const auto& r = h.run(tool_names::ranking, "{\"schema\": \"popularity\"}");
    EXPECT_EQ(h.bus.candidates.size(), 19u);
    EXPECT_TRUE(r.output.notes.empty());
}

TEST(Toolkit, FetchingPrintsTitles) {
    Harness h;
    h.run(tool_names::candidates_storing, "Hades; Celeste; Portal 2");
    const auto& r = h.run(tool_names::candidate_fetching, "2");
    EXPECT_EQ(r.output.text, "1. Hades\n2. Celeste");
    EXPECT_EQ(h.run(tool_names::candidate_fetching, "").output.items.size(), 3u);
    h.run(tool_names::sql_retrieval, "price > 100000");
    EXPECT_EQ(h.run(tool_names::candidate_fetching, "5").output.text, "no items matched");
}

TEST(Toolkit, UnknownToolAndThrowingToolBecomeRecords) {
    Harness h;
    EXPECT_EQ(h.run("Magic Tool", "x").output.error_kind, "ToolError");
    h.registry.add({"Boom", "", [](std::string_view, ToolContext&) -> ToolOutput {
                        throw std::runtime_error("kaboom");
                    }});
    const auto& r = h.run("Boom", "");
    EXPECT_EQ(*r.output.error, "kaboom");
    EXPECT_EQ(h.bus.tracker.size(), 2u);
}

// Property: no filtering or ranking step grows the bus, and ranking
// preserves the candidate set minus unwanted items.
TEST(Toolkit, FunnelNeverGrows) {
    std::mt19937_64 rng(5);
    const char* sql[] = {"price < 30", "tags LIKE '%RPG%'", "price >= 0", "release_date > '2015-01-01'",
                         "tags LIKE '%Indie%' OR price = 0"};
    const char* seeds[] = {"['Hades']", "['Portal 2', 'Minecraft']", "['Warframe']"};
    const char* ranks[] = {"{}", "{\"prefer\": [\"Celeste\"]}", "{\"unwanted\": [\"Hades\"]}",
                           "{\"schema\": \"similarity\"}"};
    for (int trial = 0; trial < 200; ++trial) {
        Harness h;
        int steps = std::uniform_int_distribution<int>(1, 6)(rng);
        for (int s = 0; s < steps; ++s) {
            auto before = h.bus.candidates;
            int kind = std::uniform_int_distribution<int>(0, 2)(rng);
            const ToolCallRecord* r;
            if (kind == 0) r = &h.run(tool_names::sql_retrieval, sql[rng() % 5]);
            else if (kind == 1) r = &h.run(tool_names::itemcf_retrieval, seeds[rng() % 3]);
            else r = &h.run(tool_names::ranking, ranks[rng() % 4]);
            EXPECT_LE(h.bus.candidates.size(), before.size());
            EXPECT_EQ(r->output.candidates_before, before.size());
            EXPECT_EQ(r->output.candidates_after, h.bus.candidates.size());
            std::set<ItemId> prev(before.begin(), before.end());
            for (auto c : h.bus.candidates) EXPECT_TRUE(prev.count(c));
        }
    }
}
