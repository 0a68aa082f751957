#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "recagent/errors.hpp"
#include "recagent/recmodels.hpp"
#include "test_support.hpp"

using namespace recagent;
using recagent::testing::games_toy;
using recagent::testing::games_toy_model;
using recagent::testing::id_of;

namespace {

// Dense cosine over a 0/1 user x item matrix.
double brute_cosine(const std::vector<std::vector<int>>& m, std::size_t a, std::size_t b) {
    double dot = 0, na = 0, nb = 0;
    for (const auto& row : m) {
        dot += row[a] * row[b];
        na += row[a];
        nb += row[b];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / std::sqrt(na * nb);
}

}  // namespace

TEST(ItemCf, MatchesBruteForceOnRandomMatrices) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 60; ++trial) {
        std::size_t users = std::uniform_int_distribution<std::size_t>(1, 30)(rng);
        std::size_t items = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
        std::bernoulli_distribution on(0.3);
        std::vector<std::vector<int>> m(users, std::vector<int>(items, 0));
        std::vector<Interaction> log;
        for (std::size_t u = 0; u < users; ++u)
            for (std::size_t i = 0; i < items; ++i)
                if (on(rng)) {
                    m[u][i] = 1;
                    log.push_back({static_cast<UserId>(u * 7 + 100), static_cast<ItemId>(i), 0});
                    if (on(rng)) log.push_back({static_cast<UserId>(u * 7 + 100), static_cast<ItemId>(i), 1});
                }
        auto model = build_itemcf(log, items);
        for (std::size_t a = 0; a < items; ++a) {
            auto row = model.similarity_row(static_cast<ItemId>(a));
            ASSERT_EQ(row.size(), items);
            for (std::size_t b = 0; b < items; ++b) {
                double want = brute_cosine(m, a, b);
                EXPECT_NEAR(model.similarity(a, b), want, 1e-9);
                EXPECT_NEAR(row[b], want, 1e-9);
            }
        }
    }
}

TEST(ItemCf, RejectsOutOfRangeItems) {
    EXPECT_THROW(build_itemcf({{1, 5, 0}}, 3), InputError);
}

TEST(ItemCf, SaveLoadRoundTrip) {
    const auto& model = *games_toy_model();
    std::stringstream ss;
    model.save(ss);
    auto loaded = SimilarityModel::load(ss, model.item_count());
    for (ItemId a = 0; a < model.item_count(); ++a)
        for (ItemId b = 0; b < model.item_count(); ++b)
            EXPECT_DOUBLE_EQ(loaded.similarity(a, b), model.similarity(a, b));

    std::stringstream again;
    model.save(again);
    EXPECT_THROW(SimilarityModel::load(again, model.item_count() + 1), InputError);
    std::stringstream empty;
    EXPECT_THROW(SimilarityModel::load(empty, 20), InputError);
    std::stringstream bad("{\"format\":\"other\"}\n");
    EXPECT_THROW(SimilarityModel::load(bad, 20), InputError);
}

TEST(ItemCf, ScoreBySeedsIsMeanSimilarity) {
    const auto& model = *games_toy_model();
    std::vector<ItemId> seeds{id_of("Hades"), id_of("Celeste")};
    std::vector<ItemId> cands{id_of("Hollow Knight"), id_of("Fortnite")};
    auto s = score_by_seeds(model, seeds, cands);
    ASSERT_EQ(s.size(), 2u);
    for (std::size_t i = 0; i < cands.size(); ++i)
        EXPECT_NEAR(s[i], (model.similarity(seeds[0], cands[i]) + model.similarity(seeds[1], cands[i])) / 2, 1e-12);
    EXPECT_THROW(score_by_seeds(model, {}, cands), InputError);
}

TEST(Ranker, PopularityOrderWithIdTiebreak) {
    const auto& cat = *games_toy();
    std::vector<ItemId> all;
    for (ItemId i = 0; i < cat.size(); ++i) all.push_back(i);
    auto out = rank_candidates({}, all, *games_toy_model(), cat);
    ASSERT_EQ(out.order.size(), all.size());
    for (std::size_t i = 1; i < out.order.size(); ++i) {
        auto pa = cat.item(out.order[i - 1]).popularity, pb = cat.item(out.order[i]).popularity;
        EXPECT_TRUE(pa > pb || (pa == pb && out.order[i - 1] < out.order[i]));
    }
}

TEST(Ranker, UnwantedRemovedAndReported) {
    const auto& cat = *games_toy();
    std::vector<ItemId> cands{id_of("Hades"), id_of("Celeste"), id_of("Portal 2")};
    RankRequest req;
    req.unwanted = {"celeste", "Nope Game"};
    auto out = rank_candidates(req, cands, *games_toy_model(), cat);
    EXPECT_EQ(out.removed, 1u);
    EXPECT_EQ(out.order.size(), 2u);
    EXPECT_EQ(out.unresolved_unwanted, std::vector<std::string>{"Nope Game"});
}

TEST(Ranker, PreferenceFallsBackToPopularity) {
    RankRequest req;
    req.schema = RankSchema::preference;
    req.prefer = {"Unknown Title"};
    std::vector<ItemId> cands{0, 1, 2};
    auto out = rank_candidates(req, cands, *games_toy_model(), *games_toy());
    EXPECT_EQ(out.schema_used, RankSchema::popularity);
    EXPECT_EQ(out.warnings.size(), 1u);
    EXPECT_EQ(out.unresolved_prefer.size(), 1u);
}

TEST(Ranker, SimilarityUsesSeeds) {
    const auto& model = *games_toy_model();
    RankRequest req;
    req.schema = RankSchema::similarity;
    req.similarity_seeds = {id_of("Hades")};
    std::vector<ItemId> cands;
    for (ItemId i = 0; i < games_toy()->size(); ++i) cands.push_back(i);
    auto out = rank_candidates(req, cands, model, *games_toy());
    EXPECT_EQ(out.schema_used, RankSchema::similarity);
    for (std::size_t i = 1; i < out.order.size(); ++i)
        EXPECT_GE(model.similarity(req.similarity_seeds[0], out.order[i - 1]),
                  model.similarity(req.similarity_seeds[0], out.order[i]));
}

TEST(Ranker, SchemaNames) {
    EXPECT_EQ(parse_rank_schema(" Similarity "), RankSchema::similarity);
    EXPECT_FALSE(parse_rank_schema("random"));
    EXPECT_EQ(to_string(RankSchema::preference), "preference");
}
