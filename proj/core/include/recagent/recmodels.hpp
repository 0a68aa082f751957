#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recagent/catalog.hpp"

namespace recagent {

/// Item-to-item cosine similarity over binary user incidence vectors.
/// Immutable after build; all accessors are safe for concurrent readers.
class SimilarityModel {
public:
    SimilarityModel() = default;

    std::size_t item_count() const noexcept { return item_users_.size(); }
    std::size_t user_count() const noexcept { return user_items_.size(); }

    /// |users(a) ∩ users(b)| / sqrt(|users(a)|·|users(b)|); 0 when either
    /// item has no interactions.
    double similarity(ItemId a, ItemId b) const;

    /// similarity(a, x) for every item x, computed by walking a's users.
    std::vector<double> similarity_row(ItemId a) const;

    const std::vector<std::uint32_t>& users_of(ItemId item) const { return item_users_.at(item); }
    double norm(ItemId item) const { return norms_.at(item); }

    /// Line-JSON dump: a versioned header line, then one line per item.
    void save(std::ostream& out) const;
    /// Throws InputError on a version or item_count mismatch.
    static SimilarityModel load(std::istream& in, std::size_t expected_item_count);

private:
    friend SimilarityModel build_itemcf(const std::vector<Interaction>&, std::size_t);
    void index_users();

    std::vector<std::vector<std::uint32_t>> item_users_;  // sorted dense user indices
    std::vector<std::vector<ItemId>> user_items_;
    std::vector<double> norms_;
};

/// Throws InputError when an interaction names an item >= item_count.
SimilarityModel build_itemcf(const std::vector<Interaction>& train, std::size_t item_count);

/// Mean similarity to the seeds, one score per candidate (same order).
/// Throws InputError on empty seeds.
std::vector<double> score_by_seeds(const SimilarityModel& model, std::span<const ItemId> seeds,
                                   std::span<const ItemId> candidates);

enum class RankSchema { popularity, similarity, preference };

std::optional<RankSchema> parse_rank_schema(std::string_view name);
std::string_view to_string(RankSchema schema);

struct RankRequest {
    RankSchema schema = RankSchema::popularity;
    std::vector<std::string> prefer;    // titles
    std::vector<std::string> unwanted;  // titles
    /// Seeds for the similarity schema, supplied by the tool layer.
    std::vector<ItemId> similarity_seeds;
};

struct RankOutcome {
    std::vector<ItemId> order;
    RankSchema schema_used = RankSchema::popularity;
    std::vector<std::string> unresolved_prefer;
    std::vector<std::string> unresolved_unwanted;
    std::vector<std::string> warnings;
    std::size_t removed = 0;
};

/// Pluggable ranking contract used by the Ranking Tool.
class Ranker {
public:
    virtual ~Ranker() = default;
    virtual RankOutcome rank(const RankRequest& request, std::span<const ItemId> candidates) const = 0;
};

/// Reference ranker: popularity, seed similarity, or preference seeds.
class ItemCfRanker final : public Ranker {
public:
    ItemCfRanker(const SimilarityModel& model, const Catalog& catalog)
        : model_(model), catalog_(catalog) {}
    RankOutcome rank(const RankRequest& request, std::span<const ItemId> candidates) const override;

private:
    const SimilarityModel& model_;
    const Catalog& catalog_;
};

RankOutcome rank_candidates(const RankRequest& request, std::span<const ItemId> candidates,
                            const SimilarityModel& model, const Catalog& catalog);

}  // namespace recagent
