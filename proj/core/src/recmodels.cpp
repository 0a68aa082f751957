#include "recagent/recmodels.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <unordered_set>

#include "recagent/errors.hpp"
#include "recagent/text.hpp"

namespace recagent {
namespace {

constexpr const char* kCacheFormat = "recagent-itemcf";
constexpr int kCacheVersion = 1;

std::size_t intersection_size(const std::vector<std::uint32_t>& a,
                              const std::vector<std::uint32_t>& b) {
    std::size_t n = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j) {
            ++i;
        } else if (*j < *i) {
            ++j;
        } else {
            ++n;
            ++i;
            ++j;
        }
    }
    return n;
}

}  // namespace

double SimilarityModel::similarity(ItemId a, ItemId b) const {
    const auto& ua = item_users_.at(a);
    const auto& ub = item_users_.at(b);
    if (ua.empty() || ub.empty()) return 0.0;
    double common = static_cast<double>(intersection_size(ua, ub));
    return std::min(1.0, common / (norms_[a] * norms_[b]));
}

std::vector<double> SimilarityModel::similarity_row(ItemId a) const {
    std::vector<double> row(item_count(), 0.0);
    const auto& ua = item_users_.at(a);
    if (ua.empty()) return row;
    std::vector<std::uint32_t> common(item_count(), 0);
    for (auto u : ua)
        for (auto item : user_items_[u]) ++common[item];
    for (std::size_t x = 0; x < row.size(); ++x) {
        if (common[x] == 0) continue;
        row[x] = std::min(1.0, common[x] / (norms_[a] * norms_[x]));
    }
    return row;
}

void SimilarityModel::index_users() {
    std::uint32_t users = 0;
    for (const auto& list : item_users_)
        if (!list.empty()) users = std::max(users, list.back() + 1);
    user_items_.assign(users, {});
    norms_.assign(item_users_.size(), 0.0);
    for (std::size_t item = 0; item < item_users_.size(); ++item) {
        norms_[item] = std::sqrt(static_cast<double>(item_users_[item].size()));
        for (auto u : item_users_[item]) user_items_[u].push_back(static_cast<ItemId>(item));
    }
}

SimilarityModel build_itemcf(const std::vector<Interaction>& train, std::size_t item_count) {
    std::map<UserId, std::uint32_t> user_index;
    for (const auto& x : train) user_index.emplace(x.user_id, 0);
    std::uint32_t next = 0;
    for (auto& [_, idx] : user_index) idx = next++;

    SimilarityModel model;
    model.item_users_.assign(item_count, {});
    for (const auto& x : train) {
        if (x.item_id >= item_count)
            throw InputError("interaction item " + std::to_string(x.item_id) +
                             " out of range for item_count " + std::to_string(item_count));
        model.item_users_[x.item_id].push_back(user_index[x.user_id]);
    }
    for (auto& users : model.item_users_) {
        std::sort(users.begin(), users.end());
        users.erase(std::unique(users.begin(), users.end()), users.end());
    }
    model.index_users();
    return model;
}

void SimilarityModel::save(std::ostream& out) const {
    nlohmann::json header = {{"format", kCacheFormat},
                             {"version", kCacheVersion},
                             {"item_count", item_count()},
                             {"user_count", user_count()}};
    out << header.dump() << '\n';
    for (std::size_t i = 0; i < item_count(); ++i) {
        nlohmann::json line = {{"item", i}, {"users", item_users_[i]}, {"norm", norms_[i]}};
        out << line.dump() << '\n';
    }
}

SimilarityModel SimilarityModel::load(std::istream& in, std::size_t expected_item_count) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("model cache is empty");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("model cache header: ") + e.what());
    }
    if (header.value("format", "") != kCacheFormat || header.value("version", 0) != kCacheVersion)
        throw InputError("unsupported model cache format/version");
    auto count = header.at("item_count").get<std::size_t>();
    if (count != expected_item_count)
        throw InputError("model cache item_count " + std::to_string(count) +
                         " does not match catalog size " + std::to_string(expected_item_count));

    SimilarityModel model;
    model.item_users_.assign(count, {});
    std::size_t seen = 0;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        auto item = j.at("item").get<std::size_t>();
        if (item >= count) throw InputError("model cache item index out of range");
        model.item_users_[item] = j.at("users").get<std::vector<std::uint32_t>>();
        ++seen;
    }
    if (seen != count) throw InputError("model cache is truncated");
    model.index_users();
    return model;
}

std::vector<double> score_by_seeds(const SimilarityModel& model, std::span<const ItemId> seeds,
                                   std::span<const ItemId> candidates) {
    if (seeds.empty()) throw InputError("score_by_seeds requires at least one seed");
    std::vector<double> total(model.item_count(), 0.0);
    for (auto s : seeds) {
        auto row = model.similarity_row(s);
        for (std::size_t i = 0; i < row.size(); ++i) total[i] += row[i];
    }
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (auto c : candidates) scores.push_back(total.at(c) / static_cast<double>(seeds.size()));
    return scores;
}

std::optional<RankSchema> parse_rank_schema(std::string_view name) {
    auto key = text::fold_key(name);
    if (key == "popularity") return RankSchema::popularity;
    if (key == "similarity") return RankSchema::similarity;
    if (key == "preference") return RankSchema::preference;
    return std::nullopt;
}

std::string_view to_string(RankSchema schema) {
    switch (schema) {
        case RankSchema::popularity: return "popularity";
        case RankSchema::similarity: return "similarity";
        case RankSchema::preference: return "preference";
    }
    return "popularity";
}

RankOutcome ItemCfRanker::rank(const RankRequest& request, std::span<const ItemId> candidates) const {
    RankOutcome out;

    std::unordered_set<ItemId> unwanted;
    for (const auto& title : request.unwanted) {
        if (auto id = catalog_.find_title(title))
            unwanted.insert(*id);
        else
            out.unresolved_unwanted.push_back(title);
    }
    std::vector<ItemId> kept;
    kept.reserve(candidates.size());
    for (auto c : candidates)
        if (!unwanted.count(c)) kept.push_back(c);
    out.removed = candidates.size() - kept.size();

    std::vector<ItemId> seeds;
    out.schema_used = request.schema;
    if (request.schema == RankSchema::preference) {
        for (const auto& title : request.prefer) {
            if (auto id = catalog_.find_title(title))
                seeds.push_back(*id);
            else
                out.unresolved_prefer.push_back(title);
        }
        if (seeds.empty()) {
            out.schema_used = RankSchema::popularity;
            out.warnings.push_back("no resolvable 'prefer' items; ranked by popularity");
        }
    } else if (request.schema == RankSchema::similarity) {
        seeds = request.similarity_seeds;
        if (seeds.empty()) {
            out.schema_used = RankSchema::popularity;
            out.warnings.push_back("no similarity seeds from a previous ItemCF step; ranked by popularity");
        }
    }

    std::vector<double> keys;
    if (out.schema_used == RankSchema::popularity) {
        for (auto c : kept) keys.push_back(static_cast<double>(catalog_.item(c).popularity));
    } else {
        keys = score_by_seeds(model_, seeds, kept);
    }

    std::vector<std::size_t> idx(kept.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (keys[a] != keys[b]) return keys[a] > keys[b];
        return kept[a] < kept[b];
    });
    out.order.reserve(kept.size());
    for (auto i : idx) out.order.push_back(kept[i]);
    return out;
}

RankOutcome rank_candidates(const RankRequest& request, std::span<const ItemId> candidates,
                            const SimilarityModel& model, const Catalog& catalog) {
    return ItemCfRanker(model, catalog).rank(request, candidates);
}

}  // namespace recagent
