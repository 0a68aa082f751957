#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "recagent/catalog.hpp"
#include "recagent/memory.hpp"
#include "recagent/recmodels.hpp"

namespace recagent {

namespace tool_names {
inline constexpr std::string_view candidates_storing = "Candidates Storing Tool";
inline constexpr std::string_view query = "Query Tool";
inline constexpr std::string_view sql_retrieval = "SQL Retrieval Tool";
inline constexpr std::string_view itemcf_retrieval = "ItemCF Retrieval Tool";
inline constexpr std::string_view ranking = "Ranking Tool";
inline constexpr std::string_view candidate_fetching = "Candidate Fetching Tool";
}  // namespace tool_names

inline constexpr std::size_t kHardRetrievalCap = 1000;
inline constexpr double kSoftRetrievalFraction = 0.05;
inline constexpr std::size_t kDefaultFetchCount = 5;
inline constexpr std::size_t kQueryResultMaxChars = 2000;

/// Everything a tool reads or writes during one plan execution.
struct ToolContext {
    const Catalog& catalog;
    const SimilarityModel& model;
    const Ranker& ranker;
    CandidateBus& bus;
    const UserProfile& profile;  // composed long+short term profile
};

using ToolExecutor = std::function<ToolOutput(std::string_view input, ToolContext& ctx)>;

struct ToolSpec {
    std::string name;
    std::string description;
    ToolExecutor run;
};

class ToolRegistry {
public:
    /// The six recommendation tools with descriptions rendered for `item_noun`.
    static ToolRegistry standard(std::string_view item_noun = "game");

    void add(ToolSpec spec);  // throws InputError on a duplicate name
    const ToolSpec* find(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) != nullptr; }
    std::vector<std::string> names() const;
    const std::vector<ToolSpec>& tools() const noexcept { return tools_; }

    /// "{tools_desc}" text: one name/description block per tool.
    std::string describe() const;
    /// "{tool_names}" text.
    std::string tool_names_text() const;

    /// Executes one tool and appends exactly one record to ctx.bus.tracker.
    /// Exceptions from the executor become error records.
    const ToolCallRecord& run(std::string_view name, std::string_view input, ToolContext& ctx) const;

private:
    std::vector<ToolSpec> tools_;
};

ToolOutput candidates_storing_tool(std::string_view input, ToolContext& ctx);
ToolOutput query_tool(std::string_view input, ToolContext& ctx);
ToolOutput sql_retrieval_tool(std::string_view input, ToolContext& ctx);
ToolOutput itemcf_retrieval_tool(std::string_view input, ToolContext& ctx);
ToolOutput ranking_tool(std::string_view input, ToolContext& ctx);
ToolOutput candidate_fetching_tool(std::string_view input, ToolContext& ctx);

/// Number of candidates a soft filter keeps before ties: ceil(5% of n), >= 1.
std::size_t soft_keep_count(std::size_t n);

/// Positions (into `scores`) that survive the top-5% cut, best first; ties at
/// the threshold are all kept, equal scores ordered by `ids` ascending.
std::vector<std::size_t> soft_filter(const std::vector<double>& scores,
                                     const std::vector<ItemId>& ids);

/// Accepts a JSON array, a Python-style list with single quotes, or a ';'/','
/// separated list.
std::vector<std::string> parse_title_list(std::string_view input);

}  // namespace recagent
