#include "recagent/toolkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "recagent/errors.hpp"
#include "recagent/prompts.hpp"
#include "recagent/sql_guard.hpp"
#include "recagent/text.hpp"

namespace recagent {
namespace {

constexpr std::string_view kStoringDesc =
    R"desc(The tool is useful to save candidate {item}s into buffer as the initial candidates, following tools would filter or ranking {item}s from those canidates.
For example, "Please select the most suitable {item} from those {item}s".
Don't use this tool when the user hasn't specified that they want to select from a specific set of {item}s.
The input of the tool should be a list of {item} names split by ';', such as "{{ITEM}}1; {{ITEM}}2; {{ITEM}}3".)desc";

constexpr std::string_view kFetchingDesc =
    R"desc(The tool is useful when you want to convert {item} id to {item} title before showing {item}s to human.
The tool is able to get stored {item}s in the buffer.
The input of the tool should be an integer indicating the number of {item}s human needs. The default value is 5 if human doesn't give.)desc";

constexpr std::string_view kQueryDesc =
    R"desc(The tool is used to look up some {item} information in a {item} information table (including statistical information), like number of {item}s, description of {item}s and so on.
The input of the tools should be a SQL command (in one line) converted from the search query, which would be used to search information in {item} information table.
You should try to select as less columns as you can to get the necessary information.
Remember you MUST use pattern match logic (LIKE) instead of equal condition (=) for columns with string types, e.g. "title LIKE '%xxx%'".
For example, if asking for "how many xxx {item}s?", you should use "COUNT()" to get the correct number. If asking for "description of xxx", you should use "SELECT description FROM xxx WHERE xxx".
The tool can NOT give recommendations. DO NOT SELECT id information!)desc";

constexpr std::string_view kSqlRetrievalDesc =
    R"desc(The tool is a hard condition tool. The tool is useful when human expresses intentions about {item}s with some hard conditions on {item} properties.
The input of the tool should be a one-line SQL SELECT command converted from hard conditions. Here are some rules:
1. {item} titles can not be used as conditions in SQL;
2. the tool can not find similar {item}s;
3. always use pattern match logic for columns with string type;
4. only one {item} information table is allowed to appear in SQL command;
5. select all {item}s that meet the conditions, do not use the LIMIT keyword;
6. try to use OR instead of AND.)desc";

constexpr std::string_view kItemCfDesc =
    R"desc(The tool is a soft condition filtering tool.
The tool can find similar {item}s for specific seed {item}s.
Never use this tool if human doesn't express to find some {item}s similar with seed {item}s.
There is a similarity score threshold in the tool, only {item}s with similarity above the threshold would be kept.
Besides, the tool could be used to calculate the similarity scores with seed {item}s for {item}s in candidate buffer for ranking tool to refine.
The input of the tool should be a list of seed {item} titles/names, which should be a Python list of strings.
Do not fake any {item} names.)desc";

constexpr std::string_view kRankingDesc =
    R"desc(The tool is useful to refine {item}s order or remove unwanted {item}s (when human tells the {item}s he does't want) in conversation.
The input of the tool should be a json string, which may consist of three keys: "schema", "prefer" and "unwanted".
"schema" represents ranking schema, optional choices: "popularity", "similarity" and "preference", indicating rank by {item} popularity, rank by similarity, rank by human preference ("prefer" {item}s).
The "schema" depends on previous tool using and human preference. If "prefer" info here not empty, "preference" schema should be used. If similarity filtering tool is used before, prioritize using "similarity" except human want popular {item}s.
"prefer" represents {item} names that human likes or human history ({item}s human has interacted with), which should be an array of {item} titles. Keywords: "used to do", "I like", "prefer".
"unwanted" represents {item} names that human doesn't like or doesn't want to see in next conversations, which should be an array of {item} titles. Keywords: "don't like", "boring", "interested in".
"prefer" and "unwanted" {item}s should be extracted from human request and previous conversations. Only {item} names are allowed to appear in the input.
The human's feedback for you recommendation in conversation history could be regard as "prefer" or "unwanted", like "I have tried those items you recommend" or "I don't like those".
Only when at least one of "prefer" and "unwanted" is not empty, the tool could be used. If no "prefer" info, {item}s would be ranked based on the popularity.
Do not fake {item}s.)desc";

ToolOutput error_output(std::size_t count, std::string kind, std::string message) {
    ToolOutput out;
    out.candidates_before = out.candidates_after = count;
    out.error = std::move(message);
    out.error_kind = std::move(kind);
    out.text = out.error_kind + ": " + *out.error;
    return out;
}

std::vector<std::string> resolve_titles(const Catalog& catalog, const std::vector<std::string>& titles,
                                        std::vector<ItemId>& ids) {
    std::vector<std::string> missing;
    std::unordered_set<ItemId> seen;
    for (const auto& t : titles) {
        if (auto id = catalog.find_title(t)) {
            if (seen.insert(*id).second) ids.push_back(*id);
        } else {
            missing.push_back(t);
        }
    }
    return missing;
}

std::vector<std::string> json_string_list(const nlohmann::json& j) {
    std::vector<std::string> out;
    if (j.is_string()) {
        if (!text::trim(j.get<std::string>()).empty()) out.push_back(j.get<std::string>());
    } else if (j.is_array()) {
        for (const auto& v : j)
            if (v.is_string()) out.push_back(v.get<std::string>());
    }
    return out;
}

// Python-style list literal: ['a', "b's"] with backslash escapes.
std::optional<std::vector<std::string>> parse_python_list(std::string_view s) {
    s = text::trim(s);
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') return std::nullopt;
    std::vector<std::string> out;
    std::size_t i = 1;
    const std::size_t end = s.size() - 1;
    while (i < end) {
        while (i < end && (std::isspace(static_cast<unsigned char>(s[i])) || s[i] == ',')) ++i;
        if (i >= end) break;
        char q = s[i];
        if (q != '\'' && q != '"') return std::nullopt;
        std::string value;
        ++i;
        bool closed = false;
        while (i < end) {
            if (s[i] == '\\' && i + 1 < end) {
                value += s[i + 1];
                i += 2;
                continue;
            }
            if (s[i] == q) {
                closed = true;
                ++i;
                break;
            }
            value += s[i++];
        }
        if (!closed) return std::nullopt;
        out.push_back(std::move(value));
    }
    return out;
}

nlohmann::json parse_lenient_object(std::string_view input) {
    auto s = text::trim(input);
    auto j = nlohmann::json::parse(s, nullptr, false);
    if (!j.is_discarded() && j.is_object()) return j;
    auto open = s.find('{');
    auto close = s.rfind('}');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
        auto body = s.substr(open, close - open + 1);
        j = nlohmann::json::parse(body, nullptr, false);
        if (!j.is_discarded() && j.is_object()) return j;
        std::string swapped(body);
        std::replace(swapped.begin(), swapped.end(), '\'', '"');
        j = nlohmann::json::parse(swapped, nullptr, false);
        if (!j.is_discarded() && j.is_object()) return j;
    }
    throw InputError("ranking input must be a JSON object with keys \"schema\", \"prefer\", \"unwanted\"");
}

}  // namespace

std::vector<std::string> parse_title_list(std::string_view input) {
    auto s = text::trim(input);
    std::vector<std::string> raw;
    auto j = nlohmann::json::parse(s, nullptr, false);
    if (!j.is_discarded() && (j.is_array() || j.is_string())) {
        raw = json_string_list(j);
    } else if (auto py = parse_python_list(s)) {
        raw = std::move(*py);
    } else {
        if (!s.empty() && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
        raw = text::split(s, s.find(';') != std::string_view::npos ? ';' : ',');
    }
    std::vector<std::string> out;
    for (auto& r : raw) {
        auto t = text::trim(r);
        if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front())
            t = text::trim(t.substr(1, t.size() - 2));
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

std::size_t soft_keep_count(std::size_t n) {
    if (n == 0) return 0;
    auto k = static_cast<std::size_t>(std::ceil(kSoftRetrievalFraction * static_cast<double>(n) - 1e-9));
    return std::max<std::size_t>(1, k);
}

std::vector<std::size_t> soft_filter(const std::vector<double>& scores, const std::vector<ItemId>& ids) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids[a] < ids[b];
    });
    std::size_t k = soft_keep_count(scores.size());
    if (k == 0) return {};
    double threshold = scores[order[k - 1]];
    std::size_t keep = k;
    while (keep < order.size() && scores[order[keep]] >= threshold) ++keep;
    order.resize(keep);
    return order;
}

ToolOutput candidates_storing_tool(std::string_view input, ToolContext& ctx) {
    auto before = ctx.bus.candidates.size();
    auto titles = text::split(input, ';');
    std::vector<std::string> cleaned;
    for (auto& t : titles)
        if (!text::trim(t).empty()) cleaned.push_back(text::trim_copy(t));
    if (cleaned.size() == 1 && !ctx.catalog.find_title(cleaned[0])) cleaned = parse_title_list(input);
    if (cleaned.empty()) return error_output(before, "ToolError", "no candidate titles given");

    std::vector<ItemId> ids;
    auto missing = resolve_titles(ctx.catalog, cleaned, ids);
    if (ids.empty()) return error_output(before, "ToolError", "no valid candidates");

    ctx.bus.candidates = ids;
    ToolOutput out;
    out.candidates_before = before;
    out.candidates_after = ids.size();
    for (const auto& m : missing) out.notes.push_back("unknown title: " + m);
    out.text = std::to_string(ids.size()) + " candidates stored in the buffer";
    return out;
}

ToolOutput query_tool(std::string_view input, ToolContext& ctx) {
    auto count = ctx.bus.candidates.size();
    ToolOutput out;
    out.candidates_before = out.candidates_after = count;
    out.conditions = text::trim_copy(input);
    try {
        auto table = ctx.catalog.execute_sql(text::trim(input), SqlMode::query);
        out.text = table.to_text(kQueryResultMaxChars);
        if (table.column_index("id") != std::string::npos)
            out.notes.push_back("id selected; ids are internal and should not be shown");
    } catch (const PolicyError& e) {
        return error_output(count, "PolicyError", e.what());
    } catch (const SqlSyntaxError& e) {
        return error_output(count, "SqlSyntaxError", e.what());
    }
    return out;
}

ToolOutput sql_retrieval_tool(std::string_view input, ToolContext& ctx) {
    auto before = ctx.bus.candidates.size();
    std::string sql;
    ResultTable table;
    try {
        sql = sql::to_id_query(input);
        table = ctx.catalog.execute_sql(sql, SqlMode::retrieval);
    } catch (const PolicyError& e) {
        return error_output(before, "PolicyError", e.what());
    } catch (const SqlSyntaxError& e) {
        return error_output(before, "SqlSyntaxError", e.what());
    }

    std::vector<bool> matched(ctx.catalog.size(), false);
    for (const auto& row : table.rows) {
        std::int64_t id = -1;
        const auto& cell = row.at(0);
        std::from_chars(cell.data(), cell.data() + cell.size(), id);
        if (id >= 0 && static_cast<std::size_t>(id) < matched.size()) matched[id] = true;
    }
    std::vector<ItemId> kept;
    for (auto c : ctx.bus.candidates)
        if (matched[c]) kept.push_back(c);

    ToolOutput out;
    out.candidates_before = before;
    out.conditions = sql;
    if (kept.size() > kHardRetrievalCap) {
        std::vector<ItemId> by_pop = kept;
        std::sort(by_pop.begin(), by_pop.end(), [&](ItemId a, ItemId b) {
            auto pa = ctx.catalog.item(a).popularity;
            auto pb = ctx.catalog.item(b).popularity;
            if (pa != pb) return pa > pb;
            return a < b;
        });
        by_pop.resize(kHardRetrievalCap);
        std::unordered_set<ItemId> top(by_pop.begin(), by_pop.end());
        std::vector<ItemId> capped;
        for (auto c : kept)
            if (top.count(c)) capped.push_back(c);
        out.notes.push_back(std::to_string(kept.size()) + " matches capped to the " +
                            std::to_string(kHardRetrievalCap) + " most popular");
        kept = std::move(capped);
    }
    ctx.bus.candidates = kept;
    out.candidates_after = kept.size();
    if (kept.empty()) {
        out.text = "0 candidates remain after SQL filtering; the conditions may be too strict";
    } else {
        out.text = std::to_string(kept.size()) + " candidates remain after SQL filtering (from " +
                   std::to_string(before) + ")";
    }
    return out;
}

ToolOutput itemcf_retrieval_tool(std::string_view input, ToolContext& ctx) {
    auto before = ctx.bus.candidates.size();
    auto titles = parse_title_list(input);
    std::vector<ItemId> seeds;
    auto missing = resolve_titles(ctx.catalog, titles, seeds);
    if (seeds.empty()) return error_output(before, "ToolError", "no seed title matches the catalog");

    ToolOutput out;
    out.candidates_before = before;
    for (auto s : seeds) out.seeds.push_back(ctx.catalog.item(s).title);
    for (const auto& m : missing) out.notes.push_back("unknown seed title: " + m);

    const auto& cands = ctx.bus.candidates;
    auto scores = score_by_seeds(ctx.model, seeds, cands);
    auto keep = soft_filter(scores, cands);
    std::vector<ItemId> kept;
    kept.reserve(keep.size());
    for (auto i : keep) kept.push_back(cands[i]);
    ctx.bus.candidates = std::move(kept);
    out.candidates_after = ctx.bus.candidates.size();
    out.text = std::to_string(out.candidates_after) + " candidates similar to " +
               text::join(out.seeds, ", ") + " remain (from " + std::to_string(before) + ")";
    return out;
}

ToolOutput ranking_tool(std::string_view input, ToolContext& ctx) {
    auto before = ctx.bus.candidates.size();
    nlohmann::json args;
    try {
        args = parse_lenient_object(input);
    } catch (const InputError& e) {
        return error_output(before, "ToolError", e.what());
    }

    auto prefer = args.contains("prefer") ? json_string_list(args["prefer"]) : std::vector<std::string>{};
    auto unwanted =
        args.contains("unwanted") ? json_string_list(args["unwanted"]) : std::vector<std::string>{};

    // Seeds of the most recent ItemCF step feed the similarity schema.
    std::vector<ItemId> sim_seeds;
    bool itemcf_before = false;
    for (auto it = ctx.bus.tracker.rbegin(); it != ctx.bus.tracker.rend(); ++it) {
        if (it->tool_name == tool_names::itemcf_retrieval && !it->failed()) {
            itemcf_before = true;
            resolve_titles(ctx.catalog, it->output.seeds, sim_seeds);
            break;
        }
    }

    ToolOutput out;
    out.candidates_before = before;
    RankRequest req;
    if (args.contains("schema") && args["schema"].is_string() &&
        !text::trim(args["schema"].get<std::string>()).empty()) {
        auto schema = parse_rank_schema(args["schema"].get<std::string>());
        if (!schema)
            return error_output(before, "ToolError",
                                "unknown schema '" + args["schema"].get<std::string>() +
                                    "'; expected popularity, similarity or preference");
        req.schema = *schema;
    } else if (!prefer.empty()) {
        req.schema = RankSchema::preference;
    } else if (itemcf_before) {
        req.schema = RankSchema::similarity;
    } else {
        req.schema = RankSchema::popularity;
    }

    req.prefer = prefer;
    text::append_unique_ci(req.prefer, ctx.profile.like);
    req.unwanted = unwanted;
    text::append_unique_ci(req.unwanted, ctx.profile.dislike);
    req.similarity_seeds = sim_seeds;

    auto outcome = ctx.ranker.rank(req, ctx.bus.candidates);
    ctx.bus.candidates = outcome.order;
    out.candidates_after = outcome.order.size();
    out.conditions = "schema=" + std::string(to_string(outcome.schema_used));
    for (const auto& w : outcome.warnings) out.notes.push_back(w);
    // Profile-derived entries are often categories; only report misses the
    // planner asked for.
    for (const auto& t : outcome.unresolved_prefer)
        if (std::any_of(prefer.begin(), prefer.end(), [&](auto& p) { return text::iequals(p, t); }))
            out.notes.push_back("unknown prefer title: " + t);
    for (const auto& t : outcome.unresolved_unwanted)
        if (std::any_of(unwanted.begin(), unwanted.end(), [&](auto& p) { return text::iequals(p, t); }))
            out.notes.push_back("unknown unwanted title: " + t);
    out.text = std::to_string(out.candidates_after) + " candidates ranked by " +
               std::string(to_string(outcome.schema_used));
    if (outcome.removed) out.text += " (" + std::to_string(outcome.removed) + " unwanted removed)";
    return out;
}

ToolOutput candidate_fetching_tool(std::string_view input, ToolContext& ctx) {
    auto count = ctx.bus.candidates.size();
    std::size_t n = kDefaultFetchCount;
    auto s = text::trim(input);
    long long parsed = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), parsed);
    if (ec == std::errc{} && p == s.data() + s.size() && parsed > 0) n = static_cast<std::size_t>(parsed);

    ToolOutput out;
    out.candidates_before = out.candidates_after = count;
    out.conditions = "n=" + std::to_string(n);
    if (count == 0) {
        out.text = "no items matched";
        return out;
    }
    for (std::size_t i = 0; i < std::min(n, count); ++i)
        out.items.push_back(ctx.catalog.item(ctx.bus.candidates[i]).title);
    for (std::size_t i = 0; i < out.items.size(); ++i) {
        if (i) out.text += '\n';
        out.text += std::to_string(i + 1) + ". " + out.items[i];
    }
    return out;
}

ToolRegistry ToolRegistry::standard(std::string_view item_noun) {
    PromptVars vars{{"item", std::string(item_noun)}};
    ToolRegistry reg;
    reg.add({std::string(tool_names::candidates_storing), render_template(kStoringDesc, vars),
             candidates_storing_tool});
    reg.add({std::string(tool_names::query), render_template(kQueryDesc, vars), query_tool});
    reg.add({std::string(tool_names::sql_retrieval), render_template(kSqlRetrievalDesc, vars),
             sql_retrieval_tool});
    reg.add({std::string(tool_names::itemcf_retrieval), render_template(kItemCfDesc, vars),
             itemcf_retrieval_tool});
    reg.add({std::string(tool_names::ranking), render_template(kRankingDesc, vars), ranking_tool});
    reg.add({std::string(tool_names::candidate_fetching), render_template(kFetchingDesc, vars),
             candidate_fetching_tool});
    return reg;
}

void ToolRegistry::add(ToolSpec spec) {
    if (contains(spec.name)) throw InputError("duplicate tool name: " + spec.name);
    tools_.push_back(std::move(spec));
}

const ToolSpec* ToolRegistry::find(std::string_view name) const {
    for (const auto& t : tools_)
        if (t.name == name) return &t;
    return nullptr;
}

std::vector<std::string> ToolRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& t : tools_) out.push_back(t.name);
    return out;
}

std::string ToolRegistry::describe() const {
    std::string out;
    for (const auto& t : tools_) {
        out += "\nTool Name: " + t.name + "\nTool Description: " + t.description + "\n";
    }
    return out;
}

std::string ToolRegistry::tool_names_text() const { return "[" + text::join(names(), ", ") + "]"; }

const ToolCallRecord& ToolRegistry::run(std::string_view name, std::string_view input,
                                        ToolContext& ctx) const {
    ToolCallRecord rec;
    rec.tool_name = std::string(name);
    rec.tool_input = std::string(input);
    auto count = ctx.bus.candidates.size();
    if (const auto* spec = find(name)) {
        try {
            rec.output = spec->run(input, ctx);
        } catch (const std::exception& e) {
            rec.output = error_output(ctx.bus.candidates.size(), "ToolError", e.what());
        }
    } else {
        rec.output = error_output(count, "ToolError", "unknown tool '" + std::string(name) + "'");
    }
    record_step(ctx.bus, std::move(rec));
    return ctx.bus.tracker.back();
}

}  // namespace recagent
