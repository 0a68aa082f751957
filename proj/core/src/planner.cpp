#include "recagent/planner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "recagent/errors.hpp"
#include "recagent/llm.hpp"
#include "recagent/text.hpp"

namespace recagent {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::optional<Plan> parse_structured(std::string_view text) {
    auto try_array = [](std::string_view s) -> std::optional<Plan> {
        auto j = nlohmann::json::parse(s, nullptr, false);
        if (j.is_discarded() || !j.is_array() || j.empty()) return std::nullopt;
        Plan plan;
        for (const auto& step : j) {
            if (!step.is_object() || !step.contains("tool") || !step["tool"].is_string())
                return std::nullopt;
            PlanStep ps;
            ps.tool_name = step["tool"].get<std::string>();
            if (step.contains("input")) {
                const auto& in = step["input"];
                ps.tool_input = in.is_string() ? in.get<std::string>() : in.dump();
            }
            plan.steps.push_back(std::move(ps));
        }
        return plan;
    };
    auto s = text::trim(text);
    if (auto p = try_array(s)) return p;
    auto open = s.find('[');
    auto close = s.rfind(']');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open)
        return try_array(s.substr(open, close - open + 1));
    return std::nullopt;
}

// Index of the ')' closing the '(' at `open`, or npos.
std::size_t matching_paren(std::string_view s, std::size_t open, bool quote_aware) {
    int depth = 0;
    char quote = 0;
    for (std::size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (quote) {
            if (c == '\\' && i + 1 < s.size()) {
                ++i;
            } else if (c == quote) {
                quote = 0;
            }
            continue;
        }
        if (quote_aware && (c == '\'' || c == '"')) {
            quote = c;
        } else if (c == '(') {
            ++depth;
        } else if (c == ')') {
            if (--depth == 0) return i;
        }
    }
    return std::string_view::npos;
}

// "N." or "N)" at s[i]; returns the index after the marker or npos.
std::size_t step_marker(std::string_view s, std::size_t i) {
    std::size_t j = i;
    while (j < s.size() && is_digit(s[j])) ++j;
    if (j == i || j >= s.size() || (s[j] != '.' && s[j] != ')')) return std::string_view::npos;
    return j + 1;
}

std::optional<Plan> parse_numbered(std::string_view s, bool quote_aware) {
    // Skip any preamble up to the first step marker at a token boundary.
    std::size_t i = 0;
    for (;; ++i) {
        if (i >= s.size()) return std::nullopt;
        if ((i == 0 || is_space(s[i - 1]) || s[i - 1] == ':') &&
            step_marker(s, i) != std::string_view::npos)
            break;
    }

    Plan plan;
    while (true) {
        while (i < s.size() && (is_space(s[i]) || s[i] == ';')) ++i;
        if (i >= s.size()) break;
        auto after = step_marker(s, i);
        if (after == std::string_view::npos) {
            if (plan.steps.empty()) return std::nullopt;
            break;  // trailing prose after the plan
        }
        i = after;
        std::size_t name_end = i;
        while (name_end < s.size() && s[name_end] != '(' && s[name_end] != ';' && s[name_end] != '\n')
            ++name_end;
        PlanStep step;
        step.tool_name = text::trim_copy(s.substr(i, name_end - i));
        if (step.tool_name.empty()) return std::nullopt;
        i = name_end;
        if (i < s.size() && s[i] == '(') {
            auto close = matching_paren(s, i, quote_aware);
            if (close == std::string_view::npos) return std::nullopt;
            step.tool_input = text::trim_copy(s.substr(i + 1, close - i - 1));
            i = close + 1;
            while (i < s.size() && s[i] != '\n' && is_space(s[i])) ++i;
            if (i < s.size() && s[i] != ';' && s[i] != '\n' && !is_digit(s[i])) return std::nullopt;
        }
        plan.steps.push_back(std::move(step));
        if (plan.steps.size() > 64) return std::nullopt;
    }
    if (plan.steps.empty()) return std::nullopt;
    return plan;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Text after `marker` (last occurrence), cut at `stop` if present.
std::optional<std::string> section_after(std::string_view reply, std::string_view marker,
                                         std::string_view stop = {}) {
    auto pos = reply.rfind(marker);
    if (pos == std::string_view::npos) return std::nullopt;
    auto rest = reply.substr(pos + marker.size());
    if (!stop.empty()) {
        auto cut = rest.find(stop);
        if (cut != std::string_view::npos) rest = rest.substr(0, cut);
    }
    return text::trim_copy(rest);
}

bool is_filter_or_rank(std::string_view name) {
    return name == tool_names::sql_retrieval || name == tool_names::itemcf_retrieval ||
           name == tool_names::ranking;
}

}  // namespace

std::vector<std::string> Plan::tool_sequence() const {
    std::vector<std::string> out;
    for (const auto& s : steps) out.push_back(s.tool_name);
    return out;
}

void to_json(nlohmann::json& j, const Plan& p) {
    j = nlohmann::json::array();
    for (const auto& s : p.steps) j.push_back({{"tool", s.tool_name}, {"input", s.tool_input}});
}

void from_json(const nlohmann::json& j, Plan& p) {
    p.steps.clear();
    for (const auto& s : j)
        p.steps.push_back({s.at("tool").get<std::string>(), s.value("input", std::string{})});
}

Plan parse_plan(std::string_view text) {
    if (auto p = parse_structured(text)) return *p;
    if (auto p = parse_numbered(text, false)) return *p;
    if (auto p = parse_numbered(text, true)) return *p;
    throw PlanParseError("reply is neither a JSON step array nor a numbered tool list",
                         std::string(text));
}

std::string render_numbered(const Plan& plan) {
    std::string out;
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        if (i) out += "; ";
        out += std::to_string(i + 1) + ". " + plan.steps[i].tool_name + " (" +
               plan.steps[i].tool_input + ")";
    }
    return out;
}

std::string render_structured(const Plan& plan) { return nlohmann::json(plan).dump(); }

std::vector<std::string> validate_plan(const Plan& plan, const ToolRegistry& registry) {
    std::vector<std::string> v;
    const auto& steps = plan.steps;
    if (steps.size() > kMaxPlanSteps)
        v.push_back("plan has " + std::to_string(steps.size()) + " steps; at most " +
                    std::to_string(kMaxPlanSteps) + " are allowed");
    std::size_t rankings = 0;
    bool needs_fetch = false;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& name = steps[i].tool_name;
        if (!registry.contains(name)) {
            v.push_back("unknown tool '" + name + "' at step " + std::to_string(i + 1) +
                        "; available tools: " + registry.tool_names_text());
            continue;
        }
        if (name == tool_names::candidates_storing && i != 0)
            v.push_back(std::string(tool_names::candidates_storing) +
                        " must be the first step, found at step " + std::to_string(i + 1));
        if (name == tool_names::ranking) ++rankings;
        if (is_filter_or_rank(name)) needs_fetch = true;
    }
    if (rankings > 1) v.push_back(std::string(tool_names::ranking) + " is used more than once");
    if (needs_fetch && steps.back().tool_name != tool_names::candidate_fetching)
        v.push_back(std::string(tool_names::candidate_fetching) +
                    " must be the final step when retrieval or ranking tools are used");
    return v;
}

std::vector<double> HashingEmbedder::embed(std::string_view text) const {
    std::vector<double> v(kEmbeddingDim, 0.0);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        v[fnv1a(token) % kEmbeddingDim] += 1.0;
        token.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            token += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else
            flush();
    }
    flush();
    double norm = 0;
    for (double x : v) norm += x * x;
    if (norm > 0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

std::vector<double> embed_text(std::string_view text) { return HashingEmbedder{}.embed(text); }

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw InputError("embedding dimensions differ");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

DemoStore::DemoStore(std::shared_ptr<const Embedder> embedder)
    : embedder_(embedder ? std::move(embedder) : std::make_shared<HashingEmbedder>()) {}

std::uint32_t DemoStore::add(std::string intent, Plan plan) {
    Demonstration d;
    d.id = static_cast<std::uint32_t>(demos_.size());
    d.embedding = embedder_->embed(intent);
    d.intent = std::move(intent);
    d.plan = std::move(plan);
    demos_.push_back(std::move(d));
    return demos_.back().id;
}

std::vector<ScoredDemo> DemoStore::search(std::string_view query, std::size_t k) const {
    auto q = embedder_->embed(query);
    std::vector<ScoredDemo> scored;
    scored.reserve(demos_.size());
    for (const auto& d : demos_) scored.push_back({&d, cosine(q, d.embedding)});
    auto n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                      [](const ScoredDemo& a, const ScoredDemo& b) {
                          if (a.score != b.score) return a.score > b.score;
                          return a.demo->id < b.demo->id;
                      });
    scored.resize(n);
    return scored;
}

DemoStore DemoStore::load(std::istream& in, std::shared_ptr<const Embedder> embedder) {
    DemoStore store(std::move(embedder));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("intent") || !j.contains("plan"))
            throw InputError("demo store line " + std::to_string(line_no) +
                             ": expected {\"intent\", \"plan\"}");
        try {
            store.add(j["intent"].get<std::string>(), j["plan"].get<Plan>());
        } catch (const nlohmann::json::exception& e) {
            throw InputError("demo store line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return store;
}

DemoStore DemoStore::load_file(const std::string& path, std::shared_ptr<const Embedder> embedder) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open demo store " + path);
    return load(in, std::move(embedder));
}

void DemoStore::save(std::ostream& out) const {
    for (const auto& d : demos_)
        out << nlohmann::json{{"intent", d.intent}, {"plan", d.plan}}.dump() << '\n';
}

std::vector<Demonstration> retrieve_demos(const DemoStore& store, std::string_view intent,
                                          std::size_t k) {
    std::vector<Demonstration> out;
    for (const auto& s : store.search(intent, k)) out.push_back(*s.demo);
    return out;
}

std::string render_examples(const std::vector<Demonstration>& demos, ExampleStyle style) {
    std::string out;
    for (const auto& d : demos) {
        if (!out.empty()) out += '\n';
        if (style == ExampleStyle::request) {
            out += "Request: " + d.intent + "\nPlan: " + render_numbered(d.plan) + "\n";
        } else {
            out += "Human: " + d.intent + "\nQuestion: Do I need to use tools?\n";
            if (d.plan.empty()) {
                out += "Thought: No, I know the final answer.\n";
            } else {
                out += "Thought: Yes, I need to make tool using plans first and then use " +
                       std::string(kToolExecutorName) + " to execute.\nAction: " +
                       std::string(kToolExecutorName) + "\nAction Input: " +
                       render_numbered(d.plan) + "\n";
            }
        }
    }
    return out;
}

PromptVars base_prompt_vars(const ToolRegistry& registry, std::string_view item_noun) {
    PromptVars v;
    v["item"] = std::string(item_noun);
    v["tools_desc"] = registry.describe();
    v["tool_description"] = v["tools_desc"];
    v["tool_names"] = registry.tool_names_text();
    v["LookUpTool"] = std::string(tool_names::query);
    v["BufferStoreTool"] = std::string(tool_names::candidates_storing);
    v["HardFilterTool"] = std::string(tool_names::sql_retrieval);
    v["SoftFilterTool"] = std::string(tool_names::itemcf_retrieval);
    v["RankingTool"] = std::string(tool_names::ranking);
    v["MapTool"] = std::string(tool_names::candidate_fetching);
    v["tool_exe_name"] = std::string(kToolExecutorName);
    v["tool_exe_desc"] =
        "The tool executes the listed tools in order against the shared candidate buffer and "
        "returns the output of the last tool. Its input is a plan such as \"1. " +
        std::string(tool_names::sql_retrieval) + " (<SQL>); 2. " + std::string(tool_names::ranking) +
        " (<json>); 3. " + std::string(tool_names::candidate_fetching) +
        " (<number>)\". When no tool is needed, answer directly with the Final Answer format.";
    return v;
}

PlanDecision make_plan(ChatProvider& llm, const PlannerEnv& env, std::string_view input,
                       std::string_view history, std::string_view reflection) {
    PlanDecision d;
    auto demos = retrieve_demos(env.demos, input, env.demo_count);
    for (const auto& demo : demos) d.demo_intents.push_back(demo.intent);

    d.prompt_vars = base_prompt_vars(env.registry, env.item_noun);
    d.prompt_vars["table_info"] = env.table_info;
    d.prompt_vars["examples"] = render_examples(demos, ExampleStyle::agent);
    d.prompt_vars["history"] = std::string(history);
    d.prompt_vars["input"] = std::string(input);
    d.prompt_vars["reflection"] = std::string(reflection);
    d.prompt_vars["agent_scratchpad"] = "";

    d.raw_reply = llm.complete(render_prompt(TemplateId::task_description, d.prompt_vars));
    auto reply = text::trim(d.raw_reply);

    if (reply == kNoToolSentinel) return d;
    auto action_input = section_after(reply, "Action Input:", "Observation:");
    if (!action_input) {
        if (auto answer = section_after(reply, "Final Answer:")) {
            d.direct_answer = std::move(*answer);
            return d;
        }
    }
    d.plan_text = action_input ? *action_input : std::string(reply);
    if (d.plan_text == kNoToolSentinel) return d;
    try {
        d.plan = parse_plan(d.plan_text);
    } catch (const PlanParseError& e) {
        d.parse_error = e.what();
    }
    return d;
}

std::vector<ToolCallRecord> execute_plan(const Plan& plan, const ToolRegistry& registry,
                                         ToolContext& ctx) {
    std::vector<ToolCallRecord> records;
    for (const auto& step : plan.steps) {
        const auto& rec = registry.run(step.tool_name, step.tool_input, ctx);
        records.push_back(rec);
        if (rec.failed()) break;
    }
    return records;
}

}  // namespace recagent
