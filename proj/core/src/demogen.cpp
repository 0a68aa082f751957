#include "recagent/demogen.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>

#include "recagent/errors.hpp"
#include "recagent/llm.hpp"
#include "recagent/prompts.hpp"
#include "recagent/text.hpp"
#include "parallel.hpp"

namespace recagent {
namespace {

constexpr std::string_view kSyntheticDialoguePrompt =
    R"(You are helping build training data for a conversational {item} recommendation agent.
Below are example dialogues. Each one has a conversation history, the user's latest request and the tool using plan the agent should make for that request.
{dialogues}

Write one new dialogue in the same style that needs a different combination of tools.
Reply with ONLY a JSON object of the form:
{"history": [{"role": "user", "text": "..."}, {"role": "assistant", "text": "..."}], "request": "...", "plan": "1. <Tool Name> (<input>); 2. ..."})";

std::string strip_intent_prefix(std::string_view line) {
    auto s = text::trim(line);
    if (text::istarts_with(s, "request")) {
        auto colon = s.find(':');
        if (colon != std::string_view::npos && colon < 16) s = text::trim(s.substr(colon + 1));
    } else {
        std::size_t i = 0;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')' || s[i] == ':'))
            s = text::trim(s.substr(i + 1));
        else if (!s.empty() && (s[0] == '-' || s[0] == '*'))
            s = text::trim(s.substr(1));
    }
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return std::string(s);
}

std::string requests_text(const DemoStore& seeds) {
    std::string out;
    for (const auto& d : seeds.demos()) out += d.intent + "\n";
    return out;
}

GenRecord plan_intent(ChatProvider& llm, const DemogenEnv& env, GenStrategy strategy,
                      std::string intent) {
    GenRecord r;
    r.strategy = strategy;
    r.intent = std::move(intent);
    if (auto violation = placeholder_violation(r.intent, env.catalog)) {
        r.reject_reason = "placeholder violation: " + *violation;
        return r;
    }
    r.raw_reply = request_plan(llm, env, r.intent);
    auto reply = text::trim(r.raw_reply);
    if (reply != kNoToolSentinel) {
        try {
            r.plan = parse_plan(reply);
        } catch (const PlanParseError& e) {
            r.reject_reason = std::string("unparseable plan: ") + e.what();
            return r;
        }
    }
    auto violations = validate_plan(r.plan, env.registry);
    if (!violations.empty()) {
        r.reject_reason = "invalid plan: " + text::join(violations, "; ");
        return r;
    }
    r.accepted = true;
    return r;
}

std::string render_dialogue(const SyntheticDialogue& d) {
    return "History:\n" + render_turns(d.history) + "\nRequest: " + d.request +
           "\nPlan: " + render_numbered(d.plan) + "\n";
}

}  // namespace

std::string_view to_string(GenStrategy s) {
    switch (s) {
        case GenStrategy::input_first: return "input_first";
        case GenStrategy::output_first: return "output_first";
        case GenStrategy::agent_trace: return "agent_trace";
        case GenStrategy::synthetic_dialogue: return "synthetic_dialogue";
    }
    return {};
}

std::optional<GenStrategy> parse_gen_strategy(std::string_view name) {
    for (auto s : {GenStrategy::input_first, GenStrategy::output_first, GenStrategy::agent_trace,
                   GenStrategy::synthetic_dialogue}) {
        auto canonical = to_string(s);
        std::string dashed(canonical);
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        if (name == canonical || name == dashed) return s;
    }
    return std::nullopt;
}

void to_json(nlohmann::json& j, const GenRecord& r) {
    j = {{"strategy", to_string(r.strategy)},
         {"intent", r.intent},
         {"plan", r.plan},
         {"accepted", r.accepted},
         {"reject_reason", r.reject_reason ? nlohmann::json(*r.reject_reason) : nlohmann::json(nullptr)},
         {"raw_reply", r.raw_reply}};
}

std::vector<std::string> parse_intents(std::string_view reply) {
    std::vector<std::string> out;
    for (const auto& line : text::split(reply, '\n')) {
        auto s = strip_intent_prefix(line);
        if (s.empty() || s == "..." || text::iequals(s, "xxxx")) continue;
        out.push_back(std::move(s));
    }
    return out;
}

std::optional<std::string> placeholder_violation(std::string_view intent, const Catalog* catalog) {
    if (!catalog) return std::nullopt;
    for (const auto& item : catalog->items())
        if (text::icontains(intent, item.title)) return "mentions title '" + item.title + "'";
    return std::nullopt;
}

bool plans_consistent(const Plan& a, const Plan& b) { return a.tool_sequence() == b.tool_sequence(); }

std::string request_plan(ChatProvider& llm, const DemogenEnv& env, std::string_view intent) {
    auto vars = base_prompt_vars(env.registry, env.item_noun);
    vars["examples"] = render_examples(retrieve_demos(env.seeds, intent, env.demo_count),
                                       ExampleStyle::request);
    vars["request"] = std::string(intent);
    return llm.complete(render_prompt(TemplateId::plan_generation, vars));
}

std::vector<GenRecord> generate_input_first(ChatProvider& llm, const DemogenEnv& env, std::size_t n) {
    if (env.seeds.size() == 0) throw InputError("input-first generation needs seed demonstrations");
    if (n == 0) return {};
    PromptVars vars{{"item", env.item_noun},
                    {"requests", requests_text(env.seeds)},
                    {"number", std::to_string(n)}};
    auto intents = parse_intents(llm.complete(render_prompt(TemplateId::intent_input_first, vars)));
    if (intents.size() > n) intents.resize(n);

    std::vector<GenRecord> records(intents.size());
    detail::parallel_for(intents.size(), env.parallelism, [&](std::size_t i) {
        records[i] = plan_intent(llm, env, GenStrategy::input_first, intents[i]);
    });
    return records;
}

std::vector<GenRecord> generate_output_first(ChatProvider& llm, const DemogenEnv& env,
                                             const Plan& target, std::size_t n) {
    if (target.empty()) throw InputError("output-first generation needs a non-empty target plan");
    auto violations = validate_plan(target, env.registry);
    if (!violations.empty())
        throw InputError("target plan is invalid: " + text::join(violations, "; "));
    if (n == 0) return {};

    // Seed examples sharing the target's tool sequence come first.
    std::vector<Demonstration> examples;
    for (const auto& d : env.seeds.demos())
        if (examples.size() < env.demo_count && plans_consistent(d.plan, target)) examples.push_back(d);
    for (const auto& d : env.seeds.demos())
        if (examples.size() < env.demo_count && !plans_consistent(d.plan, target)) examples.push_back(d);

    auto vars = base_prompt_vars(env.registry, env.item_noun);
    vars["examples"] = render_examples(examples, ExampleStyle::request);
    vars["number"] = std::to_string(n);
    vars["plan"] = render_numbered(target);
    auto intents = parse_intents(llm.complete(render_prompt(TemplateId::intent_output_first, vars)));
    if (intents.size() > n) intents.resize(n);

    std::vector<GenRecord> records(intents.size());
    detail::parallel_for(intents.size(), env.parallelism, [&](std::size_t i) {
        auto r = plan_intent(llm, env, GenStrategy::output_first, intents[i]);
        if (r.accepted && !plans_consistent(r.plan, target)) {
            r.accepted = false;
            r.reject_reason = "inconsistent: re-plan uses [" + text::join(r.plan.tool_sequence(), ", ") +
                              "], target uses [" + text::join(target.tool_sequence(), ", ") + "]";
        }
        records[i] = std::move(r);
    });
    return records;
}

std::size_t append_accepted(const std::vector<GenRecord>& records, DemoStore& store) {
    std::size_t added = 0;
    for (const auto& r : records) {
        if (!r.accepted) continue;
        store.add(r.intent, r.plan);
        ++added;
    }
    return added;
}

void to_json(nlohmann::json& j, const SyntheticDialogue& d) {
    j = {{"history", d.history}, {"request", d.request}, {"plan", d.plan}};
}

void from_json(const nlohmann::json& j, SyntheticDialogue& d) {
    d.history = j.value("history", std::vector<DialogueTurn>{});
    d.request = j.at("request").get<std::string>();
    const auto& plan = j.at("plan");
    d.plan = plan.is_string() ? parse_plan(plan.get<std::string>()) : plan.get<Plan>();
}

std::vector<SyntheticDialogue> read_synthetic_dialogues(std::istream& in) {
    std::vector<SyntheticDialogue> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<SyntheticDialogue>());
        } catch (const std::exception& e) {
            throw InputError("synthetic dialogue line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<SyntheticDialogue> generate_synthetic_dialogues(ChatProvider& llm,
                                                            const std::vector<SyntheticDialogue>& fixtures,
                                                            std::size_t iterations, std::mt19937_64& rng,
                                                            std::string_view item_noun) {
    if (fixtures.size() < 3) throw InputError("synthetic generation needs at least 3 fixture dialogues");
    std::vector<SyntheticDialogue> out;
    std::vector<std::size_t> idx(fixtures.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t it = 0; it < iterations; ++it) {
        std::shuffle(idx.begin(), idx.end(), rng);
        std::string shown;
        for (std::size_t k = 0; k < 3; ++k) shown += "\n" + render_dialogue(fixtures[idx[k]]);
        auto reply = llm.complete(
            render_template(kSyntheticDialoguePrompt, {{"item", std::string(item_noun)}, {"dialogues", shown}}));
        auto open = reply.find('{');
        auto close = reply.rfind('}');
        if (open == std::string::npos || close == std::string::npos || close < open) continue;
        try {
            out.push_back(nlohmann::json::parse(reply.substr(open, close - open + 1)).get<SyntheticDialogue>());
        } catch (const std::exception&) {
            continue;
        }
    }
    return out;
}

nlohmann::json ExportReport::counts() const {
    return {{"pairs", pairs.size()},
            {"agent_trace", from_traces},
            {"synthetic_dialogue", from_synthetic},
            {"skipped_chit_chat", skipped_chit_chat},
            {"skipped_unresolved", skipped_unresolved}};
}

ExportReport export_recllama(const std::vector<TurnResult>& traces,
                             const std::vector<SyntheticDialogue>& synthetic, const PlannerEnv& env) {
    ExportReport report;
    for (const auto& t : traces) {
        if (t.attempts.empty() || t.gave_up) {
            ++report.skipped_unresolved;
            continue;
        }
        const auto& a = t.final_attempt();
        if (!a.used_tools()) {
            ++report.skipped_chit_chat;
            continue;
        }
        report.pairs.push_back({render_prompt(TemplateId::task_description, a.prompt_vars),
                                a.raw_plan_reply, GenStrategy::agent_trace});
        ++report.from_traces;
    }
    for (const auto& d : synthetic) {
        auto vars = base_prompt_vars(env.registry, env.item_noun);
        vars["table_info"] = env.table_info;
        vars["examples"] = render_examples(retrieve_demos(env.demos, d.request, env.demo_count),
                                           ExampleStyle::agent);
        vars["history"] = render_turns(d.history);
        vars["input"] = d.request;
        vars["reflection"] = "";
        vars["agent_scratchpad"] = "";
        std::string output = "Question: Do I need to use tools?\nThought: Yes, I need to make tool using "
                             "plans first and then use " + std::string(kToolExecutorName) +
                             " to execute.\nAction: " + std::string(kToolExecutorName) +
                             "\nAction Input: " + render_numbered(d.plan);
        report.pairs.push_back({render_prompt(TemplateId::task_description, vars), std::move(output),
                                GenStrategy::synthetic_dialogue});
        ++report.from_synthetic;
    }
    return report;
}

std::size_t write_pairs(std::ostream& out, const std::vector<InstructionPlanPair>& pairs) {
    for (const auto& p : pairs)
        out << nlohmann::json{{"instruction", p.instruction}, {"output", p.output}}.dump() << '\n';
    return pairs.size();
}

}  // namespace recagent
