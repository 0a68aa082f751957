#include "recagent/turn.hpp"

#include <ostream>
#include <spdlog/spdlog.h>

#include "recagent/errors.hpp"
#include "recagent/llm.hpp"
#include "recagent/text.hpp"

namespace recagent {
namespace {

std::string reflection_text(const std::vector<std::string>& feedback) {
    if (feedback.empty()) return {};
    std::string out =
        "Your previous attempts to handle this request were judged unsatisfactory. Take this "
        "feedback into account:";
    for (std::size_t i = 0; i < feedback.size(); ++i)
        out += "\n" + std::to_string(i + 1) + ". " + feedback[i];
    return out;
}

std::string extract_final_answer(std::string_view reply) {
    constexpr std::string_view marker = "Final Answer:";
    auto pos = reply.rfind(marker);
    if (pos == std::string_view::npos) return text::trim_copy(reply);
    return text::trim_copy(reply.substr(pos + marker.size()));
}

std::string respond_scratchpad(const Attempt& a) {
    std::string s = "Question: Do I need to use tools?\n";
    if (a.plan.empty()) return s + "Thought: No, I know the final answer.\n";
    s += "Thought: Yes, I need to make tool using plans first and then use " +
         std::string(kToolExecutorName) + " to execute.\nAction: " + std::string(kToolExecutorName) +
         "\nAction Input: " + render_numbered(a.plan) + "\nObservation: ";
    s += a.records.empty() ? std::string("no tool output") : a.records.back().output.text;
    return s + "\n";
}

Judgment synthetic_negative(std::string feedback) {
    Judgment j;
    j.verdict = Verdict::negative;
    j.feedback = std::move(feedback);
    j.synthetic = true;
    return j;
}

}  // namespace

std::shared_ptr<AgentDeps> make_agent_deps(std::shared_ptr<const Catalog> catalog,
                                           std::shared_ptr<const SimilarityModel> model,
                                           std::shared_ptr<const DemoStore> demos,
                                           std::shared_ptr<ChatProvider> actor,
                                           std::shared_ptr<ChatProvider> critic,
                                           std::shared_ptr<ChatProvider> profile,
                                           AgentConfig config) {
    auto deps = std::make_shared<AgentDeps>();
    deps->ranker = std::make_shared<ItemCfRanker>(*model, *catalog);
    deps->registry = std::make_shared<ToolRegistry>(ToolRegistry::standard(config.item_noun));
    deps->catalog = std::move(catalog);
    deps->model = std::move(model);
    deps->demos = demos ? std::move(demos) : std::make_shared<DemoStore>();
    deps->actor = std::move(actor);
    deps->critic = std::move(critic);
    deps->profile = std::move(profile);
    deps->config = std::move(config);
    return deps;
}

Judgment parse_judgment(std::string_view reply) {
    Judgment j;
    auto t = text::trim(reply);
    if (text::istarts_with(t, "yes")) return j;
    if (text::istarts_with(t, "no")) {
        j.verdict = Verdict::negative;
        j.feedback = std::string(t);
        return j;
    }
    j.warning = "critic reply starts with neither Yes nor No; treated as positive";
    return j;
}

std::string critic_plan_text(const Plan& plan, const std::vector<ToolCallRecord>& records) {
    if (plan.empty()) return "No tools were used.";
    std::string s = render_numbered(plan);
    for (std::size_t i = 0; i < records.size(); ++i)
        s += "\nStep " + std::to_string(i + 1) + ": " + records[i].summary();
    return s;
}

Judgment reflect(ChatProvider& critic, const CriticInput& in) {
    PromptVars vars{{"item", in.item_noun},
                    {"tool_description", in.tools_desc},
                    {"chat_history", in.chat_history},
                    {"request", in.request},
                    {"plan", in.plan},
                    {"answer", in.answer},
                    {"HardFilterTool", std::string(tool_names::sql_retrieval)},
                    {"SoftFilterTool", std::string(tool_names::itemcf_retrieval)},
                    {"RankingTool", std::string(tool_names::ranking)}};
    auto j = parse_judgment(critic.complete(render_prompt(TemplateId::critic, vars)));
    if (j.warning) spdlog::warn("{}", *j.warning);
    return j;
}

TurnResult run_turn(const AgentDeps& deps, DialogueContext& context, UserProfile& short_term,
                    std::string_view user_text, std::size_t turn_id) {
    if (text::trim(user_text).empty()) throw InputError("user message is empty");
    const auto& cfg = deps.config;
    TurnResult result;
    result.turn_id = turn_id;
    result.user_text = std::string(user_text);

    const auto history = context.render_history();
    const auto profile = compose_profile(context.long_term_profile(), short_term);
    PlannerEnv env{*deps.registry, *deps.demos, deps.catalog->table_info(), cfg.item_noun,
                   cfg.demo_count};
    std::vector<std::string> feedback;

    try {
        for (std::size_t n = 0; n <= cfg.max_rechains; ++n) {
            Attempt a;
            CandidateBus bus = reset_bus(*deps.catalog);
            a.initial_candidates = bus.candidates.size();

            auto decision = make_plan(*deps.actor, env, user_text, history, reflection_text(feedback));
            ++result.actor_calls;
            a.plan = std::move(decision.plan);
            a.raw_plan_reply = std::move(decision.raw_reply);
            a.plan_text = std::move(decision.plan_text);
            a.prompt_vars = std::move(decision.prompt_vars);
            a.parse_error = std::move(decision.parse_error);

            if (a.parse_error) {
                a.judgment = synthetic_negative(
                    "No. The tool using plan could not be parsed (" + *a.parse_error +
                    "). You should give the plan as a numbered list such as \"1. " +
                    std::string(tool_names::sql_retrieval) + " (<conditions>); 2. " +
                    std::string(tool_names::candidate_fetching) + " (5)\".");
            } else if (a.violations = validate_plan(a.plan, *deps.registry); !a.violations.empty()) {
                a.judgment = synthetic_negative("No. The tool using plan is not valid: " +
                                                text::join(a.violations, "; ") +
                                                ". You should fix the plan.");
            }
            if (!a.judgment.positive()) {
                feedback.push_back(a.judgment.feedback);
                result.attempts.push_back(std::move(a));
                continue;
            }

            if (a.plan.empty() && decision.direct_answer) {
                a.direct_answer = true;
                a.response = *decision.direct_answer;
            } else {
                ToolContext ctx{*deps.catalog, *deps.model, *deps.ranker, bus, profile};
                a.records = execute_plan(a.plan, *deps.registry, ctx);
                auto vars = a.prompt_vars;
                vars["agent_scratchpad"] = respond_scratchpad(a);
                a.response = extract_final_answer(
                    deps.actor->complete(render_prompt(TemplateId::task_description, vars)));
                ++result.actor_calls;
            }

            CriticInput ci{cfg.item_noun,
                           deps.registry->describe(),
                           history,
                           std::string(user_text),
                           critic_plan_text(a.plan, a.records),
                           a.response};
            a.judgment = reflect(*deps.critic, ci);
            ++result.critic_calls;
            if (a.judgment.warning) result.warnings.push_back(*a.judgment.warning);

            bool done = a.judgment.positive();
            if (!done) feedback.push_back(a.judgment.feedback);
            result.attempts.push_back(std::move(a));
            if (done) break;
        }
    } catch (const ProviderError& e) {
        throw TurnError(std::string("provider failure: ") + e.what());
    }

    if (result.attempts.back().judgment.positive()) {
        result.response = result.attempts.back().response;
    } else {
        result.gave_up = true;
        std::string best;
        for (auto it = result.attempts.rbegin(); it != result.attempts.rend(); ++it) {
            if (!it->response.empty()) {
                best = it->response;
                break;
            }
        }
        result.response = best.empty() ? std::string(kGiveUpApology)
                                       : best + "\n" + std::string(kGiveUpApology);
        spdlog::warn("turn {}: giving up after {} attempts", turn_id, result.attempts.size());
        result.warnings.push_back("gave up after " + std::to_string(result.attempts.size()) +
                                  " attempts");
    }

    context.append("user", std::string(user_text));
    context.append("assistant", result.response);
    if (deps.profile) {
        auto extracted = extract_profile(*deps.profile, context.turns(), cfg.item_noun);
        result.profile_calls += extracted.calls;
        if (extracted.warning) result.warnings.push_back(*extracted.warning);
        short_term = std::move(extracted.profile);
    }
    result.profile_calls += context.fold_if_needed(deps.profile.get(), cfg.item_noun);
    return result;
}

Session::Session(std::shared_ptr<const AgentDeps> deps, std::string id)
    : deps_(std::move(deps)),
      id_(std::move(id)),
      context_(deps_->config.char_budget, deps_->config.keep_recent) {}

TurnResult Session::run_turn(std::string_view user_text) {
    std::unique_lock turn_lock(turn_mutex_, std::try_to_lock);
    if (!turn_lock.owns_lock()) throw SessionBusy("a turn is already running on session " + id_);

    DialogueContext context;
    UserProfile short_term;
    std::size_t turn_id;
    {
        std::lock_guard lock(data_mutex_);
        context = context_;
        short_term = short_term_;
        turn_id = traces_.size();
    }
    auto result = recagent::run_turn(*deps_, context, short_term, user_text, turn_id);

    std::lock_guard lock(data_mutex_);
    context_ = std::move(context);
    short_term_ = std::move(short_term);
    traces_.push_back(result);
    if (log_) {
        SessionLogEntry user{"user", result.user_text, context_.long_term_profile(), short_term_, {}};
        SessionLogEntry assistant{"assistant", result.response, context_.long_term_profile(),
                                  short_term_, result.final_attempt().records};
        append_session_log(*log_, user);
        append_session_log(*log_, assistant);
        log_->flush();
    }
    return result;
}

void Session::load_transcript(const std::vector<DialogueTurn>& turns) {
    std::unique_lock turn_lock(turn_mutex_, std::try_to_lock);
    if (!turn_lock.owns_lock()) throw SessionBusy("a turn is already running on session " + id_);
    std::lock_guard lock(data_mutex_);
    try {
        context_.load_transcript(turns, deps_->profile.get(), deps_->config.item_noun);
    } catch (const ProviderError& e) {
        throw TurnError(std::string("provider failure: ") + e.what());
    }
}

std::vector<DialogueTurn> Session::history() const {
    std::lock_guard lock(data_mutex_);
    return context_.turns();
}

UserProfile Session::long_term_profile() const {
    std::lock_guard lock(data_mutex_);
    return context_.long_term_profile();
}

UserProfile Session::short_term_profile() const {
    std::lock_guard lock(data_mutex_);
    return short_term_;
}

std::size_t Session::turn_count() const {
    std::lock_guard lock(data_mutex_);
    return traces_.size();
}

std::optional<TurnResult> Session::trace(std::size_t turn_id) const {
    std::lock_guard lock(data_mutex_);
    if (turn_id >= traces_.size()) return std::nullopt;
    return traces_[turn_id];
}

void Session::set_log(std::ostream* log) {
    std::lock_guard lock(data_mutex_);
    log_ = log;
}

void to_json(nlohmann::json& j, const Judgment& v) {
    j = {{"verdict", v.positive() ? "positive" : "negative"},
         {"feedback", v.feedback},
         {"synthetic", v.synthetic}};
    if (v.warning) j["warning"] = *v.warning;
}

void from_json(const nlohmann::json& j, Judgment& v) {
    v.verdict = j.at("verdict").get<std::string>() == "negative" ? Verdict::negative
                                                                   : Verdict::positive;
    v.feedback = j.value("feedback", std::string{});
    v.synthetic = j.value("synthetic", false);
    if (j.contains("warning")) v.warning = j["warning"].get<std::string>();
}

void to_json(nlohmann::json& j, const Attempt& a) {
    j = {{"plan", a.plan},
         {"raw_plan_reply", a.raw_plan_reply},
         {"plan_text", a.plan_text},
         {"prompt_vars", a.prompt_vars},
         {"parse_error", a.parse_error ? nlohmann::json(*a.parse_error) : nlohmann::json(nullptr)},
         {"violations", a.violations},
         {"initial_candidates", a.initial_candidates},
         {"records", a.records},
         {"response", a.response},
         {"direct_answer", a.direct_answer},
         {"judgment", a.judgment}};
}

void from_json(const nlohmann::json& j, Attempt& a) {
    a.plan = j.at("plan").get<Plan>();
    a.raw_plan_reply = j.value("raw_plan_reply", std::string{});
    a.plan_text = j.value("plan_text", std::string{});
    a.prompt_vars = j.value("prompt_vars", PromptVars{});
    if (j.contains("parse_error") && j["parse_error"].is_string())
        a.parse_error = j["parse_error"].get<std::string>();
    a.violations = j.value("violations", std::vector<std::string>{});
    a.initial_candidates = j.value("initial_candidates", std::size_t{0});
    a.records = j.value("records", std::vector<ToolCallRecord>{});
    a.response = j.value("response", std::string{});
    a.direct_answer = j.value("direct_answer", false);
    a.judgment = j.at("judgment").get<Judgment>();
}

void to_json(nlohmann::json& j, const TurnResult& t) {
    j = {{"trace_version", kTraceVersion},
         {"turn_id", t.turn_id},
         {"user_text", t.user_text},
         {"response", t.response},
         {"attempts", t.attempts},
         {"actor_calls", t.actor_calls},
         {"critic_calls", t.critic_calls},
         {"profile_calls", t.profile_calls},
         {"gave_up", t.gave_up},
         {"warnings", t.warnings}};
}

void from_json(const nlohmann::json& j, TurnResult& t) {
    auto version = j.value("trace_version", 0);
    if (version != kTraceVersion)
        throw InputError("unsupported trace_version " + std::to_string(version));
    t.turn_id = j.value("turn_id", std::size_t{0});
    t.user_text = j.value("user_text", std::string{});
    t.response = j.value("response", std::string{});
    t.attempts = j.at("attempts").get<std::vector<Attempt>>();
    t.actor_calls = j.value("actor_calls", std::size_t{0});
    t.critic_calls = j.value("critic_calls", std::size_t{0});
    t.profile_calls = j.value("profile_calls", std::size_t{0});
    t.gave_up = j.value("gave_up", false);
    t.warnings = j.value("warnings", std::vector<std::string>{});
}

}  // namespace recagent
