#pragma once

#include <iosfwd>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "recagent/catalog.hpp"
#include "recagent/memory.hpp"
#include "recagent/planner.hpp"
#include "recagent/recmodels.hpp"
#include "recagent/toolkit.hpp"

namespace recagent {

class ChatProvider;

inline constexpr int kTraceVersion = 1;
inline constexpr std::string_view kGiveUpApology =
    "Sorry, I could not fully satisfy this request. Could you tell me a bit more about what you "
    "are looking for?";

struct AgentConfig {
    std::string item_noun = "game";
    std::size_t max_rechains = 2;
    std::size_t demo_count = kDefaultDemoCount;
    std::size_t char_budget = 12000;
    std::size_t keep_recent = 10;
};

/// Shared, read-only agent resources. Sessions hold a pointer to one of these.
struct AgentDeps {
    std::shared_ptr<const Catalog> catalog;
    std::shared_ptr<const SimilarityModel> model;
    std::shared_ptr<const Ranker> ranker;
    std::shared_ptr<const ToolRegistry> registry;
    std::shared_ptr<const DemoStore> demos;
    std::shared_ptr<ChatProvider> actor;
    std::shared_ptr<ChatProvider> critic;
    std::shared_ptr<ChatProvider> profile;  // optional; null skips profile extraction
    AgentConfig config;
};

/// Builds the standard registry and an ItemCF ranker around catalog and model.
std::shared_ptr<AgentDeps> make_agent_deps(std::shared_ptr<const Catalog> catalog,
                                           std::shared_ptr<const SimilarityModel> model,
                                           std::shared_ptr<const DemoStore> demos,
                                           std::shared_ptr<ChatProvider> actor,
                                           std::shared_ptr<ChatProvider> critic,
                                           std::shared_ptr<ChatProvider> profile = nullptr,
                                           AgentConfig config = {});

enum class Verdict { positive, negative };

struct Judgment {
    Verdict verdict = Verdict::positive;
    std::string feedback;  // empty when positive
    bool synthetic = false;  // produced locally from a parse error or plan violation
    std::optional<std::string> warning;

    bool positive() const noexcept { return verdict == Verdict::positive; }
};

/// "Yes..." -> positive, "No..." -> negative with the whole reply as
/// feedback, anything else -> positive with a warning.
Judgment parse_judgment(std::string_view reply);

struct CriticInput {
    std::string item_noun = "game";
    std::string tools_desc;
    std::string chat_history;
    std::string request;
    std::string plan;  // numbered plan followed by the tracker summaries
    std::string answer;
};

/// One critic call. ProviderError propagates.
Judgment reflect(ChatProvider& critic, const CriticInput& input);

/// {plan} text for the critic: the numbered plan plus one tracker summary per record.
std::string critic_plan_text(const Plan& plan, const std::vector<ToolCallRecord>& records);

struct Attempt {
    Plan plan;
    std::string raw_plan_reply;
    std::string plan_text;
    PromptVars prompt_vars;  // what the plan prompt was rendered with
    std::optional<std::string> parse_error;
    std::vector<std::string> violations;
    std::size_t initial_candidates = 0;
    std::vector<ToolCallRecord> records;
    std::string response;
    bool direct_answer = false;
    Judgment judgment;

    /// True when tools actually ran for this attempt.
    bool used_tools() const noexcept { return !plan.empty() && !parse_error && violations.empty(); }
};

struct TurnResult {
    std::size_t turn_id = 0;
    std::string user_text;
    std::string response;
    std::vector<Attempt> attempts;
    std::size_t actor_calls = 0;
    std::size_t critic_calls = 0;
    std::size_t profile_calls = 0;
    bool gave_up = false;
    std::vector<std::string> warnings;

    const Attempt& final_attempt() const { return attempts.back(); }
};

void to_json(nlohmann::json& j, const Judgment& v);
void from_json(const nlohmann::json& j, Judgment& v);
void to_json(nlohmann::json& j, const Attempt& a);
void from_json(const nlohmann::json& j, Attempt& a);
void to_json(nlohmann::json& j, const TurnResult& t);
void from_json(const nlohmann::json& j, TurnResult& t);

/// One conversation. Turns on the same session are serialized: a second
/// concurrent run_turn throws SessionBusy instead of waiting.
class Session {
public:
    explicit Session(std::shared_ptr<const AgentDeps> deps, std::string id = {});

    const std::string& id() const noexcept { return id_; }

    /// Throws SessionBusy, TurnError (provider failure) or InputError (empty text).
    TurnResult run_turn(std::string_view user_text);

    /// Replays a prior transcript into the context (long-term memory fold).
    void load_transcript(const std::vector<DialogueTurn>& turns);

    std::vector<DialogueTurn> history() const;
    UserProfile long_term_profile() const;
    UserProfile short_term_profile() const;
    std::size_t turn_count() const;
    std::optional<TurnResult> trace(std::size_t turn_id) const;

    /// When set, every finished turn appends a user and an assistant line.
    void set_log(std::ostream* log);

private:
    std::shared_ptr<const AgentDeps> deps_;
    std::string id_;
    std::mutex turn_mutex_;
    mutable std::mutex data_mutex_;
    DialogueContext context_;
    UserProfile short_term_;
    std::vector<TurnResult> traces_;
    std::ostream* log_ = nullptr;
};

/// Runs one turn against explicit state; Session::run_turn wraps this.
TurnResult run_turn(const AgentDeps& deps, DialogueContext& context, UserProfile& short_term,
                    std::string_view user_text, std::size_t turn_id = 0);

}  // namespace recagent
