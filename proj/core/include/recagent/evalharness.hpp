#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "recagent/catalog.hpp"
#include "recagent/memory.hpp"
#include "recagent/turn.hpp"

namespace recagent {

class ChatProvider;

enum class SimSetting { session_wise, long_chat, long_context };
enum class OneTurnTask { retrieval, ranking };
enum class BaselineMode { random, popularity };

std::string_view to_string(SimSetting s);
std::string_view to_string(OneTurnTask t);
std::string_view to_string(BaselineMode m);
/// Accepts "session", "session-wise", "long-chat", "long-context" and the
/// underscore spellings.
std::optional<SimSetting> parse_sim_setting(std::string_view name);
std::optional<OneTurnTask> parse_one_turn_task(std::string_view name);
std::optional<BaselineMode> parse_baseline_mode(std::string_view name);

inline constexpr std::size_t kLongChatMaxTurns = 50;
inline constexpr std::size_t kLongChatPhaseRounds = 5;
inline constexpr std::size_t kRankingCandidates = 20;
inline constexpr std::string_view kEndToken = "<END>";

/// A user's interaction history with the last item held out as the target.
struct SimCase {
    UserId user = 0;
    ItemId target = 0;
    std::vector<ItemId> history;
};

/// Users with at least two interactions, sampled with `rng`, at most `count`.
std::vector<SimCase> make_sim_cases(const Catalog& catalog, std::size_t count, std::mt19937_64& rng);

struct SimOptions {
    SimSetting setting = SimSetting::session_wise;
    std::size_t max_turns = 5;  // long_chat always uses kLongChatMaxTurns
    /// long_context: transcript replayed into memory before the first turn.
    /// Empty means synthesize one from the case history.
    std::vector<DialogueTurn> prior_transcript;
};

struct SimSession {
    SimCase target;
    SimSetting setting = SimSetting::session_wise;
    std::size_t max_turns = 0;
    std::vector<DialogueTurn> transcript;  // "user" = simulator, "assistant" = agent
    bool hit = false;
    std::size_t turns_used = 0;
    std::optional<std::string> error;
    UserProfile long_term_before_first_turn;
};

void to_json(nlohmann::json& j, const SimSession& s);

/// Catalog facts about an item for the simulator's {target_item_info}.
std::string item_info(const Item& item);

/// Deterministic multi-day transcript built from the history titles,
/// repeated until it renders to more than `min_chars` characters.
std::vector<DialogueTurn> synthesize_history_transcript(const Catalog& catalog,
                                                        const std::vector<ItemId>& history,
                                                        std::size_t min_chars);

/// Case-insensitive title substring in an agent message.
bool mentions_title(std::string_view message, std::string_view title);

/// Runs one simulated conversation on a fresh session. Provider and turn
/// failures end the session as a miss with `error` set.
SimSession simulate_session(std::shared_ptr<const AgentDeps> deps, ChatProvider& simulator,
                            const SimCase& c, const SimOptions& options);

/// Transcript rendering used for golden files: "[N] User: ..." / "[N] Agent: ...".
std::string render_transcript(const SimSession& s);

struct SessionMetrics {
    double hit_at_k = 0;
    double at_k = 0;
    std::size_t sessions = 0;
};

/// Misses count as k+1 in AT@k. Throws InputError on an empty list.
SessionMetrics session_metrics(const std::vector<SimSession>& sessions, std::size_t k);

struct OneTurnCase {
    OneTurnTask task = OneTurnTask::retrieval;
    UserId user = 0;
    ItemId target = 0;
    std::vector<ItemId> history;
    std::vector<ItemId> candidates;  // ranking only: 19 negatives + target, shuffled
    std::vector<DialogueTurn> conversation;  // last entry is the user's final request
};

void to_json(nlohmann::json& j, const OneTurnCase& c);
void from_json(const nlohmann::json& j, OneTurnCase& c);

/// Ranking candidates: min(19, available) negatives sampled uniformly from
/// items outside history and target, plus the target, shuffled.
std::vector<ItemId> sample_ranking_candidates(const Catalog& catalog, ItemId target,
                                              const std::vector<ItemId>& history, std::mt19937_64& rng);

/// Builds a one-turn conversation with one provider call. Retrieval ends with
/// "Please give me k recommendations based on the chat history."; ranking
/// ends with the generated question naming all candidates.
/// ProviderError propagates; an unparseable reply throws InputError.
OneTurnCase gen_one_turn(ChatProvider& llm, const Catalog& catalog, const SimCase& c,
                         OneTurnTask task, std::size_t k, std::mt19937_64& rng,
                         std::string_view item_noun = "game");

/// Titles mentioned in `reply`, by position of first mention; a title that
/// only occurs inside a longer mentioned title is not counted. When
/// `restrict_to` is non-empty only those items are considered.
std::vector<std::string> extract_titles(std::string_view reply, const Catalog& catalog,
                                        const std::vector<ItemId>& restrict_to = {});

/// Per-case scores. Retrieval: 1 if the positive is within the first k.
/// Ranking: 1/log2(rank+1) over the order with unmatched titles dropped,
/// 0 when the positive is absent or beyond k.
double recall_at_k(const std::vector<std::string>& returned, std::string_view positive, std::size_t k);
double ndcg_at_k(const std::vector<std::string>& returned, std::string_view positive,
                 const std::vector<std::string>& candidates, std::size_t k);

struct OneTurnResponse {
    std::vector<std::string> titles;
    std::string positive;
    std::vector<std::string> candidates;  // ranking only
};

/// Mean recall@k (retrieval) or NDCG@k (ranking). Empty input gives 0.
double one_turn_metrics(const std::vector<OneTurnResponse>& responses, OneTurnTask task, std::size_t k);

struct EvalReport {
    std::map<std::string, double> metrics;
    std::vector<nlohmann::json> rows;
    nlohmann::json config = nlohmann::json::object();

    nlohmann::json to_json() const;
    std::string to_text() const;
    void write_rows(std::ostream& out) const;
};

/// Random or popularity baseline. Retrieval samples k items per trial
/// (uniformly, or popularity-weighted without replacement); ranking orders
/// the candidates uniformly at random or by popularity with random ties.
/// Trial targets come from the test split, or uniformly from the catalog
/// when it has none. Throws InputError when trials is 0.
EvalReport baseline(BaselineMode mode, OneTurnTask task, const Catalog& catalog, std::size_t k,
                    std::size_t trials, std::uint64_t seed);

/// Simulated sessions for every case; metrics computed at k = max_turns.
EvalReport run_simulator_eval(std::shared_ptr<const AgentDeps> deps, ChatProvider& simulator,
                              const std::vector<SimCase>& cases, const SimOptions& options,
                              std::size_t parallelism = 1);

/// Feeds each case's conversation to a fresh session and scores the reply.
EvalReport run_one_turn_eval(std::shared_ptr<const AgentDeps> deps, const std::vector<OneTurnCase>& cases,
                             std::size_t k);

}  // namespace recagent
