#pragma once

#include <cstdint>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "recagent/catalog.hpp"

namespace recagent {

class ChatProvider;

/// The o_k part of a tracker triplet.
struct ToolOutput {
    std::size_t candidates_before = 0;
    std::size_t candidates_after = 0;
    std::vector<std::string> seeds;  // resolved seed titles (ItemCF step)
    std::string conditions;          // effective SQL / schema / requested count
    std::vector<std::string> items;  // titles surfaced by the fetching tool
    std::string text;                // observation text
    std::vector<std::string> notes;  // non-fatal warnings
    std::optional<std::string> error;
    std::string error_kind;  // "ToolError" | "PolicyError" | "SqlSyntaxError"

    friend bool operator==(const ToolOutput&, const ToolOutput&) = default;
};

/// One tracker entry (f_k, i_k, o_k).
struct ToolCallRecord {
    std::string tool_name;
    std::string tool_input;
    ToolOutput output;

    bool failed() const noexcept { return output.error.has_value(); }
    /// One-line summary shown to the critic.
    std::string summary() const;

    friend bool operator==(const ToolCallRecord&, const ToolCallRecord&) = default;
};

void to_json(nlohmann::json& j, const ToolOutput& o);
void from_json(const nlohmann::json& j, ToolOutput& o);
void to_json(nlohmann::json& j, const ToolCallRecord& r);
void from_json(const nlohmann::json& j, ToolCallRecord& r);

/// Per-turn candidate memory: the data bus plus the append-only tracker.
struct CandidateBus {
    std::vector<ItemId> candidates;
    std::vector<ToolCallRecord> tracker;
};

/// All item ids ascending, empty tracker.
CandidateBus reset_bus(const Catalog& catalog);
void record_step(CandidateBus& bus, ToolCallRecord record);

struct UserProfile {
    std::vector<std::string> like;
    std::vector<std::string> dislike;
    std::vector<std::string> expect;

    bool empty() const noexcept { return like.empty() && dislike.empty() && expect.empty(); }
    friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

void to_json(nlohmann::json& j, const UserProfile& p);
void from_json(const nlohmann::json& j, UserProfile& p);

/// Case-insensitive union, new entries appended; an entry in fresh.like
/// leaves existing.dislike and vice versa. The result has no expect.
UserProfile merge_long_term(const UserProfile& existing, const UserProfile& fresh);
/// Same union as merge_long_term, but expect comes from the short-term side.
UserProfile compose_profile(const UserProfile& long_term, const UserProfile& short_term);

struct DialogueTurn {
    std::string role;  // "user" | "assistant"
    std::string text;

    friend bool operator==(const DialogueTurn&, const DialogueTurn&) = default;
};

void to_json(nlohmann::json& j, const DialogueTurn& t);
void from_json(const nlohmann::json& j, DialogueTurn& t);

std::string render_turns(std::span<const DialogueTurn> turns);

struct ProfileExtraction {
    UserProfile profile;
    std::optional<std::string> warning;
    std::size_t calls = 0;
};

/// One provider call with the profile_extraction template; an unparseable
/// reply gets one repair retry, then an empty profile with a warning.
/// Throws InputError on an empty segment and TurnError on provider failure.
ProfileExtraction extract_profile(ChatProvider& llm, std::span<const DialogueTurn> segment,
                                  std::string_view item_noun = "game");

/// Parses the strict three-key reply; nullopt when it does not conform.
std::optional<UserProfile> parse_profile_reply(std::string_view reply);

/// Rolling conversation window with a long-term profile behind it.
class DialogueContext {
public:
    explicit DialogueContext(std::size_t char_budget = 12000, std::size_t keep_recent = 10)
        : char_budget_(char_budget), keep_recent_(keep_recent) {}

    const std::vector<DialogueTurn>& turns() const noexcept { return turns_; }
    const UserProfile& long_term_profile() const noexcept { return long_term_; }
    std::size_t char_budget() const noexcept { return char_budget_; }

    void append(std::string role, std::string text);
    std::string render_history() const;

    /// While the rendered history exceeds the budget, folds the turns older
    /// than the most recent keep_recent (then single oldest turns) into the
    /// long-term profile and drops them. A null provider drops without
    /// extraction. Returns the number of provider calls made.
    std::size_t fold_if_needed(ChatProvider* profile_llm, std::string_view item_noun = "game");

    /// Appends a prior transcript (Long-Context replay) and folds.
    std::size_t load_transcript(std::span<const DialogueTurn> turns, ChatProvider* profile_llm,
                                std::string_view item_noun = "game");

    void set_long_term_profile(UserProfile p) { long_term_ = std::move(p); }
    std::vector<std::string> warnings() const { return warnings_; }

private:
    std::vector<DialogueTurn> turns_;
    UserProfile long_term_;
    std::size_t char_budget_;
    std::size_t keep_recent_;
    std::vector<std::string> warnings_;
};

/// One line of the session log.
struct SessionLogEntry {
    std::string role;
    std::string text;
    UserProfile long_term;
    UserProfile short_term;
    std::vector<ToolCallRecord> tracker;
};

void to_json(nlohmann::json& j, const SessionLogEntry& e);
void from_json(const nlohmann::json& j, SessionLogEntry& e);

void append_session_log(std::ostream& out, const SessionLogEntry& entry);
std::vector<SessionLogEntry> read_session_log(std::istream& in);
std::vector<DialogueTurn> turns_from_log(const std::vector<SessionLogEntry>& entries);

}  // namespace recagent
