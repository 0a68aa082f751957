#pragma once

#include <cstdint>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "recagent/catalog.hpp"
#include "recagent/planner.hpp"
#include "recagent/turn.hpp"

namespace recagent {

class ChatProvider;

enum class GenStrategy { input_first, output_first, agent_trace, synthetic_dialogue };

std::string_view to_string(GenStrategy s);
std::optional<GenStrategy> parse_gen_strategy(std::string_view name);

struct GenRecord {
    GenStrategy strategy = GenStrategy::input_first;
    std::string intent;
    Plan plan;
    bool accepted = false;
    std::optional<std::string> reject_reason;
    std::string raw_reply;  // the plan reply
};

void to_json(nlohmann::json& j, const GenRecord& r);

struct DemogenEnv {
    const ToolRegistry& registry;
    const DemoStore& seeds;
    const Catalog* catalog = nullptr;  // titles for the placeholder check; null disables it
    std::string item_noun = "game";
    std::size_t demo_count = kDefaultDemoCount;
    std::size_t parallelism = 1;
};

/// Splits a generation reply into request sentences, dropping "Request N:",
/// "N." and bullet prefixes and blank lines.
std::vector<std::string> parse_intents(std::string_view reply);

/// Non-empty when the intent names a catalog title instead of a placeholder.
std::optional<std::string> placeholder_violation(std::string_view intent, const Catalog* catalog);

/// Tool-name sequences equal; inputs ignored.
bool plans_consistent(const Plan& a, const Plan& b);

/// One plan_generation call for `intent`. ProviderError propagates.
std::string request_plan(ChatProvider& llm, const DemogenEnv& env, std::string_view intent);

/// Intents emulating the seed requests, then one plan per intent.
/// Throws InputError when the seed store is empty.
std::vector<GenRecord> generate_input_first(ChatProvider& llm, const DemogenEnv& env, std::size_t n);

/// Intents for `target`, re-planned and kept only when consistent with it.
/// Throws InputError when `target` does not validate.
std::vector<GenRecord> generate_output_first(ChatProvider& llm, const DemogenEnv& env,
                                             const Plan& target, std::size_t n);

/// Appends accepted records to the store; returns how many were added.
std::size_t append_accepted(const std::vector<GenRecord>& records, DemoStore& store);

/// Hand-authored dialogue ending in a tool-using request.
struct SyntheticDialogue {
    std::vector<DialogueTurn> history;
    std::string request;
    Plan plan;
};

void to_json(nlohmann::json& j, const SyntheticDialogue& d);
void from_json(const nlohmann::json& j, SyntheticDialogue& d);
std::vector<SyntheticDialogue> read_synthetic_dialogues(std::istream& in);

/// Picks three fixtures at random per iteration and asks the provider for a
/// new dialogue plus plan in the same JSON shape. Unparseable replies are
/// dropped. ProviderError propagates.
std::vector<SyntheticDialogue> generate_synthetic_dialogues(ChatProvider& llm,
                                                            const std::vector<SyntheticDialogue>& fixtures,
                                                            std::size_t iterations, std::mt19937_64& rng,
                                                            std::string_view item_noun = "game");

struct InstructionPlanPair {
    std::string instruction;
    std::string output;
    GenStrategy source = GenStrategy::agent_trace;
};

struct ExportReport {
    std::vector<InstructionPlanPair> pairs;
    std::size_t from_traces = 0;
    std::size_t from_synthetic = 0;
    std::size_t skipped_chit_chat = 0;
    std::size_t skipped_unresolved = 0;  // turns that gave up or never produced a valid plan

    nlohmann::json counts() const;
};

/// One pair per tool-using exchange. The instruction is the plan prompt
/// re-rendered from the vars stored in the trace; the output is the raw plan
/// reply.
ExportReport export_recllama(const std::vector<TurnResult>& traces,
                             const std::vector<SyntheticDialogue>& synthetic, const PlannerEnv& env);

/// Line-JSON {"instruction": ..., "output": ...}; returns lines written.
std::size_t write_pairs(std::ostream& out, const std::vector<InstructionPlanPair>& pairs);

}  // namespace recagent
