#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "recagent/prompts.hpp"
#include "recagent/toolkit.hpp"

namespace recagent {

class ChatProvider;

inline constexpr std::size_t kMaxPlanSteps = 8;
inline constexpr std::size_t kEmbeddingDim = 512;
inline constexpr std::size_t kDefaultDemoCount = 3;
inline constexpr std::string_view kNoToolSentinel = "NO_TOOL";
inline constexpr std::string_view kToolExecutorName = "Tool Executor";

struct PlanStep {
    std::string tool_name;
    std::string tool_input;

    friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

struct Plan {
    std::vector<PlanStep> steps;

    bool empty() const noexcept { return steps.empty(); }
    std::vector<std::string> tool_sequence() const;
    friend bool operator==(const Plan&, const Plan&) = default;
};

void to_json(nlohmann::json& j, const Plan& p);
void from_json(const nlohmann::json& j, Plan& p);

/// Tries the structured grammar `[{"tool": ..., "input": ...}]` first, then
/// the numbered grammar `N. Tool Name (input)` separated by ';' or newlines.
/// Throws PlanParseError when neither matches.
Plan parse_plan(std::string_view text);

/// "1. Tool (input); 2. Tool (input)".
std::string render_numbered(const Plan& plan);
/// `[{"tool":...,"input":...}]`, the form parse_plan reads back exactly.
std::string render_structured(const Plan& plan);

/// Empty when the plan is acceptable.
std::vector<std::string> validate_plan(const Plan& plan, const ToolRegistry& registry);

/// Text -> fixed-length vector. Implementations must be thread-safe.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(std::string_view text) const = 0;
};

/// Lowercased alphanumeric tokens hashed (FNV-1a) into kEmbeddingDim buckets,
/// counted, then L2-normalized. Empty text gives the zero vector.
class HashingEmbedder final : public Embedder {
public:
    std::vector<double> embed(std::string_view text) const override;
};

std::vector<double> embed_text(std::string_view text);
/// 0 when either vector is zero.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct Demonstration {
    std::uint32_t id = 0;
    std::string intent;
    Plan plan;
    std::vector<double> embedding;
};

struct ScoredDemo {
    const Demonstration* demo;
    double score;
};

/// Append-only intent/plan store with cosine nearest-neighbour lookup.
class DemoStore {
public:
    explicit DemoStore(std::shared_ptr<const Embedder> embedder = nullptr);

    std::uint32_t add(std::string intent, Plan plan);
    std::size_t size() const noexcept { return demos_.size(); }
    const std::vector<Demonstration>& demos() const noexcept { return demos_; }

    /// min(k, size()) demos by descending cosine, ties by id ascending.
    std::vector<ScoredDemo> search(std::string_view query, std::size_t k) const;

    /// Line-JSON: {"intent": ..., "plan": [{"tool": ..., "input": ...}]}.
    static DemoStore load(std::istream& in, std::shared_ptr<const Embedder> embedder = nullptr);
    static DemoStore load_file(const std::string& path,
                               std::shared_ptr<const Embedder> embedder = nullptr);
    void save(std::ostream& out) const;

private:
    std::shared_ptr<const Embedder> embedder_;
    std::vector<Demonstration> demos_;
};

std::vector<Demonstration> retrieve_demos(const DemoStore& store, std::string_view intent,
                                          std::size_t k = kDefaultDemoCount);

enum class ExampleStyle {
    agent,    // Question/Thought/Action blocks for the task description
    request,  // "Request: ... / Plan: ..." pairs for generation prompts
};
std::string render_examples(const std::vector<Demonstration>& demos, ExampleStyle style);

/// Shared prompt variables: item noun, tool descriptions and names, the
/// tool-role aliases ({LookUpTool}, {RankingTool}, ...) and executor text.
PromptVars base_prompt_vars(const ToolRegistry& registry, std::string_view item_noun);

struct PlannerEnv {
    const ToolRegistry& registry;
    const DemoStore& demos;
    std::string table_info;
    std::string item_noun = "game";
    std::size_t demo_count = kDefaultDemoCount;
};

struct PlanDecision {
    Plan plan;
    std::optional<std::string> direct_answer;  // "Final Answer:" without tools
    std::string raw_reply;
    std::string plan_text;  // the part of the reply handed to parse_plan
    PromptVars prompt_vars;  // everything task_description was rendered with
    std::optional<std::string> parse_error;
    std::vector<std::string> demo_intents;
};

/// One provider call. Parse failures are reported in the decision, not thrown;
/// ProviderError propagates.
PlanDecision make_plan(ChatProvider& llm, const PlannerEnv& env, std::string_view input,
                       std::string_view history, std::string_view reflection);

/// Runs the steps in order against ctx.bus, stopping after the first failed
/// record. Returns the records appended by this call.
std::vector<ToolCallRecord> execute_plan(const Plan& plan, const ToolRegistry& registry,
                                         ToolContext& ctx);

}  // namespace recagent
