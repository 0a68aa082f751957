#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace recagent {

enum class TemplateId {
    task_description,
    critic,
    plan_generation,
    intent_input_first,
    intent_output_first,
    user_simulator,
    one_turn_retrieval,
    one_turn_ranking,
    profile_extraction,
};

using PromptVars = std::map<std::string, std::string>;

std::string_view template_body(TemplateId id);
std::string_view to_string(TemplateId id);
std::optional<TemplateId> parse_template_id(std::string_view name);

/// Placeholder names in order of first appearance.
std::vector<std::string> placeholders(std::string_view body);

/// Substitutes `{name}` placeholders; `{{` and `}}` render as literal braces
/// and a `{` not followed by an identifier and `}` is copied through.
/// Throws MissingPlaceholder listing every unfilled name.
std::string render_template(std::string_view body, const PromptVars& vars);
std::string render_prompt(TemplateId id, const PromptVars& vars);

}  // namespace recagent
