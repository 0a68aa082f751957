#include <gtest/gtest.h>

#include "recagent/errors.hpp"
#include "recagent/prompts.hpp"

using namespace recagent;

namespace {
const TemplateId kAll[] = {TemplateId::task_description,   TemplateId::critic,
                           TemplateId::plan_generation,    TemplateId::intent_input_first,
                           TemplateId::intent_output_first, TemplateId::user_simulator,
                           TemplateId::one_turn_retrieval, TemplateId::one_turn_ranking,
                           TemplateId::profile_extraction};
}

TEST(Prompts, RenderSubstitutesAndEscapes) {
    EXPECT_EQ(render_template("a {x} b {{ITEM}} {y}", {{"x", "1"}, {"y", "2"}}), "a 1 b {ITEM} 2");
    EXPECT_EQ(render_template("json {\"k\": 1} and { x}", {}), "json {\"k\": 1} and { x}");
    EXPECT_EQ(render_template("{x}{x}", {{"x", "ab"}}), "abab");
}

TEST(Prompts, ValuesAreNotReexpanded) {
    EXPECT_EQ(render_template("{x}", {{"x", "{y}"}}), "{y}");
}

TEST(Prompts, MissingPlaceholdersAreAllListed) {
    try {
        render_template("{a} {b} {a} {c}", {{"b", ""}});
        FAIL();
    } catch (const MissingPlaceholder& e) {
        EXPECT_EQ(e.names(), (std::vector<std::string>{"a", "c"}));
    }
}

TEST(Prompts, PlaceholderOrder) {
    EXPECT_EQ(placeholders("{b} {a} {{c}} {b}"), (std::vector<std::string>{"b", "a"}));
}

TEST(Prompts, EveryTemplateRendersWithItsPlaceholders) {
    for (auto id : kAll) {
        auto body = template_body(id);
        ASSERT_FALSE(body.empty()) << to_string(id);
        PromptVars vars;
        for (const auto& name : placeholders(body)) vars[name] = "<" + name + ">";
        auto out = render_prompt(id, vars);
        for (const auto& name : placeholders(body))
            EXPECT_NE(out.find("<" + name + ">"), std::string::npos) << to_string(id) << " " << name;
        EXPECT_EQ(parse_template_id(to_string(id)), id);
        EXPECT_THROW(render_prompt(id, {}), MissingPlaceholder) << to_string(id);
    }
    EXPECT_FALSE(parse_template_id("nope"));
}

TEST(Prompts, TaskDescriptionUsesToolAliases) {
    auto names = placeholders(template_body(TemplateId::task_description));
    for (const char* n : {"item", "tools_desc", "table_info", "tool_names", "tool_exe_name", "examples",
                          "history", "input", "reflection", "agent_scratchpad", "LookUpTool",
                          "RankingTool", "MapTool", "BufferStoreTool"})
        EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
}

TEST(Prompts, IntentTemplatesKeepLiteralItemPlaceholder) {
    auto out = render_prompt(TemplateId::intent_input_first,
                             {{"item", "game"}, {"requests", "r"}, {"number", "5"}});
    EXPECT_NE(out.find("{ITEM} for names"), std::string::npos);
}
