#include <gtest/gtest.h>

#include <atomic>
#include <condition_variable>
#include <future>
#include <sstream>

#include "recagent/errors.hpp"
#include "recagent/llm.hpp"
#include "recagent/turn.hpp"
#include "test_support.hpp"

using namespace recagent;
using recagent::testing::script;
using recagent::testing::toy_deps;

namespace {

const std::string kToolPlan =
    "Question: Do I need to use tools?\nThought: Yes, I need to make tool using plans first and then use "
    "Tool Executor to execute.\nAction: Tool Executor\nAction Input: 1. SQL Retrieval Tool (tags LIKE "
    "'%Indie%'); 2. Ranking Tool ({\"schema\": \"popularity\"}); 3. Candidate Fetching Tool (3)";
const std::string kAnswer = "Question: Do I need to use tools?\nThought: No, I know the final answer.\nFinal Answer: ";

// Blocks inside complete() until released.
class GateProvider final : public ChatProvider {
public:
    std::promise<void> entered;
    std::shared_future<void> release;

protected:
    std::atomic<int> calls_{0};
    std::string do_complete(std::span<const ChatMessage>, const ChatParams&) override {
        if (!calls_++) entered.set_value();
        release.wait();
        return "Final Answer: hi";
    }
};

}  // namespace

TEST(Judgment, Parse) {
    EXPECT_TRUE(parse_judgment("Yes").positive());
    EXPECT_TRUE(parse_judgment("  yes, looks fine").positive());
    auto no = parse_judgment("No. The response is not good because X. You should Y.");
    EXPECT_FALSE(no.positive());
    EXPECT_EQ(no.feedback, "No. The response is not good because X. You should Y.");
    auto odd = parse_judgment("Looks good to me");
    EXPECT_TRUE(odd.positive());
    EXPECT_TRUE(odd.warning);
}

TEST(Turn, ToolTurnMakesTwoActorCallsAndOneCriticCall) {
    auto actor = script({{"*", kToolPlan}, {"Observation: 1. ", kAnswer + "Try Hollow Knight."}});
    auto critic = script({{"*", "Yes"}});
    Session s(toy_deps(actor, critic));
    auto r = s.run_turn("Recommend some indie games");
    EXPECT_EQ(r.actor_calls, 2u);
    EXPECT_EQ(r.critic_calls, 1u);
    EXPECT_EQ(actor->call_count(), 2u);
    EXPECT_EQ(critic->call_count(), 1u);
    EXPECT_EQ(r.response, "Try Hollow Knight.");
    ASSERT_EQ(r.attempts.size(), 1u);
    EXPECT_EQ(r.attempts[0].records.size(), 3u);
    EXPECT_FALSE(r.gave_up);
    EXPECT_EQ(s.history().size(), 2u);

    // The critic sees the plan and every tracker summary.
    auto critic_prompt = critic->prompts()[0];
    EXPECT_NE(critic_prompt.find("1. SQL Retrieval Tool (tags LIKE '%Indie%')"), std::string::npos);
    EXPECT_NE(critic_prompt.find("Step 3: Candidate Fetching Tool (3)"), std::string::npos);
    EXPECT_NE(critic_prompt.find("The current user request is: Recommend some indie games"), std::string::npos);
}

TEST(Turn, DirectAnswerSkipsTools) {
    auto actor = script({{"*", kAnswer + "Hello!"}});
    auto critic = script({{"*", "Yes"}});
    Session s(toy_deps(actor, critic));
    auto r = s.run_turn("hi");
    EXPECT_EQ(r.response, "Hello!");
    EXPECT_EQ(r.actor_calls, 1u);
    EXPECT_EQ(r.critic_calls, 1u);
    EXPECT_TRUE(r.attempts[0].direct_answer);
    EXPECT_NE(critic->prompts()[0].find("No tools were used."), std::string::npos);
}

TEST(Turn, NegativeCritiqueTriggersRechainWithFeedback) {
    auto actor = script({{"*", kToolPlan}, {"*", kAnswer + "first"}, {"*", kToolPlan}, {"*", kAnswer + "second"}});
    auto critic = script({{"*", "No. You should use the ItemCF tool."}, {"*", "Yes"}});
    Session s(toy_deps(actor, critic));
    auto r = s.run_turn("Recommend some indie games");
    ASSERT_EQ(r.attempts.size(), 2u);
    EXPECT_EQ(r.response, "second");
    EXPECT_EQ(r.actor_calls, 4u);
    EXPECT_EQ(r.critic_calls, 2u);
    EXPECT_EQ(r.attempts[1].records.front().output.candidates_before, 20u);
    EXPECT_EQ(r.attempts[0].records.size(), r.attempts[1].records.size());
    EXPECT_NE(actor->prompts()[2].find("1. No. You should use the ItemCF tool."), std::string::npos);
    EXPECT_EQ(actor->prompts()[0].find("No. You should use the ItemCF tool."), std::string::npos);
}

TEST(Turn, ParseErrorIsSyntheticNegative) {
    auto actor = script({{"*", "Action Input: do stuff"}, {"*", kAnswer + "ok"}});
    auto critic = script({{"*", "Yes"}});
    Session s(toy_deps(actor, critic));
    auto r = s.run_turn("hi");
    ASSERT_EQ(r.attempts.size(), 2u);
    EXPECT_TRUE(r.attempts[0].parse_error);
    EXPECT_TRUE(r.attempts[0].judgment.synthetic);
    EXPECT_TRUE(r.attempts[0].records.empty());
    EXPECT_EQ(r.critic_calls, 1u);
    EXPECT_EQ(r.actor_calls, 2u);
    EXPECT_NE(actor->prompts()[1].find("could not be parsed"), std::string::npos);
}

TEST(Turn, InvalidPlanIsSyntheticNegative) {
    auto actor = script({{"*", "Action Input: 1. SQL Retrieval Tool (price < 5)"}, {"*", kAnswer + "ok"}});
    auto critic = script({{"*", "Yes"}});
    Session s(toy_deps(actor, critic));
    auto r = s.run_turn("cheap games");
    ASSERT_EQ(r.attempts.size(), 2u);
    EXPECT_EQ(r.attempts[0].violations.size(), 1u);
    EXPECT_FALSE(r.attempts[0].used_tools());
    EXPECT_EQ(r.critic_calls, 1u);
}

TEST(Turn, GivesUpAfterMaxRechains) {
    auto actor = script({{"*", kAnswer + "a1"}, {"*", kAnswer + "a2"}, {"*", "Action Input: ???"}});
    auto critic = script({{"*", "No. bad"}, {"*", "No. worse"}});
    Session s(toy_deps(actor, critic));
    auto r = s.run_turn("hi");
    EXPECT_TRUE(r.gave_up);
    EXPECT_EQ(r.attempts.size(), 3u);
    EXPECT_EQ(r.response, "a2\n" + std::string(kGiveUpApology));
    EXPECT_FALSE(r.warnings.empty());
}

TEST(Turn, ProfileProviderUpdatesShortTerm) {
    auto actor = script({{"*", kAnswer + "Sure."}});
    auto critic = script({{"*", "Yes"}});
    auto profile = script({{"*", R"({"like": ["Hades"], "dislike": [], "expect": ["roguelikes"]})"}});
    Session s(toy_deps(actor, critic, profile));
    auto r = s.run_turn("I loved Hades");
    EXPECT_EQ(r.profile_calls, 1u);
    EXPECT_EQ(s.short_term_profile().expect, std::vector<std::string>{"roguelikes"});
}

TEST(Turn, ProfileFeedsRankingTool) {
    auto actor = script({{"*", "Action Input: 1. Ranking Tool ({}); 2. Candidate Fetching Tool (20)"},
                         {"*", kAnswer + "done"},
                         {"*", "Action Input: 1. Ranking Tool ({}); 2. Candidate Fetching Tool (20)"},
                         {"*", kAnswer + "done"}});
    auto critic = script({{"*", "Yes"}, {"*", "Yes"}});
    auto profile = script({{"*", R"({"like": [], "dislike": ["Fortnite"], "expect": []})"},
                           {"*", R"({"like": [], "dislike": ["Fortnite"], "expect": []})"}});
    Session s(toy_deps(actor, critic, profile));
    s.run_turn("I hate Fortnite");
    auto r = s.run_turn("what's popular?");
    EXPECT_EQ(r.attempts[0].records[0].output.candidates_after, 19u);
}

TEST(Turn, ErrorsSurfaceAsTypedExceptions) {
    Session s(toy_deps(script({}), script({})));
    EXPECT_THROW(s.run_turn("   "), InputError);
    EXPECT_THROW(s.run_turn("hello"), TurnError);
    EXPECT_EQ(s.turn_count(), 0u);
    EXPECT_TRUE(s.history().empty());
}

TEST(Turn, ConcurrentTurnOnSameSessionIsBusy) {
    auto gate = std::make_shared<GateProvider>();
    std::promise<void> release;
    gate->release = release.get_future().share();
    auto entered = gate->entered.get_future();
    auto critic = script({{"*", "Yes"}});
    auto session = std::make_shared<Session>(toy_deps(gate, critic));
    auto first = std::async(std::launch::async, [&] { return session->run_turn("hi"); });
    entered.wait();
    EXPECT_THROW(session->run_turn("again"), SessionBusy);
    release.set_value();
    EXPECT_EQ(first.get().turn_id, 0u);
}

TEST(Turn, TraceJsonRoundTrip) {
    auto actor = script({{"*", kToolPlan}, {"*", kAnswer + "ok"}});
    Session s(toy_deps(actor, script({{"*", "Yes"}})));
    s.run_turn("indie games");
    auto trace = *s.trace(0);
    nlohmann::json j = trace;
    EXPECT_EQ(j["trace_version"], kTraceVersion);
    auto back = j.get<TurnResult>();
    EXPECT_EQ(nlohmann::json(back), j);
    j["trace_version"] = 99;
    EXPECT_THROW(j.get<TurnResult>(), InputError);
    EXPECT_FALSE(s.trace(1));
}

TEST(Turn, SessionLogGetsTwoLinesPerTurn) {
    std::stringstream log;
    Session s(toy_deps(script({{"*", kToolPlan}, {"*", kAnswer + "ok"}}), script({{"*", "Yes"}})));
    s.set_log(&log);
    s.run_turn("indie games");
    auto entries = read_session_log(log);
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].role, "user");
    EXPECT_EQ(entries[1].tracker.size(), 3u);
}

TEST(Turn, CriticPlanText) {
    EXPECT_EQ(critic_plan_text({}, {}), "No tools were used.");
    Plan p;
    p.steps = {{"Query Tool", "SELECT 1"}};
    ToolCallRecord r{"Query Tool", "SELECT 1", {}};
    EXPECT_EQ(critic_plan_text(p, {r}), "1. Query Tool (SELECT 1)\nStep 1: " + r.summary());
}
