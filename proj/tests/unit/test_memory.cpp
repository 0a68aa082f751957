#include <gtest/gtest.h>

#include <sstream>

#include "recagent/errors.hpp"
#include "recagent/llm.hpp"
#include "recagent/memory.hpp"
#include "test_support.hpp"

using namespace recagent;
using recagent::testing::games_toy;
using recagent::testing::script;

TEST(Memory, ResetBusHoldsEveryItem) {
    auto bus = reset_bus(*games_toy());
    ASSERT_EQ(bus.candidates.size(), 20u);
    for (ItemId i = 0; i < 20; ++i) EXPECT_EQ(bus.candidates[i], i);
    EXPECT_TRUE(bus.tracker.empty());
    record_step(bus, {"Query Tool", "x", {}});
    EXPECT_EQ(bus.tracker.size(), 1u);
}

TEST(Memory, RecordJsonRoundTrip) {
    ToolCallRecord r{"SQL Retrieval Tool", "price < 10", {}};
    r.output.candidates_before = 20;
    r.output.candidates_after = 3;
    r.output.notes = {"n"};
    r.output.error = "bad";
    r.output.error_kind = "SqlSyntaxError";
    auto back = nlohmann::json(r).get<ToolCallRecord>();
    EXPECT_EQ(back, r);
    EXPECT_NE(r.summary().find("SqlSyntaxError: bad"), std::string::npos);
}

TEST(Memory, MergeLongTermRecentWins) {
    UserProfile old{{"RPG", "Hades"}, {"Shooter"}, {"x"}};
    UserProfile fresh{{"shooter", "Celeste"}, {"hades"}, {"y"}};
    auto merged = merge_long_term(old, fresh);
    EXPECT_EQ(merged.like, (std::vector<std::string>{"RPG", "shooter", "Celeste"}));
    EXPECT_EQ(merged.dislike, (std::vector<std::string>{"hades"}));
    EXPECT_TRUE(merged.expect.empty());
    auto composed = compose_profile(old, fresh);
    EXPECT_EQ(composed.expect, std::vector<std::string>{"y"});
}

TEST(Memory, ParseProfileReplyIsStrict) {
    auto p = parse_profile_reply("Sure! {\"like\": [\"A\", \"a\"], \"dislike\": [], \"expect\": [\"B\"]}");
    ASSERT_TRUE(p);
    EXPECT_EQ(p->like, std::vector<std::string>{"A"});
    EXPECT_FALSE(parse_profile_reply("{\"like\": [], \"dislike\": []}"));
    EXPECT_FALSE(parse_profile_reply("{\"like\": [1], \"dislike\": [], \"expect\": []}"));
    EXPECT_FALSE(parse_profile_reply("no json here"));
}

TEST(Memory, ExtractProfileRepairsOnce) {
    auto llm = script({{"*", "I think they like RPGs"},
                       {"did not follow", "{\"like\": [\"RPG\"], \"dislike\": [], \"expect\": []}"}});
    std::vector<DialogueTurn> seg{{"user", "I love RPGs"}};
    auto out = extract_profile(*llm, seg);
    EXPECT_EQ(out.calls, 2u);
    EXPECT_EQ(out.profile.like, std::vector<std::string>{"RPG"});
    EXPECT_FALSE(out.warning);
}

TEST(Memory, ExtractProfileGivesUpWithWarning) {
    auto llm = script({{"*", "nope"}, {"*", "still nope"}});
    std::vector<DialogueTurn> seg{{"user", "hi"}};
    auto out = extract_profile(*llm, seg);
    EXPECT_EQ(out.calls, 2u);
    EXPECT_TRUE(out.profile.empty());
    EXPECT_TRUE(out.warning);
    EXPECT_THROW(extract_profile(*llm, {}), InputError);
    EXPECT_THROW(extract_profile(*llm, seg), TurnError);
}

TEST(Memory, FoldKeepsRecentTurnsUnderBudget) {
    DialogueContext ctx(200, 4);
    auto llm = script({{"*", "{\"like\": [\"Hades\"], \"dislike\": [], \"expect\": []}"}});
    for (int i = 0; i < 8; ++i) ctx.append(i % 2 ? "assistant" : "user", std::string(40, 'a' + i));
    auto calls = ctx.fold_if_needed(llm.get());
    EXPECT_EQ(calls, 1u);
    EXPECT_EQ(ctx.turns().size(), 4u);
    EXPECT_LE(ctx.render_history().size(), 200u);
    EXPECT_EQ(ctx.turns().front().text, std::string(40, 'a' + 4));
    EXPECT_EQ(ctx.long_term_profile().like, std::vector<std::string>{"Hades"});
}

TEST(Memory, FoldWithoutProviderDrops) {
    DialogueContext ctx(50, 10);
    std::vector<DialogueTurn> transcript;
    for (int i = 0; i < 6; ++i) transcript.push_back({"user", std::string(30, 'x')});
    EXPECT_EQ(ctx.load_transcript(transcript, nullptr), 0u);
    EXPECT_LE(ctx.render_history().size(), 50u);
    EXPECT_TRUE(ctx.long_term_profile().empty());
}

TEST(Memory, FoldUnderBudgetIsNoop) {
    DialogueContext ctx;
    ctx.append("user", "hello");
    EXPECT_EQ(ctx.fold_if_needed(nullptr), 0u);
    EXPECT_EQ(ctx.render_history(), "Human: hello");
}

TEST(Memory, SessionLogRoundTrip) {
    std::stringstream ss;
    SessionLogEntry a{"user", "hi", {{"RPG"}, {}, {}}, {}, {}};
    SessionLogEntry b{"assistant", "hello", {}, {{}, {}, {"indie"}}, {{"Query Tool", "q", {}}}};
    append_session_log(ss, a);
    append_session_log(ss, b);
    auto entries = read_session_log(ss);
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].long_term.like, std::vector<std::string>{"RPG"});
    EXPECT_EQ(entries[1].tracker.size(), 1u);
    auto turns = turns_from_log(entries);
    EXPECT_EQ(turns[1], (DialogueTurn{"assistant", "hello"}));
    std::istringstream bad("{not json}\n");
    EXPECT_THROW(read_session_log(bad), InputError);
}
