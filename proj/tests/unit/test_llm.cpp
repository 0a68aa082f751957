#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "recagent/errors.hpp"
#include "recagent/llm.hpp"

using namespace recagent;

TEST(Scripted, FirstUnusedMatchWins) {
    ScriptedProvider p({{"weather", "sunny"}, {"*", "generic"}, {"weather", "rainy"}});
    EXPECT_EQ(p.complete("what is the weather"), "sunny");
    EXPECT_EQ(p.complete("what is the weather"), "generic");
    EXPECT_EQ(p.complete("what is the weather"), "rainy");
    EXPECT_THROW(p.complete("again"), ProviderError);
    EXPECT_EQ(p.call_count(), 4u);
    EXPECT_EQ(p.prompts().size(), 4u);
}

TEST(Scripted, NoMatchThrows) {
    ScriptedProvider p(std::vector<ScriptEntry>{{"alpha", "a"}});
    EXPECT_THROW(p.complete("beta"), ProviderError);
    EXPECT_EQ(p.remaining(), 1u);
    std::vector<ChatMessage> none;
    EXPECT_THROW(p.complete(std::span<const ChatMessage>(none)), InputError);
}

TEST(Scripted, ParsesLineJson) {
    std::istringstream in("{\"match\":\"*\",\"reply\":\"x\"}\n\n{\"match\":\"q\",\"reply\":\"y\"}\n");
    auto entries = ScriptedProvider::parse_script(in);
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[1].reply, "y");
    std::istringstream bad("{\"match\":1}\n");
    EXPECT_THROW(ScriptedProvider::parse_script(bad), InputError);
    EXPECT_THROW(ScriptedProvider::from_file("/nonexistent.jsonl"), InputError);
}

TEST(Http, SplitBaseUrl) {
    auto p = split_base_url("http://localhost:8000/v1/");
    EXPECT_EQ(p.origin, "http://localhost:8000");
    EXPECT_EQ(p.path_prefix, "/v1");
    EXPECT_EQ(split_base_url("https://api.example.com").path_prefix, "");
}

class FakeChatServer : public ::testing::Test {
protected:
    void SetUp() override {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            auth_ = req.get_header_value("Authorization");
            body_ = req.body;
            if (failures_left_ > 0) {
                --failures_left_;
                res.status = status_;
                return;
            }
            res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"hello there"}}]})",
                            "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    void TearDown() override {
        server_.stop();
        thread_.join();
        unsetenv("RECAGENT_TEST_KEY");
    }
    HttpProviderConfig config() {
        HttpProviderConfig c;
        c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
        c.model = "m";
        c.timeout = std::chrono::milliseconds(2000);
        c.initial_backoff = std::chrono::milliseconds(1);
        c.api_key_env = "RECAGENT_TEST_KEY";
        return c;
    }

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> failures_left_{0};
    int status_ = 500;
    std::string auth_, body_;
};

TEST_F(FakeChatServer, SendsKeyFromEnvAndParsesReply) {
    setenv("RECAGENT_TEST_KEY", "sk-secret", 1);
    HttpChatProvider p(config());
    EXPECT_EQ(p.complete("hi"), "hello there");
    EXPECT_EQ(auth_, "Bearer sk-secret");
    auto body = nlohmann::json::parse(body_);
    EXPECT_EQ(body["model"], "m");
    EXPECT_EQ(body["messages"][0]["content"], "hi");
}

TEST_F(FakeChatServer, RetriesServerErrors) {
    failures_left_ = 2;
    status_ = 503;
    auto c = config();
    c.max_retries = 3;
    HttpChatProvider p(c);
    EXPECT_EQ(p.complete("hi"), "hello there");
    EXPECT_TRUE(auth_.empty());
}

TEST_F(FakeChatServer, GivesUpAfterRetries) {
    failures_left_ = 10;
    status_ = 429;
    auto c = config();
    c.max_retries = 2;
    HttpChatProvider p(c);
    EXPECT_THROW(p.complete("hi"), ProviderError);
    EXPECT_EQ(failures_left_.load(), 7);
}

TEST_F(FakeChatServer, ClientErrorsAreNotRetried) {
    failures_left_ = 1;
    status_ = 401;
    HttpChatProvider p(config());
    EXPECT_THROW(p.complete("hi"), ProviderError);
    EXPECT_EQ(failures_left_.load(), 0);
}

TEST(Http, ConnectionRefusedIsProviderError) {
    HttpProviderConfig c;
    c.base_url = "http://127.0.0.1:1/v1";
    c.max_retries = 1;
    c.initial_backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::milliseconds(500);
    HttpChatProvider p(c);
    EXPECT_THROW(p.complete("hi"), ProviderError);
}
