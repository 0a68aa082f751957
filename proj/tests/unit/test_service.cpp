#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "recagent/errors.hpp"
#include "recagent/llm.hpp"
#include "recagent/service.hpp"
#include "test_support.hpp"

using namespace recagent;
using recagent::testing::fixtures_dir;
using recagent::testing::script;
using recagent::testing::toy_deps;
namespace fs = std::filesystem;

namespace {

nlohmann::json base_config() {
    auto toy = fixtures_dir() / "games-toy";
    return {{"items_path", (toy / "items.csv").string()},
            {"interactions_path", (toy / "interactions.csv").string()},
            {"provider", {{"kind", "http"}, {"base_url", "http://127.0.0.1:9/v1"}, {"model", "m"}}}};
}

struct EnvGuard {
    explicit EnvGuard(const char* value) {
        if (const char* old = std::getenv("RECAGENT_API_KEY")) saved = old;
        if (value) setenv("RECAGENT_API_KEY", value, 1);
        else unsetenv("RECAGENT_API_KEY");
    }
    ~EnvGuard() {
        if (saved) setenv("RECAGENT_API_KEY", saved->c_str(), 1);
        else unsetenv("RECAGENT_API_KEY");
    }
    std::optional<std::string> saved;
};

}  // namespace

TEST(Config, ParsesAndResolvesRelativePaths) {
    nlohmann::json j = {{"items_path", "data/items.csv"},
                        {"interactions_path", "/abs/i.csv"},
                        {"provider", {{"kind", "scripted"}, {"script", "s.jsonl"}}},
                        {"critic_provider", {{"kind", "http"}, {"base_url", "http://x/v1"}}},
                        {"eval", {{"simulator_sessions", 7}}},
                        {"listen", {{"host", "0.0.0.0"}, {"port", 9000}}}};
    auto c = parse_config(j, "/base");
    EXPECT_EQ(c.items_path, fs::path("/base/data/items.csv"));
    EXPECT_EQ(c.interactions_path, fs::path("/abs/i.csv"));
    EXPECT_EQ(c.actor.script, fs::path("/base/s.jsonl"));
    ASSERT_TRUE(c.critic);
    EXPECT_FALSE(c.profile);
    EXPECT_EQ(c.eval.simulator_sessions, 7u);
    EXPECT_EQ(c.port, 9000);
}

TEST(Config, RejectsApiKeysAnywhere) {
    auto j = base_config();
    j["provider"]["api_key"] = "sk-123";
    EXPECT_THROW(parse_config(j), ConfigError);
    auto k = base_config();
    k["OpenAIApiKey"] = "x";
    EXPECT_THROW(parse_config(k), ConfigError);
}

TEST(Config, RejectsBadShapes) {
    EXPECT_THROW(parse_config(nlohmann::json::array()), ConfigError);
    auto j = base_config();
    j.erase("provider");
    EXPECT_THROW(parse_config(j), ConfigError);
    j = base_config();
    j["provider"]["kind"] = "magic";
    EXPECT_THROW(parse_config(j), ConfigError);
    j = base_config();
    j["char_budget"] = "big";
    EXPECT_THROW(parse_config(j), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, HttpProviderNeedsEnvKey) {
    auto c = parse_config(base_config());
    {
        EnvGuard g(nullptr);
        EXPECT_THROW(validate_config(c), ConfigError);
    }
    {
        EnvGuard g("sk-very-secret");
        EXPECT_NO_THROW(validate_config(c));
        auto summary = redacted_summary(c).dump();
        EXPECT_EQ(summary.find("sk-very-secret"), std::string::npos);
        EXPECT_NE(summary.find("***"), std::string::npos);
    }
}

TEST(Config, MissingFilesFailValidation) {
    auto j = base_config();
    j["items_path"] = "/nonexistent/items.csv";
    EnvGuard g("k");
    EXPECT_THROW(validate_config(parse_config(j)), ConfigError);
}

TEST(Runtime, BuildsFromScriptedConfig) {
    auto dir = fs::temp_directory_path() / "recagent_runtime_test";
    fs::create_directories(dir);
    {
        std::ofstream(dir / "actor.jsonl") << R"({"match": "*", "reply": "NO_TOOL"})" << "\n";
    }
    auto j = base_config();
    j["provider"] = {{"kind", "scripted"}, {"script", (dir / "actor.jsonl").string()}};
    j["model_cache"] = (dir / "model.jsonl").string();
    auto c = parse_config(j);
    validate_config(c);
    auto rt = build_runtime(c);
    EXPECT_EQ(rt.catalog->size(), 20u);
    EXPECT_EQ(rt.deps->critic, rt.deps->actor);
    EXPECT_FALSE(rt.simulator);

    {
        std::ofstream bad(dir / "model.jsonl");
        bad << "garbage\n";
    }
    auto model = load_or_build_model(*rt.catalog, dir / "model.jsonl");
    EXPECT_EQ(model.item_count(), 20u);
    fs::remove_all(dir);
}

TEST(Sessions, ManagerAssignsIdsAndLogs) {
    auto dir = fs::temp_directory_path() / "recagent_sessions_test";
    fs::remove_all(dir);
    SessionManager m(toy_deps(script({{"*", "Final Answer: hi"}}), script({{"*", "Yes"}})), dir);
    auto a = m.create();
    auto b = m.create();
    EXPECT_EQ(a, "s1");
    EXPECT_EQ(b, "s2");
    EXPECT_EQ(m.size(), 2u);
    EXPECT_FALSE(m.find("s3"));
    m.find(a)->run_turn("hello");
    std::ifstream in(dir / "s1.jsonl");
    EXPECT_EQ(read_session_log(in).size(), 2u);
    fs::remove_all(dir);
}

class HttpApi : public ::testing::Test {
protected:
    void start(std::shared_ptr<AgentDeps> deps) {
        service_ = std::make_unique<HttpService>(deps);
        port_ = service_->bind_to_any_port("127.0.0.1");
        ASSERT_GT(port_, 0);
        thread_ = std::thread([this] { service_->listen_after_bind(); });
        service_->wait_until_ready();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    }
    void TearDown() override {
        if (service_) service_->stop();
        if (thread_.joinable()) thread_.join();
    }
    std::unique_ptr<HttpService> service_;
    std::unique_ptr<httplib::Client> client_;
    std::thread thread_;
    int port_ = 0;
};

TEST_F(HttpApi, SessionLifecycle) {
    start(toy_deps(script({{"*", "Final Answer: Hello from the agent"}}), script({{"*", "Yes"}})));
    auto health = client_->Get("/healthz");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);
    EXPECT_EQ(nlohmann::json::parse(health->body)["items"], 20);
    EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");

    auto created = client_->Post("/v1/sessions", "", "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    std::string id = nlohmann::json::parse(created->body)["session_id"];

    auto msg = client_->Post("/v1/sessions/" + id + "/messages", R"({"text": "hi"})", "application/json");
    ASSERT_TRUE(msg);
    EXPECT_EQ(msg->status, 200);
    auto body = nlohmann::json::parse(msg->body);
    EXPECT_EQ(body["reply"], "Hello from the agent");
    EXPECT_EQ(body["turn_id"], 0);

    auto trace = client_->Get("/v1/sessions/" + id + "/trace/0");
    ASSERT_TRUE(trace);
    EXPECT_EQ(trace->status, 200);
    EXPECT_EQ(nlohmann::json::parse(trace->body)["trace_version"], kTraceVersion);
}

TEST_F(HttpApi, ErrorStatuses) {
    start(toy_deps(script({}), script({})));
    auto id = nlohmann::json::parse(client_->Post("/v1/sessions", "", "application/json")->body)["session_id"]
                  .get<std::string>();
    auto missing = client_->Post("/v1/sessions/nope/messages", R"({"text": "hi"})", "application/json");
    EXPECT_EQ(missing->status, 404);
    EXPECT_EQ(nlohmann::json::parse(missing->body)["code"], "not_found");
    auto bad = client_->Post("/v1/sessions/" + id + "/messages", "{", "application/json");
    EXPECT_EQ(bad->status, 400);
    auto empty = client_->Post("/v1/sessions/" + id + "/messages", R"({"text": "  "})", "application/json");
    EXPECT_EQ(empty->status, 400);
    auto provider = client_->Post("/v1/sessions/" + id + "/messages", R"({"text": "hi"})", "application/json");
    EXPECT_EQ(provider->status, 502);
    EXPECT_EQ(nlohmann::json::parse(provider->body)["code"], "provider_error");
    EXPECT_EQ(client_->Get("/v1/sessions/" + id + "/trace/3")->status, 404);
    EXPECT_EQ(client_->Get("/nowhere")->status, 404);
}
