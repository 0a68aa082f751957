#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "recagent/llm.hpp"
#include "recagent/turn.hpp"

namespace recagent {

struct ProviderConfig {
    std::string kind = "http";  // "http" | "scripted"
    std::string base_url;
    std::string model;
    std::filesystem::path script;  // scripted only
    int timeout_ms = 60000;
    int max_retries = 3;
};

struct EvalSizes {
    std::size_t simulator_sessions = 50;
    std::size_t retrieval_cases = 50;
    std::size_t ranking_cases = 10;
    std::size_t max_turns = 5;
};

struct ServiceConfig {
    std::filesystem::path items_path;
    std::filesystem::path interactions_path;
    std::filesystem::path model_cache;  // optional; built from the catalog when absent
    std::filesystem::path demo_store;
    std::filesystem::path session_log_dir;  // optional
    ProviderConfig actor;
    std::optional<ProviderConfig> critic;     // defaults to the actor provider
    std::optional<ProviderConfig> profile;    // profile extraction is off when absent
    std::optional<ProviderConfig> simulator;  // user simulator / one-turn generation
    std::string item_noun = "game";
    std::size_t char_budget = 12000;
    std::size_t max_rechains = 2;
    std::size_t demo_count = kDefaultDemoCount;
    EvalSizes eval;
    std::string host = "127.0.0.1";
    int port = 8080;
};

/// Relative paths resolve against `base_dir`. Throws ConfigError on unknown
/// provider kinds, bad types, or an "api_key" entry anywhere in the file.
ServiceConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ServiceConfig load_config(const std::filesystem::path& path);

/// Checks that every configured path exists and that RECAGENT_API_KEY is set
/// when an HTTP provider is configured. Throws ConfigError.
void validate_config(const ServiceConfig& config);

/// Config summary for startup logs; never contains secrets.
nlohmann::json redacted_summary(const ServiceConfig& config);

std::shared_ptr<ChatProvider> make_provider(const ProviderConfig& config);

/// Catalog, model, demo store and providers wired into agent deps.
struct Runtime {
    std::shared_ptr<const Catalog> catalog;
    std::shared_ptr<const SimilarityModel> model;
    std::shared_ptr<const DemoStore> demos;
    std::shared_ptr<AgentDeps> deps;
    std::shared_ptr<ChatProvider> simulator;  // may be null
};

Runtime build_runtime(const ServiceConfig& config);

/// Loads the model cache when present and valid for the catalog, else builds it.
SimilarityModel load_or_build_model(const Catalog& catalog, const std::filesystem::path& cache);

class SessionManager {
public:
    explicit SessionManager(std::shared_ptr<const AgentDeps> deps,
                            std::filesystem::path log_dir = {});
    ~SessionManager();

    std::string create();
    std::shared_ptr<Session> find(const std::string& id) const;
    std::size_t size() const;

private:
    std::shared_ptr<const AgentDeps> deps_;
    std::filesystem::path log_dir_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::vector<std::unique_ptr<std::ostream>> logs_;
    std::uint64_t next_id_ = 1;
};

/// JSON-over-HTTP front end:
///   POST /v1/sessions                          -> {session_id}
///   POST /v1/sessions/{id}/messages {text}      -> {reply, turn_id}
///   GET  /v1/sessions/{id}/trace/{turn_id}      -> TurnResult JSON
///   GET  /healthz                               -> {status, items}
/// Errors are {code, message}: 400 bad_request, 404 not_found, 409 conflict,
/// 502 provider_error, 500 internal.
class HttpService {
public:
    HttpService(std::shared_ptr<const AgentDeps> deps, std::filesystem::path log_dir = {});
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Blocks until stop(). Returns false when the address cannot be bound.
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port and returns it (or -1); serve with listen_after_bind().
    int bind_to_any_port(const std::string& host);
    bool listen_after_bind();
    void wait_until_ready() const;
    void stop();

    SessionManager& sessions() noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace recagent
