#include "recagent/service.hpp"

#include <cstdlib>
#include <fstream>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "recagent/errors.hpp"
#include "recagent/text.hpp"

namespace recagent {
namespace {

namespace fs = std::filesystem;

constexpr const char* kApiKeyEnv = "RECAGENT_API_KEY";

void reject_secrets(const nlohmann::json& j, const std::string& where) {
    if (j.is_object()) {
        for (const auto& [key, value] : j.items()) {
            auto k = text::to_lower(key);
            if (k.find("api_key") != std::string::npos || k.find("apikey") != std::string::npos)
                throw ConfigError("config entry '" + where + key + "' is not allowed; the API key is read from " +
                                  std::string(kApiKeyEnv) + " only");
            reject_secrets(value, where + key + ".");
        }
    } else if (j.is_array()) {
        for (const auto& v : j) reject_secrets(v, where);
    }
}

fs::path resolve(const nlohmann::json& j, const char* key, const fs::path& base) {
    if (!j.contains(key)) return {};
    if (!j[key].is_string()) throw ConfigError(std::string("config key '") + key + "' must be a string");
    fs::path p = j[key].get<std::string>();
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j[key].get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

ProviderConfig parse_provider(const nlohmann::json& j, const fs::path& base, const std::string& name) {
    if (!j.is_object()) throw ConfigError("provider '" + name + "' must be an object");
    ProviderConfig p;
    p.kind = get_or<std::string>(j, "kind", "http");
    if (p.kind != "http" && p.kind != "scripted")
        throw ConfigError("provider '" + name + "' has unknown kind '" + p.kind + "'");
    p.base_url = get_or<std::string>(j, "base_url", "");
    p.model = get_or<std::string>(j, "model", "");
    p.script = resolve(j, "script", base);
    p.timeout_ms = get_or<int>(j, "timeout_ms", p.timeout_ms);
    p.max_retries = get_or<int>(j, "max_retries", p.max_retries);
    if (p.kind == "http" && p.base_url.empty())
        throw ConfigError("provider '" + name + "' needs base_url");
    if (p.kind == "scripted" && p.script.empty())
        throw ConfigError("provider '" + name + "' needs script");
    return p;
}

void require_file(const fs::path& p, const std::string& what) {
    if (p.empty()) throw ConfigError(what + " path is not configured");
    if (!fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
}

nlohmann::json error_body(const std::string& code, const std::string& message) {
    return {{"code", code}, {"message", message}};
}

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

ServiceConfig parse_config(const nlohmann::json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_secrets(j, "");
    ServiceConfig c;
    c.items_path = resolve(j, "items_path", base_dir);
    c.interactions_path = resolve(j, "interactions_path", base_dir);
    c.model_cache = resolve(j, "model_cache", base_dir);
    c.demo_store = resolve(j, "demo_store", base_dir);
    c.session_log_dir = resolve(j, "session_log_dir", base_dir);
    if (!j.contains("provider")) throw ConfigError("config needs a 'provider' entry");
    c.actor = parse_provider(j["provider"], base_dir, "provider");
    if (j.contains("critic_provider")) c.critic = parse_provider(j["critic_provider"], base_dir, "critic_provider");
    if (j.contains("profile_provider"))
        c.profile = parse_provider(j["profile_provider"], base_dir, "profile_provider");
    if (j.contains("simulator_provider"))
        c.simulator = parse_provider(j["simulator_provider"], base_dir, "simulator_provider");
    c.item_noun = get_or<std::string>(j, "item_noun", c.item_noun);
    c.char_budget = get_or<std::size_t>(j, "char_budget", c.char_budget);
    c.max_rechains = get_or<std::size_t>(j, "max_rechains", c.max_rechains);
    c.demo_count = get_or<std::size_t>(j, "demo_count", c.demo_count);
    if (j.contains("eval")) {
        const auto& e = j["eval"];
        c.eval.simulator_sessions = get_or<std::size_t>(e, "simulator_sessions", c.eval.simulator_sessions);
        c.eval.retrieval_cases = get_or<std::size_t>(e, "retrieval_cases", c.eval.retrieval_cases);
        c.eval.ranking_cases = get_or<std::size_t>(e, "ranking_cases", c.eval.ranking_cases);
        c.eval.max_turns = get_or<std::size_t>(e, "max_turns", c.eval.max_turns);
    }
    if (j.contains("listen")) {
        c.host = get_or<std::string>(j["listen"], "host", c.host);
        c.port = get_or<int>(j["listen"], "port", c.port);
    }
    if (c.char_budget == 0) throw ConfigError("char_budget must be positive");
    return c;
}

ServiceConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
    return parse_config(j, path.parent_path());
}

void validate_config(const ServiceConfig& c) {
    require_file(c.items_path, "items file");
    require_file(c.interactions_path, "interactions file");
    if (!c.demo_store.empty()) require_file(c.demo_store, "demo store");
    bool needs_key = false;
    for (const auto* p : {&c.actor, c.critic ? &*c.critic : nullptr, c.profile ? &*c.profile : nullptr,
                          c.simulator ? &*c.simulator : nullptr}) {
        if (!p) continue;
        if (p->kind == "scripted") require_file(p->script, "provider script");
        if (p->kind == "http") needs_key = true;
    }
    const char* key = std::getenv(kApiKeyEnv);
    if (needs_key && (!key || !*key))
        throw ConfigError(std::string("an HTTP provider is configured but ") + kApiKeyEnv + " is not set");
}

nlohmann::json redacted_summary(const ServiceConfig& c) {
    auto provider = [](const ProviderConfig& p) {
        nlohmann::json j = {{"kind", p.kind}};
        if (p.kind == "http") j.update({{"base_url", p.base_url}, {"model", p.model}});
        else j["script"] = p.script.string();
        return j;
    };
    const char* key = std::getenv(kApiKeyEnv);
    nlohmann::json j = {{"items_path", c.items_path.string()},
                        {"interactions_path", c.interactions_path.string()},
                        {"demo_store", c.demo_store.string()},
                        {"provider", provider(c.actor)},
                        {"char_budget", c.char_budget},
                        {"max_rechains", c.max_rechains},
                        {"listen", c.host + ":" + std::to_string(c.port)},
                        {"api_key", key && *key ? "***" : "unset"}};
    if (c.critic) j["critic_provider"] = provider(*c.critic);
    if (c.profile) j["profile_provider"] = provider(*c.profile);
    if (c.simulator) j["simulator_provider"] = provider(*c.simulator);
    return j;
}

std::shared_ptr<ChatProvider> make_provider(const ProviderConfig& p) {
    if (p.kind == "scripted") return ScriptedProvider::from_file(p.script);
    HttpProviderConfig h;
    h.base_url = p.base_url;
    h.model = p.model;
    h.timeout = std::chrono::milliseconds(p.timeout_ms);
    h.max_retries = p.max_retries;
    h.api_key_env = kApiKeyEnv;
    return std::make_shared<HttpChatProvider>(std::move(h));
}

SimilarityModel load_or_build_model(const Catalog& catalog, const fs::path& cache) {
    if (!cache.empty() && fs::exists(cache)) {
        std::ifstream in(cache);
        try {
            return SimilarityModel::load(in, catalog.size());
        } catch (const Error& e) {
            spdlog::warn("ignoring model cache {}: {}", cache.string(), e.what());
        }
    }
    return build_itemcf(catalog.split().train, catalog.size());
}

Runtime build_runtime(const ServiceConfig& c) {
    Runtime rt;
    auto catalog = std::make_shared<Catalog>(ingest_catalog(c.items_path, c.interactions_path));
    rt.catalog = catalog;
    rt.model = std::make_shared<SimilarityModel>(load_or_build_model(*catalog, c.model_cache));
    rt.demos = c.demo_store.empty() ? std::make_shared<DemoStore>()
                                    : std::make_shared<DemoStore>(DemoStore::load_file(c.demo_store.string()));
    auto actor = make_provider(c.actor);
    auto critic = c.critic ? make_provider(*c.critic) : actor;
    auto profile = c.profile ? make_provider(*c.profile) : nullptr;
    AgentConfig ac;
    ac.item_noun = c.item_noun;
    ac.max_rechains = c.max_rechains;
    ac.demo_count = c.demo_count;
    ac.char_budget = c.char_budget;
    rt.deps = make_agent_deps(rt.catalog, rt.model, rt.demos, actor, critic, profile, ac);
    if (c.simulator) rt.simulator = make_provider(*c.simulator);
    return rt;
}

SessionManager::SessionManager(std::shared_ptr<const AgentDeps> deps, fs::path log_dir)
    : deps_(std::move(deps)), log_dir_(std::move(log_dir)) {
    if (!log_dir_.empty()) fs::create_directories(log_dir_);
}

SessionManager::~SessionManager() = default;

std::string SessionManager::create() {
    std::lock_guard lock(mutex_);
    std::string id = "s" + std::to_string(next_id_++);
    auto session = std::make_shared<Session>(deps_, id);
    if (!log_dir_.empty()) {
        auto log = std::make_unique<std::ofstream>(log_dir_ / (id + ".jsonl"));
        session->set_log(log.get());
        logs_.push_back(std::move(log));
    }
    sessions_.emplace(id, std::move(session));
    return id;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::size_t SessionManager::size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

struct HttpService::Impl {
    Impl(std::shared_ptr<const AgentDeps> d, fs::path log_dir) : deps(d), sessions(std::move(d), std::move(log_dir)) {}

    std::shared_ptr<const AgentDeps> deps;
    SessionManager sessions;
    httplib::Server server;
};

HttpService::HttpService(std::shared_ptr<const AgentDeps> deps, fs::path log_dir)
    : impl_(std::make_unique<Impl>(std::move(deps), std::move(log_dir))) {
    auto& srv = impl_->server;
    auto* impl = impl_.get();

    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                             {"Access-Control-Allow-Headers", "Content-Type"},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    srv.Get("/healthz", [impl](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}, {"items", impl->deps->catalog->size()}});
    });

    srv.Post("/v1/sessions", [impl](const httplib::Request&, httplib::Response& res) {
        send_json(res, 201, {{"session_id", impl->sessions.create()}});
    });

    srv.Post(R"(/v1/sessions/([^/]+)/messages)", [impl](const httplib::Request& req, httplib::Response& res) {
        auto session = impl->sessions.find(req.matches[1]);
        if (!session) return send_json(res, 404, error_body("not_found", "unknown session"));
        auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("text") || !body["text"].is_string())
            return send_json(res, 400, error_body("bad_request", "body must be {\"text\": string}"));
        try {
            auto result = session->run_turn(body["text"].get<std::string>());
            send_json(res, 200, {{"reply", result.response}, {"turn_id", result.turn_id}});
        } catch (const SessionBusy& e) {
            send_json(res, 409, error_body("conflict", e.what()));
        } catch (const InputError& e) {
            send_json(res, 400, error_body("bad_request", e.what()));
        } catch (const TurnError& e) {
            send_json(res, 502, error_body("provider_error", e.what()));
        } catch (const std::exception& e) {
            spdlog::error("turn failed: {}", e.what());
            send_json(res, 500, error_body("internal", e.what()));
        }
    });

    srv.Get(R"(/v1/sessions/([^/]+)/trace/(\d+))", [impl](const httplib::Request& req, httplib::Response& res) {
        auto session = impl->sessions.find(req.matches[1]);
        if (!session) return send_json(res, 404, error_body("not_found", "unknown session"));
        auto turn = std::stoull(req.matches[2]);
        auto trace = session->trace(turn);
        if (!trace) return send_json(res, 404, error_body("not_found", "unknown turn"));
        send_json(res, 200, *trace);
    });

    srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            auto code = res.status == 404 ? "not_found" : res.status < 500 ? "bad_request" : "internal";
            res.set_content(error_body(code, httplib::status_message(res.status)).dump(), "application/json");
        }
    });
    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "unexpected error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        send_json(res, 500, error_body("internal", what));
    });
}

HttpService::~HttpService() { stop(); }

bool HttpService::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }
int HttpService::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool HttpService::listen_after_bind() { return impl_->server.listen_after_bind(); }
void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }
void HttpService::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}
SessionManager& HttpService::sessions() noexcept { return impl_->sessions; }

}  // namespace recagent
