#include "recagent/llm.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>
#include <thread>

#include "httplib.h"
#include "recagent/errors.hpp"
#include "recagent/text.hpp"

namespace recagent {

std::string ChatProvider::complete(std::span<const ChatMessage> messages, const ChatParams& params) {
    if (messages.empty()) throw InputError("chat completion requires at least one message");
    ++calls_;
    return do_complete(messages, params);
}

std::string ChatProvider::complete(std::string_view user_prompt, const ChatParams& params) {
    ChatMessage msg{"user", std::string(user_prompt)};
    return complete(std::span<const ChatMessage>(&msg, 1), params);
}

ScriptedProvider::ScriptedProvider(std::vector<ScriptEntry> script)
    : script_(std::move(script)), used_(script_.size(), false) {}

std::vector<ScriptEntry> ScriptedProvider::parse_script(std::istream& in) {
    std::vector<ScriptEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            out.push_back({j.at("match").get<std::string>(), j.at("reply").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw InputError("script line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open script " + path.string());
    return std::make_shared<ScriptedProvider>(parse_script(in));
}

void ScriptedProvider::push(std::string match, std::string reply) {
    std::lock_guard lock(mutex_);
    script_.push_back({std::move(match), std::move(reply)});
    used_.push_back(false);
}

std::size_t ScriptedProvider::remaining() const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count(used_.begin(), used_.end(), false));
}

std::vector<std::string> ScriptedProvider::prompts() const {
    std::lock_guard lock(mutex_);
    return prompts_;
}

std::string ScriptedProvider::do_complete(std::span<const ChatMessage> messages, const ChatParams&) {
    std::string last_user;
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == "user") {
            last_user = it->content;
            break;
        }
    }
    std::lock_guard lock(mutex_);
    prompts_.push_back(last_user);
    bool any_left = false;
    for (std::size_t i = 0; i < script_.size(); ++i) {
        if (used_[i]) continue;
        any_left = true;
        const auto& e = script_[i];
        if (e.match == "*" || last_user.find(e.match) != std::string::npos) {
            used_[i] = true;
            return e.reply;
        }
    }
    if (!any_left) throw ProviderError("script exhausted");
    throw ProviderError("no script entry matches the prompt");
}

UrlParts split_base_url(std::string_view url) {
    auto scheme_end = url.find("://");
    std::size_t host_start = scheme_end == std::string_view::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', host_start);
    UrlParts parts;
    parts.origin = std::string(url.substr(0, path_start));
    if (path_start != std::string_view::npos) parts.path_prefix = std::string(url.substr(path_start));
    while (!parts.path_prefix.empty() && parts.path_prefix.back() == '/') parts.path_prefix.pop_back();
    return parts;
}

HttpChatProvider::HttpChatProvider(HttpProviderConfig config) : config_(std::move(config)) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

std::string HttpChatProvider::do_complete(std::span<const ChatMessage> messages,
                                          const ChatParams& params) {
    nlohmann::json body = {{"model", config_.model}, {"temperature", params.temperature}};
    auto& msgs = body["messages"] = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    if (params.max_tokens) body["max_tokens"] = *params.max_tokens;
    if (!params.stop.empty()) body["stop"] = params.stop;
    const std::string payload = body.dump();

    auto parts = split_base_url(config_.base_url);
    const std::string path = parts.path_prefix + "/chat/completions";
    httplib::Client client(parts.origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    spdlog::debug("chat request to {}{} (Authorization: {}): {}", parts.origin, path,
                  api_key_.empty() ? "none" : "Bearer ***", payload);

    std::string last_error;
    auto backoff = config_.initial_backoff;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        spdlog::debug("chat response status {}: {}", res->status, res->body);
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw ProviderError("HTTP " + std::to_string(res->status) + ": " + res->body);
        try {
            auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("malformed chat response: ") + e.what());
        }
    }
    throw ProviderError("chat provider failed after " + std::to_string(config_.max_retries) +
                        " retries: " + last_error);
}

}  // namespace recagent
