#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace recagent {

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

struct ChatParams {
    double temperature = 0.0;
    std::optional<int> max_tokens;
    std::vector<std::string> stop;
};

/// Chat-completion backend. complete() is safe to call concurrently.
class ChatProvider {
public:
    virtual ~ChatProvider() = default;

    /// Throws InputError on empty messages, ProviderError on failure.
    std::string complete(std::span<const ChatMessage> messages, const ChatParams& params = {});
    std::string complete(std::string_view user_prompt, const ChatParams& params = {});

    std::size_t call_count() const noexcept { return calls_.load(); }

protected:
    virtual std::string do_complete(std::span<const ChatMessage> messages,
                                    const ChatParams& params) = 0;

private:
    std::atomic<std::size_t> calls_{0};
};

struct ScriptEntry {
    std::string match;  // substring of the last user message; "*" matches anything
    std::string reply;
};

/// Replays canned replies. Each entry is used once; the first unused entry
/// whose matcher fits the last user message wins.
class ScriptedProvider final : public ChatProvider {
public:
    ScriptedProvider() = default;
    explicit ScriptedProvider(std::vector<ScriptEntry> script);

    /// Line-JSON: one {"match": ..., "reply": ...} object per line.
    static std::shared_ptr<ScriptedProvider> from_file(const std::filesystem::path& path);
    static std::vector<ScriptEntry> parse_script(std::istream& in);

    void push(std::string match, std::string reply);
    std::size_t remaining() const;
    /// Last user message of every call, in call order.
    std::vector<std::string> prompts() const;

protected:
    std::string do_complete(std::span<const ChatMessage> messages, const ChatParams& params) override;

private:
    mutable std::mutex mutex_;
    std::vector<ScriptEntry> script_;
    std::vector<bool> used_;
    std::vector<std::string> prompts_;
};

struct HttpProviderConfig {
    std::string base_url;  // e.g. http://localhost:8000/v1
    std::string model;
    std::chrono::milliseconds timeout{60000};
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::string api_key_env = "RECAGENT_API_KEY";
};

/// Speaks the chat-completions JSON protocol (POST {base}/chat/completions).
/// Retries connection failures, 429 and 5xx with exponential backoff.
class HttpChatProvider final : public ChatProvider {
public:
    /// Reads the API key from the configured environment variable only.
    explicit HttpChatProvider(HttpProviderConfig config);

protected:
    std::string do_complete(std::span<const ChatMessage> messages, const ChatParams& params) override;

private:
    HttpProviderConfig config_;
    std::string api_key_;
};

/// Splits "http://host:port/prefix" into the client origin and path prefix.
struct UrlParts {
    std::string origin;
    std::string path_prefix;
};
UrlParts split_base_url(std::string_view url);

}  // namespace recagent
