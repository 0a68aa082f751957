#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace recagent {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent catalog input. Carries the 1-based line number
/// when the problem is tied to a CSV row (0 otherwise).
class IngestError : public Error {
public:
    IngestError(const std::string& message, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A query was rejected by the read-only guard before reaching the engine.
class PolicyError : public Error {
public:
    using Error::Error;
};

/// The SQL engine rejected a query that passed the guard.
class SqlSyntaxError : public Error {
public:
    using Error::Error;
};

/// Invalid argument to a model or metric routine.
class InputError : public Error {
public:
    using Error::Error;
};

/// Chat provider failure after retries (or an exhausted script).
class ProviderError : public Error {
public:
    using Error::Error;
};

class MissingPlaceholder : public Error {
public:
    explicit MissingPlaceholder(std::vector<std::string> names);
    const std::vector<std::string>& names() const noexcept { return names_; }

private:
    std::vector<std::string> names_;
};

/// Neither plan grammar matched. raw_text() is the unparsed LLM reply.
class PlanParseError : public Error {
public:
    PlanParseError(const std::string& message, std::string raw)
        : Error(message), raw_(std::move(raw)) {}
    const std::string& raw_text() const noexcept { return raw_; }

private:
    std::string raw_;
};

/// A conversational turn could not complete (provider failure).
class TurnError : public Error {
public:
    using Error::Error;
};

/// Another turn is already running on the same session.
class SessionBusy : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace recagent
