#include "recagent/sql_guard.hpp"

#include <array>
#include <cctype>

#include "recagent/errors.hpp"
#include "recagent/text.hpp"

namespace recagent::sql {
namespace {

constexpr std::array kDenied = {"INSERT", "UPDATE", "DELETE",  "DROP",   "ALTER",   "ATTACH",
                                "DETACH", "PRAGMA", "CREATE", "REPLACE", "VACUUM", "REINDEX"};

bool is_word_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

// Offset just past the closing quote, or sql.size() when unterminated.
std::size_t skip_quoted(std::string_view sql, std::size_t i, char close) {
    ++i;
    while (i < sql.size()) {
        if (sql[i] == close) {
            if (close != ']' && i + 1 < sql.size() && sql[i + 1] == close) {
                i += 2;
                continue;
            }
            return i + 1;
        }
        ++i;
    }
    return sql.size();
}

}  // namespace

std::vector<Token> tokenize(std::string_view sql) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < sql.size()) {
        char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
            while (i < sql.size() && sql[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < sql.size() && sql[i + 1] == '*') {
            auto end = sql.find("*/", i + 2);
            i = end == std::string_view::npos ? sql.size() : end + 2;
        } else if (c == '\'') {
            auto end = skip_quoted(sql, i, '\'');
            out.push_back({TokenKind::string, sql.substr(i, end - i), i});
            i = end;
        } else if (c == '"' || c == '`' || c == '[') {
            auto end = skip_quoted(sql, i, c == '[' ? ']' : c);
            out.push_back({TokenKind::identifier, sql.substr(i, end - i), i});
            i = end;
        } else if (is_word_start(c)) {
            auto start = i;
            while (i < sql.size() && is_word_char(sql[i])) ++i;
            out.push_back({TokenKind::word, sql.substr(start, i - start), start});
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '.' && i + 1 < sql.size() &&
                    std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
            auto start = i;
            while (i < sql.size() &&
                   (std::isalnum(static_cast<unsigned char>(sql[i])) || sql[i] == '.'))
                ++i;
            out.push_back({TokenKind::number, sql.substr(start, i - start), start});
        } else {
            out.push_back({TokenKind::symbol, sql.substr(i, 1), i});
            ++i;
        }
    }
    return out;
}

void check_read_only(std::string_view sql, GuardOptions options) {
    auto tokens = tokenize(sql);
    if (tokens.empty()) throw PolicyError("empty query");

    const Token& first = tokens.front();
    if (first.kind != TokenKind::word || !text::iequals(first.text, "SELECT"))
        throw PolicyError("only SELECT statements are allowed");

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Token& t = tokens[i];
        if (t.kind == TokenKind::symbol && t.text == ";") {
            for (std::size_t j = i + 1; j < tokens.size(); ++j) {
                if (!(tokens[j].kind == TokenKind::symbol && tokens[j].text == ";"))
                    throw PolicyError("multiple statements are not allowed");
            }
            break;
        }
        if (t.kind != TokenKind::word) continue;
        for (const char* denied : kDenied) {
            if (text::iequals(t.text, denied))
                throw PolicyError("keyword " + std::string(denied) + " is not allowed");
        }
        if (!options.allow_limit && text::iequals(t.text, "LIMIT"))
            throw PolicyError("LIMIT is not allowed in retrieval queries");
    }
}

std::string to_id_query(std::string_view input) {
    auto body = text::trim(input);
    while (!body.empty() && body.back() == ';') body = text::trim(body.substr(0, body.size() - 1));

    auto tokens = tokenize(body);
    if (tokens.empty()) throw PolicyError("empty retrieval condition");

    const Token& first = tokens.front();
    if (first.kind == TokenKind::word && text::iequals(first.text, "SELECT")) {
        int depth = 0;
        for (const Token& t : tokens) {
            if (t.kind == TokenKind::symbol) {
                if (t.text == "(") ++depth;
                if (t.text == ")") --depth;
            } else if (depth == 0 && t.kind == TokenKind::word && text::iequals(t.text, "FROM")) {
                return "SELECT id " + std::string(body.substr(t.offset));
            }
        }
        throw PolicyError("retrieval query must select from the items table");
    }
    if (first.kind == TokenKind::word && text::iequals(first.text, "WHERE"))
        body = text::trim(body.substr(first.text.size()));
    return "SELECT id FROM items WHERE " + std::string(body);
}

}  // namespace recagent::sql
