#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace recagent::sql {

enum class TokenKind { word, number, string, identifier, symbol };

struct Token {
    TokenKind kind;
    std::string_view text;
    std::size_t offset;
};

/// Lexes enough SQL to tell keywords from literals: comments are skipped,
/// quoted strings and identifiers become single tokens.
std::vector<Token> tokenize(std::string_view sql);

struct GuardOptions {
    bool allow_limit = true;
};

/// Token-level read-only check: one statement, first keyword SELECT, no
/// write/DDL/PRAGMA/ATTACH keywords outside literals. Throws PolicyError.
void check_read_only(std::string_view sql, GuardOptions options = {});

/// Builds the id-projecting query the retrieval tool runs. A bare condition
/// ("tags LIKE '%RPG%'") becomes `SELECT id FROM items WHERE <cond>`; a full
/// SELECT keeps everything from its top-level FROM onwards.
std::string to_id_query(std::string_view input);

}  // namespace recagent::sql
