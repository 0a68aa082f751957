#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared across modules. ASCII-only case folding.
namespace recagent::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::string trim_copy(std::string_view s);

/// Lowercased and trimmed; the key used for title lookup and dedup.
std::string fold_key(std::string_view s);

bool iequals(std::string_view a, std::string_view b);
bool icontains(std::string_view haystack, std::string_view needle);
bool istarts_with(std::string_view s, std::string_view prefix);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Appends items from `extra` not already present (case-insensitive).
void append_unique_ci(std::vector<std::string>& into, const std::vector<std::string>& extra);
std::vector<std::string> dedupe_ci(const std::vector<std::string>& items);

}  // namespace recagent::text
