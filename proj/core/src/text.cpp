#include "recagent/text.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace recagent::text {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string trim_copy(std::string_view s) { return std::string(trim(s)); }

std::string fold_key(std::string_view s) { return to_lower(trim(s)); }

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

bool icontains(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

bool istarts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                       : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

void append_unique_ci(std::vector<std::string>& into, const std::vector<std::string>& extra) {
    std::unordered_set<std::string> seen;
    for (const auto& s : into) seen.insert(fold_key(s));
    for (const auto& s : extra) {
        if (trim(s).empty()) continue;
        if (seen.insert(fold_key(s)).second) into.push_back(trim_copy(s));
    }
}

std::vector<std::string> dedupe_ci(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    append_unique_ci(out, items);
    return out;
}

}  // namespace recagent::text
