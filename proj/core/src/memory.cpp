#include "recagent/memory.hpp"

#include <istream>
#include <ostream>
#include <spdlog/spdlog.h>
#include <unordered_set>

#include "recagent/errors.hpp"
#include "recagent/llm.hpp"
#include "recagent/prompts.hpp"
#include "recagent/text.hpp"

namespace recagent {

std::string ToolCallRecord::summary() const {
    std::string s = tool_name + " (" + tool_input + ") -> ";
    if (output.error) {
        s += output.error_kind + ": " + *output.error;
        return s;
    }
    s += std::to_string(output.candidates_after) + (output.candidates_after == 1 ? " candidate" : " candidates");
    if (!output.seeds.empty()) s += "; seeds: " + text::join(output.seeds, ", ");
    if (!output.conditions.empty()) s += "; " + output.conditions;
    if (!output.items.empty()) s += "; items: " + text::join(output.items, ", ");
    for (const auto& n : output.notes) s += "; note: " + n;
    return s;
}

void to_json(nlohmann::json& j, const ToolOutput& o) {
    j = {{"candidates_before", o.candidates_before},
         {"candidates_after", o.candidates_after},
         {"seeds", o.seeds},
         {"conditions", o.conditions},
         {"items", o.items},
         {"text", o.text},
         {"notes", o.notes},
         {"error", o.error ? nlohmann::json(*o.error) : nlohmann::json(nullptr)},
         {"error_kind", o.error_kind}};
}

void from_json(const nlohmann::json& j, ToolOutput& o) {
    o.candidates_before = j.value("candidates_before", std::size_t{0});
    o.candidates_after = j.value("candidates_after", std::size_t{0});
    o.seeds = j.value("seeds", std::vector<std::string>{});
    o.conditions = j.value("conditions", "");
    o.items = j.value("items", std::vector<std::string>{});
    o.text = j.value("text", "");
    o.notes = j.value("notes", std::vector<std::string>{});
    if (j.contains("error") && !j.at("error").is_null())
        o.error = j.at("error").get<std::string>();
    else
        o.error.reset();
    o.error_kind = j.value("error_kind", "");
}

void to_json(nlohmann::json& j, const ToolCallRecord& r) {
    j = {{"tool", r.tool_name}, {"input", r.tool_input}, {"output", r.output}};
}

void from_json(const nlohmann::json& j, ToolCallRecord& r) {
    r.tool_name = j.at("tool").get<std::string>();
    r.tool_input = j.at("input").get<std::string>();
    r.output = j.at("output").get<ToolOutput>();
}

CandidateBus reset_bus(const Catalog& catalog) {
    CandidateBus bus;
    bus.candidates.resize(catalog.size());
    for (std::size_t i = 0; i < catalog.size(); ++i) bus.candidates[i] = static_cast<ItemId>(i);
    return bus;
}

void record_step(CandidateBus& bus, ToolCallRecord record) { bus.tracker.push_back(std::move(record)); }

void to_json(nlohmann::json& j, const UserProfile& p) {
    j = {{"like", p.like}, {"dislike", p.dislike}, {"expect", p.expect}};
}

void from_json(const nlohmann::json& j, UserProfile& p) {
    p.like = j.value("like", std::vector<std::string>{});
    p.dislike = j.value("dislike", std::vector<std::string>{});
    p.expect = j.value("expect", std::vector<std::string>{});
}

namespace {

std::vector<std::string> without(const std::vector<std::string>& items,
                                 const std::vector<std::string>& drop) {
    std::unordered_set<std::string> dropped;
    for (const auto& d : drop) dropped.insert(text::fold_key(d));
    std::vector<std::string> out;
    for (const auto& s : items)
        if (!dropped.count(text::fold_key(s))) out.push_back(s);
    return out;
}

UserProfile union_recent_wins(const UserProfile& older, const UserProfile& newer) {
    UserProfile out;
    out.like = text::dedupe_ci(without(older.like, newer.dislike));
    text::append_unique_ci(out.like, newer.like);
    out.dislike = text::dedupe_ci(without(older.dislike, newer.like));
    text::append_unique_ci(out.dislike, newer.dislike);
    return out;
}

}  // namespace

UserProfile merge_long_term(const UserProfile& existing, const UserProfile& fresh) {
    return union_recent_wins(existing, fresh);
}

UserProfile compose_profile(const UserProfile& long_term, const UserProfile& short_term) {
    auto out = union_recent_wins(long_term, short_term);
    out.expect = text::dedupe_ci(short_term.expect);
    return out;
}

void to_json(nlohmann::json& j, const DialogueTurn& t) { j = {{"role", t.role}, {"text", t.text}}; }

void from_json(const nlohmann::json& j, DialogueTurn& t) {
    t.role = j.at("role").get<std::string>();
    t.text = j.at("text").get<std::string>();
}

std::string render_turns(std::span<const DialogueTurn> turns) {
    std::string out;
    for (const auto& t : turns) {
        if (!out.empty()) out += '\n';
        out += (t.role == "user" ? "Human: " : "Assistant: ");
        out += t.text;
    }
    return out;
}

std::optional<UserProfile> parse_profile_reply(std::string_view reply) {
    auto open = reply.find('{');
    auto close = reply.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        return std::nullopt;
    auto j = nlohmann::json::parse(reply.substr(open, close - open + 1), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    UserProfile p;
    for (auto [key, field] : {std::pair{"like", &p.like}, std::pair{"dislike", &p.dislike},
                              std::pair{"expect", &p.expect}}) {
        if (!j.contains(key) || !j.at(key).is_array()) return std::nullopt;
        for (const auto& v : j.at(key)) {
            if (!v.is_string()) return std::nullopt;
            field->push_back(v.get<std::string>());
        }
        *field = text::dedupe_ci(*field);
    }
    return p;
}

ProfileExtraction extract_profile(ChatProvider& llm, std::span<const DialogueTurn> segment,
                                  std::string_view item_noun) {
    if (segment.empty()) throw InputError("extract_profile requires a non-empty segment");
    ProfileExtraction result;
    std::vector<ChatMessage> messages{
        {"user", render_prompt(TemplateId::profile_extraction,
                               {{"item", std::string(item_noun)}, {"conversation", render_turns(segment)}})}};
    try {
        for (int attempt = 0; attempt < 2; ++attempt) {
            auto reply = llm.complete(messages);
            ++result.calls;
            if (auto p = parse_profile_reply(reply)) {
                result.profile = std::move(*p);
                return result;
            }
            messages.push_back({"assistant", reply});
            messages.push_back({"user",
                                "Your reply did not follow the required format. Reply in the exact "
                                "schema: a JSON object with keys \"like\", \"dislike\" and "
                                "\"expect\", each an array of strings, and nothing else."});
        }
    } catch (const ProviderError& e) {
        throw TurnError(std::string("profile extraction failed: ") + e.what());
    }
    result.warning = "profile extraction reply was unparseable twice; using an empty profile";
    spdlog::warn("{}", *result.warning);
    return result;
}

void DialogueContext::append(std::string role, std::string text) {
    turns_.push_back({std::move(role), std::move(text)});
}

std::string DialogueContext::render_history() const { return render_turns(turns_); }

std::size_t DialogueContext::fold_if_needed(ChatProvider* profile_llm, std::string_view item_noun) {
    std::size_t calls = 0;
    while (!turns_.empty() && render_history().size() > char_budget_) {
        std::size_t n = turns_.size() > keep_recent_ ? turns_.size() - keep_recent_ : 1;
        std::span<const DialogueTurn> segment(turns_.data(), n);
        if (profile_llm) {
            auto extracted = extract_profile(*profile_llm, segment, item_noun);
            calls += extracted.calls;
            if (extracted.warning) warnings_.push_back(*extracted.warning);
            long_term_ = merge_long_term(long_term_, extracted.profile);
        } else {
            spdlog::warn("dropping {} turns over the context budget without a profile provider", n);
        }
        turns_.erase(turns_.begin(), turns_.begin() + static_cast<std::ptrdiff_t>(n));
    }
    return calls;
}

std::size_t DialogueContext::load_transcript(std::span<const DialogueTurn> turns,
                                             ChatProvider* profile_llm, std::string_view item_noun) {
    for (const auto& t : turns) turns_.push_back(t);
    return fold_if_needed(profile_llm, item_noun);
}

void to_json(nlohmann::json& j, const SessionLogEntry& e) {
    j = {{"role", e.role},
         {"text", e.text},
         {"long_term_profile", e.long_term},
         {"short_term_profile", e.short_term},
         {"tracker", e.tracker}};
}

void from_json(const nlohmann::json& j, SessionLogEntry& e) {
    e.role = j.at("role").get<std::string>();
    e.text = j.at("text").get<std::string>();
    e.long_term = j.value("long_term_profile", UserProfile{});
    e.short_term = j.value("short_term_profile", UserProfile{});
    e.tracker = j.value("tracker", std::vector<ToolCallRecord>{});
}

void append_session_log(std::ostream& out, const SessionLogEntry& entry) {
    out << nlohmann::json(entry).dump() << '\n';
}

std::vector<SessionLogEntry> read_session_log(std::istream& in) {
    std::vector<SessionLogEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<SessionLogEntry>());
        } catch (const nlohmann::json::exception& e) {
            throw InputError("session log line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<DialogueTurn> turns_from_log(const std::vector<SessionLogEntry>& entries) {
    std::vector<DialogueTurn> out;
    for (const auto& e : entries) out.push_back({e.role, e.text});
    return out;
}

}  // namespace recagent
