#include "recagent/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "parallel.hpp"
#include "recagent/errors.hpp"
#include "recagent/llm.hpp"
#include "recagent/prompts.hpp"
#include "recagent/text.hpp"

namespace recagent {
namespace {

std::string titles_of(const Catalog& catalog, const std::vector<ItemId>& ids) {
    std::vector<std::string> t;
    for (auto id : ids) t.push_back(catalog.item(id).title);
    return text::join(t, ", ");
}

std::string simulator_history(const std::vector<DialogueTurn>& transcript) {
    std::string out;
    for (const auto& t : transcript) {
        if (!out.empty()) out += '\n';
        out += (t.role == "user" ? "You: " : "Recommender: ") + t.text;
    }
    return out;
}

std::vector<std::string> dedupe_in_order(const std::vector<std::string>& titles) {
    return text::dedupe_ci(titles);
}

template <typename T>
std::string_view name_of(T value, std::initializer_list<std::pair<T, std::string_view>> table) {
    for (const auto& [v, n] : table)
        if (v == value) return n;
    return {};
}

// k distinct indices in [0, n), uniformly.
std::vector<std::size_t> sample_uniform(std::size_t n, std::size_t k, std::mt19937_64& rng) {
    k = std::min(k, n);
    std::vector<std::size_t> out;
    out.reserve(k);
    if (k * 4 < n) {
        std::unordered_set<std::size_t> seen;
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        while (out.size() < k) {
            auto i = pick(rng);
            if (seen.insert(i).second) out.push_back(i);
        }
        return out;
    }
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(all[i], all[pick(rng)]);
        out.push_back(all[i]);
    }
    return out;
}

// Weighted sampling without replacement (Efraimidis-Spirakis keys log(u)/w).
std::vector<std::size_t> sample_weighted(const std::vector<double>& weights, std::size_t k,
                                         std::mt19937_64& rng) {
    double total = 0;
    for (double w : weights) total += w;
    if (total <= 0) return sample_uniform(weights.size(), k, rng);
    k = std::min(k, weights.size());
    std::uniform_real_distribution<double> unit(std::numeric_limits<double>::min(), 1.0);
    std::vector<std::pair<double, std::size_t>> keys(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        double u = unit(rng);
        keys[i] = {weights[i] > 0 ? std::log(u) / weights[i] : -std::numeric_limits<double>::infinity(), i};
    }
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end(),
                      [](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return a.second < b.second;
                      });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(keys[i].second);
    return out;
}

}  // namespace

std::string_view to_string(SimSetting s) {
    return name_of(s, {{SimSetting::session_wise, "session_wise"},
                       {SimSetting::long_chat, "long_chat"},
                       {SimSetting::long_context, "long_context"}});
}

std::string_view to_string(OneTurnTask t) {
    return name_of(t, {{OneTurnTask::retrieval, "retrieval"}, {OneTurnTask::ranking, "ranking"}});
}

std::string_view to_string(BaselineMode m) {
    return name_of(m, {{BaselineMode::random, "random"}, {BaselineMode::popularity, "popularity"}});
}

std::optional<SimSetting> parse_sim_setting(std::string_view name) {
    std::string n(name);
    std::replace(n.begin(), n.end(), '-', '_');
    if (n == "session" || n == "session_wise") return SimSetting::session_wise;
    if (n == "long_chat") return SimSetting::long_chat;
    if (n == "long_context") return SimSetting::long_context;
    return std::nullopt;
}

std::optional<OneTurnTask> parse_one_turn_task(std::string_view name) {
    if (name == "retrieval") return OneTurnTask::retrieval;
    if (name == "ranking") return OneTurnTask::ranking;
    return std::nullopt;
}

std::optional<BaselineMode> parse_baseline_mode(std::string_view name) {
    if (name == "random") return BaselineMode::random;
    if (name == "popularity" || name == "pop") return BaselineMode::popularity;
    return std::nullopt;
}

std::vector<SimCase> make_sim_cases(const Catalog& catalog, std::size_t count, std::mt19937_64& rng) {
    std::map<UserId, std::vector<Interaction>> by_user;
    for (const auto& i : catalog.interactions()) by_user[i.user_id].push_back(i);
    std::vector<SimCase> all;
    for (auto& [user, list] : by_user) {
        if (list.size() < 2) continue;
        std::sort(list.begin(), list.end(), [](const Interaction& a, const Interaction& b) {
            if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
            return a.item_id < b.item_id;
        });
        SimCase c;
        c.user = user;
        c.target = list.back().item_id;
        for (std::size_t i = 0; i + 1 < list.size(); ++i) c.history.push_back(list[i].item_id);
        all.push_back(std::move(c));
    }
    std::shuffle(all.begin(), all.end(), rng);
    if (all.size() > count) all.resize(count);
    return all;
}

void to_json(nlohmann::json& j, const SimSession& s) {
    j = {{"user", s.target.user},
         {"target", s.target.target},
         {"history", s.target.history},
         {"setting", to_string(s.setting)},
         {"max_turns", s.max_turns},
         {"transcript", s.transcript},
         {"hit", s.hit},
         {"turns_used", s.turns_used},
         {"error", s.error ? nlohmann::json(*s.error) : nlohmann::json(nullptr)},
         {"long_term_before_first_turn", s.long_term_before_first_turn}};
}

std::string item_info(const Item& item) {
    std::ostringstream os;
    os << "tags: " << text::join(item.tags, ", ") << "; price: " << std::fixed << std::setprecision(2)
       << item.price << "; release date: " << item.release_date;
    if (!item.description.empty()) os << "; description: " << item.description;
    return os.str();
}

std::vector<DialogueTurn> synthesize_history_transcript(const Catalog& catalog,
                                                        const std::vector<ItemId>& history,
                                                        std::size_t min_chars) {
    std::vector<DialogueTurn> out;
    if (history.empty()) return out;
    std::size_t chars = 0;
    for (std::size_t day = 1; chars <= min_chars; ++day) {
        const auto& item = catalog.item(history[(day - 1) % history.size()]);
        std::string tags = item.tags.empty() ? std::string("game") : text::join(item.tags, "/");
        DialogueTurn u{"user", "Day " + std::to_string(day) + ": I spent the evening playing " +
                                   item.title + ". I really enjoy " + tags + " titles like that."};
        DialogueTurn a{"assistant", "Glad you enjoyed " + item.title +
                                        "! I will keep your taste for " + tags + " in mind."};
        chars += u.text.size() + a.text.size() + 22;
        out.push_back(std::move(u));
        out.push_back(std::move(a));
    }
    return out;
}

bool mentions_title(std::string_view message, std::string_view title) {
    return !title.empty() && text::icontains(message, title);
}

SimSession simulate_session(std::shared_ptr<const AgentDeps> deps, ChatProvider& simulator,
                            const SimCase& c, const SimOptions& options) {
    const auto& catalog = *deps->catalog;
    const auto& noun = deps->config.item_noun;
    SimSession s;
    s.target = c;
    s.setting = options.setting;
    s.max_turns = options.setting == SimSetting::long_chat ? kLongChatMaxTurns : options.max_turns;
    const auto& target = catalog.item(c.target);

    try {
        Session session(deps, "sim-" + std::to_string(c.user));
        if (options.setting == SimSetting::long_context) {
            auto transcript = options.prior_transcript.empty()
                                  ? synthesize_history_transcript(catalog, c.history,
                                                                  deps->config.char_budget)
                                  : options.prior_transcript;
            session.load_transcript(transcript);
            s.long_term_before_first_turn = session.long_term_profile();
        }

        PromptVars vars{{"item", noun},
                        {"history", titles_of(catalog, c.history)},
                        {"target", target.title},
                        {"target_item_info", item_info(target)}};
        for (std::size_t turn = 1; turn <= s.max_turns; ++turn) {
            vars["chat_history"] = simulator_history(s.transcript);
            auto prompt = render_prompt(TemplateId::user_simulator, vars);
            if (options.setting == SimSetting::long_chat) {
                bool casual = ((turn - 1) / kLongChatPhaseRounds) % 2 == 1;
                prompt += casual ? "\nIn this round, do not talk about your " + noun +
                                       " preferences; chat casually about something else."
                                 : "\nIn this round, give the recommender some information about "
                                   "the target.";
            }
            auto message = simulator.complete(prompt);
            bool end = message.find(kEndToken) != std::string::npos;
            if (end) break;
            message = text::trim_copy(message);
            s.transcript.push_back({"user", message});
            auto result = session.run_turn(message);
            s.transcript.push_back({"assistant", result.response});
            s.turns_used = turn;
            if (mentions_title(result.response, target.title)) {
                s.hit = true;
                break;
            }
        }
    } catch (const Error& e) {
        s.hit = false;
        s.error = e.what();
    }
    return s;
}

std::string render_transcript(const SimSession& s) {
    std::string out;
    std::size_t round = 0;
    for (const auto& t : s.transcript) {
        if (t.role == "user") ++round;
        out += "[" + std::to_string(round) + "] " + (t.role == "user" ? "User: " : "Agent: ") + t.text + "\n";
    }
    return out;
}

SessionMetrics session_metrics(const std::vector<SimSession>& sessions, std::size_t k) {
    if (sessions.empty()) throw InputError("session_metrics needs at least one session");
    SessionMetrics m;
    m.sessions = sessions.size();
    double hits = 0, turns = 0;
    for (const auto& s : sessions) {
        bool hit = s.hit && s.turns_used <= k;
        hits += hit ? 1 : 0;
        turns += hit ? static_cast<double>(s.turns_used) : static_cast<double>(k + 1);
    }
    m.hit_at_k = hits / static_cast<double>(sessions.size());
    m.at_k = turns / static_cast<double>(sessions.size());
    return m;
}

void to_json(nlohmann::json& j, const OneTurnCase& c) {
    j = {{"task", to_string(c.task)}, {"user", c.user},         {"target", c.target},
         {"history", c.history},      {"candidates", c.candidates}, {"conversation", c.conversation}};
}

void from_json(const nlohmann::json& j, OneTurnCase& c) {
    auto task = parse_one_turn_task(j.at("task").get<std::string>());
    if (!task) throw InputError("unknown one-turn task " + j.at("task").dump());
    c.task = *task;
    c.user = j.value("user", UserId{0});
    c.target = j.at("target").get<ItemId>();
    c.history = j.value("history", std::vector<ItemId>{});
    c.candidates = j.value("candidates", std::vector<ItemId>{});
    c.conversation = j.at("conversation").get<std::vector<DialogueTurn>>();
}

std::vector<ItemId> sample_ranking_candidates(const Catalog& catalog, ItemId target,
                                              const std::vector<ItemId>& history, std::mt19937_64& rng) {
    std::unordered_set<ItemId> seen(history.begin(), history.end());
    std::vector<ItemId> fresh, fallback;
    for (const auto& item : catalog.items()) {
        if (item.id == target) continue;
        (seen.count(item.id) ? fallback : fresh).push_back(item.id);
    }
    const std::size_t need = kRankingCandidates - 1;
    std::vector<ItemId> out;
    for (auto i : sample_uniform(fresh.size(), need, rng)) out.push_back(fresh[i]);
    // Small catalogs: top up with history items so the list stays 20 long.
    if (out.size() < need)
        for (auto i : sample_uniform(fallback.size(), need - out.size(), rng)) out.push_back(fallback[i]);
    out.push_back(target);
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

OneTurnCase gen_one_turn(ChatProvider& llm, const Catalog& catalog, const SimCase& sc,
                         OneTurnTask task, std::size_t k, std::mt19937_64& rng, std::string_view item_noun) {
    OneTurnCase c;
    c.task = task;
    c.user = sc.user;
    c.target = sc.target;
    c.history = sc.history;
    PromptVars vars{{"item", std::string(item_noun)}, {"history", titles_of(catalog, sc.history)}};

    if (task == OneTurnTask::retrieval) {
        vars["target_info"] = item_info(catalog.item(sc.target));
        auto reply = llm.complete(render_prompt(TemplateId::one_turn_retrieval, vars));
        auto open = reply.find('[');
        auto close = reply.rfind(']');
        nlohmann::json j = nlohmann::json::value_t::discarded;
        if (open != std::string::npos && close != std::string::npos && close > open)
            j = nlohmann::json::parse(reply.substr(open, close - open + 1), nullptr, false);
        if (j.is_discarded() || !j.is_array())
            throw InputError("one-turn conversation reply is not a JSON message list");
        for (const auto& m : j) {
            if (!m.is_object() || !m.contains("text")) continue;
            auto role = text::to_lower(m.value("role", std::string("user")));
            c.conversation.push_back({role == "user" ? "user" : "assistant", m["text"].get<std::string>()});
        }
        if (!c.conversation.empty() && c.conversation.back().role == "assistant") c.conversation.pop_back();
        std::string ask = "Please give me " + std::to_string(k) + " recommendations based on the chat history.";
        if (!c.conversation.empty() && c.conversation.back().role == "user")
            c.conversation.back().text += " " + ask;
        else
            c.conversation.push_back({"user", ask});
        return c;
    }

    c.candidates = sample_ranking_candidates(catalog, sc.target, sc.history, rng);
    vars["n"] = std::to_string(c.candidates.size());
    vars["candidates"] = titles_of(catalog, c.candidates);
    auto question = text::trim_copy(llm.complete(render_prompt(TemplateId::one_turn_ranking, vars)));
    if (question.size() >= 2 && question.front() == '"' && question.back() == '"')
        question = question.substr(1, question.size() - 2);
    bool all_named = std::all_of(c.candidates.begin(), c.candidates.end(), [&](ItemId id) {
        return text::icontains(question, catalog.item(id).title);
    });
    if (!all_named) question += " The candidates are: " + vars["candidates"] + ".";
    c.conversation.push_back({"user", question});
    return c;
}

std::vector<std::string> extract_titles(std::string_view reply, const Catalog& catalog,
                                        const std::vector<ItemId>& restrict_to) {
    struct Match {
        std::size_t pos, len;
        ItemId id;
    };
    auto lower = text::to_lower(reply);
    std::vector<Match> matches;
    auto scan = [&](ItemId id) {
        auto t = text::to_lower(catalog.item(id).title);
        if (t.empty()) return;
        for (auto pos = lower.find(t); pos != std::string::npos; pos = lower.find(t, pos + 1))
            matches.push_back({pos, t.size(), id});
    };
    if (restrict_to.empty()) {
        for (const auto& item : catalog.items()) scan(item.id);
    } else {
        for (auto id : restrict_to) scan(id);
    }
    std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
        if (a.pos != b.pos) return a.pos < b.pos;
        return a.len > b.len;
    });
    std::vector<std::string> out;
    std::unordered_set<ItemId> emitted;
    std::size_t covered_end = 0;
    for (const auto& m : matches) {
        if (m.pos < covered_end && m.pos + m.len <= covered_end) continue;
        covered_end = std::max(covered_end, m.pos + m.len);
        if (emitted.insert(m.id).second) out.push_back(catalog.item(m.id).title);
    }
    return out;
}

double recall_at_k(const std::vector<std::string>& returned, std::string_view positive, std::size_t k) {
    auto list = dedupe_in_order(returned);
    for (std::size_t i = 0; i < list.size() && i < k; ++i)
        if (text::iequals(list[i], positive)) return 1.0;
    return 0.0;
}

double ndcg_at_k(const std::vector<std::string>& returned, std::string_view positive,
                 const std::vector<std::string>& candidates, std::size_t k) {
    std::vector<std::string> kept;
    for (const auto& t : dedupe_in_order(returned)) {
        bool ok = candidates.empty() || std::any_of(candidates.begin(), candidates.end(),
                                                    [&](const std::string& c) { return text::iequals(c, t); });
        if (ok) kept.push_back(t);
    }
    for (std::size_t i = 0; i < kept.size() && i < k; ++i)
        if (text::iequals(kept[i], positive)) return 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return 0.0;
}

double one_turn_metrics(const std::vector<OneTurnResponse>& responses, OneTurnTask task, std::size_t k) {
    if (responses.empty()) return 0.0;
    double sum = 0;
    for (const auto& r : responses)
        sum += task == OneTurnTask::retrieval ? recall_at_k(r.titles, r.positive, k)
                                              : ndcg_at_k(r.titles, r.positive, r.candidates, k);
    return sum / static_cast<double>(responses.size());
}

nlohmann::json EvalReport::to_json() const {
    return {{"metrics", metrics}, {"config", config}, {"rows", rows.size()}};
}

std::string EvalReport::to_text() const {
    std::size_t width = 6;
    for (const auto& [name, _] : metrics) width = std::max(width, name.size());
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(width)) << "metric" << "  value\n"
       << std::string(width, '-') << "  " << std::string(10, '-') << "\n";
    for (const auto& [name, value] : metrics)
        os << std::setw(static_cast<int>(width)) << name << "  " << std::fixed << std::setprecision(4)
           << value << "\n";
    return os.str();
}

void EvalReport::write_rows(std::ostream& out) const {
    for (const auto& r : rows) out << r.dump() << '\n';
}

EvalReport baseline(BaselineMode mode, OneTurnTask task, const Catalog& catalog, std::size_t k,
                    std::size_t trials, std::uint64_t seed) {
    if (trials == 0) throw InputError("baseline needs at least one trial");
    if (catalog.size() == 0) throw InputError("baseline needs a non-empty catalog");
    std::mt19937_64 rng(seed);

    std::map<UserId, std::vector<ItemId>> history;
    for (const auto& i : catalog.split().train) history[i.user_id].push_back(i.item_id);
    for (const auto& i : catalog.split().valid) history[i.user_id].push_back(i.item_id);
    const auto& tests = catalog.split().test;

    std::vector<double> weights;
    for (const auto& item : catalog.items()) weights.push_back(static_cast<double>(item.popularity));

    EvalReport report;
    std::string metric = std::string(task == OneTurnTask::retrieval ? "recall@" : "ndcg@") + std::to_string(k);
    report.config = {{"mode", to_string(mode)}, {"task", to_string(task)}, {"k", k},
                     {"trials", trials},        {"seed", seed},          {"items", catalog.size()}};
    double sum = 0;
    std::uniform_int_distribution<std::size_t> pick_test(0, tests.empty() ? 0 : tests.size() - 1);
    std::uniform_int_distribution<ItemId> pick_item(0, static_cast<ItemId>(catalog.size() - 1));
    for (std::size_t t = 0; t < trials; ++t) {
        ItemId target;
        std::vector<ItemId> hist;
        if (!tests.empty()) {
            const auto& ti = tests[pick_test(rng)];
            target = ti.item_id;
            if (auto it = history.find(ti.user_id); it != history.end()) hist = it->second;
        } else {
            target = pick_item(rng);
        }

        double score;
        if (task == OneTurnTask::retrieval) {
            auto picks = mode == BaselineMode::random ? sample_uniform(catalog.size(), k, rng)
                                                      : sample_weighted(weights, k, rng);
            score = std::find(picks.begin(), picks.end(), target) != picks.end() ? 1.0 : 0.0;
        } else {
            auto cands = sample_ranking_candidates(catalog, target, hist, rng);
            std::shuffle(cands.begin(), cands.end(), rng);
            if (mode == BaselineMode::popularity)
                std::stable_sort(cands.begin(), cands.end(), [&](ItemId a, ItemId b) {
                    return catalog.item(a).popularity > catalog.item(b).popularity;
                });
            auto pos = static_cast<std::size_t>(std::find(cands.begin(), cands.end(), target) - cands.begin());
            score = pos < k ? 1.0 / std::log2(static_cast<double>(pos) + 2.0) : 0.0;
        }
        sum += score;
        report.rows.push_back({{"trial", t}, {"target", target}, {"score", score}});
    }
    report.metrics[metric] = sum / static_cast<double>(trials);
    return report;
}

EvalReport run_simulator_eval(std::shared_ptr<const AgentDeps> deps, ChatProvider& simulator,
                              const std::vector<SimCase>& cases, const SimOptions& options,
                              std::size_t parallelism) {
    std::vector<SimSession> sessions(cases.size());
    detail::parallel_for(cases.size(), parallelism, [&](std::size_t i) {
        sessions[i] = simulate_session(deps, simulator, cases[i], options);
    });
    EvalReport report;
    std::size_t k = options.setting == SimSetting::long_chat ? kLongChatMaxTurns : options.max_turns;
    report.config = {{"setting", to_string(options.setting)}, {"max_turns", k}, {"sessions", cases.size()}};
    if (!sessions.empty()) {
        auto m = session_metrics(sessions, k);
        report.metrics["hit@" + std::to_string(k)] = m.hit_at_k;
        report.metrics["at@" + std::to_string(k)] = m.at_k;
    }
    std::size_t errors = 0;
    for (const auto& s : sessions) {
        errors += s.error ? 1 : 0;
        report.rows.push_back(s);
    }
    report.metrics["errors"] = static_cast<double>(errors);
    return report;
}

EvalReport run_one_turn_eval(std::shared_ptr<const AgentDeps> deps, const std::vector<OneTurnCase>& cases,
                             std::size_t k) {
    const auto& catalog = *deps->catalog;
    EvalReport report;
    std::map<OneTurnTask, std::vector<OneTurnResponse>> by_task;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        OneTurnResponse r;
        r.positive = catalog.item(c.target).title;
        for (auto id : c.candidates) r.candidates.push_back(catalog.item(id).title);
        nlohmann::json row = {{"case", i}, {"task", to_string(c.task)}, {"target", c.target}};
        try {
            if (c.conversation.empty() || c.conversation.back().role != "user")
                throw InputError("one-turn case must end with a user message");
            Session session(deps, "one-turn-" + std::to_string(i));
            session.load_transcript({c.conversation.begin(), c.conversation.end() - 1});
            auto result = session.run_turn(c.conversation.back().text);
            r.titles = extract_titles(result.response, catalog,
                                      c.task == OneTurnTask::ranking ? c.candidates : std::vector<ItemId>{});
            row["response"] = result.response;
        } catch (const Error& e) {
            row["error"] = e.what();
        }
        row["titles"] = r.titles;
        row["score"] = c.task == OneTurnTask::retrieval ? recall_at_k(r.titles, r.positive, k)
                                                         : ndcg_at_k(r.titles, r.positive, r.candidates, k);
        report.rows.push_back(std::move(row));
        by_task[c.task].push_back(std::move(r));
    }
    for (const auto& [task, list] : by_task) {
        std::string name = std::string(task == OneTurnTask::retrieval ? "recall@" : "ndcg@") + std::to_string(k);
        report.metrics[name] = one_turn_metrics(list, task, k);
    }
    report.config = {{"k", k}, {"cases", cases.size()}};
    return report;
}

}  // namespace recagent
