#include "cli_app.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <random>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "recagent/demogen.hpp"
#include "recagent/errors.hpp"
#include "recagent/evalharness.hpp"
#include "recagent/service.hpp"
#include "recagent/text.hpp"

namespace recagent::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::uint64_t seed = 7;
    bool verbose = false;

    std::string items, interactions;
    std::string model_out;

    bool trace = false;
    std::string trace_file;

    std::string host;
    int port = 0;

    std::string strategy = "input-first";
    std::size_t gen_count = 5;
    std::vector<std::string> target_plans;
    std::string demos_out;
    std::string records_out;
    std::size_t parallelism = 1;

    std::string setting = "session";
    std::size_t sessions = 0;
    std::size_t max_turns = 0;
    std::string task = "retrieval";
    std::string baseline_mode;
    std::size_t trials = 1000;
    std::size_t k = 0;
    std::string cases_file;
    std::string rows_out;
    std::string report_out;

    std::vector<std::string> traces;
    std::string synthetic;
    std::string dataset_out;
};

ServiceConfig require_config(const Options& o) {
    if (o.config.empty()) throw ConfigError("this command needs --config <path>");
    auto c = load_config(o.config);
    validate_config(c);
    spdlog::info("config: {}", redacted_summary(c).dump());
    return c;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw InputError("cannot write " + path);
    return f;
}

int cmd_ingest(const Options& o, std::ostream& out) {
    fs::path items = o.items, interactions = o.interactions;
    if (items.empty() || interactions.empty()) {
        if (o.config.empty()) throw ConfigError("ingest needs --items and --interactions, or --config");
        auto c = load_config(o.config);
        if (items.empty()) items = c.items_path;
        if (interactions.empty()) interactions = c.interactions_path;
    }
    auto catalog = ingest_catalog(items, interactions);
    const auto& s = catalog.split();
    out << nlohmann::json{{"items", catalog.size()},
                          {"interactions", catalog.interactions().size()},
                          {"train", s.train.size()},
                          {"valid", s.valid.size()},
                          {"test", s.test.size()}}
               .dump()
        << "\n";
    return 0;
}

int cmd_build_model(const Options& o, std::ostream& out) {
    auto c = load_config(o.config.empty() ? throw ConfigError("build-model needs --config") : o.config);
    fs::path dest = o.model_out.empty() ? c.model_cache : fs::path(o.model_out);
    if (dest.empty()) throw ConfigError("no output path: pass --out or set model_cache");
    auto catalog = ingest_catalog(c.items_path, c.interactions_path);
    auto model = build_itemcf(catalog.split().train, catalog.size());
    auto f = open_out(dest.string());
    model.save(f);
    out << "wrote " << dest.string() << " (" << model.item_count() << " items, " << model.user_count()
        << " users)\n";
    return 0;
}

void print_trace(const TurnResult& t, std::ostream& out) {
    for (std::size_t i = 0; i < t.attempts.size(); ++i) {
        const auto& a = t.attempts[i];
        out << "[trace] attempt " << i + 1 << ": ";
        if (a.parse_error) out << "unparseable plan";
        else if (a.plan.empty()) out << "no tools";
        else out << render_numbered(a.plan);
        out << " -> " << (a.judgment.positive() ? "accepted" : "rejected") << "\n";
        for (const auto& r : a.records) out << "[trace]   " << r.summary() << "\n";
        if (!a.judgment.positive()) out << "[trace]   critic: " << a.judgment.feedback << "\n";
    }
    out << "[trace] calls: actor=" << t.actor_calls << " critic=" << t.critic_calls
        << " profile=" << t.profile_calls << "\n";
}

int cmd_chat(const Options& o, std::istream& in, std::ostream& out) {
    auto rt = build_runtime(require_config(o));
    Session session(rt.deps, "chat");
    std::ofstream trace_file;
    if (!o.trace_file.empty()) trace_file = open_out(o.trace_file);
    std::string line;
    while (std::getline(in, line)) {
        auto text = text::trim(line);
        if (text.empty()) continue;
        if (text == "/quit" || text == "/exit") break;
        auto result = session.run_turn(text);
        out << "Assistant: " << result.response << "\n";
        if (o.trace) print_trace(result, out);
        if (trace_file) trace_file << nlohmann::json(result).dump() << "\n";
        out.flush();
    }
    return 0;
}

int cmd_serve(const Options& o, std::ostream& out) {
    auto c = require_config(o);
    auto rt = build_runtime(c);
    HttpService service(rt.deps, c.session_log_dir);
    auto host = o.host.empty() ? c.host : o.host;
    auto port = o.port ? o.port : c.port;
    out << "listening on " << host << ":" << port << "\n";
    out.flush();
    if (!service.listen(host, port)) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
    return 0;
}

int cmd_demogen(const Options& o, std::ostream& out) {
    auto c = require_config(o);
    auto strategy = parse_gen_strategy(o.strategy);
    if (!strategy || (*strategy != GenStrategy::input_first && *strategy != GenStrategy::output_first))
        throw ConfigError("--strategy must be input-first or output-first");
    auto rt = build_runtime(c);
    DemoStore store = *rt.demos;
    DemogenEnv env{*rt.deps->registry, *rt.demos, rt.catalog.get(), c.item_noun, c.demo_count, o.parallelism};

    std::vector<GenRecord> records;
    if (*strategy == GenStrategy::input_first) {
        records = generate_input_first(*rt.deps->actor, env, o.gen_count);
    } else {
        std::vector<Plan> targets;
        for (const auto& p : o.target_plans) targets.push_back(parse_plan(p));
        if (targets.empty()) {
            // One target per distinct tool sequence among the seeds.
            for (const auto& d : rt.demos->demos()) {
                if (d.plan.empty()) continue;
                bool seen = std::any_of(targets.begin(), targets.end(),
                                        [&](const Plan& t) { return plans_consistent(t, d.plan); });
                if (!seen) targets.push_back(d.plan);
            }
        }
        for (const auto& t : targets) {
            auto batch = generate_output_first(*rt.deps->actor, env, t, o.gen_count);
            records.insert(records.end(), batch.begin(), batch.end());
        }
    }
    auto added = append_accepted(records, store);
    if (!o.records_out.empty()) {
        auto f = open_out(o.records_out);
        for (const auto& r : records) f << nlohmann::json(r).dump() << "\n";
    }
    if (!o.demos_out.empty()) {
        auto f = open_out(o.demos_out);
        store.save(f);
    }
    out << nlohmann::json{{"strategy", to_string(*strategy)},
                          {"generated", records.size()},
                          {"accepted", added},
                          {"rejected", records.size() - added},
                          {"store_size", store.size()}}
               .dump()
        << "\n";
    return 0;
}

void emit_report(const Options& o, const EvalReport& report, std::ostream& out) {
    out << report.to_text();
    out << report.to_json().dump() << "\n";
    if (!o.rows_out.empty()) {
        auto f = open_out(o.rows_out);
        report.write_rows(f);
    }
    if (!o.report_out.empty()) {
        auto f = open_out(o.report_out);
        f << report.to_json().dump(2) << "\n";
    }
}

int cmd_eval_simulator(const Options& o, std::ostream& out) {
    auto c = require_config(o);
    auto setting = parse_sim_setting(o.setting);
    if (!setting) throw ConfigError("--setting must be session, long-chat or long-context");
    auto rt = build_runtime(c);
    if (!rt.simulator) throw ConfigError("eval simulator needs simulator_provider in the config");
    std::mt19937_64 rng(o.seed);
    auto cases = make_sim_cases(*rt.catalog, o.sessions ? o.sessions : c.eval.simulator_sessions, rng);
    SimOptions so;
    so.setting = *setting;
    so.max_turns = o.max_turns ? o.max_turns : c.eval.max_turns;
    auto report = run_simulator_eval(rt.deps, *rt.simulator, cases, so, o.parallelism);
    report.config["seed"] = o.seed;
    emit_report(o, report, out);
    return 0;
}

int cmd_eval_one_turn(const Options& o, std::ostream& out) {
    auto task = parse_one_turn_task(o.task);
    if (!task) throw ConfigError("--task must be retrieval or ranking");
    std::size_t k = o.k ? o.k : (*task == OneTurnTask::retrieval ? 5 : kRankingCandidates);
    if (o.config.empty()) throw ConfigError("eval one-turn needs --config");
    auto c = load_config(o.config);

    if (!o.baseline_mode.empty()) {
        auto mode = parse_baseline_mode(o.baseline_mode);
        if (!mode) throw ConfigError("--baseline must be random or popularity");
        auto catalog = ingest_catalog(c.items_path, c.interactions_path);
        emit_report(o, baseline(*mode, *task, catalog, k, o.trials, o.seed), out);
        return 0;
    }

    validate_config(c);
    auto rt = build_runtime(c);
    std::vector<OneTurnCase> cases;
    if (!o.cases_file.empty()) {
        std::ifstream f(o.cases_file);
        if (!f) throw InputError("cannot open " + o.cases_file);
        std::string line;
        while (std::getline(f, line))
            if (!text::trim(line).empty()) cases.push_back(nlohmann::json::parse(line).get<OneTurnCase>());
    } else {
        if (!rt.simulator) throw ConfigError("generating one-turn cases needs simulator_provider");
        std::mt19937_64 rng(o.seed);
        auto n = o.sessions ? o.sessions
                            : (*task == OneTurnTask::retrieval ? c.eval.retrieval_cases : c.eval.ranking_cases);
        for (const auto& sc : make_sim_cases(*rt.catalog, n, rng))
            cases.push_back(gen_one_turn(*rt.simulator, *rt.catalog, sc, *task, k, rng, c.item_noun));
    }
    auto report = run_one_turn_eval(rt.deps, cases, k);
    report.config["seed"] = o.seed;
    emit_report(o, report, out);
    return 0;
}

int cmd_export(const Options& o, std::ostream& out) {
    auto c = load_config(o.config.empty() ? throw ConfigError("export-dataset needs --config") : o.config);
    auto catalog = ingest_catalog(c.items_path, c.interactions_path);
    auto demos = c.demo_store.empty() ? DemoStore() : DemoStore::load_file(c.demo_store.string());
    auto registry = ToolRegistry::standard(c.item_noun);

    std::vector<TurnResult> traces;
    for (const auto& path : o.traces) {
        std::ifstream f(path);
        if (!f) throw InputError("cannot open " + path);
        std::string line;
        while (std::getline(f, line))
            if (!text::trim(line).empty()) traces.push_back(nlohmann::json::parse(line).get<TurnResult>());
    }
    std::vector<SyntheticDialogue> synthetic;
    if (!o.synthetic.empty()) {
        std::ifstream f(o.synthetic);
        if (!f) throw InputError("cannot open " + o.synthetic);
        synthetic = read_synthetic_dialogues(f);
    }
    PlannerEnv env{registry, demos, catalog.table_info(), c.item_noun, c.demo_count};
    auto report = export_recllama(traces, synthetic, env);
    if (!o.dataset_out.empty()) {
        auto f = open_out(o.dataset_out);
        write_pairs(f, report.pairs);
    } else {
        write_pairs(out, report.pairs);
    }
    out << report.counts().dump() << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Conversational recommender agent: ingestion, chat, serving, generation and evaluation",
                 "recagent"};
    app.require_subcommand(1);
    app.add_option("--config", o.config, "JSON config file");
    app.add_option("--seed", o.seed, "RNG seed")->capture_default_str();
    app.add_flag("-v,--verbose", o.verbose, "Debug logging on stderr");

    auto* ingest = app.add_subcommand("ingest", "Validate item and interaction CSVs and report the split");
    ingest->add_option("--items", o.items, "items.csv");
    ingest->add_option("--interactions", o.interactions, "interactions.csv");

    auto* build = app.add_subcommand("build-model", "Build the ItemCF model cache");
    build->add_option("--out", o.model_out, "Output path (default: model_cache from the config)");

    auto* chat = app.add_subcommand("chat", "Terminal chat; one user message per input line");
    chat->add_flag("--trace", o.trace, "Print plans, tool records and critic verdicts after each reply");
    chat->add_option("--trace-file", o.trace_file, "Append full turn traces as line-JSON");

    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    serve->add_option("--host", o.host, "Listen host (default from config)");
    serve->add_option("--port", o.port, "Listen port (default from config)");

    auto* demogen = app.add_subcommand("demogen", "Generate demonstrations");
    demogen->add_option("--strategy", o.strategy, "input-first or output-first")
        ->check(CLI::IsMember({"input-first", "output-first", "input_first", "output_first"}))
        ->capture_default_str();
    demogen->add_option("-n,--count", o.gen_count, "Intents to generate (per target plan)")->capture_default_str();
    demogen->add_option("--plan", o.target_plans, "Target plan for output-first (repeatable)");
    demogen->add_option("--out", o.demos_out, "Write seeds plus accepted demos here");
    demogen->add_option("--records", o.records_out, "Write every generation record (line-JSON)");
    demogen->add_option("--parallelism", o.parallelism, "Concurrent generation requests")->capture_default_str();

    auto* eval = app.add_subcommand("eval", "Evaluation");
    eval->require_subcommand(1);
    auto* sim = eval->add_subcommand("simulator", "User-simulator sessions");
    sim->add_option("--setting", o.setting, "session, long-chat or long-context")
        ->check(CLI::IsMember({"session", "session-wise", "long-chat", "long-context"}))
        ->capture_default_str();
    sim->add_option("--sessions", o.sessions, "Number of sessions (default from config)");
    sim->add_option("--max-turns", o.max_turns, "Rounds per session (default from config)");
    sim->add_option("--parallelism", o.parallelism, "Concurrent sessions")->capture_default_str();
    sim->add_option("--rows", o.rows_out, "Per-session rows (line-JSON)");
    sim->add_option("--report", o.report_out, "Report JSON");
    auto* one = eval->add_subcommand("one-turn", "One-turn retrieval or ranking");
    one->add_option("--task", o.task, "retrieval or ranking")
        ->check(CLI::IsMember({"retrieval", "ranking"}))
        ->capture_default_str();
    one->add_option("--baseline", o.baseline_mode, "random or popularity (no LLM calls)")
        ->check(CLI::IsMember({"random", "popularity"}));
    one->add_option("--trials", o.trials, "Baseline trials")->capture_default_str()->check(CLI::PositiveNumber);
    one->add_option("-k", o.k, "Cutoff (default 5 for retrieval, 20 for ranking)");
    one->add_option("--cases", o.cases_file, "Pre-generated cases (line-JSON)");
    one->add_option("--count", o.sessions, "Cases to generate (default from config)");
    one->add_option("--rows", o.rows_out, "Per-case rows (line-JSON)");
    one->add_option("--report", o.report_out, "Report JSON");

    auto* exp = app.add_subcommand("export-dataset", "Export instruction/plan pairs from turn traces");
    exp->add_option("--traces", o.traces, "Turn trace files (line-JSON, as written by chat --trace-file)");
    exp->add_option("--synthetic", o.synthetic, "Synthetic dialogues (line-JSON)");
    exp->add_option("--out", o.dataset_out, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("recagent", sink);
    logger->set_level(o.verbose ? spdlog::level::debug : spdlog::level::warn);
    logger->set_pattern("[%l] %v");
    auto previous = spdlog::default_logger();
    spdlog::set_default_logger(logger);

    int code = 1;
    try {
        if (*ingest) code = cmd_ingest(o, out);
        else if (*build) code = cmd_build_model(o, out);
        else if (*chat) code = cmd_chat(o, in, out);
        else if (*serve) code = cmd_serve(o, out);
        else if (*demogen) code = cmd_demogen(o, out);
        else if (*sim) code = cmd_eval_simulator(o, out);
        else if (*one) code = cmd_eval_one_turn(o, out);
        else if (*exp) code = cmd_export(o, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        code = 1;
    }
    logger->flush();
    spdlog::set_default_logger(previous);
    return code;
}

}  // namespace recagent::cli
