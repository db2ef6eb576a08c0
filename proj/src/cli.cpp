#include "eced/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "eced/diagnostics.hpp"
#include "eced/harness.hpp"
#include "eced/scenarios.hpp"
#include "eced/service.hpp"

namespace eced {

namespace {

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("eced");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("ECED_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to off; only "off" itself should silence.
        if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    }
}

// Scenario selection shared by gen, run and diag.
struct ScenarioFlags {
    std::optional<std::string> scenario;
    std::optional<std::string> config;
    std::optional<std::string> instance;
    std::optional<long long> n, t, m, s, items, clusters, dim, pairs, theories_per_family, tests;
    std::optional<double> noise, lambda;
    std::optional<std::string> embeddings;

    void attach(CLI::App* app) {
        app->add_option("--scenario", scenario, "Scenario name: three-cause, gbs-adversarial, treasure-hunt, random, "
                                                "risky-choice, embedding, instance");
        app->add_option("--config", config, "Scenario config JSON file {scenario, params, seed}");
        app->add_option("--instance", instance, "Instance JSON file");
        app->add_option("--n", n, "Root-causes (gbs-adversarial, random)");
        app->add_option("--t", t, "Targets (random)");
        app->add_option("--m", m, "Tests (random)");
        app->add_option("--noise", noise, "Flip probability (random)");
        app->add_option("--s", s, "Bits, t = 2^s (treasure-hunt)");
        app->add_option("--lambda", lambda, "Logistic sharpness (risky-choice, embedding)");
        app->add_option("--items", items, "Synthetic items (embedding)");
        app->add_option("--clusters", clusters, "Clusters (embedding)");
        app->add_option("--dim", dim, "Synthetic dimension (embedding)");
        app->add_option("--pairs", pairs, "Random item pairs (embedding)");
        app->add_option("--embeddings", embeddings, "Embedding CSV item_id,v1,...,vd (embedding)");
        app->add_option("--theories-per-family", theories_per_family, "Theories per family (risky-choice)");
        app->add_option("--tests", tests, "Lottery pairs (risky-choice)");
    }

    nlohmann::json to_config(std::uint64_t seed) const {
        nlohmann::json params = nlohmann::json::object();
        auto put = [&](const char* key, const auto& opt) {
            if (opt) params[key] = *opt;
        };
        put("n", n);
        put("t", t);
        put("m", m);
        put("noise", noise);
        put("s", s);
        put("lambda", lambda);
        put("items", items);
        put("clusters", clusters);
        put("dim", dim);
        put("pairs", pairs);
        put("embeddings", embeddings);
        put("theories_per_family", theories_per_family);
        put("tests", tests);

        const int sources = (scenario ? 1 : 0) + (config ? 1 : 0) + (instance ? 1 : 0);
        if (sources != 1) throw UsageError("exactly one of --scenario, --config, --instance is required");
        if ((config || instance) && !params.empty()) {
            throw UsageError("scenario parameters cannot be combined with --config or --instance");
        }
        if (instance) return {{"scenario", "instance"}, {"params", {{"path", *instance}}}, {"seed", seed}};
        if (config) {
            std::ifstream in(*config);
            if (!in) throw std::runtime_error("cannot open config '" + *config + "'");
            nlohmann::json j = nlohmann::json::parse(in);
            if (j.is_object() && !j.contains("seed")) j["seed"] = seed;
            return j;
        }
        if (*scenario == "instance") throw UsageError("use --instance <path> for instance files");
        const auto& names = scenario_names();
        if (std::find(names.begin(), names.end(), *scenario) == names.end()) {
            throw UsageError("unknown scenario '" + *scenario + "'");
        }
        const auto& allowed = scenario_params(*scenario);
        for (const auto& [key, value] : params.items()) {
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
                std::string flag = key;
                std::replace(flag.begin(), flag.end(), '_', '-');
                throw UsageError("--" + flag + " does not apply to scenario '" + *scenario + "'");
            }
        }
        return {{"scenario", *scenario}, {"params", params}, {"seed", seed}};
    }
};

std::vector<Objective> parse_policies(const std::string& list) {
    std::vector<Objective> out;
    std::stringstream in(list);
    std::string name;
    while (std::getline(in, name, ',')) {
        const auto obj = parse_objective(name);
        if (!obj) throw UsageError("unknown policy '" + name + "'");
        if (std::find(out.begin(), out.end(), *obj) != out.end()) throw UsageError("duplicate policy '" + name + "'");
        out.push_back(*obj);
    }
    if (out.empty()) throw UsageError("no policies given");
    return out;
}

std::vector<std::string> split_list(const std::string& list) {
    std::vector<std::string> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

StoppingRule make_rule(std::optional<double> delta, std::optional<long long> budget) {
    StoppingRule rule;
    if (delta) {
        if (!(*delta >= 0.0 && *delta <= 1.0)) throw UsageError("--delta must lie in [0, 1]");
        rule.delta = *delta;
    }
    if (budget && *budget < 1) throw UsageError("--budget must be at least 1");
    return rule;
}

void print_summaries(const std::vector<ExperimentSummary>& summaries) {
    std::cout << "policy,trials,mean_cost,worst_cost,final_map_err,accuracy\n";
    for (const auto& s : summaries) {
        std::cout << s.policy << ',' << s.trials << ',' << format_float(s.mean_cost) << ',' << s.worst_cost << ','
                  << (s.mean_map_err.empty() ? "" : format_float(s.mean_map_err.back())) << ','
                  << format_float(s.accuracy) << '\n';
    }
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
    static bool logging_ready = false;
    if (!logging_ready) {
        configure_logging();
        logging_ready = true;
    }

    CLI::App app{"Bayesian active learning with noisy tests: scenario generation, simulation, diagnostics, sessions"};
    app.require_subcommand(1);
    app.name("eced");

    std::uint64_t seed = 0;

    // gen
    auto* gen = app.add_subcommand("gen", "Build a scenario and write its instance JSON");
    ScenarioFlags gen_flags;
    gen_flags.attach(gen);
    std::optional<std::string> gen_out;
    gen->add_option("--seed", seed, "Random seed");
    gen->add_option("--out", gen_out, "Output path (default stdout)");

    // run
    auto* run = app.add_subcommand("run", "Simulate policies over many trials");
    ScenarioFlags run_flags;
    run_flags.attach(run);
    std::string policies = "eced";
    std::optional<double> run_delta;
    std::optional<long long> run_budget;
    long long trials = 1000;
    long long parallelism = 1;
    std::optional<std::string> run_out;
    run->add_option("--policies", policies, "Comma-separated: eced,ec2,ec2bayes,ig,us,voi,gbs,random")
        ->capture_default_str();
    run->add_option("--delta", run_delta, "Stop once the MAP error is at most delta (default 0.01)");
    run->add_option("--budget", run_budget, "Maximum tests per trial (default min(m, 100))");
    run->add_option("--trials", trials, "Trials")->capture_default_str();
    run->add_option("--seed", seed, "Master seed");
    run->add_option("--parallelism", parallelism, "Worker threads, 0 for all cores")->capture_default_str();
    run->add_option("--out", run_out, "Output directory for results.csv, traces.jsonl, summary.json");

    // diag
    auto* diag = app.add_subcommand("diag", "Check analytic bounds on random beliefs");
    ScenarioFlags diag_flags;
    diag_flags.attach(diag);
    std::string checks = "lemma1,stocmap,faux";
    long long samples = 1000;
    double eta = 0.01;
    std::optional<std::string> diag_out;
    diag->add_option("--checks", checks, "Comma-separated: lemma1,stocmap,ratio,faux")->capture_default_str();
    diag->add_option("--samples", samples, "Random beliefs")->capture_default_str();
    diag->add_option("--eta", eta, "Confidence parameter of the auxiliary function")->capture_default_str();
    diag->add_option("--seed", seed, "Random seed");
    diag->add_option("--out", diag_out, "Write the JSON report here");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP elicitation service");
    int port = 0;
    std::string host = "127.0.0.1";
    std::optional<std::string> snapshot_dir;
    serve_cmd->add_option("--port", port, "TCP port")->required();
    serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
    serve_cmd->add_option("--snapshot-dir", snapshot_dir, "Persist session snapshots here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            const Scenario sc = build_scenario(gen_flags.to_config(seed));
            nlohmann::json j = instance_to_json(sc.instance);
            j["renderings"] = sc.renderings;
            if (gen_out) {
                std::ofstream out(*gen_out, std::ios::trunc);
                out << j.dump(2) << '\n';
                if (!out) throw std::runtime_error("cannot write '" + *gen_out + "'");
            } else {
                std::cout << j.dump(2) << '\n';
            }
            return kExitOk;
        }
        if (run->parsed()) {
            const auto objectives = parse_policies(policies);
            StoppingRule rule = make_rule(run_delta, run_budget);
            if (trials < 1) throw UsageError("--trials must be at least 1");
            if (parallelism < 0) throw UsageError("--parallelism must be nonnegative");
            const auto config = run_flags.to_config(seed);
            const Scenario sc = build_scenario(config);
            rule.budget = run_budget ? static_cast<std::size_t>(*run_budget)
                                     : std::min<std::size_t>(sc.instance.num_tests(), 100);
            spdlog::info("running {} trials of {} policies on {} root-causes, {} tests", trials, objectives.size(),
                         sc.instance.num_root_causes(), sc.instance.num_tests());
            const auto result = run_experiment(sc.instance, objectives, rule, static_cast<std::size_t>(trials), seed,
                                               static_cast<std::size_t>(parallelism), run_out.has_value());
            if (run_out) write_results(*run_out, sc.instance, result.summaries, result.traces);
            print_summaries(result.summaries);
            return kExitOk;
        }
        if (diag->parsed()) {
            const auto names = split_list(checks);
            const auto& known = diagnostic_check_names();
            for (const auto& c : names) {
                if (std::find(known.begin(), known.end(), c) == known.end()) throw UsageError("unknown check '" + c + "'");
            }
            if (samples < 1) throw UsageError("--samples must be at least 1");
            if (!(eta > 0.0 && eta < 1.0)) throw UsageError("--eta must lie in (0, 1)");
            const Scenario sc = build_scenario(diag_flags.to_config(seed));
            const auto report = run_diagnostics(sc.instance, names, static_cast<std::size_t>(samples), seed, eta);
            const auto j = to_json(report);
            if (diag_out) {
                std::ofstream out(*diag_out, std::ios::trunc);
                out << j.dump(2) << '\n';
                if (!out) throw std::runtime_error("cannot write '" + *diag_out + "'");
            }
            for (const auto& [name, count] : report.evaluated) {
                const auto failed = report.failed.count(name) ? report.failed.at(name) : 0;
                std::cout << name << ": " << (count - failed) << "/" << count << " hold, min slack "
                          << format_float(report.min_slack.at(name)) << '\n';
            }
            if (!report.ok()) {
                for (const auto& f : report.failures) {
                    std::cerr << "FAILED " << f.name << ": lhs " << format_float(f.lhs) << " rhs "
                              << format_float(f.rhs) << '\n';
                }
                return kExitRuntime;
            }
            return kExitOk;
        }
        if (serve_cmd->parsed()) {
            if (port < 1 || port > 65535) throw UsageError("--port must lie in [1, 65535]");
            SessionStore store(snapshot_dir.value_or(""));
            const auto restored = store.restore();
            if (restored > 0) spdlog::info("restored {} sessions", restored);
            if (!serve(store, host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
            return kExitOk;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\nRun with --help for more information.\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

int dispatch(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"eced"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace eced
