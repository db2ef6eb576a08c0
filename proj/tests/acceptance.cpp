// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <thread>

#include "ec2_properties.hpp"
#include "eced/diagnostics.hpp"
#include "eced/gains.hpp"
#include "eced/harness.hpp"
#include "eced/scenarios.hpp"
#include "eced/service.hpp"
#include "httplib.h"
#include "oracles.hpp"
#include <spdlog/spdlog.h>

using namespace eced;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < limit_seconds;
    const bool pass = out.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s %s: %s; runtime %.3gs (limit %gs)%s\n", pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str(),
                secs, limit_seconds, in_time ? "" : " EXCEEDED");
    std::fflush(stdout);
}

std::string fmt(double v) { return format_float(v); }

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

double final_error(const TrialTrace& t, std::size_t step) {
    if (t.steps.empty()) return t.initial_map_error;
    return t.steps[std::min(step, t.steps.size()) - 1].map_error;
}

Outcome worked_example() {
    const Instance inst = gen_three_cause().instance;
    const Belief prior = Belief::from_prior(inst);
    const double b1 = ec2bayes_gain(inst, prior, 0);
    const double b2 = ec2bayes_gain(inst, prior, 1);
    const double e1 = eced_gain(inst, prior, 0);
    const double e2 = eced_gain(inst, prior, 1);
    const bool ok = std::abs(b1 - 0.18) <= 1e-12 && std::abs(b2 - 0.112) <= 1e-12 && std::abs(e1) <= 1e-12 &&
                    std::abs(e2 - 0.112) <= 1e-12;
    return {ok, "ec2bayes(X1)=" + fmt(b1) + " ec2bayes(X2)=" + fmt(b2) + " eced(X1)=" + fmt(e1) +
                    " eced(X2)=" + fmt(e2)};
}

Outcome gbs_adversarial() {
    const Instance inst = gen_gbs_adversarial(8).instance;
    const auto result = run_experiment(inst, {Objective::ECED, Objective::GBS}, {0.0, 8}, 1000, 7, 1, false);
    const auto& eced = result.summaries[0];
    const auto& gbs = result.summaries[1];
    const double exact = 7.0 * 10.0 / 16.0;
    const double sigma = gbs.cost_stddev / std::sqrt(1000.0);
    const bool ok = eced.mean_cost == 1.0 && std::abs(gbs.mean_cost - exact) <= 3 * sigma;
    return {ok, "ECED mean cost " + fmt(eced.mean_cost) + ", GBS mean cost " + fmt(gbs.mean_cost) + " vs exact " +
                    fmt(exact) + " (3 sigma = " + fmt(3 * sigma) + ")"};
}

Outcome treasure_hunt() {
    const Instance inst = gen_treasure_hunt(3).instance;
    std::size_t worst = 0;
    bool resolved = true;
    const auto realizations = enumerate_realizations(inst);
    for (const auto& [r, p] : realizations) {
        const TrialTrace t = run_trial(inst, Objective::ECED, {0.0, kUnlimitedBudget}, r);
        worst = std::max(worst, t.cost());
        resolved = resolved && t.correct && final_error(t, t.cost()) == 0.0;
    }
    const auto ig = run_experiment(inst, {Objective::IG}, {0.0, kUnlimitedBudget}, 1000, 11, 1, false).summaries[0];
    const double sigma = ig.cost_stddev / std::sqrt(1000.0);
    const bool ok = realizations.size() == 16 && worst == 4 && resolved && ig.mean_cost >= 4.0;
    return {ok, "ECED worst-case cost " + std::to_string(worst) + " over " + std::to_string(realizations.size()) +
                    " realizations; IG mean cost " + fmt(ig.mean_cost) + " (3 sigma = " + fmt(3 * sigma) +
                    ", (t+1)/2 = 4.5 within slack: " + (ig.mean_cost + 3 * sigma >= 4.5 ? "yes" : "no") + ")"};
}

Outcome noise_ratio() {
    std::mt19937_64 rng(2024);
    std::size_t checks = 0;
    double worst = 0.0;
    const double eps_grid[] = {0.0, 0.1, 0.25, 0.4};
    for (int i = 0; i < 200; ++i) {
        const double eps = eps_grid[i % 4];
        const std::size_t n = 3 + static_cast<std::size_t>(rng() % 18);
        const std::size_t t = 2 + static_cast<std::size_t>(rng() % std::min<std::size_t>(n - 1, 5));
        const Instance inst = gen_random(n, t, 4, eps, rng()).instance;
        for (int b = 0; b < 2; ++b) {
            const auto w = b == 0 ? inst.prior() : random_posterior(n, rng);
            for (std::size_t e = 0; e < inst.num_tests(); ++e) {
                const auto form = symmetric_noise_form(inst.test(e));
                const double ratio = std::pow((1 - 2 * form.epsilon) / (1 - form.epsilon), 2);
                const double diff =
                    std::abs(eced_gain(inst, w, e) - ratio * oracle::skeleton_ec2_gain(inst, w, form.skeleton));
                worst = std::max(worst, diff);
                ++checks;
            }
        }
    }
    return {worst <= 1e-9, std::to_string(checks) + " gain comparisons on 200 instances, max |diff| " + fmt(worst)};
}

Outcome bound_suites() {
    std::mt19937_64 rng(77);
    std::size_t lower = 0, upper = 0, stoc = 0, failed = 0;
    double worst_faux = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const std::size_t n = 3 + static_cast<std::size_t>(i % 18);
        const std::size_t t = 2 + static_cast<std::size_t>(rng() % (n - 1));
        const Instance inst = gen_random(n, t, 1, 0.1, rng()).instance;
        Belief b;
        b.posterior = random_posterior(n, rng);
        for (const auto& c : check_lemma1(inst, b, AuxConfig::make(n))) {
            (c.name == "lemma1.lower" ? lower : upper) += 1;
            if (!c.holds) ++failed;
        }
        for (const auto& c : check_stochastic_map(inst, b)) {
            ++stoc;
            if (!c.holds) ++failed;
        }
        worst_faux = std::max(worst_faux, std::abs(f_aux_pair_term(inst, b.posterior) - oracle::faux_pairs(inst, b.posterior)));
    }
    const bool ok = failed == 0 && worst_faux <= 1e-9 && upper > 0;
    return {ok, "10000 beliefs: " + std::to_string(lower) + " lower, " + std::to_string(upper) + " gated upper, " +
                    std::to_string(stoc) + " stochastic-MAP checks, " + std::to_string(failed) +
                    " failures; f_aux aggregate vs pairs max |diff| " + fmt(worst_faux)};
}

Outcome ec2_structure() {
    std::mt19937_64 rng(5150);
    ec2props::Tally tally;
    for (int i = 0; i < 50; ++i) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng() % 5);
        const std::size_t t = 2 + static_cast<std::size_t>(rng() % (n - 1));
        const std::size_t m = 1 + static_cast<std::size_t>(rng() % 4);
        ec2props::check_instance(oracle::random_noise_free(n, t, m, rng), tally);
    }
    const bool ok = tally.monotonicity_failures == 0 && tally.submodularity_failures == 0 && tally.oracle_mismatches == 0;
    return {ok, std::to_string(tally.monotonicity_checks) + " monotonicity checks (" +
                    std::to_string(tally.monotonicity_failures) + " failed), " +
                    std::to_string(tally.submodularity_checks) + " dominance checks (" +
                    std::to_string(tally.submodularity_failures) + " failed)"};
}

Outcome embedding() {
    std::string detail;
    bool ok = true;
    {
        const Scenario sc = build_scenario(
            {{"scenario", "embedding"}, {"params", {{"items", 200}, {"clusters", 20}, {"lambda", 10.0}}}, {"seed", 1}});
        const std::size_t trials = 1000;
        const auto result = run_experiment(sc.instance, {Objective::ECED, Objective::Random, Objective::US},
                                           {0.0, 30}, trials, 3, 1, true);
        std::vector<double> errs[3];
        for (std::size_t p = 0; p < 3; ++p) {
            for (std::size_t i = 0; i < trials; ++i) errs[p].push_back(final_error(result.traces[p * trials + i], 30));
        }
        detail = "lambda=10 targets=" + std::to_string(sc.instance.num_targets()) + " tests=" +
                 std::to_string(sc.instance.num_tests()) + ": p_err@30 ECED " + fmt(mean_of(errs[0]));
        for (std::size_t p = 1; p < 3; ++p) {
            std::vector<double> diff(trials);
            for (std::size_t i = 0; i < trials; ++i) diff[i] = errs[0][i] - errs[p][i];
            const double margin = 3 * se_of(diff);
            const bool within = mean_of(diff) <= margin;
            ok = ok && within;
            detail += ", " + result.summaries[p].policy + " " + fmt(mean_of(errs[p])) + " (paired diff " +
                      fmt(mean_of(diff)) + ", 3 sigma " + fmt(margin) +
                      (mean_of(diff) < -margin ? ", ECED significantly lower" : "") + ")";
        }
    }
    {
        const Scenario sc = build_scenario(
            {{"scenario", "embedding"}, {"params", {{"items", 200}, {"clusters", 20}, {"lambda", 100.0}}}, {"seed", 1}});
        const auto s = run_experiment(sc.instance, {Objective::ECED}, {0.0, 15}, 1000, 4, 1, false).summaries[0];
        const double err15 = s.mean_map_err.back();
        ok = ok && err15 <= 0.05;
        detail += "; lambda=100: ECED p_err@15 " + fmt(err15);
    }
    return {ok, detail};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(const std::string& binary) {
    const std::vector<std::string> runs = {
        "run --scenario gbs-adversarial --n 8 --policies eced,gbs --delta 0 --budget 8 --trials 1000 --seed 7",
        "run --scenario random --n 15 --t 4 --m 12 --noise 0.2 --policies eced,ec2bayes,ig,us,voi,random --trials 200 "
        "--seed 3 --parallelism 2",
        "run --scenario risky-choice --tests 60 --theories-per-family 3 --policies eced,random --trials 100 --seed 9",
        "run --scenario embedding --items 60 --clusters 6 --pairs 80 --policies eced,us --trials 100 --seed 5",
    };
    const auto root = std::filesystem::temp_directory_path() / "eced_acceptance_determinism";
    std::filesystem::remove_all(root);
    std::size_t compared = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::string first;
        for (int rep = 0; rep < 2; ++rep) {
            const auto dir = root / (std::to_string(i) + "_" + std::to_string(rep));
            const std::string cmd = binary + " " + runs[i] + " --out " + dir.string() + " > /dev/null";
            if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
            std::string bytes;
            for (const char* f : {"results.csv", "traces.jsonl", "summary.json"}) bytes += slurp(dir / f) + '\0';
            if (rep == 0) {
                first = bytes;
            } else if (bytes != first) {
                return {false, "outputs differ for: " + runs[i]};
            }
        }
        ++compared;
    }
    std::filesystem::remove_all(root);
    return {true, std::to_string(compared) + " CLI runs repeated, results.csv/traces.jsonl/summary.json byte-identical"};
}

Outcome session_equivalence() {
    SessionStore store;
    httplib::Server server;
    register_routes(server, store);
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client cli("127.0.0.1", port);

    std::mt19937_64 rng(31337);
    const char* policies[] = {"eced", "eced", "eced", "ec2bayes", "ig", "us", "random"};
    std::size_t matched = 0, answers = 0;
    std::string mismatch;
    for (int s = 0; s < 100 && mismatch.empty(); ++s) {
        const std::uint64_t seed = rng() % 100000;
        nlohmann::json config;
        switch (s % 4) {
            case 0:
                config = {{"scenario", "random"}, {"params", {{"n", 12}, {"t", 3}, {"m", 10}, {"noise", 0.15}}}};
                break;
            case 1: config = {{"scenario", "risky-choice"}, {"params", {{"tests", 40}, {"theories_per_family", 3}}}}; break;
            case 2:
                config = {{"scenario", "embedding"}, {"params", {{"items", 40}, {"clusters", 5}, {"pairs", 60}}}};
                break;
            default: config = {{"scenario", "treasure-hunt"}, {"params", {{"s", 2}}}}; break;
        }
        config["seed"] = seed;
        const std::string policy = policies[s % 7];
        const double delta = s % 3 == 0 ? 0.0 : 0.05;
        const std::size_t budget = 3 + s % 8;
        const Scenario sc = build_scenario(config);
        auto rrng = trial_rng(seed, 0, 0);
        const Realization r = sample_realization(sc.instance, rrng);
        auto prng = trial_rng(seed, 0, 1);
        const TrialTrace sim = run_trial(sc.instance, *parse_objective(policy), {delta, budget}, r, &prng);

        nlohmann::json body = config;
        body["policy"] = policy;
        body["delta"] = delta;
        body["budget"] = budget;
        auto created = cli.Post("/sessions", body.dump(), "application/json");
        if (!created || created->status != 201) return {false, "session creation failed"};
        const std::string id = nlohmann::json::parse(created->body)["id"];
        std::vector<Step> live;
        nlohmann::json last;
        while (true) {
            last = nlohmann::json::parse(cli.Get("/sessions/" + id + "/question")->body);
            if (last["status"] == "stopped") break;
            const std::size_t e = sc.instance.find_test(last["test_id"].get<std::string>());
            const nlohmann::json ans{{"test_id", last["test_id"]}, {"outcome", r.outcomes[e]}};
            auto reply = cli.Post("/sessions/" + id + "/answer", ans.dump(), "application/json");
            if (!reply || reply->status != 200) return {false, "answer rejected"};
            live.push_back({e, r.outcomes[e], nlohmann::json::parse(reply->body)["posterior"]["map_error"].get<double>()});
            ++answers;
        }
        const bool same = live == sim.steps && last["stop_reason"] == to_string(sim.stop_reason) &&
                          last["predicted_target"] == sc.instance.target_ids()[sim.predicted_target];
        if (same) {
            ++matched;
        } else {
            mismatch = "session " + std::to_string(s) + " (" + config["scenario"].get<std::string>() + ", " + policy + ")";
        }
    }
    server.stop();
    th.join();
    if (!mismatch.empty()) return {false, "trace mismatch in " + mismatch};
    return {matched == 100, std::to_string(matched) + "/100 sessions reproduced the simulated trace over HTTP (" +
                                std::to_string(answers) + " answers)"};
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_level(spdlog::level::warn);
    const std::string binary = argc > 1 ? argv[1] : "eced";
    criterion("worked-example exactness", 0.001, worked_example);
    criterion("GBS adversarial (n=8)", 5, gbs_adversarial);
    criterion("treasure hunt (s=3)", 10, treasure_hunt);
    criterion("noise ratio identity", 5, noise_ratio);
    criterion("bound suites", 10, bound_suites);
    criterion("EC2 structural properties", 30, ec2_structure);
    criterion("embedding property acceptance", 120, embedding);
    criterion("CLI determinism", 60, [&] { return determinism(binary); });
    criterion("session/trace equivalence", 60, session_equivalence);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
