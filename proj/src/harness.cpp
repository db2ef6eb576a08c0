#include "eced/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace eced {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double round9(double v) { return std::stod(format_float(v)); }

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    return out;
}

void close_output(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace

std::string format_float(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::mt19937_64 trial_rng(std::uint64_t master_seed, std::uint64_t trial, std::uint64_t stream) {
    const std::uint64_t s = splitmix64(splitmix64(splitmix64(master_seed) ^ trial) ^ (stream * 0xd1b54a32d192ed03ULL));
    return std::mt19937_64(s);
}

Realization sample_realization(const Instance& inst, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](auto&& probs, std::size_t count) {
        const double u = unit(rng);
        double acc = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < count; ++i) {
            const double p = probs(i);
            if (p <= 0.0) continue;
            last_positive = i;
            acc += p;
            if (u < acc) return i;
        }
        return last_positive;  // rounding left u just above the total
    };
    Realization r;
    const auto& prior = inst.prior();
    r.true_root_cause = draw([&](std::size_t i) { return prior[i]; }, prior.size());
    r.outcomes.reserve(inst.num_tests());
    for (const Test& test : inst.tests()) {
        r.outcomes.push_back(draw([&](std::size_t x) { return test.prob(r.true_root_cause, x); }, test.arity));
    }
    return r;
}

TrialTrace run_trial(const Instance& inst, Objective objective, const StoppingRule& rule,
                     const Realization& realization, std::mt19937_64* rng) {
    rule.validate();
    if (realization.outcomes.size() != inst.num_tests()) {
        throw std::invalid_argument("realization does not match the instance");
    }
    TrialTrace trace;
    trace.realization = realization;
    trace.policy = to_string(objective);
    PolicyState state(inst);
    trace.initial_map_error = map_error(inst, state.belief());
    trace.initial_map_target = predict(inst, state);
    while (true) {
        const Decision d = next_test(objective, inst, state, rule, rng);
        if (d.stopped()) {
            trace.stop_reason = d.stop;
            break;
        }
        state = state.advance(inst, d.test, realization.outcomes[d.test]);
        trace.map_targets.push_back(predict(inst, state));
    }
    trace.steps = state.steps();
    trace.predicted_target = predict(inst, state);
    trace.correct = trace.predicted_target == inst.target_of(realization.true_root_cause);
    return trace;
}

std::size_t curve_length(const Instance& inst, const StoppingRule& rule) {
    return std::min(rule.budget, inst.num_tests());
}

ExperimentSummary summarize(const Instance& inst, const std::string& policy, const std::vector<TrialTrace>& traces,
                            std::size_t length, std::uint64_t master_seed) {
    ExperimentSummary s;
    s.policy = policy;
    s.trials = traces.size();
    s.master_seed = master_seed;
    s.mean_map_err.assign(length, 0.0);
    s.mean_misclass.assign(length, 0.0);
    if (traces.empty()) return s;
    double cost_sum = 0.0;
    double cost_sq = 0.0;
    std::size_t correct = 0;
    for (const TrialTrace& t : traces) {
        const std::size_t truth = inst.target_of(t.realization.true_root_cause);
        for (std::size_t k = 0; k < length; ++k) {
            double err = t.initial_map_error;
            std::size_t guess = t.initial_map_target;
            if (!t.steps.empty()) {
                const std::size_t i = std::min(k, t.steps.size() - 1);
                err = t.steps[i].map_error;
                guess = t.map_targets[i];
            }
            s.mean_map_err[k] += err;
            s.mean_misclass[k] += guess != truth ? 1.0 : 0.0;
        }
        const double c = static_cast<double>(t.cost());
        cost_sum += c;
        cost_sq += c * c;
        s.worst_cost = std::max(s.worst_cost, t.cost());
        if (t.correct) ++correct;
    }
    const double n = static_cast<double>(traces.size());
    for (std::size_t k = 0; k < length; ++k) {
        s.mean_map_err[k] /= n;
        s.mean_misclass[k] /= n;
    }
    s.mean_cost = cost_sum / n;
    s.cost_stddev = std::sqrt(std::max(0.0, cost_sq / n - s.mean_cost * s.mean_cost));
    s.accuracy = static_cast<double>(correct) / n;
    return s;
}

ExperimentResult run_experiment(const Instance& inst, const std::vector<Objective>& objectives,
                                const StoppingRule& rule, std::size_t trials, std::uint64_t master_seed,
                                std::size_t parallelism, bool keep_traces) {
    rule.validate();
    if (trials < 1) throw std::invalid_argument("trials must be at least 1");
    if (objectives.empty()) throw std::invalid_argument("no policies given");
    if (parallelism == 0) parallelism = std::max(1U, std::thread::hardware_concurrency());
    parallelism = std::min(parallelism, trials);

    std::vector<Realization> realizations(trials);
    for (std::size_t i = 0; i < trials; ++i) {
        auto rng = trial_rng(master_seed, i, 0);
        realizations[i] = sample_realization(inst, rng);
    }

    ExperimentResult result;
    const std::size_t length = curve_length(inst, rule);
    for (Objective objective : objectives) {
        std::vector<TrialTrace> traces(trials);
        auto work = [&](std::size_t worker) {
            for (std::size_t i = worker; i < trials; i += parallelism) {
                auto rng = trial_rng(master_seed, i, 1);
                traces[i] = run_trial(inst, objective, rule, realizations[i], &rng);
                traces[i].trial = i;
            }
        };
        if (parallelism == 1) {
            work(0);
        } else {
            std::vector<std::exception_ptr> errors(parallelism);
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < parallelism; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        work(w);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
            for (auto& th : pool) th.join();
            for (auto& e : errors) {
                if (e) std::rethrow_exception(e);
            }
        }
        result.summaries.push_back(summarize(inst, to_string(objective), traces, length, master_seed));
        if (keep_traces) {
            for (auto& t : traces) result.traces.push_back(std::move(t));
        }
    }
    return result;
}

std::vector<std::pair<Realization, double>> enumerate_realizations(const Instance& inst) {
    std::vector<std::pair<Realization, double>> out;
    const std::size_t m = inst.num_tests();
    for (std::size_t theta = 0; theta < inst.num_root_causes(); ++theta) {
        const double p0 = inst.prior()[theta];
        if (p0 <= 0.0) continue;
        Realization r{theta, std::vector<std::size_t>(m, 0)};
        // Odometer over outcome vectors, skipping zero-probability outcomes.
        auto recurse = [&](auto&& self, std::size_t e, double p) -> void {
            if (e == m) {
                out.emplace_back(r, p);
                return;
            }
            const Test& test = inst.test(e);
            for (std::size_t x = 0; x < test.arity; ++x) {
                const double q = test.prob(theta, x);
                if (q <= 0.0) continue;
                r.outcomes[e] = x;
                self(self, e + 1, p * q);
            }
        };
        recurse(recurse, 0, p0);
    }
    return out;
}

nlohmann::json trace_to_json(const Instance& inst, const TrialTrace& trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const Step& s : trace.steps) {
        steps.push_back({{"test", inst.test(s.test).id}, {"outcome", s.outcome}, {"map_error", round9(s.map_error)}});
    }
    return {
        {"trial", trace.trial},
        {"policy", trace.policy},
        {"true_root_cause", inst.root_cause_ids()[trace.realization.true_root_cause]},
        {"outcomes", trace.realization.outcomes},
        {"steps", steps},
        {"stop_reason", to_string(trace.stop_reason)},
        {"predicted_target", inst.target_ids()[trace.predicted_target]},
        {"correct", trace.correct},
    };
}

void write_results(const std::string& dir, const Instance& inst, const std::vector<ExperimentSummary>& summaries,
                   const std::vector<TrialTrace>& traces) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw std::runtime_error("cannot create '" + root.string() + "': " + ec.message());

    const fs::path csv_path = root / "results.csv";
    auto csv = open_output(csv_path);
    csv << "policy,step,mean_map_err,mean_misclass,trials\n";
    for (const ExperimentSummary& s : summaries) {
        if (s.trials == 0) continue;
        for (std::size_t k = 0; k < s.mean_map_err.size(); ++k) {
            csv << s.policy << ',' << (k + 1) << ',' << format_float(s.mean_map_err[k]) << ','
                << format_float(s.mean_misclass[k]) << ',' << s.trials << '\n';
        }
    }
    close_output(csv, csv_path);

    const fs::path jsonl_path = root / "traces.jsonl";
    auto jsonl = open_output(jsonl_path);
    for (const TrialTrace& t : traces) jsonl << trace_to_json(inst, t).dump() << '\n';
    close_output(jsonl, jsonl_path);

    nlohmann::json policies = nlohmann::json::array();
    for (const ExperimentSummary& s : summaries) {
        policies.push_back({
            {"policy", s.policy},
            {"trials", s.trials},
            {"master_seed", s.master_seed},
            {"mean_cost", round9(s.mean_cost)},
            {"cost_stddev", round9(s.cost_stddev)},
            {"worst_cost", s.worst_cost},
            {"accuracy", round9(s.accuracy)},
            {"final_map_err", s.mean_map_err.empty() ? nlohmann::json(nullptr) : nlohmann::json(round9(s.mean_map_err.back()))},
        });
    }
    const fs::path summary_path = root / "summary.json";
    auto summary = open_output(summary_path);
    summary << nlohmann::json{{"policies", policies}}.dump(2) << '\n';
    close_output(summary, summary_path);
}

std::vector<ExperimentSummary> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "policy,step,mean_map_err,mean_misclass,trials") {
        throw std::runtime_error("'" + path + "' is not a results CSV");
    }
    std::vector<ExperimentSummary> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string policy, step, err, mis, trials;
        std::getline(row, policy, ',');
        std::getline(row, step, ',');
        std::getline(row, err, ',');
        std::getline(row, mis, ',');
        std::getline(row, trials, ',');
        if (out.empty() || out.back().policy != policy) {
            out.emplace_back();
            out.back().policy = policy;
            out.back().trials = std::stoul(trials);
        }
        out.back().mean_map_err.push_back(std::stod(err));
        out.back().mean_misclass.push_back(std::stod(mis));
    }
    return out;
}

}  // namespace eced
