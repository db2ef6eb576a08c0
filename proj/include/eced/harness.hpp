#pragma once

// Simulated respondents under persistent noise: every outcome is drawn once per
// trial and re-read from a frozen vector.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "eced/gains.hpp"
#include "eced/model.hpp"
#include "eced/policy.hpp"
#include "json.hpp"

namespace eced {

struct Realization {
    std::size_t true_root_cause = 0;
    std::vector<std::size_t> outcomes;  // one per test

    bool operator==(const Realization&) const = default;
};

/// Streams are counter-derived from (master_seed, trial, stream) so results do
/// not depend on thread scheduling. Stream 0 draws the realization, stream 1
/// feeds the Random policy.
std::mt19937_64 trial_rng(std::uint64_t master_seed, std::uint64_t trial, std::uint64_t stream);

Realization sample_realization(const Instance& inst, std::mt19937_64& rng);

struct TrialTrace {
    std::size_t trial = 0;
    Realization realization;
    std::string policy;
    std::vector<Step> steps;
    std::vector<std::size_t> map_targets;  // MAP target after each step
    double initial_map_error = 0.0;
    std::size_t initial_map_target = 0;
    StopReason stop_reason = StopReason::None;
    std::size_t predicted_target = 0;
    bool correct = false;

    std::size_t cost() const { return steps.size(); }
};

/// One policy run answered from the realization. rng is needed only by Random.
TrialTrace run_trial(const Instance& inst, Objective objective, const StoppingRule& rule,
                     const Realization& realization, std::mt19937_64* rng = nullptr);

struct ExperimentSummary {
    std::string policy;
    std::vector<double> mean_map_err;  // index k: after k + 1 tests
    std::vector<double> mean_misclass;
    std::size_t trials = 0;
    std::uint64_t master_seed = 0;
    double mean_cost = 0.0;
    double cost_stddev = 0.0;
    std::size_t worst_cost = 0;
    double accuracy = 0.0;  // fraction of trials whose final prediction is correct
};

struct ExperimentResult {
    std::vector<ExperimentSummary> summaries;  // one per objective, in input order
    std::vector<TrialTrace> traces;            // objective-major, then trial order
};

/// Curve length for a rule: the budget capped at the number of tests.
std::size_t curve_length(const Instance& inst, const StoppingRule& rule);

/// Summary of traces produced by one policy; the curve has `length` entries.
ExperimentSummary summarize(const Instance& inst, const std::string& policy, const std::vector<TrialTrace>& traces,
                            std::size_t length, std::uint64_t master_seed);

/// Paired experiment: trial i uses the same realization for every objective.
/// parallelism 0 means hardware concurrency.
ExperimentResult run_experiment(const Instance& inst, const std::vector<Objective>& objectives,
                                const StoppingRule& rule, std::size_t trials, std::uint64_t master_seed,
                                std::size_t parallelism = 1, bool keep_traces = true);

/// Every root-cause paired with every outcome vector of positive probability,
/// with its probability. Exponential in m; meant for small exhaustive checks.
std::vector<std::pair<Realization, double>> enumerate_realizations(const Instance& inst);

nlohmann::json trace_to_json(const Instance& inst, const TrialTrace& trace);

/// Writes results.csv, traces.jsonl and summary.json under dir (created if
/// missing). Throws std::runtime_error naming the path on I/O failure.
void write_results(const std::string& dir, const Instance& inst, const std::vector<ExperimentSummary>& summaries,
                   const std::vector<TrialTrace>& traces);

/// Reads back the curves of a results.csv.
std::vector<ExperimentSummary> read_results_csv(const std::string& path);

/// %.9g formatting used by every emitted float.
std::string format_float(double v);

}  // namespace eced
