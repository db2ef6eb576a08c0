#pragma once

// Myopic gain of a candidate test under each selection objective.
//
// Edge weights between root-causes of different targets are never enumerated;
// every pairwise sum goes through per-target aggregates:
//
//     sum over cross-target pairs w_a w_b = (S^2 - sum_y S_y^2) / 2
//
// All gain functions accept an arbitrary nonnegative weight vector. The Belief
// overloads pass the normalized posterior.

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eced/model.hpp"

namespace eced {

enum class Objective { ECED, EC2, EC2Bayes, IG, US, VoI, GBS, Random };

std::string to_string(Objective objective);
/// Parses the lowercase name ("eced", "ec2", "ec2bayes", "ig", "us", "voi", "gbs", "random").
std::optional<Objective> parse_objective(std::string_view name);
const std::vector<Objective>& all_objectives();

struct EdgeAggregate {
    std::vector<double> class_sums;
    double total_sum = 0.0;

    static EdgeAggregate from_weights(const Instance& inst, std::span<const double> weights);
    /// Total weight of edges linking root-causes of different targets.
    double edge_weight() const;
};

/// Pr(x | theta) / max_x' Pr(x' | theta). Equals 1 exactly when x is a most likely outcome.
double discount_ratio(const Test& test, std::size_t theta, std::size_t x);

double eced_gain(const Instance& inst, std::span<const double> weights, std::size_t e);
double eced_gain(const Instance& inst, const Belief& belief, std::size_t e);

/// Expected weight of cut edges. A root-cause is inconsistent with x when x is
/// not one of its most likely outcomes; on noise-free tests this is the usual
/// edge-cutting gain.
double ec2_gain(const Instance& inst, std::span<const double> weights, std::size_t e);
double ec2_gain(const Instance& inst, const Belief& belief, std::size_t e);

/// Expected reduction in edge weight when edges are discounted by the raw likelihoods.
double ec2bayes_gain(const Instance& inst, std::span<const double> weights, std::size_t e);
double ec2bayes_gain(const Instance& inst, const Belief& belief, std::size_t e);

/// IG, US, VoI or GBS. Throws std::invalid_argument for any other objective,
/// and for GBS on a test with more than two outcomes.
double baseline_gain(Objective kind, const Instance& inst, std::span<const double> weights, std::size_t e);
double baseline_gain(Objective kind, const Instance& inst, const Belief& belief, std::size_t e);

/// Dispatches to the gain of any deterministic objective.
double objective_gain(Objective objective, const Instance& inst, std::span<const double> weights, std::size_t e);

struct GainReport {
    Objective objective = Objective::ECED;
    // One entry per test; empty for tests outside the admissible set. Random
    // leaves every entry empty.
    std::vector<std::optional<double>> gains;
    std::size_t selected = 0;
};

/// Evaluates every admissible test and picks the lowest-index argmax. Random
/// draws uniformly from the admissible tests using rng, which is then required.
GainReport gain_report(Objective objective, const Instance& inst, std::span<const double> weights,
                       std::span<const std::size_t> admissible, std::mt19937_64* rng = nullptr);
GainReport gain_report(Objective objective, const Instance& inst, const Belief& belief,
                       std::span<const std::size_t> admissible, std::mt19937_64* rng = nullptr);

}  // namespace eced
