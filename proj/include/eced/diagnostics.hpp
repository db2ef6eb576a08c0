#pragma once

// Runnable versions of the analysis-side inequalities.
//
// f_aux(psi) = sum over cross-target pairs p p' log2(1 / (p p')) + c * sum_y H_bin(p_y)
//
// sandwiches the MAP error:
//
//   2c * p_err <= f_aux <= (3c + 4)(H_bin(p_err) + p_err log2 n)    (upper side for p_err <= 1/4)
//
// and the sampling-estimator error satisfies p_err <= p_e <= 2 p_err.

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "eced/model.hpp"
#include "json.hpp"

namespace eced {

struct AuxConfig {
    double eta = 0.01;
    double c = 0.0;

    /// c = 8 (log2(2 n^2 / eta))^2. Throws std::invalid_argument unless eta is in (0, 1).
    static AuxConfig make(std::size_t num_root_causes, double eta = 0.01);
};

struct BoundCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = true;
    double slack = 0.0;

    /// lhs <= rhs up to 1e-9.
    static BoundCheck at_most(std::string name, double lhs, double rhs);
    /// |lhs - rhs| <= tolerance; slack is -|lhs - rhs|.
    static BoundCheck equal(std::string name, double lhs, double rhs, double tolerance = 1e-9);
};

inline constexpr double kBoundTolerance = 1e-9;

double f_aux(const Instance& inst, std::span<const double> posterior, const AuxConfig& cfg);
double f_aux(const Instance& inst, const Belief& belief, const AuxConfig& cfg);

/// Cross-target pair term of f_aux, via per-class entropy sums.
double f_aux_pair_term(const Instance& inst, std::span<const double> posterior);

/// Lower and upper Lemma-1 checks. The upper check is only produced when
/// p_err <= 1/4; otherwise the result holds a single element.
std::vector<BoundCheck> check_lemma1(const Instance& inst, const Belief& belief, const AuxConfig& cfg);

/// p_err <= p_e and p_e <= 2 p_err.
std::vector<BoundCheck> check_stochastic_map(const Instance& inst, const Belief& belief);

struct SymmetricNoise {
    double epsilon = 0.0;
    std::vector<std::size_t> skeleton;  // noise-free outcome per root-cause
};

/// Recognizes a binary test whose rows are a deterministic row flipped with a
/// single epsilon. Throws std::invalid_argument("not symmetric-noise test") otherwise.
SymmetricNoise symmetric_noise_form(const Test& test, double tolerance = 1e-12);

/// Noise-free edge-cutting gain of the skeleton of a symmetric-noise test.
double skeleton_ec2_gain(const Instance& inst, std::span<const double> weights, const SymmetricNoise& form);

/// eced_gain == ((1 - 2 eps) / (1 - eps))^2 * skeleton EC2 gain, one check per test.
std::vector<BoundCheck> eced_ec2_ratio_check(const Instance& inst, const Belief& belief);

/// c_eps = min_e (1 - 2 eps_e)^2 with eps_e the largest per-root-cause noise rate of test e.
double noise_severity(const Instance& inst);

/// Stable 64-bit FNV-1a fingerprint of the observation sequence.
std::uint64_t belief_fingerprint(const Belief& belief);

nlohmann::json to_json(const BoundCheck& check);

/// Pair term by enumerating every cross-target pair; O(n^2) reference.
double f_aux_pair_term_explicit(const Instance& inst, std::span<const double> posterior);

/// Dirichlet posterior with a concentration drawn from {0.05, 0.2, 1, 5}, so
/// samples range from near point masses to near uniform.
std::vector<double> random_posterior(std::size_t n, std::mt19937_64& rng);

/// Check families accepted by run_diagnostics: lemma1, stocmap, ratio, faux.
const std::vector<std::string>& diagnostic_check_names();

struct DiagnosticReport {
    std::size_t samples = 0;
    std::map<std::string, std::size_t> evaluated;  // per check name
    std::map<std::string, std::size_t> failed;
    std::map<std::string, double> min_slack;
    std::vector<BoundCheck> failures;  // first 20

    bool ok() const { return failures.empty(); }
};

/// Runs the requested check families on `samples` random posteriors. ratio
/// requires every test to be symmetric-noise.
DiagnosticReport run_diagnostics(const Instance& inst, const std::vector<std::string>& checks, std::size_t samples,
                                 std::uint64_t seed, double eta = 0.01);

nlohmann::json to_json(const DiagnosticReport& report);

}  // namespace eced
