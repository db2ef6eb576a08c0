#pragma once

// Probabilistic model: root-causes, targets, noisy tests and beliefs.
//
// A root-cause theta is the latent state that generates every test outcome.
// The target y = r(theta) is what we actually want to identify. Tests are
// conditionally independent given theta and each costs one unit.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace eced {

/// Thrown when an instance description violates a model invariant.
class InvalidInstance : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when an observation has zero predictive probability.
class InconsistentObservation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kProbTolerance = 1e-9;

struct Test {
    std::string id;
    std::size_t arity = 2;
    // Row-major [n x arity]; row theta is Pr(X_e = . | theta).
    std::vector<double> likelihood;
    // Cached per root-cause: max_x Pr(X_e = x | theta) and 1 - that maximum.
    std::vector<double> row_max;
    std::vector<double> noise_rate;
    // log2 of likelihood; zero entries map to -inf.
    std::vector<double> log2_likelihood;

    double prob(std::size_t theta, std::size_t x) const { return likelihood[theta * arity + x]; }
    std::span<const double> row(std::size_t theta) const {
        return {likelihood.data() + theta * arity, arity};
    }
    /// True when every root-cause has a deterministic outcome.
    bool noise_free() const;
};

/// Unvalidated instance description, as read from a file or produced by a generator.
struct RawInstance {
    struct RootCause {
        std::string id;
        double prior = 0.0;
        std::string target;
    };
    struct RawTest {
        std::string id;
        std::vector<std::vector<double>> likelihood;  // [n][arity]
    };
    std::vector<RootCause> root_causes;
    std::vector<RawTest> tests;
};

/// Immutable problem description. Construct through validate_instance().
class Instance {
public:
    std::size_t num_root_causes() const { return prior_.size(); }
    std::size_t num_targets() const { return target_ids_.size(); }
    std::size_t num_tests() const { return tests_.size(); }

    const std::vector<std::string>& root_cause_ids() const { return root_cause_ids_; }
    const std::vector<std::string>& target_ids() const { return target_ids_; }
    const std::vector<double>& prior() const { return prior_; }
    const std::vector<std::size_t>& target_of() const { return target_of_; }
    std::size_t target_of(std::size_t theta) const { return target_of_[theta]; }
    const std::vector<Test>& tests() const { return tests_; }
    const Test& test(std::size_t e) const { return tests_.at(e); }

    /// Index of the test with the given id, or num_tests() when absent.
    std::size_t find_test(const std::string& id) const;

private:
    friend Instance validate_instance(const RawInstance& raw, double renormalize_tolerance);

    std::vector<std::string> root_cause_ids_;
    std::vector<std::string> target_ids_;
    std::vector<double> prior_;
    std::vector<std::size_t> target_of_;
    std::vector<Test> tests_;
};

/// Checks every invariant and caches noise rates. The prior and likelihood rows
/// are rescaled to sum to one when they are off by at most renormalize_tolerance;
/// anything further off is rejected.
Instance validate_instance(const RawInstance& raw, double renormalize_tolerance = kProbTolerance);

/// Reverse of validate_instance, useful for serialization.
RawInstance to_raw(const Instance& inst);

Instance instance_from_json(const nlohmann::json& j);
nlohmann::json instance_to_json(const Instance& inst);
Instance load_instance(const std::string& path);
void save_instance(const Instance& inst, const std::string& path);

/// A partial realization together with its normalized posterior.
///
/// Beliefs are values: posterior_update returns a new Belief and leaves the
/// argument untouched.
struct Belief {
    std::vector<std::pair<std::size_t, std::size_t>> observed;  // (test, outcome)
    std::vector<double> posterior;
    double log_evidence = 0.0;  // natural log of Pr(observed) under the prior

    static Belief from_prior(const Instance& inst);
};

Belief posterior_update(const Instance& inst, const Belief& belief, std::size_t e, std::size_t x);

/// Outcome distribution Pr(X_e = x | psi).
std::vector<double> predictive(const Instance& inst, std::span<const double> weights, std::size_t e);
std::vector<double> predictive(const Instance& inst, const Belief& belief, std::size_t e);

/// Pr(y | psi) for every target.
std::vector<double> target_marginal(const Instance& inst, std::span<const double> posterior);
std::vector<double> target_marginal(const Instance& inst, const Belief& belief);

/// Lowest-index argmax of a target marginal.
std::size_t map_target(std::span<const double> marginal);

/// 1 - max_y p_y, computed as the mass outside the MAP target.
double map_error(std::span<const double> marginal);
double map_error(const Instance& inst, const Belief& belief);

/// sum_y p_y (1 - p_y): error of a predictor that samples y from the marginal.
double stochastic_error(std::span<const double> marginal);
double stochastic_error(const Instance& inst, const Belief& belief);

/// Shannon entropy in bits, 0 log 0 = 0.
double entropy(std::span<const double> dist);

/// Binary entropy in bits.
double binary_entropy(double p);

}  // namespace eced
