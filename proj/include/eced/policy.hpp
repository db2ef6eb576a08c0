#pragma once

// Greedy sequential policies: one objective, one stopping rule, one belief.

#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "eced/gains.hpp"
#include "eced/model.hpp"

namespace eced {

inline constexpr std::size_t kUnlimitedBudget = std::numeric_limits<std::size_t>::max();

/// Stop when the MAP error is at most delta, after budget tests, or when no
/// test is left to perform.
struct StoppingRule {
    double delta = 0.01;
    std::size_t budget = kUnlimitedBudget;

    /// Throws std::invalid_argument unless delta is in [0, 1] and budget >= 1.
    void validate() const;
};

enum class StopReason { None, Delta, Budget, Exhausted };

std::string to_string(StopReason reason);
std::optional<StopReason> parse_stop_reason(const std::string& name);

struct Step {
    std::size_t test = 0;
    std::size_t outcome = 0;
    double map_error = 0.0;  // after observing the outcome

    bool operator==(const Step&) const = default;
};

class PolicyState {
public:
    explicit PolicyState(const Instance& inst);

    const Belief& belief() const { return belief_; }
    const std::vector<Step>& steps() const { return steps_; }
    bool performed(std::size_t e) const { return performed_.at(e); }
    std::size_t num_performed() const { return steps_.size(); }
    /// Tests not yet performed, in increasing index order.
    std::vector<std::size_t> admissible() const;

    /// Observes outcome x of test e and returns the new state. Throws
    /// std::logic_error("test already performed") on a repeat and propagates
    /// InconsistentObservation.
    PolicyState advance(const Instance& inst, std::size_t e, std::size_t x) const;

private:
    Belief belief_;
    std::vector<bool> performed_;
    std::vector<Step> steps_;
};

struct Decision {
    StopReason stop = StopReason::None;
    std::size_t test = 0;  // meaningful only when stop == None

    bool stopped() const { return stop != StopReason::None; }
};

/// The next test under the objective, or the reason to stop. Random needs rng.
Decision next_test(Objective objective, const Instance& inst, const PolicyState& state, const StoppingRule& rule,
                   std::mt19937_64* rng = nullptr);

/// MAP target of the current belief, ties to the lowest index.
std::size_t predict(const Instance& inst, const PolicyState& state);

}  // namespace eced
