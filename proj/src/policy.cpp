#include "eced/policy.hpp"

#include <stdexcept>

namespace eced {

void StoppingRule::validate() const {
    if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in [0, 1]");
    if (budget < 1) throw std::invalid_argument("budget must be at least 1");
}

std::string to_string(StopReason reason) {
    switch (reason) {
        case StopReason::None: return "none";
        case StopReason::Delta: return "delta";
        case StopReason::Budget: return "budget";
        case StopReason::Exhausted: return "exhausted";
    }
    return "none";
}

std::optional<StopReason> parse_stop_reason(const std::string& name) {
    for (StopReason r : {StopReason::None, StopReason::Delta, StopReason::Budget, StopReason::Exhausted}) {
        if (to_string(r) == name) return r;
    }
    return std::nullopt;
}

PolicyState::PolicyState(const Instance& inst)
    : belief_(Belief::from_prior(inst)), performed_(inst.num_tests(), false) {}

std::vector<std::size_t> PolicyState::admissible() const {
    std::vector<std::size_t> out;
    out.reserve(performed_.size() - steps_.size());
    for (std::size_t e = 0; e < performed_.size(); ++e) {
        if (!performed_[e]) out.push_back(e);
    }
    return out;
}

PolicyState PolicyState::advance(const Instance& inst, std::size_t e, std::size_t x) const {
    if (e >= performed_.size()) throw std::out_of_range("test index " + std::to_string(e) + " out of range");
    if (performed_[e]) throw std::logic_error("test already performed");
    PolicyState next(*this);
    next.belief_ = posterior_update(inst, belief_, e, x);
    next.performed_[e] = true;
    next.steps_.push_back({e, x, map_error(inst, next.belief_)});
    return next;
}

Decision next_test(Objective objective, const Instance& inst, const PolicyState& state, const StoppingRule& rule,
                   std::mt19937_64* rng) {
    if (map_error(inst, state.belief()) <= rule.delta) return {StopReason::Delta, 0};
    if (state.num_performed() >= rule.budget) return {StopReason::Budget, 0};
    const auto admissible = state.admissible();
    if (admissible.empty()) return {StopReason::Exhausted, 0};
    return {StopReason::None, gain_report(objective, inst, state.belief(), admissible, rng).selected};
}

std::size_t predict(const Instance& inst, const PolicyState& state) {
    return map_target(target_marginal(inst, state.belief()));
}

}  // namespace eced
