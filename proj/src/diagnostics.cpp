#include "eced/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "eced/gains.hpp"

namespace eced {

AuxConfig AuxConfig::make(std::size_t num_root_causes, double eta) {
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1)");
    const double n = static_cast<double>(num_root_causes);
    const double log_term = std::log2(2.0 * n * n / eta);
    return {eta, 8.0 * log_term * log_term};
}

BoundCheck BoundCheck::at_most(std::string name, double lhs, double rhs) {
    const double slack = rhs - lhs;
    return {std::move(name), lhs, rhs, slack >= -kBoundTolerance, slack};
}

BoundCheck BoundCheck::equal(std::string name, double lhs, double rhs, double tolerance) {
    const double slack = -std::abs(lhs - rhs);
    return {std::move(name), lhs, rhs, slack >= -tolerance, slack};
}

double f_aux_pair_term(const Instance& inst, std::span<const double> posterior) {
    // sum_{a ~/~ b} p_a p_b (-log p_a - log p_b) = sum_y p_y (T - T_y), where T_y is
    // the class's share of sum_theta -p_theta log p_theta and T its total.
    std::vector<double> class_mass(inst.num_targets(), 0.0);
    std::vector<double> class_info(inst.num_targets(), 0.0);
    double total_info = 0.0;
    for (std::size_t theta = 0; theta < posterior.size(); ++theta) {
        const double p = posterior[theta];
        if (p <= 0.0) continue;
        const double info = -p * std::log2(p);
        class_mass[inst.target_of(theta)] += p;
        class_info[inst.target_of(theta)] += info;
        total_info += info;
    }
    double pairs = 0.0;
    for (std::size_t y = 0; y < class_mass.size(); ++y) pairs += class_mass[y] * (total_info - class_info[y]);
    return std::max(0.0, pairs);
}

double f_aux(const Instance& inst, std::span<const double> posterior, const AuxConfig& cfg) {
    double target_term = 0.0;
    for (double p : target_marginal(inst, posterior)) target_term += binary_entropy(p);
    return f_aux_pair_term(inst, posterior) + cfg.c * target_term;
}

double f_aux(const Instance& inst, const Belief& belief, const AuxConfig& cfg) {
    return f_aux(inst, belief.posterior, cfg);
}

std::vector<BoundCheck> check_lemma1(const Instance& inst, const Belief& belief, const AuxConfig& cfg) {
    const double aux = f_aux(inst, belief, cfg);
    const double err = map_error(inst, belief);
    std::vector<BoundCheck> checks{BoundCheck::at_most("lemma1.lower", 2.0 * cfg.c * err, aux)};
    if (err <= 0.25) {
        const double n = static_cast<double>(inst.num_root_causes());
        const double rhs = (3.0 * cfg.c + 4.0) * (binary_entropy(err) + err * std::log2(n));
        checks.push_back(BoundCheck::at_most("lemma1.upper", aux, rhs));
    }
    return checks;
}

std::vector<BoundCheck> check_stochastic_map(const Instance& inst, const Belief& belief) {
    const auto marginal = target_marginal(inst, belief);
    const double err = map_error(marginal);
    const double pe = stochastic_error(marginal);
    return {BoundCheck::at_most("stocmap.lower", err, pe), BoundCheck::at_most("stocmap.upper", pe, 2.0 * err)};
}

SymmetricNoise symmetric_noise_form(const Test& test, double tolerance) {
    if (test.arity != 2) throw std::invalid_argument("not symmetric-noise test");
    SymmetricNoise form;
    const std::size_t n = test.row_max.size();
    form.epsilon = n == 0 ? 0.0 : test.noise_rate.front();
    for (std::size_t theta = 0; theta < n; ++theta) {
        if (std::abs(test.noise_rate[theta] - form.epsilon) > tolerance) {
            throw std::invalid_argument("not symmetric-noise test");
        }
        form.skeleton.push_back(test.prob(theta, 0) >= test.prob(theta, 1) ? 0 : 1);
    }
    return form;
}

double skeleton_ec2_gain(const Instance& inst, std::span<const double> weights, const SymmetricNoise& form) {
    // On the skeleton, outcome x has probability equal to the mass predicting x
    // and leaves exactly the edges among that mass.
    const std::size_t t = inst.num_targets();
    std::vector<double> class_mass(2 * t, 0.0);
    double mass[2] = {0.0, 0.0};
    for (std::size_t theta = 0; theta < weights.size(); ++theta) {
        const std::size_t x = form.skeleton[theta];
        mass[x] += weights[theta];
        class_mass[inst.target_of(theta) * 2 + x] += weights[theta];
    }
    const EdgeAggregate agg = EdgeAggregate::from_weights(inst, weights);
    const double total = agg.total_sum;
    const double W = agg.edge_weight();
    if (total <= 0.0) return 0.0;
    double gain = 0.0;
    for (std::size_t x = 0; x < 2; ++x) {
        double squares = 0.0;
        for (std::size_t y = 0; y < t; ++y) squares += class_mass[y * 2 + x] * class_mass[y * 2 + x];
        const double remaining = 0.5 * (mass[x] * mass[x] - squares);
        gain += (mass[x] / total) * (W - remaining);
    }
    return gain;
}

std::vector<BoundCheck> eced_ec2_ratio_check(const Instance& inst, const Belief& belief) {
    std::vector<BoundCheck> checks;
    for (std::size_t e = 0; e < inst.num_tests(); ++e) {
        const SymmetricNoise form = symmetric_noise_form(inst.test(e));
        const double eps = form.epsilon;
        const double ratio = eps >= 0.5 ? 0.0 : std::pow((1.0 - 2.0 * eps) / (1.0 - eps), 2);
        checks.push_back(BoundCheck::equal("ratio." + inst.test(e).id, eced_gain(inst, belief, e),
                                           ratio * skeleton_ec2_gain(inst, belief.posterior, form)));
    }
    return checks;
}

double noise_severity(const Instance& inst) {
    double severity = 1.0;
    for (const Test& test : inst.tests()) {
        const double eps = test.noise_rate.empty() ? 0.0 : *std::max_element(test.noise_rate.begin(), test.noise_rate.end());
        severity = std::min(severity, (1.0 - 2.0 * eps) * (1.0 - 2.0 * eps));
    }
    return severity;
}

std::uint64_t belief_fingerprint(const Belief& belief) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffU;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& [e, x] : belief.observed) {
        mix(e);
        mix(x);
    }
    return h;
}

nlohmann::json to_json(const BoundCheck& check) {
    return {{"name", check.name}, {"lhs", check.lhs}, {"rhs", check.rhs}, {"holds", check.holds}, {"slack", check.slack}};
}

double f_aux_pair_term_explicit(const Instance& inst, std::span<const double> posterior) {
    double sum = 0.0;
    for (std::size_t a = 0; a < posterior.size(); ++a) {
        for (std::size_t b = a + 1; b < posterior.size(); ++b) {
            if (inst.target_of(a) == inst.target_of(b)) continue;
            const double pa = posterior[a];
            const double pb = posterior[b];
            if (pa <= 0.0 || pb <= 0.0) continue;
            sum += pa * pb * -std::log2(pa * pb);
        }
    }
    return sum;
}

std::vector<double> random_posterior(std::size_t n, std::mt19937_64& rng) {
    static constexpr double kAlphas[] = {0.05, 0.2, 1.0, 5.0};
    std::uniform_int_distribution<int> pick(0, 3);
    std::gamma_distribution<double> gamma(kAlphas[pick(rng)], 1.0);
    std::vector<double> p(n);
    double sum = 0.0;
    while (!(sum > 0.0)) {
        sum = 0.0;
        for (double& v : p) sum += (v = gamma(rng));
    }
    for (double& v : p) v /= sum;
    return p;
}

const std::vector<std::string>& diagnostic_check_names() {
    static const std::vector<std::string> names = {"lemma1", "stocmap", "ratio", "faux"};
    return names;
}

DiagnosticReport run_diagnostics(const Instance& inst, const std::vector<std::string>& checks, std::size_t samples,
                                 std::uint64_t seed, double eta) {
    for (const auto& c : checks) {
        const auto& known = diagnostic_check_names();
        if (std::find(known.begin(), known.end(), c) == known.end()) {
            throw std::invalid_argument("unknown check '" + c + "'");
        }
    }
    auto wants = [&](const char* name) { return std::find(checks.begin(), checks.end(), name) != checks.end(); };
    if (wants("ratio")) {
        for (const Test& t : inst.tests()) symmetric_noise_form(t);
    }
    const AuxConfig cfg = AuxConfig::make(inst.num_root_causes(), eta);
    DiagnosticReport report;
    report.samples = samples;
    // Ratio checks are named per test; tallies are kept per family.
    auto record = [&](const std::string& family, const BoundCheck& check) {
        const std::string key = family == "ratio" ? family : check.name;
        ++report.evaluated[key];
        auto [it, fresh] = report.min_slack.try_emplace(key, check.slack);
        if (!fresh) it->second = std::min(it->second, check.slack);
        if (!check.holds) {
            ++report.failed[key];
            if (report.failures.size() < 20) report.failures.push_back(check);
        }
    };
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < samples; ++i) {
        Belief belief;
        belief.posterior = random_posterior(inst.num_root_causes(), rng);
        if (wants("lemma1")) {
            for (const auto& c : check_lemma1(inst, belief, cfg)) record("lemma1", c);
        }
        if (wants("stocmap")) {
            for (const auto& c : check_stochastic_map(inst, belief)) record("stocmap", c);
        }
        if (wants("ratio")) {
            for (const auto& c : eced_ec2_ratio_check(inst, belief)) record("ratio", c);
        }
        if (wants("faux")) {
            record("faux", BoundCheck::equal("faux.pairs", f_aux_pair_term(inst, belief.posterior),
                                             f_aux_pair_term_explicit(inst, belief.posterior)));
        }
    }
    return report;
}

nlohmann::json to_json(const DiagnosticReport& report) {
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : report.failures) failures.push_back(to_json(f));
    return {{"samples", report.samples},
            {"evaluated", report.evaluated},
            {"failed", report.failed},
            {"min_slack", report.min_slack},
            {"failures", failures},
            {"ok", report.ok()}};
}

}  // namespace eced
