#include "eced/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace eced {

namespace {

double checked_sum(std::span<const double> values, const std::string& what) {
    double sum = 0.0;
    for (double v : values) {
        if (!std::isfinite(v) || v < 0.0) {
            throw InvalidInstance("negative probability in " + what);
        }
        sum += v;
    }
    return sum;
}

}  // namespace

bool Test::noise_free() const {
    return std::all_of(noise_rate.begin(), noise_rate.end(), [](double eps) { return eps == 0.0; });
}

std::size_t Instance::find_test(const std::string& id) const {
    auto it = std::find_if(tests_.begin(), tests_.end(), [&](const Test& t) { return t.id == id; });
    return static_cast<std::size_t>(it - tests_.begin());
}

Instance validate_instance(const RawInstance& raw, double renormalize_tolerance) {
    const std::size_t n = raw.root_causes.size();
    if (n == 0) throw InvalidInstance("instance has no root-causes");

    Instance inst;
    std::set<std::string> seen_ids;
    std::map<std::string, std::size_t> target_index;
    inst.prior_.reserve(n);
    for (const auto& rc : raw.root_causes) {
        if (!seen_ids.insert(rc.id).second) throw InvalidInstance("duplicate root-cause id '" + rc.id + "'");
        if (rc.target.empty()) throw InvalidInstance("dangling target: root-cause '" + rc.id + "' has no target");
        auto [it, inserted] = target_index.try_emplace(rc.target, inst.target_ids_.size());
        if (inserted) inst.target_ids_.push_back(rc.target);
        inst.root_cause_ids_.push_back(rc.id);
        inst.prior_.push_back(rc.prior);
        inst.target_of_.push_back(it->second);
    }

    const double prior_sum = checked_sum(inst.prior_, "prior");
    if (std::abs(prior_sum - 1.0) > renormalize_tolerance) throw InvalidInstance("prior not normalized");
    for (double& p : inst.prior_) p /= prior_sum;

    std::set<std::string> test_ids;
    for (const auto& rt : raw.tests) {
        if (!test_ids.insert(rt.id).second) throw InvalidInstance("duplicate test id '" + rt.id + "'");
        if (rt.likelihood.size() != n) {
            throw InvalidInstance("test '" + rt.id + "' has " + std::to_string(rt.likelihood.size()) +
                                  " likelihood rows, expected " + std::to_string(n));
        }
        Test test;
        test.id = rt.id;
        test.arity = rt.likelihood.front().size();
        if (test.arity < 2) throw InvalidInstance("test '" + rt.id + "' needs at least two outcomes");
        test.likelihood.reserve(n * test.arity);
        for (std::size_t theta = 0; theta < n; ++theta) {
            const auto& row = rt.likelihood[theta];
            if (row.size() != test.arity) throw InvalidInstance("test '" + rt.id + "' has ragged likelihood rows");
            const double sum = checked_sum(row, "test '" + rt.id + "'");
            if (std::abs(sum - 1.0) > renormalize_tolerance) {
                throw InvalidInstance("likelihood row not normalized (test '" + rt.id + "', root-cause " +
                                      std::to_string(theta) + ")");
            }
            double row_max = 0.0;
            for (double v : row) {
                test.likelihood.push_back(v / sum);
                test.log2_likelihood.push_back(std::log2(v / sum));
                row_max = std::max(row_max, v / sum);
            }
            test.row_max.push_back(row_max);
            test.noise_rate.push_back(1.0 - row_max);
        }
        inst.tests_.push_back(std::move(test));
    }
    return inst;
}

RawInstance to_raw(const Instance& inst) {
    RawInstance raw;
    for (std::size_t theta = 0; theta < inst.num_root_causes(); ++theta) {
        raw.root_causes.push_back(
            {inst.root_cause_ids()[theta], inst.prior()[theta], inst.target_ids()[inst.target_of(theta)]});
    }
    for (const Test& t : inst.tests()) {
        RawInstance::RawTest rt{t.id, {}};
        for (std::size_t theta = 0; theta < inst.num_root_causes(); ++theta) {
            auto row = t.row(theta);
            rt.likelihood.emplace_back(row.begin(), row.end());
        }
        raw.tests.push_back(std::move(rt));
    }
    return raw;
}

Instance instance_from_json(const nlohmann::json& j) {
    RawInstance raw;
    try {
        for (const auto& rc : j.at("root_causes")) {
            const auto& target = rc.at("target");
            raw.root_causes.push_back({rc.at("id").is_string() ? rc.at("id").get<std::string>() : rc.at("id").dump(),
                                       rc.at("prior").get<double>(),
                                       target.is_string() ? target.get<std::string>() : target.dump()});
        }
        for (const auto& t : j.at("tests")) {
            raw.tests.push_back({t.at("id").is_string() ? t.at("id").get<std::string>() : t.at("id").dump(),
                                 t.at("likelihood").get<std::vector<std::vector<double>>>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInstance(std::string("malformed instance JSON: ") + e.what());
    }
    return validate_instance(raw, 1e-6);
}

nlohmann::json instance_to_json(const Instance& inst) {
    const RawInstance raw = to_raw(inst);
    nlohmann::json j;
    j["root_causes"] = nlohmann::json::array();
    for (const auto& rc : raw.root_causes) {
        j["root_causes"].push_back({{"id", rc.id}, {"prior", rc.prior}, {"target", rc.target}});
    }
    j["tests"] = nlohmann::json::array();
    for (const auto& t : raw.tests) j["tests"].push_back({{"id", t.id}, {"likelihood", t.likelihood}});
    return j;
}

Instance load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open instance file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInstance("'" + path + "': " + e.what());
    }
    return instance_from_json(j);
}

void save_instance(const Instance& inst, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write instance file '" + path + "'");
    out << instance_to_json(inst).dump(2) << '\n';
}

Belief Belief::from_prior(const Instance& inst) {
    Belief b;
    b.posterior = inst.prior();
    return b;
}

Belief posterior_update(const Instance& inst, const Belief& belief, std::size_t e, std::size_t x) {
    const Test& test = inst.test(e);
    if (x >= test.arity) {
        throw std::out_of_range("outcome " + std::to_string(x) + " out of range for test '" + test.id + "'");
    }
    Belief next;
    next.observed = belief.observed;
    next.observed.emplace_back(e, x);
    next.posterior.resize(belief.posterior.size());
    double evidence = 0.0;
    for (std::size_t theta = 0; theta < belief.posterior.size(); ++theta) {
        next.posterior[theta] = belief.posterior[theta] * test.prob(theta, x);
        evidence += next.posterior[theta];
    }
    if (!(evidence > 0.0)) {
        throw InconsistentObservation("inconsistent observation: outcome " + std::to_string(x) + " of test '" +
                                      test.id + "' has zero probability");
    }
    for (double& p : next.posterior) p /= evidence;
    next.log_evidence = belief.log_evidence + std::log(evidence);
    return next;
}

std::vector<double> predictive(const Instance& inst, std::span<const double> weights, std::size_t e) {
    const Test& test = inst.test(e);
    std::vector<double> out(test.arity, 0.0);
    double total = 0.0;
    for (std::size_t theta = 0; theta < weights.size(); ++theta) {
        const double w = weights[theta];
        if (w == 0.0) continue;
        total += w;
        const double* row = test.likelihood.data() + theta * test.arity;
        for (std::size_t x = 0; x < test.arity; ++x) out[x] += w * row[x];
    }
    if (total > 0.0) {
        for (double& v : out) v /= total;
    }
    return out;
}

std::vector<double> predictive(const Instance& inst, const Belief& belief, std::size_t e) {
    return predictive(inst, belief.posterior, e);
}

std::vector<double> target_marginal(const Instance& inst, std::span<const double> posterior) {
    std::vector<double> probs(inst.num_targets(), 0.0);
    for (std::size_t theta = 0; theta < posterior.size(); ++theta) probs[inst.target_of(theta)] += posterior[theta];
    return probs;
}

std::vector<double> target_marginal(const Instance& inst, const Belief& belief) {
    return target_marginal(inst, belief.posterior);
}

std::size_t map_target(std::span<const double> marginal) {
    return static_cast<std::size_t>(std::max_element(marginal.begin(), marginal.end()) - marginal.begin());
}

double map_error(std::span<const double> marginal) {
    // Summing the non-MAP mass keeps an exact zero when the target is resolved.
    const std::size_t best = map_target(marginal);
    double err = 0.0;
    for (std::size_t y = 0; y < marginal.size(); ++y) {
        if (y != best) err += marginal[y];
    }
    return err;
}

double map_error(const Instance& inst, const Belief& belief) { return map_error(target_marginal(inst, belief)); }

double stochastic_error(std::span<const double> marginal) {
    double err = 0.0;
    for (double p : marginal) err += p * (1.0 - p);
    return err;
}

double stochastic_error(const Instance& inst, const Belief& belief) {
    return stochastic_error(target_marginal(inst, belief));
}

double entropy(std::span<const double> dist) {
    double h = 0.0;
    for (double p : dist) {
        if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
}

double binary_entropy(double p) {
    const double pair[2] = {p, 1.0 - p};
    return entropy(pair);
}

}  // namespace eced
