#include "eced/gains.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace eced {

namespace {

constexpr double kTieTolerance = 1e-12;

// Weight-vector quantities shared by every test evaluated against the same belief.
struct WeightContext {
    const Instance& inst;
    std::span<const double> weights;
    EdgeAggregate agg;
    double edge_weight = 0.0;
    std::vector<double> log2_weights;  // filled on demand

    WeightContext(const Instance& instance, std::span<const double> w)
        : inst(instance), weights(w), agg(EdgeAggregate::from_weights(instance, w)), edge_weight(agg.edge_weight()) {}

    const std::vector<double>& logs() {
        if (log2_weights.empty() && !weights.empty()) {
            log2_weights.resize(weights.size());
            for (std::size_t i = 0; i < weights.size(); ++i) {
                log2_weights[i] = weights[i] > 0.0 ? std::log2(weights[i]) : 0.0;
            }
        }
        return log2_weights;
    }
};

// (A^2 - sum_y A_y^2) / 2 for a [t x arity] table of per-class sums at outcome x.
double cross_pairs(std::span<const double> class_table, std::size_t arity, std::size_t x, double total) {
    double squares = 0.0;
    for (std::size_t y = 0; y * arity < class_table.size(); ++y) {
        const double s = class_table[y * arity + x];
        squares += s * s;
    }
    return 0.5 * (total * total - squares);
}

double entropy_of_row(std::span<const double> table, std::size_t arity, std::size_t x, double total) {
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (std::size_t y = 0; y * arity < table.size(); ++y) {
        const double p = table[y * arity + x] / total;
        if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
}

double map_error_of_row(std::span<const double> table, std::size_t arity, std::size_t x, double total) {
    if (total <= 0.0) return 0.0;
    double best = 0.0;
    for (std::size_t y = 0; y * arity < table.size(); ++y) best = std::max(best, table[y * arity + x]);
    return std::max(0.0, (total - best) / total);
}

double eced_gain_ctx(WeightContext& ctx, std::size_t e) {
    const Test& test = ctx.inst.test(e);
    const std::size_t k = test.arity;
    const double total = ctx.agg.total_sum;
    const double W = ctx.edge_weight;
    if (total <= 0.0 || W <= 0.0) return 0.0;

    std::vector<double> discounted(k, 0.0);
    std::vector<double> discounted_class(ctx.inst.num_targets() * k, 0.0);
    std::vector<double> pred(k, 0.0);
    double self_discount = 0.0;

    for (std::size_t theta = 0; theta < ctx.weights.size(); ++theta) {
        const double w = ctx.weights[theta];
        if (w == 0.0) continue;
        const double* row = test.likelihood.data() + theta * k;
        const double inv_max = 1.0 / test.row_max[theta];
        const std::size_t base = ctx.inst.target_of(theta) * k;
        for (std::size_t x = 0; x < k; ++x) {
            const double lambda = row[x] == test.row_max[theta] ? 1.0 : row[x] * inv_max;
            discounted[x] += w * lambda;
            discounted_class[base + x] += w * lambda;
            pred[x] += w * row[x];
            self_discount += w * row[x] * (1.0 - lambda * lambda);
        }
    }

    double expected_bs = 0.0;
    for (std::size_t x = 0; x < k; ++x) {
        if (pred[x] == 0.0) continue;
        const double remaining = cross_pairs(discounted_class, k, x, discounted[x]);
        expected_bs += (pred[x] / total) * (W - remaining);
    }
    // Expected offset: the discount each root-cause would suffer from its own
    // observation noise alone, applied to the whole edge weight.
    const double expected_offset = W * self_discount / total;
    return expected_bs - expected_offset;
}

double ec2_gain_ctx(WeightContext& ctx, std::size_t e) {
    const Test& test = ctx.inst.test(e);
    const std::size_t k = test.arity;
    const double total = ctx.agg.total_sum;
    const double W = ctx.edge_weight;
    if (total <= 0.0 || W <= 0.0) return 0.0;

    std::vector<double> consistent(k, 0.0);
    std::vector<double> consistent_class(ctx.inst.num_targets() * k, 0.0);
    std::vector<double> pred(k, 0.0);
    for (std::size_t theta = 0; theta < ctx.weights.size(); ++theta) {
        const double w = ctx.weights[theta];
        if (w == 0.0) continue;
        const double* row = test.likelihood.data() + theta * k;
        const std::size_t base = ctx.inst.target_of(theta) * k;
        for (std::size_t x = 0; x < k; ++x) {
            pred[x] += w * row[x];
            if (row[x] == test.row_max[theta]) {
                consistent[x] += w;
                consistent_class[base + x] += w;
            }
        }
    }
    double gain = 0.0;
    for (std::size_t x = 0; x < k; ++x) {
        if (pred[x] == 0.0) continue;
        gain += (pred[x] / total) * (W - cross_pairs(consistent_class, k, x, consistent[x]));
    }
    return gain;
}

// Per-outcome joint sums B_x = sum w Pr(x|theta), split by target.
struct JointTable {
    std::vector<double> by_outcome;
    std::vector<double> by_class;  // [t x arity]
};

JointTable joint_table(const WeightContext& ctx, const Test& test) {
    const std::size_t k = test.arity;
    JointTable table{std::vector<double>(k, 0.0), std::vector<double>(ctx.inst.num_targets() * k, 0.0)};
    for (std::size_t theta = 0; theta < ctx.weights.size(); ++theta) {
        const double w = ctx.weights[theta];
        if (w == 0.0) continue;
        const double* row = test.likelihood.data() + theta * k;
        const std::size_t base = ctx.inst.target_of(theta) * k;
        for (std::size_t x = 0; x < k; ++x) {
            table.by_outcome[x] += w * row[x];
            table.by_class[base + x] += w * row[x];
        }
    }
    return table;
}

double ec2bayes_gain_ctx(WeightContext& ctx, std::size_t e) {
    const Test& test = ctx.inst.test(e);
    const double total = ctx.agg.total_sum;
    if (total <= 0.0) return 0.0;
    const JointTable table = joint_table(ctx, test);
    double expected_remaining = 0.0;
    for (std::size_t x = 0; x < test.arity; ++x) {
        if (table.by_outcome[x] == 0.0) continue;
        expected_remaining +=
            (table.by_outcome[x] / total) * cross_pairs(table.by_class, test.arity, x, table.by_outcome[x]);
    }
    return ctx.edge_weight - expected_remaining;
}

double ig_gain_ctx(WeightContext& ctx, std::size_t e) {
    const Test& test = ctx.inst.test(e);
    const double total = ctx.agg.total_sum;
    if (total <= 0.0) return 0.0;
    const JointTable table = joint_table(ctx, test);
    std::vector<double> prior_y(ctx.agg.class_sums);
    for (double& p : prior_y) p /= total;
    double gain = entropy(prior_y);
    for (std::size_t x = 0; x < test.arity; ++x) {
        const double bx = table.by_outcome[x];
        if (bx == 0.0) continue;
        gain -= (bx / total) * entropy_of_row(table.by_class, test.arity, x, bx);
    }
    return gain;
}

double us_gain_ctx(WeightContext& ctx, std::size_t e) {
    const Test& test = ctx.inst.test(e);
    const std::size_t k = test.arity;
    const double total = ctx.agg.total_sum;
    if (total <= 0.0) return 0.0;
    const auto& logw = ctx.logs();

    // H(Theta | x) = log Z_x - (1/Z_x) sum_theta w L (log w + log L), with Z_x = sum w L.
    std::vector<double> z(k, 0.0);
    std::vector<double> weighted_log(k, 0.0);
    double h_prior = 0.0;
    for (std::size_t theta = 0; theta < ctx.weights.size(); ++theta) {
        const double w = ctx.weights[theta];
        if (w == 0.0) continue;
        h_prior -= w * logw[theta];
        const double* row = test.likelihood.data() + theta * k;
        const double* lrow = test.log2_likelihood.data() + theta * k;
        for (std::size_t x = 0; x < k; ++x) {
            if (row[x] == 0.0) continue;
            z[x] += w * row[x];
            weighted_log[x] += w * row[x] * (logw[theta] + lrow[x]);
        }
    }
    h_prior = h_prior / total + std::log2(total);
    double expected_post = 0.0;
    for (std::size_t x = 0; x < k; ++x) {
        if (z[x] == 0.0) continue;
        const double h_x = std::log2(z[x]) - weighted_log[x] / z[x];
        expected_post += (z[x] / total) * h_x;
    }
    return h_prior - expected_post;
}

double voi_gain_ctx(WeightContext& ctx, std::size_t e) {
    const Test& test = ctx.inst.test(e);
    const double total = ctx.agg.total_sum;
    if (total <= 0.0) return 0.0;
    const JointTable table = joint_table(ctx, test);
    std::vector<double> prior_y(ctx.agg.class_sums);
    for (double& p : prior_y) p /= total;
    double gain = map_error(prior_y);
    for (std::size_t x = 0; x < test.arity; ++x) {
        const double bx = table.by_outcome[x];
        if (bx == 0.0) continue;
        gain -= (bx / total) * map_error_of_row(table.by_class, test.arity, x, bx);
    }
    return gain;
}

double gbs_gain_ctx(WeightContext& ctx, std::size_t e) {
    const Test& test = ctx.inst.test(e);
    if (test.arity != 2) throw std::invalid_argument("GBS requires binary tests");
    const auto pred = predictive(ctx.inst, ctx.weights, e);
    return -std::abs(pred[1] - pred[0]);
}

double gain_ctx(Objective objective, WeightContext& ctx, std::size_t e) {
    switch (objective) {
        case Objective::ECED: return eced_gain_ctx(ctx, e);
        case Objective::EC2: return ec2_gain_ctx(ctx, e);
        case Objective::EC2Bayes: return ec2bayes_gain_ctx(ctx, e);
        case Objective::IG: return ig_gain_ctx(ctx, e);
        case Objective::US: return us_gain_ctx(ctx, e);
        case Objective::VoI: return voi_gain_ctx(ctx, e);
        case Objective::GBS: return gbs_gain_ctx(ctx, e);
        case Objective::Random: break;
    }
    throw std::invalid_argument("objective '" + to_string(objective) + "' has no gain");
}

}  // namespace

std::string to_string(Objective objective) {
    switch (objective) {
        case Objective::ECED: return "eced";
        case Objective::EC2: return "ec2";
        case Objective::EC2Bayes: return "ec2bayes";
        case Objective::IG: return "ig";
        case Objective::US: return "us";
        case Objective::VoI: return "voi";
        case Objective::GBS: return "gbs";
        case Objective::Random: return "random";
    }
    return "unknown";
}

const std::vector<Objective>& all_objectives() {
    static const std::vector<Objective> all = {Objective::ECED, Objective::EC2, Objective::EC2Bayes, Objective::IG,
                                               Objective::US,   Objective::VoI, Objective::GBS,      Objective::Random};
    return all;
}

std::optional<Objective> parse_objective(std::string_view name) {
    for (Objective o : all_objectives()) {
        if (to_string(o) == name) return o;
    }
    return std::nullopt;
}

EdgeAggregate EdgeAggregate::from_weights(const Instance& inst, std::span<const double> weights) {
    EdgeAggregate agg;
    agg.class_sums.assign(inst.num_targets(), 0.0);
    for (std::size_t theta = 0; theta < weights.size(); ++theta) {
        agg.class_sums[inst.target_of(theta)] += weights[theta];
        agg.total_sum += weights[theta];
    }
    return agg;
}

double EdgeAggregate::edge_weight() const {
    double squares = 0.0;
    for (double s : class_sums) squares += s * s;
    return std::max(0.0, 0.5 * (total_sum * total_sum - squares));
}

double discount_ratio(const Test& test, std::size_t theta, std::size_t x) {
    const double p = test.prob(theta, x);
    return p == test.row_max[theta] ? 1.0 : p / test.row_max[theta];
}

double eced_gain(const Instance& inst, std::span<const double> weights, std::size_t e) {
    WeightContext ctx(inst, weights);
    return eced_gain_ctx(ctx, e);
}
double eced_gain(const Instance& inst, const Belief& belief, std::size_t e) { return eced_gain(inst, belief.posterior, e); }

double ec2_gain(const Instance& inst, std::span<const double> weights, std::size_t e) {
    WeightContext ctx(inst, weights);
    return ec2_gain_ctx(ctx, e);
}
double ec2_gain(const Instance& inst, const Belief& belief, std::size_t e) { return ec2_gain(inst, belief.posterior, e); }

double ec2bayes_gain(const Instance& inst, std::span<const double> weights, std::size_t e) {
    WeightContext ctx(inst, weights);
    return ec2bayes_gain_ctx(ctx, e);
}
double ec2bayes_gain(const Instance& inst, const Belief& belief, std::size_t e) {
    return ec2bayes_gain(inst, belief.posterior, e);
}

double baseline_gain(Objective kind, const Instance& inst, std::span<const double> weights, std::size_t e) {
    switch (kind) {
        case Objective::IG:
        case Objective::US:
        case Objective::VoI:
        case Objective::GBS: {
            WeightContext ctx(inst, weights);
            return gain_ctx(kind, ctx, e);
        }
        default: throw std::invalid_argument("'" + to_string(kind) + "' is not a baseline objective");
    }
}
double baseline_gain(Objective kind, const Instance& inst, const Belief& belief, std::size_t e) {
    return baseline_gain(kind, inst, belief.posterior, e);
}

double objective_gain(Objective objective, const Instance& inst, std::span<const double> weights, std::size_t e) {
    WeightContext ctx(inst, weights);
    return gain_ctx(objective, ctx, e);
}

GainReport gain_report(Objective objective, const Instance& inst, std::span<const double> weights,
                       std::span<const std::size_t> admissible, std::mt19937_64* rng) {
    if (admissible.empty()) throw std::invalid_argument("gain report needs at least one admissible test");
    GainReport report;
    report.objective = objective;
    report.gains.assign(inst.num_tests(), std::nullopt);

    if (objective == Objective::Random) {
        if (rng == nullptr) throw std::invalid_argument("random objective requires an RNG");
        std::uniform_int_distribution<std::size_t> pick(0, admissible.size() - 1);
        report.selected = admissible[pick(*rng)];
        return report;
    }

    WeightContext ctx(inst, weights);
    // Gains that differ only by summation-order rounding count as ties. Edge
    // objectives scale with the squared total weight, the rest are scale-free.
    const bool edge_objective =
        objective == Objective::ECED || objective == Objective::EC2 || objective == Objective::EC2Bayes;
    const double scale = edge_objective ? ctx.agg.total_sum * ctx.agg.total_sum : 1.0;
    const double tie = kTieTolerance * scale;

    std::vector<std::size_t> order(admissible.begin(), admissible.end());
    std::sort(order.begin(), order.end());
    double best = -std::numeric_limits<double>::infinity();
    report.selected = order.front();
    for (std::size_t e : order) {
        const double g = gain_ctx(objective, ctx, e);
        report.gains[e] = g;
        if (g > best + tie) {
            best = g;
            report.selected = e;
        }
    }
    return report;
}

GainReport gain_report(Objective objective, const Instance& inst, const Belief& belief,
                       std::span<const std::size_t> admissible, std::mt19937_64* rng) {
    return gain_report(objective, inst, belief.posterior, admissible, rng);
}

}  // namespace eced
