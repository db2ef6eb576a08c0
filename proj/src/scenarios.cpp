#include "eced/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace eced {

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::string format_param(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

nlohmann::json plain_rendering(const std::string& id) { return {{"kind", "test"}, {"label", id}}; }

Scenario with_plain_renderings(Instance inst) {
    Scenario sc{std::move(inst), {}};
    for (const Test& t : sc.instance.tests()) sc.renderings.push_back(plain_rendering(t.id));
    return sc;
}

std::vector<double> resolve_prior(const std::vector<double>& prior, std::size_t n) {
    if (prior.empty()) return std::vector<double>(n, 1.0 / static_cast<double>(n));
    if (prior.size() != n) throw std::invalid_argument("prior length does not match the number of root-causes");
    return prior;
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(d);
}

}  // namespace

// ---------------------------------------------------------------------------
// Risky choice

void Lottery::validate() const {
    if (outcomes.empty()) throw std::invalid_argument("lottery has no outcomes");
    double sum = 0.0;
    for (const auto& [payoff, prob] : outcomes) {
        if (prob < 0.0) throw std::invalid_argument("lottery probability is negative");
        sum += prob;
    }
    if (std::abs(sum - 1.0) > kProbTolerance) throw std::invalid_argument("lottery probabilities not normalized");
}

double Lottery::mean() const {
    double m = 0.0;
    for (const auto& [payoff, prob] : outcomes) m += prob * payoff;
    return m;
}

double Lottery::stddev() const {
    const double m = mean();
    double var = 0.0;
    for (const auto& [payoff, prob] : outcomes) var += prob * (payoff - m) * (payoff - m);
    return std::sqrt(std::max(0.0, var));
}

std::string to_string(TheoryFamily family) {
    switch (family) {
        case TheoryFamily::ExpectedValue: return "expected-value";
        case TheoryFamily::CRRA: return "crra";
        case TheoryFamily::WeightedMoments: return "weighted-moments";
    }
    return "unknown";
}

void TheoryParams::validate() const {
    switch (family) {
        case TheoryFamily::ExpectedValue: return;
        case TheoryFamily::CRRA:
            if (params.size() != 1 || !(params[0] >= 0.0 && params[0] < 1.0)) {
                throw std::invalid_argument("CRRA risk aversion must lie in [0, 1)");
            }
            return;
        case TheoryFamily::WeightedMoments:
            if (params.size() != 1 || !(params[0] >= -2.0 && params[0] <= 2.0)) {
                throw std::invalid_argument("weighted-moments std weight must lie in [-2, 2]");
            }
            return;
    }
}

std::string TheoryParams::id() const {
    std::string out = to_string(family);
    for (double p : params) out += ":" + format_param(p);
    return out;
}

double lottery_value(const TheoryParams& theory, const Lottery& lottery) {
    switch (theory.family) {
        case TheoryFamily::ExpectedValue: return lottery.mean();
        case TheoryFamily::CRRA: {
            const double rho = theory.params.at(0);
            double v = 0.0;
            for (const auto& [z, p] : lottery.outcomes) {
                const double sign = z < 0.0 ? -1.0 : 1.0;
                v += p * sign * std::pow(std::abs(z), 1.0 - rho) / (1.0 - rho);
            }
            return v;
        }
        case TheoryFamily::WeightedMoments: return lottery.mean() + theory.params.at(0) * lottery.stddev();
    }
    return 0.0;
}

Scenario gen_risky_choice(const std::vector<TheoryParams>& theories,
                          const std::vector<std::pair<Lottery, Lottery>>& lotteries, double lambda,
                          const std::vector<double>& prior) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (lotteries.empty()) throw std::invalid_argument("empty lotteries");
    std::set<TheoryFamily> families;
    for (const auto& th : theories) {
        th.validate();
        families.insert(th.family);
    }
    if (families.size() < 2) throw std::invalid_argument("at least two theory families are required");

    const auto p = resolve_prior(prior, theories.size());
    RawInstance raw;
    for (std::size_t i = 0; i < theories.size(); ++i) {
        raw.root_causes.push_back({theories[i].id(), p[i], to_string(theories[i].family)});
    }
    Scenario sc{Instance{}, {}};
    auto lottery_json = [](const Lottery& l) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [z, q] : l.outcomes) arr.push_back({{"payoff", z}, {"prob", q}});
        return arr;
    };
    for (std::size_t e = 0; e < lotteries.size(); ++e) {
        const auto& [first, second] = lotteries[e];
        first.validate();
        second.validate();
        RawInstance::RawTest test{"lotteries-" + std::to_string(e), {}};
        for (const auto& th : theories) {
            const double p1 = logistic(lambda * (lottery_value(th, first) - lottery_value(th, second)));
            test.likelihood.push_back({1.0 - p1, p1});
        }
        raw.tests.push_back(std::move(test));
        sc.renderings.push_back(
            {{"kind", "lottery_pair"}, {"left", lottery_json(first)}, {"right", lottery_json(second)}});
    }
    sc.instance = validate_instance(raw);
    return sc;
}

std::vector<TheoryParams> default_theories(std::size_t per_family) {
    std::vector<TheoryParams> out{{TheoryFamily::ExpectedValue, {}}};
    for (std::size_t i = 0; i < per_family; ++i) {
        const double frac = per_family == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(per_family - 1);
        out.push_back({TheoryFamily::CRRA, {0.1 + 0.8 * frac}});
    }
    for (std::size_t i = 0; i < per_family; ++i) {
        const double frac = per_family == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(per_family - 1);
        out.push_back({TheoryFamily::WeightedMoments, {-1.5 + 3.0 * frac}});
    }
    return out;
}

std::vector<std::pair<Lottery, Lottery>> random_lottery_pairs(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> outcome_count(2, 3);
    std::uniform_int_distribution<int> payoff(-10, 20);  // multiples of 5 in [-50, 100]
    auto draw = [&]() {
        Lottery l;
        const int k = outcome_count(rng);
        std::vector<double> w(static_cast<std::size_t>(k));
        std::gamma_distribution<double> g(1.0, 1.0);
        double sum = 0.0;
        for (double& v : w) sum += (v = g(rng));
        double acc = 0.0;
        for (int i = 0; i < k; ++i) {
            double p = w[static_cast<std::size_t>(i)] / sum;
            if (i == k - 1) p = 1.0 - acc;
            acc += p;
            l.outcomes.emplace_back(5.0 * payoff(rng), p);
        }
        return l;
    };
    std::vector<std::pair<Lottery, Lottery>> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Lottery a = draw();
        Lottery b = draw();
        out.emplace_back(std::move(a), std::move(b));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Embeddings

void assign_clusters(EmbeddingSpace& space, std::size_t k, std::uint64_t seed) {
    const std::size_t n = space.points.size();
    if (n == 0) throw std::invalid_argument("embedding has no points");
    if (k == 0) throw std::invalid_argument("cluster count must be positive");
    k = std::min(k, n);

    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> centers;
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    centers.push_back(space.points[first(rng)]);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    while (centers.size() < k) {
        std::size_t far = 0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], distance(space.points[i], centers.back()));
            if (nearest[i] > nearest[far]) far = i;
        }
        centers.push_back(space.points[far]);
    }

    std::vector<std::size_t> assign(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < centers.size(); ++c) {
                const double d = distance(space.points[i], centers[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (iter == 0 || assign[i] != best) changed = true;
            assign[i] = best;
        }
        if (!changed) break;
        const std::size_t dim = space.points.front().size();
        std::vector<std::vector<double>> sums(centers.size(), std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(centers.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[assign[i]];
            for (std::size_t d = 0; d < dim; ++d) sums[assign[i]][d] += space.points[i][d];
        }
        for (std::size_t c = 0; c < centers.size(); ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d) centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
    }

    // Dense relabeling in order of first appearance drops empty clusters.
    std::map<std::size_t, std::size_t> relabel;
    space.clusters.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, inserted] = relabel.try_emplace(assign[i], relabel.size());
        space.clusters[i] = it->second;
    }
    space.num_clusters = relabel.size();
    if (space.num_clusters < k) {
        space.warnings.push_back("degenerate clustering: requested " + std::to_string(k) + " clusters, " +
                                 std::to_string(space.num_clusters) + " non-empty");
    }
}

EmbeddingSpace load_embeddings(const std::string& path, std::size_t k, double lambda, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding file '" + path + "'");
    EmbeddingSpace space;
    space.lambda = lambda;
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("embedding file '" + path + "' is empty");
    std::size_t columns = 0;
    {
        std::stringstream header(line);
        std::string cell;
        while (std::getline(header, cell, ',')) ++columns;
    }
    if (columns < 2) throw std::invalid_argument("embedding header needs item_id and at least one coordinate");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != columns) {
            throw std::invalid_argument("ragged row at line " + std::to_string(line_no) + " of '" + path + "'");
        }
        std::vector<double> point;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cells[c], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != cells[c].find_last_not_of(" \t") + 1) {
                throw std::invalid_argument("non-numeric cell '" + cells[c] + "' at line " + std::to_string(line_no));
            }
            point.push_back(v);
        }
        space.item_ids.push_back(cells[0]);
        space.points.push_back(std::move(point));
    }
    if (space.points.empty()) throw std::invalid_argument("embedding file '" + path + "' has no items");
    assign_clusters(space, k, seed);
    return space;
}

EmbeddingSpace synthetic_embedding(std::size_t items, std::size_t clusters, std::size_t dim, double lambda,
                                   std::uint64_t seed) {
    if (items == 0 || clusters == 0 || dim == 0) throw std::invalid_argument("embedding sizes must be positive");
    std::mt19937_64 rng(seed);
    // Unit expected squared norm keeps the lambda scale independent of dim.
    std::normal_distribution<double> coord(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    EmbeddingSpace space;
    space.lambda = lambda;
    for (std::size_t i = 0; i < items; ++i) {
        std::vector<double> p(dim);
        for (double& v : p) v = coord(rng);
        space.item_ids.push_back("item-" + std::to_string(i));
        space.points.push_back(std::move(p));
    }
    assign_clusters(space, clusters, seed);
    return space;
}

Scenario gen_embedding(const EmbeddingSpace& space, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                       const std::vector<double>& prior) {
    const std::size_t n = space.points.size();
    if (space.clusters.size() != n) throw std::invalid_argument("embedding points are not clustered");
    if (!(space.lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    const auto p = resolve_prior(prior, n);
    RawInstance raw;
    for (std::size_t i = 0; i < n; ++i) {
        raw.root_causes.push_back({space.item_ids[i], p[i], "cluster-" + std::to_string(space.clusters[i])});
    }
    Scenario sc{Instance{}, {}};
    for (const auto& [a, b] : pairs) {
        if (a >= n || b >= n) throw std::invalid_argument("pair references an unknown item");
        if (a == b) throw std::invalid_argument("degenerate pair");
        RawInstance::RawTest test{space.item_ids[a] + "|" + space.item_ids[b], {}};
        for (std::size_t theta = 0; theta < n; ++theta) {
            const double da = distance(space.points[a], space.points[theta]);
            const double db = distance(space.points[b], space.points[theta]);
            const double p1 = logistic(space.lambda * (db - da));
            test.likelihood.push_back({1.0 - p1, p1});
        }
        raw.tests.push_back(std::move(test));
        sc.renderings.push_back({{"kind", "item_pair"}, {"left", space.item_ids[a]}, {"right", space.item_ids[b]}});
    }
    sc.instance = validate_instance(raw);
    return sc;
}

std::vector<std::pair<std::size_t, std::size_t>> random_pairs(std::size_t items, std::size_t count,
                                                              std::uint64_t seed) {
    if (items < 2) throw std::invalid_argument("need at least two items for pairs");
    const std::size_t max_pairs = items * (items - 1) / 2;
    count = std::min(count, max_pairs);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, items - 1);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    while (out.size() < count) {
        std::size_t a = pick(rng);
        std::size_t b = pick(rng);
        if (a == b) continue;
        if (!seen.insert({std::min(a, b), std::max(a, b)}).second) continue;
        out.emplace_back(a, b);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Constructed instances

Scenario gen_three_cause() {
    RawInstance raw;
    raw.root_causes = {{"theta1", 0.2, "y1"}, {"theta2", 0.4, "y1"}, {"theta3", 0.4, "y2"}};
    raw.tests.push_back({"X1", {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}});
    raw.tests.push_back({"X2", {{0.0, 1.0}, {1.0, 0.0}, {1.0, 0.0}}});
    return with_plain_renderings(validate_instance(raw));
}

Scenario gen_gbs_adversarial(std::size_t n) {
    if (n < 3) throw std::invalid_argument("gbs-adversarial needs n >= 3");
    RawInstance raw;
    for (std::size_t i = 1; i <= n; ++i) {
        raw.root_causes.push_back({"theta" + std::to_string(i), 1.0 / static_cast<double>(n), i < n ? "y1" : "y2"});
    }
    for (std::size_t e = 1; e <= n; ++e) {
        RawInstance::RawTest test{"test" + std::to_string(e), {}};
        for (std::size_t i = 1; i <= n; ++i) test.likelihood.push_back(i == e ? std::vector<double>{0.0, 1.0}
                                                                            : std::vector<double>{1.0, 0.0});
        raw.tests.push_back(std::move(test));
    }
    return with_plain_renderings(validate_instance(raw));
}

Scenario gen_treasure_hunt(std::size_t s) {
    if (s < 1) throw std::invalid_argument("treasure-hunt needs s >= 1");
    if (s > 16) throw std::invalid_argument("treasure-hunt s too large");
    const std::size_t t = std::size_t{1} << s;
    const double p = 1.0 / static_cast<double>(2 * t);
    RawInstance raw;
    // Root-cause (i, o) sits at index 2 i + o.
    for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t o = 0; o < 2; ++o) {
            raw.root_causes.push_back({"theta_" + std::to_string(i) + "_" + std::to_string(o), p, "y" + std::to_string(i)});
        }
    }
    auto indicator_row = [](bool one) { return one ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0}; };
    auto add_test = [&](std::string id, auto outcome_of) {
        RawInstance::RawTest test{std::move(id), {}};
        for (std::size_t i = 0; i < t; ++i) {
            for (std::size_t o = 0; o < 2; ++o) test.likelihood.push_back(indicator_row(outcome_of(i, o)));
        }
        raw.tests.push_back(std::move(test));
    };
    add_test("side", [](std::size_t, std::size_t o) { return o == 1; });
    for (std::size_t k = 1; k <= s; ++k) {
        add_test("bit" + std::to_string(k), [k](std::size_t i, std::size_t o) { return ((i >> (k - 1)) & 1U) == o; });
    }
    for (std::size_t k = 0; k < t; ++k) {
        add_test("seq" + std::to_string(k), [k](std::size_t i, std::size_t) { return i == k; });
    }
    return with_plain_renderings(validate_instance(raw));
}

Scenario gen_random(std::size_t n, std::size_t t, std::size_t m, double noise, std::uint64_t seed) {
    if (n == 0 || t == 0 || t > n) throw std::invalid_argument("random instance needs 1 <= t <= n");
    if (!(noise >= 0.0 && noise < 0.5)) throw std::invalid_argument("noise must lie in [0, 0.5)");
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    std::vector<double> prior(n);
    double sum = 0.0;
    for (double& v : prior) {
        do {
            v = gamma(rng);
        } while (v <= 0.0);
        sum += v;
    }
    for (double& v : prior) v /= sum;

    std::vector<std::size_t> targets(n);
    std::uniform_int_distribution<std::size_t> any_target(0, t - 1);
    for (std::size_t i = 0; i < n; ++i) targets[i] = i < t ? i : any_target(rng);
    std::shuffle(targets.begin(), targets.end(), rng);

    RawInstance raw;
    for (std::size_t i = 0; i < n; ++i) {
        raw.root_causes.push_back({"theta" + std::to_string(i), prior[i], "y" + std::to_string(targets[i])});
    }
    std::bernoulli_distribution coin(0.5);
    for (std::size_t e = 0; e < m; ++e) {
        RawInstance::RawTest test{"test" + std::to_string(e), {}};
        for (std::size_t i = 0; i < n; ++i) {
            test.likelihood.push_back(coin(rng) ? std::vector<double>{noise, 1.0 - noise}
                                                : std::vector<double>{1.0 - noise, noise});
        }
        raw.tests.push_back(std::move(test));
    }
    return with_plain_renderings(validate_instance(raw));
}

// ---------------------------------------------------------------------------
// Scenario config

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {"three-cause", "gbs-adversarial", "treasure-hunt", "random",
                                                   "risky-choice", "embedding",      "instance"};
    return names;
}

const std::vector<std::string>& scenario_params(const std::string& scenario) {
    static const std::map<std::string, std::vector<std::string>> params = {
        {"three-cause", {}},
        {"gbs-adversarial", {"n"}},
        {"treasure-hunt", {"s"}},
        {"random", {"n", "t", "m", "noise"}},
        {"risky-choice", {"theories_per_family", "tests", "lambda"}},
        {"embedding", {"items", "clusters", "dim", "pairs", "lambda", "embeddings"}},
        {"instance", {"path"}},
    };
    auto it = params.find(scenario);
    if (it == params.end()) throw std::invalid_argument("unknown scenario '" + scenario + "'");
    return it->second;
}

Scenario build_scenario(const nlohmann::json& config) {
    if (!config.is_object()) throw std::invalid_argument("scenario config must be a JSON object");
    if (!config.contains("scenario") || !config["scenario"].is_string()) {
        throw std::invalid_argument("scenario config needs a string 'scenario'");
    }
    const std::string name = config["scenario"].get<std::string>();
    const auto& allowed = scenario_params(name);
    const nlohmann::json params = config.value("params", nlohmann::json::object());
    if (!params.is_object()) throw std::invalid_argument("'params' must be an object");
    for (const auto& [key, value] : params.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw std::invalid_argument("scenario '" + name + "' does not take parameter '" + key + "'");
        }
    }
    std::uint64_t seed = 0;
    if (config.contains("seed")) {
        if (!config["seed"].is_number_unsigned() && !config["seed"].is_number_integer()) {
            throw std::invalid_argument("'seed' must be a nonnegative integer");
        }
        seed = config["seed"].get<std::uint64_t>();
    }

    auto size_param = [&](const char* key, std::size_t fallback) -> std::size_t {
        if (!params.contains(key)) return fallback;
        const auto& v = params[key];
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            throw std::invalid_argument(std::string("parameter '") + key + "' must be a nonnegative integer");
        }
        return v.get<std::size_t>();
    };
    auto real_param = [&](const char* key, double fallback) -> double {
        if (!params.contains(key)) return fallback;
        if (!params[key].is_number()) throw std::invalid_argument(std::string("parameter '") + key + "' must be a number");
        return params[key].get<double>();
    };

    if (name == "three-cause") return gen_three_cause();
    if (name == "gbs-adversarial") return gen_gbs_adversarial(size_param("n", 8));
    if (name == "treasure-hunt") return gen_treasure_hunt(size_param("s", 3));
    if (name == "random") {
        return gen_random(size_param("n", 10), size_param("t", 3), size_param("m", 8), real_param("noise", 0.1), seed);
    }
    if (name == "risky-choice") {
        const auto theories = default_theories(size_param("theories_per_family", 5));
        const auto lotteries = random_lottery_pairs(size_param("tests", 200), seed);
        return gen_risky_choice(theories, lotteries, real_param("lambda", 0.1));
    }
    if (name == "embedding") {
        const double lambda = real_param("lambda", 10.0);
        const std::size_t clusters = size_param("clusters", 20);
        EmbeddingSpace space;
        if (params.contains("embeddings")) {
            if (!params["embeddings"].is_string()) throw std::invalid_argument("'embeddings' must be a path");
            if (params.contains("items") || params.contains("dim")) {
                throw std::invalid_argument("'items' and 'dim' cannot be combined with 'embeddings'");
            }
            space = load_embeddings(params["embeddings"].get<std::string>(), clusters, lambda, seed);
        } else {
            space = synthetic_embedding(size_param("items", 200), clusters, size_param("dim", 2), lambda, seed);
        }
        const auto pairs = random_pairs(space.points.size(), size_param("pairs", 300), seed + 1);
        return gen_embedding(space, pairs);
    }
    // name == "instance"
    if (!params.contains("path") || !params["path"].is_string()) {
        throw std::invalid_argument("scenario 'instance' needs a string 'path'");
    }
    return with_plain_renderings(load_instance(params["path"].get<std::string>()));
}

}  // namespace eced
