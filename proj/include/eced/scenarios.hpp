#pragma once

// Instance builders: pairwise-choice experiment families, the two adversarial
// constructions, random property-test instances and file ingestion.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eced/model.hpp"
#include "json.hpp"

namespace eced {

/// An instance plus a human-readable rendering for each test (used by the
/// elicitation service).
struct Scenario {
    Instance instance;
    std::vector<nlohmann::json> renderings;
};

// ---------------------------------------------------------------------------
// Risky choice

struct Lottery {
    std::vector<std::pair<double, double>> outcomes;  // (payoff, probability)

    /// Throws std::invalid_argument unless probabilities are >= 0 and sum to 1 within 1e-9.
    void validate() const;
    double mean() const;
    double stddev() const;
};

enum class TheoryFamily { ExpectedValue, CRRA, WeightedMoments };

std::string to_string(TheoryFamily family);

/// A parametrized valuation rule. CRRA reads params[0] as the risk aversion rho
/// in [0, 1); WeightedMoments reads params[0] as the std weight in [-2, 2].
struct TheoryParams {
    TheoryFamily family = TheoryFamily::ExpectedValue;
    std::vector<double> params;

    void validate() const;
    std::string id() const;
};

/// Subjective value of a lottery under a theory:
///   ExpectedValue    sum p z
///   CRRA             sum p sign(z) |z|^(1 - rho) / (1 - rho)
///   WeightedMoments  mean + w_sigma * std
double lottery_value(const TheoryParams& theory, const Lottery& lottery);

/// Tests are lottery pairs; outcome 1 means the first lottery is chosen, with
/// Pr = 1 / (1 + exp(-lambda (v1 - v2))). Targets are theory families.
Scenario gen_risky_choice(const std::vector<TheoryParams>& theories,
                          const std::vector<std::pair<Lottery, Lottery>>& lotteries, double lambda,
                          const std::vector<double>& prior = {});

/// Default theory grid: one ExpectedValue, CRRA over rho, WeightedMoments over w_sigma.
std::vector<TheoryParams> default_theories(std::size_t per_family);

/// Random lottery pairs with 2-3 outcomes and payoffs in [-50, 100].
std::vector<std::pair<Lottery, Lottery>> random_lottery_pairs(std::size_t count, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Pairwise item comparisons in an embedding space

struct EmbeddingSpace {
    std::vector<std::string> item_ids;
    std::vector<std::vector<double>> points;
    std::vector<std::size_t> clusters;  // point -> cluster, dense in [0, num_clusters)
    std::size_t num_clusters = 0;
    double lambda = 1.0;
    std::vector<std::string> warnings;
};

/// Lloyd's k-means with farthest-point seeding; the first center is drawn with
/// the seeded RNG. Empty clusters are dropped and the rest relabeled densely,
/// recording a warning.
void assign_clusters(EmbeddingSpace& space, std::size_t k, std::uint64_t seed = 0);

/// Reads `item_id,v1,...,vd` (header required) and clusters into k groups.
EmbeddingSpace load_embeddings(const std::string& path, std::size_t k, double lambda = 1.0, std::uint64_t seed = 0);

/// Isotropic Gaussian cloud with coordinates N(0, 1/dim), partitioned by assign_clusters.
EmbeddingSpace synthetic_embedding(std::size_t items, std::size_t clusters, std::size_t dim, double lambda,
                                   std::uint64_t seed);

/// Root-causes are candidate favorite items, targets their clusters. Test (a, b)
/// has outcome 1 ("a preferred") with Pr = 1 / (1 + exp(-lambda (d(b, theta) - d(a, theta)))).
Scenario gen_embedding(const EmbeddingSpace& space, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                       const std::vector<double>& prior = {});

/// count distinct random unordered item pairs.
std::vector<std::pair<std::size_t, std::size_t>> random_pairs(std::size_t items, std::size_t count,
                                                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// Constructed instances

/// Three root-causes (prior 0.2/0.4/0.4, targets y1,y1,y2), a purely noisy
/// test and a noise-free test that singles out the first root-cause.
Scenario gen_three_cause();

/// Uniform prior over n root-causes, the last alone in its target, and n
/// indicator tests X_e = 1{theta = e}.
Scenario gen_gbs_adversarial(std::size_t n);

/// 2^s targets with two root-causes each; one test reveals the root-cause's
/// side bit o, s tests compare o with one bit of the target index, and 2^s
/// tests check the target index one value at a time.
Scenario gen_treasure_hunt(std::size_t s);

/// Dirichlet(1) prior, random surjective targets, m random deterministic binary
/// tests each flipped with probability noise.
Scenario gen_random(std::size_t n, std::size_t t, std::size_t m, double noise, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Scenario config: {"scenario": name, "params": {...}, "seed": N}

/// Names accepted in scenario configs.
const std::vector<std::string>& scenario_names();

/// Parameter names each scenario reads.
const std::vector<std::string>& scenario_params(const std::string& scenario);

/// Builds a scenario from a config. Unknown scenarios and parameters are
/// rejected with std::invalid_argument.
Scenario build_scenario(const nlohmann::json& config);

}  // namespace eced
