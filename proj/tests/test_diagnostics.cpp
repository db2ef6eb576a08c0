#include <gtest/gtest.h>

#include <random>

#include "eced/diagnostics.hpp"
#include "eced/gains.hpp"
#include "eced/scenarios.hpp"
#include "oracles.hpp"

using namespace eced;

namespace {

Belief belief_of(std::vector<double> p) {
    Belief b;
    b.posterior = std::move(p);
    return b;
}

Instance two_singletons() {
    RawInstance raw;
    raw.root_causes = {{"a", 0.5, "y1"}, {"b", 0.5, "y2"}};
    raw.tests.push_back({"X", {{1.0, 0.0}, {0.0, 1.0}}});
    return validate_instance(raw);
}

}  // namespace

TEST(AuxConfig, Constant) {
    const AuxConfig cfg = AuxConfig::make(2, 0.01);
    EXPECT_NEAR(cfg.c, 8 * std::pow(std::log2(800.0), 2), 1e-9);
    EXPECT_THROW(AuxConfig::make(2, 0.0), std::invalid_argument);
    EXPECT_THROW(AuxConfig::make(2, 1.0), std::invalid_argument);
}

TEST(FAux, TwoRootCausesUniform) {
    const Instance inst = two_singletons();
    const AuxConfig cfg = AuxConfig::make(2);
    // One cross pair of weight 1/4 at log2(1 / (1/4)) = 2 bits; two H_bin(1/2) = 1 terms.
    EXPECT_NEAR(f_aux(inst, belief_of({0.5, 0.5}), cfg), 0.5 + 2 * cfg.c, 1e-9);
    EXPECT_NEAR(f_aux_pair_term(inst, std::vector<double>{0.5, 0.5}), oracle::faux_pairs(inst, {0.5, 0.5}), 1e-15);
}

TEST(FAux, PointMassIsZero) {
    const Instance inst = gen_three_cause().instance;
    const AuxConfig cfg = AuxConfig::make(3);
    EXPECT_EQ(f_aux(inst, belief_of({0.0, 0.0, 1.0}), cfg), 0.0);
    const auto checks = check_lemma1(inst, belief_of({0.0, 0.0, 1.0}), cfg);
    ASSERT_EQ(checks.size(), 2u);
    for (const auto& c : checks) {
        EXPECT_TRUE(c.holds);
        EXPECT_EQ(c.lhs, 0.0);
        EXPECT_EQ(c.rhs, 0.0);
    }
}

TEST(FAux, AggregateMatchesPairEnumeration) {
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t n = 2 + rep % 29;
        const Instance inst = gen_random(n, 1 + rep % std::min<std::size_t>(n, 6), 1, 0.1, rng()).instance;
        const auto p = random_posterior(n, rng);
        EXPECT_NEAR(f_aux_pair_term(inst, p), oracle::faux_pairs(inst, p), 1e-9);
        EXPECT_NEAR(f_aux_pair_term_explicit(inst, p), oracle::faux_pairs(inst, p), 1e-9);
    }
}

TEST(Lemma1, GatedOnWorkedExamplePrior) {
    const Instance inst = gen_three_cause().instance;
    const auto checks = check_lemma1(inst, Belief::from_prior(inst), AuxConfig::make(3));
    ASSERT_EQ(checks.size(), 1u);
    EXPECT_EQ(checks[0].name, "lemma1.lower");
    EXPECT_TRUE(checks[0].holds);
}

TEST(StochasticMap, Examples) {
    const Instance inst = gen_three_cause().instance;
    auto checks = check_stochastic_map(inst, Belief::from_prior(inst));
    ASSERT_EQ(checks.size(), 2u);
    EXPECT_NEAR(checks[0].lhs, 0.4, 1e-15);
    EXPECT_NEAR(checks[0].rhs, 0.48, 1e-15);
    EXPECT_NEAR(checks[1].rhs, 0.8, 1e-15);
    for (const auto& c : checks) EXPECT_TRUE(c.holds);

    RawInstance raw;
    for (int i = 0; i < 4; ++i) raw.root_causes.push_back({"r" + std::to_string(i), 0.25, "y" + std::to_string(i)});
    raw.tests.push_back({"X", {{1, 0}, {1, 0}, {0, 1}, {0, 1}}});
    const Instance four = validate_instance(raw);
    checks = check_stochastic_map(four, Belief::from_prior(four));
    EXPECT_NEAR(checks[0].lhs, 0.75, 1e-15);
    EXPECT_NEAR(checks[0].rhs, 0.75, 1e-15);
    EXPECT_NEAR(checks[1].rhs, 1.5, 1e-15);
    for (const auto& c : checks) EXPECT_TRUE(c.holds);
}

TEST(Bounds, RandomBeliefsAcrossSizes) {
    std::mt19937_64 rng(2);
    std::size_t upper_checked = 0;
    for (int rep = 0; rep < 2000; ++rep) {
        const std::size_t n = 3 + rep % 18;
        const Instance inst = gen_random(n, 2 + rep % 2, 1, 0.1, rng()).instance;
        const Belief b = belief_of(random_posterior(n, rng));
        for (const auto& c : check_lemma1(inst, b, AuxConfig::make(n))) {
            EXPECT_TRUE(c.holds) << c.name << " " << c.lhs << " " << c.rhs;
            if (c.name == "lemma1.upper") ++upper_checked;
        }
        for (const auto& c : check_stochastic_map(inst, b)) EXPECT_TRUE(c.holds) << c.name;
    }
    EXPECT_GT(upper_checked, 100u);
}

TEST(SymmetricNoise, RecognizesFlipForm) {
    const Instance inst = gen_random(6, 2, 3, 0.25, 4).instance;
    const auto form = symmetric_noise_form(inst.test(0));
    EXPECT_NEAR(form.epsilon, 0.25, 1e-15);
    for (std::size_t theta = 0; theta < 6; ++theta) {
        EXPECT_NEAR(inst.test(0).prob(theta, form.skeleton[theta]), 0.75, 1e-15);
    }

    RawInstance raw;
    raw.root_causes = {{"a", 0.5, "y1"}, {"b", 0.5, "y2"}};
    raw.tests.push_back({"X", {{0.9, 0.1}, {0.2, 0.8}}});
    try {
        symmetric_noise_form(validate_instance(raw).test(0));
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_STREQ(e.what(), "not symmetric-noise test");
    }
}

TEST(SymmetricNoise, RatioChecks) {
    const Instance clean = gen_gbs_adversarial(4).instance;
    for (const auto& c : eced_ec2_ratio_check(clean, Belief::from_prior(clean))) {
        EXPECT_TRUE(c.holds);
        EXPECT_NEAR(c.lhs, ec2_gain(clean, Belief::from_prior(clean), clean.find_test(c.name.substr(6))), 1e-15);
    }

    RawInstance raw = to_raw(clean);
    raw.tests[3].likelihood = {{0.75, 0.25}, {0.75, 0.25}, {0.75, 0.25}, {0.25, 0.75}};
    const Instance noisy = validate_instance(raw);
    const auto checks = eced_ec2_ratio_check(noisy, Belief::from_prior(noisy));
    EXPECT_NEAR(checks[3].lhs, 1.0 / 12, 1e-12);
    EXPECT_NEAR(checks[3].rhs, (4.0 / 9) * (3.0 / 16), 1e-12);
    EXPECT_NEAR(skeleton_ec2_gain(noisy, Belief::from_prior(noisy).posterior, symmetric_noise_form(noisy.test(3))),
                3.0 / 16, 1e-15);

    for (auto& row : raw.tests[3].likelihood) row = {0.5, 0.5};
    const Instance pure = validate_instance(raw);
    EXPECT_NEAR(eced_gain(pure, Belief::from_prior(pure), 3), 0.0, 1e-15);
    EXPECT_TRUE(eced_ec2_ratio_check(pure, Belief::from_prior(pure))[3].holds);
}

TEST(NoiseSeverity, WorstTest) {
    EXPECT_EQ(noise_severity(gen_gbs_adversarial(4).instance), 1.0);
    EXPECT_NEAR(noise_severity(gen_random(5, 2, 3, 0.25, 1).instance), 0.25, 1e-15);
}

TEST(Fingerprint, DependsOnObservations) {
    const Instance inst = gen_three_cause().instance;
    const Belief prior = Belief::from_prior(inst);
    const Belief a = posterior_update(inst, prior, 0, 1);
    const Belief b = posterior_update(inst, prior, 0, 0);
    EXPECT_NE(belief_fingerprint(a), belief_fingerprint(b));
    EXPECT_EQ(belief_fingerprint(a), belief_fingerprint(posterior_update(inst, prior, 0, 1)));
}

TEST(RunDiagnostics, ReportsAndRejects) {
    const Instance inst = gen_random(10, 3, 4, 0.1, 3).instance;
    const auto report = run_diagnostics(inst, {"lemma1", "stocmap", "ratio", "faux"}, 300, 3);
    EXPECT_TRUE(report.ok());
    EXPECT_EQ(report.evaluated.at("stocmap.lower"), 300u);
    EXPECT_EQ(report.evaluated.at("ratio"), 1200u);
    EXPECT_EQ(report.evaluated.at("faux.pairs"), 300u);
    EXPECT_THROW(run_diagnostics(inst, {"nope"}, 1, 0), std::invalid_argument);
    const Instance risky = gen_risky_choice(default_theories(2), random_lottery_pairs(3, 1), 0.1).instance;
    EXPECT_THROW(run_diagnostics(risky, {"ratio"}, 1, 0), std::invalid_argument);
    EXPECT_EQ(to_json(report)["ok"], true);
}
