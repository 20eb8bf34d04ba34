#include <cmath>

#include <boost/math/distributions/poisson.hpp>
#include <gtest/gtest.h>

#include "pelab/bsde/generator.hpp"
#include "pelab/bsde/lsmc.hpp"
#include "pelab/bsde/ode.hpp"

using namespace pelab;

namespace {

ModelSpec model(double phi, double lambda, double alpha = 1.0) {
    ModelSpec m;
    m.market = MarketSpec::scalar(1.0, phi, 1.0, alpha);
    m.intensity = IntensitySpec::constant(lambda);
    return m;
}

LsmcSettings settings(std::size_t n_paths, std::uint64_t seed = 7) {
    LsmcSettings s;
    s.n_paths = n_paths;
    s.seed = seed;
    return s;
}

double bond_closed_form(double alpha, double lambda, double t) {
    return std::log1p(std::expm1(alpha) * std::exp(-lambda * t)) / alpha;
}

}  // namespace

TEST(Generator, Values) {
    const auto merton = GeneratorSpec::from_model(model(0.2, 0.3));
    const double zero[1] = {0.0};
    EXPECT_NEAR(generator_f(merton, 0.0, zero, {}, 0.0, true), -0.02, 1e-16);

    const auto credit = GeneratorSpec::from_model(model(0.0, 0.3));
    EXPECT_NEAR(generator_f(credit, 0.0, zero, {}, std::log(2.0), true), 0.09205584583201641, 1e-15);
    EXPECT_EQ(generator_f(credit, 0.0, zero, {}, std::log(2.0), false), 0.0);

    const auto risk_averse = GeneratorSpec::from_model(model(0.2, 0.0, 2.0));
    const double z[1] = {0.1};
    EXPECT_NEAR(generator_f(risk_averse, 0.0, z, {}, 0.0, true), -0.03, 1e-16);
}

TEST(Generator, JumpTerms) {
    auto m = model(0.0, 0.0);
    m.levy = FiniteLevyMeasure({{Eigen::VectorXd::Constant(1, 0.1), 2.0, IntensitySpec::constant(0.25)}});
    const auto g = GeneratorSpec::from_model(m);
    const double zero[1] = {0.0}, w[1] = {0.5};
    EXPECT_NEAR(generator_f(g, 0.3, zero, w, 0.0, true), 0.5 * (std::exp(0.5) - 1.5), 1e-15);
}

TEST(Generator, StoppedVanishesAfterDefault) {
    const auto g = GeneratorSpec::from_model(model(0.2, 0.3), Horizon::stopped);
    const double z[1] = {0.4};
    EXPECT_EQ(generator_f(g, 0.0, z, {}, 0.0, false), 0.0);
    EXPECT_NE(generator_f(g, 0.0, z, {}, 0.0, true), 0.0);
}

TEST(Generator, MarketProblemDropsDefaultTerm) {
    const auto g = GeneratorSpec::from_model(model(0.0, 0.3)).market_problem();
    const double zero[1] = {0.0};
    EXPECT_EQ(generator_f(g, 0.0, zero, {}, 1.0, true), 0.0);
}

TEST(Generator, OverflowGuard) {
    const auto g = GeneratorSpec::from_model(model(0.0, 0.3));
    const double zero[1] = {0.0};
    EXPECT_THROW((void)generator_f(g, 0.0, zero, {}, 800.0, true), NumericalError);
}

TEST(Generator, AprioriBound) {
    EXPECT_NEAR(apriori_bound(GeneratorSpec::from_model(model(0.2, 0.0)), ClaimSpec::constant(1.0), 1.0), 1.02, 1e-15);
    EXPECT_EQ(apriori_bound(GeneratorSpec::from_model(model(0.0, 0.0)), ClaimSpec::zero(), 1.0), 0.0);
    EXPECT_NEAR(apriori_bound(GeneratorSpec::from_model(model(0.2, 0.0, 2.0)), ClaimSpec::constant(1.0), 1.0), 1.01,
                1e-15);
}

TEST(Ode, DefaultableBond) {
    const auto sol = solve_ode_deterministic(GeneratorSpec::from_model(model(0.0, 0.3)),
                                             ClaimSpec::defaultable_bond(1.0, 0.0), build_grid(1.0, 50));
    EXPECT_NEAR(sol.y0(), bond_closed_form(1.0, 0.3, 1.0), 1e-9);
    EXPECT_NEAR(sol.y0(), 0.8210717221007705, 1e-9);
    for (std::size_t k = 0; k <= 50; ++k)
        EXPECT_NEAR(sol.y_pre[k], bond_closed_form(1.0, 0.3, 1.0 - sol.grid.time(k)), 1e-9);
    EXPECT_LE(sol.error_estimate, 1e-9);
}

TEST(Ode, MertonLinear) {
    const auto g = build_grid(1.0, 20);
    const auto sol = solve_ode_deterministic(GeneratorSpec::from_model(model(0.2, 0.3)), ClaimSpec::zero(), g);
    for (std::size_t k = 0; k <= 20; ++k) {
        EXPECT_NEAR(sol.y_pre[k], -(1.0 - g.time(k)) * 0.02, 1e-12);
        EXPECT_NEAR(sol.y_post[k], -(1.0 - g.time(k)) * 0.02, 1e-12);
    }
}

TEST(Ode, ZeroIntensityIsMerton) {
    const auto g = build_grid(2.0, 10);
    const auto sol = solve_ode_deterministic(GeneratorSpec::from_model(model(0.3, 0.0, 2.0)),
                                             ClaimSpec::defaultable_bond(0.7, 0.1), g);
    EXPECT_NEAR(sol.y0(), 0.7 - 2.0 * 0.09 / 4.0, 1e-12);
}

TEST(Ode, RandomHorizonClaim) {
    const auto claim = ClaimSpec::defaultable_bond(0.0, 1.0, 0.0, Measurability::stopped);
    const auto sol = solve_ode_deterministic(GeneratorSpec::from_model(model(0.0, 0.3), Horizon::stopped), claim,
                                             build_grid(1.0, 50));
    EXPECT_NEAR(sol.y0(), std::log(std::exp(1.0) + (1.0 - std::exp(1.0)) * std::exp(-0.3)), 1e-9);
    EXPECT_NEAR(sol.y0(), 0.36834966753731774, 1e-9);
}

TEST(Ode, RejectsPriceClaims) {
    EXPECT_THROW((void)solve_ode_deterministic(GeneratorSpec::from_model(model(0.0, 0.3)),
                                               ClaimSpec::capped_call(1.0, 0.5), build_grid(1.0, 4)),
                 ValidationError);
}

TEST(Ode, CashShift) {
    const auto spec = GeneratorSpec::from_model(model(0.1, 0.4));
    const auto g = build_grid(1.0, 10);
    const auto base = ClaimSpec::defaultable_bond(1.0, 0.2, 0.3);
    const double a = solve_ode_deterministic(spec, base, g).y0();
    const double b = solve_ode_deterministic(spec, base.shifted(0.75), g).y0();
    EXPECT_NEAR(b - a, 0.75, 1e-9);
}

TEST(Lsmc, Merton) {
    const auto sol = solve_lsmc(model(0.2, 0.3), ClaimSpec::zero(), build_grid(1.0, 50), settings(20000));
    EXPECT_NEAR(sol.y0, -0.02, 0.003);
    EXPECT_LE(sol.max_post_default_variation, 0.0);
    for (const auto& s : sol.steps) EXPECT_NEAR(s.z_mean[0], 0.0, 1e-12);
}

TEST(Lsmc, NullData) {
    const auto sol = solve_lsmc(model(0.0, 0.3), ClaimSpec::zero(), build_grid(1.0, 10), settings(2000));
    for (double y : sol.y_paths) EXPECT_EQ(y, 0.0);
    for (const auto& s : sol.steps) {
        EXPECT_EQ(s.z_mean[0], 0.0);
        EXPECT_EQ(s.w_def_mean, 0.0);
    }
}

TEST(Lsmc, BondMatchesOde) {
    const auto m = model(0.0, 0.3);
    const auto g = build_grid(1.0, 50);
    const auto claim = ClaimSpec::defaultable_bond(1.0, 0.0);
    const auto sol = solve_lsmc(m, claim, g, settings(20000));
    const double ode = solve_ode_deterministic(GeneratorSpec::from_model(m), claim, g).y0();
    EXPECT_NEAR(sol.y0, 0.8210717221007705, 0.01);
    EXPECT_LE(std::abs(sol.y0 - ode), 3 * sol.y0_se + 2.0 / 50);
}

TEST(Lsmc, CrossValidationWithRecoveryAndDrift) {
    const auto m = model(0.25, 0.5, 1.5);
    const auto g = build_grid(1.0, 25);
    const auto claim = ClaimSpec::defaultable_bond(1.0, 0.2, 0.3);
    const auto sol = solve_lsmc(m, claim, g, settings(20000));
    const double ode = solve_ode_deterministic(GeneratorSpec::from_model(m), claim, g).y0();
    EXPECT_LE(std::abs(sol.y0 - ode), 3 * sol.y0_se + 2.0 / 25) << sol.y0 << " vs " << ode;
}

TEST(Lsmc, CashInvariance) {
    const auto m = model(0.2, 0.3);
    const auto g = build_grid(1.0, 20);
    const auto claim = ClaimSpec::capped_call(1.0, 0.5, 1.0, true, 0.1);
    const auto a = solve_lsmc(m, claim, g, settings(10000));
    const auto b = solve_lsmc(m, claim.shifted(0.5), g, settings(10000));
    EXPECT_NEAR(b.y0 - a.y0, 0.5, 3 * a.y0_se + 1e-9);
    for (std::size_t k = 0; k < g.n_steps(); ++k) {
        EXPECT_NEAR(a.steps[k].z_mean[0], b.steps[k].z_mean[0], 1e-9);
        EXPECT_NEAR(a.steps[k].w_def_mean, b.steps[k].w_def_mean, 1e-9);
    }
}

TEST(Lsmc, ClampNeverExceeded) {
    const auto m = model(0.3, 0.8, 2.0);
    const auto sol = solve_lsmc(m, ClaimSpec::capped_call(0.9, 0.6, 1.0, true, -0.2), build_grid(1.0, 20), settings(5000));
    for (double y : sol.y_paths) ASSERT_LE(std::abs(y), sol.bound);
    EXPECT_FALSE(sol.saturated);
}

// Without drift and default the value is E[xi]; the gap is regression plus clamp bias.
TEST(Lsmc, CappedCallWithoutDrift) {
    const auto m = model(0.0, 0.0);
    const auto g = build_grid(1.0, 20);
    const auto claim = ClaimSpec::capped_call(1.0, 0.5);
    const auto sol = solve_lsmc(m, claim, g, settings(20000, 3));
    RunningStats mc;
    for (const auto& b : simulate(m, g, 20000, 3)) mc.add(claim_on_path(b, claim));
    EXPECT_NEAR(sol.y0, mc.mean(), 0.015);
    EXPECT_GT(sol.y0, 0.1);
}

// phi = 0, no default: Y0 is the entropic value (1/alpha) log E exp(alpha xi).
TEST(Lsmc, JumpCountClaim) {
    auto m = model(0.0, 0.0, 2.0);
    m.levy = FiniteLevyMeasure({{Eigen::VectorXd::Constant(1, 0.1), 1.0, IntensitySpec::constant(0.8)}});
    const auto claim = ClaimSpec::jump_count(0.25, 3.0);
    const auto sol = solve_lsmc(m, claim, build_grid(1.0, 40), settings(20000));
    const boost::math::poisson_distribution<> pois(0.8);
    double e = 0.0;
    for (int k = 0; k < 40; ++k) e += boost::math::pdf(pois, k) * std::exp(2.0 * 0.25 * std::min(k, 3));
    const double exact = std::log(e) / 2.0;
    EXPECT_NEAR(sol.y0, exact, 0.01) << sol.y0 << " vs " << exact;
}

TEST(Lsmc, MartingaleResidual) {
    const auto sol = solve_lsmc(model(0.2, 0.5), ClaimSpec::defaultable_bond(1.0, 0.3), build_grid(1.0, 20),
                                settings(20000));
    std::size_t outside = 0;
    for (std::size_t k = 0; k < 20; ++k)
        outside += std::abs(sol.steps[k].martingale.mean) > 3 * sol.steps[k].martingale.se + 1e-12;
    EXPECT_EQ(outside, sol.martingale_violations);
    EXPECT_LE(outside, 1u);
}

TEST(Lsmc, IndependentOfWorkers) {
    const auto m = model(0.2, 0.5);
    const auto g = build_grid(1.0, 10);
    auto s = settings(5000);
    const auto claim = ClaimSpec::capped_call(1.0, 0.5, 1.0, true, 0.1);
    const auto a = solve_lsmc(m, claim, g, s);
    s.workers = 3;
    const auto b = solve_lsmc(m, claim, g, s);
    EXPECT_EQ(a.y_paths, b.y_paths);
}

TEST(RandomHorizon, DefaultIndicator) {
    const auto m = model(0.0, 0.3);
    const auto g = build_grid(1.0, 50);
    const auto claim = ClaimSpec::defaultable_bond(0.0, 1.0, 0.0, Measurability::stopped);
    const auto sol = solve_random_horizon(m, claim, g, settings(20000));
    EXPECT_NEAR(sol.y0, 0.36834966753731774, 0.01);
    EXPECT_EQ(sol.max_post_default_variation, 0.0);
}

TEST(RandomHorizon, ZeroAndConstantClaims) {
    const auto m = model(0.0, 0.5);
    const auto g = build_grid(1.0, 10);
    const auto zero = solve_random_horizon(m, ClaimSpec::zero().with_measurability(Measurability::stopped), g,
                                           settings(2000));
    for (double y : zero.y_paths) EXPECT_EQ(y, 0.0);
    const auto c = solve_random_horizon(m, ClaimSpec::constant(0.4, Measurability::stopped), g, settings(2000));
    for (double y : c.y_paths) EXPECT_NEAR(y, 0.4, 1e-12);
}

TEST(RandomHorizon, PriceClaimConstantAfterDefault) {
    const auto m = model(0.2, 0.8);
    const auto claim = ClaimSpec::capped_call(0.9, 0.5).with_measurability(Measurability::stopped);
    const auto sol = solve_random_horizon(m, claim, build_grid(1.0, 20), settings(5000));
    EXPECT_EQ(sol.max_post_default_variation, 0.0);
}

TEST(RandomHorizon, MeasurabilityChecked) {
    EXPECT_THROW((void)solve_random_horizon(model(0.0, 0.3), ClaimSpec::defaultable_bond(1.0, 0.0),
                                            build_grid(1.0, 4), settings(100)),
                 ValidationError);
}

TEST(RandomHorizon, AgreesWithOde) {
    const auto m = model(0.3, 0.6, 1.5);
    const auto g = build_grid(1.0, 25);
    const auto claim = ClaimSpec::defaultable_bond(0.5, 1.0, -0.4, Measurability::stopped);
    const auto sol = solve_random_horizon(m, claim, g, settings(20000));
    const double ode = solve_ode_deterministic(GeneratorSpec::from_model(m, Horizon::stopped), claim, g).y0();
    EXPECT_LE(std::abs(sol.y0 - ode), 3 * sol.y0_se + 2.0 / 25) << sol.y0 << " vs " << ode;
}
