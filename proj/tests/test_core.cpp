#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "pelab/core/grid.hpp"
#include "pelab/core/intensity.hpp"
#include "pelab/core/model.hpp"
#include "pelab/core/parallel.hpp"
#include "pelab/core/random.hpp"
#include "pelab/core/stats.hpp"
#include "pelab/core/validate.hpp"

using namespace pelab;

namespace {

ModelSpec scalar_model(double sigma, double phi, double lambda) {
    ModelSpec m;
    m.market = MarketSpec::scalar(sigma, phi, 1.0, 1.0);
    m.intensity = IntensitySpec::constant(lambda);
    return m;
}

LevyAtom atom(double x, double w, double zeta) {
    return {Eigen::VectorXd::Constant(1, x), w, IntensitySpec::constant(zeta)};
}

}  // namespace

TEST(Grid, UniformNodes) {
    const auto g = build_grid(1.0, 4);
    const std::vector<double> expected{0.0, 0.25, 0.5, 0.75, 1.0};
    EXPECT_EQ(g.nodes(), expected);
    EXPECT_EQ(build_grid(1.0, 1).nodes(), (std::vector<double>{0.0, 1.0}));
    EXPECT_DOUBLE_EQ(build_grid(2.0, 200).dt(), 0.01);
    EXPECT_EQ(build_grid(2.0, 200).time(200), 2.0);
}

TEST(Grid, RejectsBadInput) {
    EXPECT_THROW(build_grid(0.0, 4), ValidationError);
    EXPECT_THROW(build_grid(-1.0, 4), ValidationError);
    EXPECT_THROW(build_grid(1.0, 0), ValidationError);
}

TEST(Grid, FirstNodeAtOrAfter) {
    const auto g = build_grid(1.0, 4);
    EXPECT_EQ(g.first_node_at_or_after(0.25), 1u);
    EXPECT_EQ(g.first_node_at_or_after(0.26), 2u);
    EXPECT_EQ(g.first_node_at_or_after(1.0), 4u);
    EXPECT_EQ(g.first_node_at_or_after(1.5), g.n_nodes());
}

TEST(Philox, KnownAnswers) {
    using A4 = std::array<std::uint32_t, 4>;
    using A2 = std::array<std::uint32_t, 2>;
    EXPECT_EQ(detail::philox4x32_10(A4{0, 0, 0, 0}, A2{0, 0}), (A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(detail::philox4x32_10(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}),
              (A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RandomStream, Deterministic) {
    auto a = derive_stream(42, 0);
    auto b = derive_stream(42, 0);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.uniform(), b.uniform());
}

TEST(RandomStream, DistinctPathsUncorrelated) {
    auto a = derive_stream(42, 0);
    auto b = derive_stream(42, 1);
    const int n = 100000;
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double x = a.uniform(), y = b.uniform();
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    const double cov = sxy / n - sx / n * sy / n;
    const double corr = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
    EXPECT_LE(std::abs(corr), 3.0 / std::sqrt(double(n)));
}

TEST(RandomStream, UniformRange) {
    auto s = derive_stream(42, 7);
    for (int i = 0; i < 100000; ++i) {
        const double u = s.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(RandomStream, ChannelsDiffer) {
    auto a = derive_stream(42, 3, StreamChannel::brownian);
    auto b = derive_stream(42, 3, StreamChannel::default_time);
    EXPECT_NE(a.next_u64(), b.next_u64());
}

TEST(RandomStream, NormalMoments) {
    auto s = derive_stream(9, 0);
    RunningStats m, v;
    for (int i = 0; i < 200000; ++i) {
        const double z = s.normal();
        m.add(z);
        v.add(z * z);
    }
    EXPECT_TRUE(m.estimate().within(0.0, 4.0));
    EXPECT_TRUE(v.estimate().within(1.0, 4.0));
}

TEST(Intensity, ClosedForms) {
    const auto c = IntensitySpec::constant(0.3);
    EXPECT_DOUBLE_EQ(c.cumulative(1.0), 0.3);
    EXPECT_DOUBLE_EQ(c.inverse_cumulative(0.15), 0.5);
    const auto a = IntensitySpec::affine(0.2, 0.1);
    EXPECT_NEAR(a.cumulative(2.0), 0.6, 1e-15);
    EXPECT_NEAR(a.cumulative(a.inverse_cumulative(0.6)), 0.6, 1e-14);
    EXPECT_TRUE(std::isinf(IntensitySpec::constant(0.0).inverse_cumulative(0.1)));
}

TEST(Intensity, NegativeSlopeIsCutAtZero) {
    const auto a = IntensitySpec::affine(0.2, -0.1);
    EXPECT_DOUBLE_EQ(a.rate(3.0), 0.0);
    EXPECT_NEAR(a.cumulative(5.0), 0.2, 1e-15);
    EXPECT_TRUE(std::isinf(a.inverse_cumulative(0.3)));
}

TEST(Intensity, GeneralCallableMatchesAffine) {
    const auto g = IntensitySpec::general([](double t) { return 0.2 + 0.1 * t; }, 0.5);
    EXPECT_FALSE(g.closed_form());
    EXPECT_NEAR(g.cumulative(2.0), 0.6, 1e-10);
    EXPECT_NEAR(g.inverse_cumulative(0.6), 2.0, 1e-9);
}

TEST(Validate, ValidModelBudget) {
    const auto r = validate_model(scalar_model(1.0, 0.2, 0.3), build_grid(1.0, 100));
    EXPECT_TRUE(r.valid());
    EXPECT_NEAR(r.event_budget, 0.003, 1e-15);
}

TEST(Validate, SingularVolatility) {
    const auto r = validate_model(scalar_model(0.0, 0.2, 0.3), build_grid(1.0, 10));
    ASSERT_FALSE(r.valid());
    EXPECT_NE(r.errors.front().find("singular volatility"), std::string::npos);
}

TEST(Validate, OracleBudget) {
    auto m = scalar_model(1.0, 0.0, 0.3);
    m.levy = FiniteLevyMeasure({atom(0.1, 1.0, 0.5)});
    const auto r = validate_model(m, build_grid(1.0, 1));
    EXPECT_NEAR(r.event_budget, 0.8, 1e-15);
    EXPECT_TRUE(r.oracle_usable());
    EXPECT_NO_THROW(require_valid(r, true));

    m.intensity = IntensitySpec::constant(0.6);
    const auto over = validate_model(m, build_grid(1.0, 1));
    EXPECT_TRUE(over.valid());
    EXPECT_FALSE(over.oracle_usable());
    EXPECT_FALSE(over.warnings.empty());
    EXPECT_THROW(require_valid(over, true), ValidationError);
}

TEST(Validate, Errors) {
    const auto g = build_grid(1.0, 10);
    EXPECT_FALSE(validate_model(scalar_model(1.0, 0.0, -0.1), g).valid());
    auto m = scalar_model(1.0, 0.0, 0.1);
    m.levy = FiniteLevyMeasure({atom(0.0, 1.0, 0.5)});
    EXPECT_FALSE(validate_model(m, g).valid());
    m.levy = FiniteLevyMeasure({atom(0.1, 0.0, 0.5)});
    EXPECT_FALSE(validate_model(m, g).valid());
    m = scalar_model(1.0, 0.0, 0.1);
    m.intensity = IntensitySpec::general([](double t) { return 1.0 / (1.0 - t + 1e-9); },
                                         std::numeric_limits<double>::infinity());
    EXPECT_FALSE(validate_model(m, g).valid());
}

// Randomized specs with a known set of injected violations: the report is
// valid exactly when nothing was injected.
TEST(Validate, AcceptsIffBoundsHold) {
    auto rng = derive_stream(2024, 0, StreamChannel::oracle);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 20);
        const auto g = build_grid(0.5 + rng.uniform(), static_cast<long long>(n));
        const int bad_node = static_cast<int>(rng.uniform() * static_cast<double>(n + 1));
        const double t_bad = g.time(static_cast<std::size_t>(bad_node));
        bool inject_sigma = rng.uniform() < 0.2, inject_phi = rng.uniform() < 0.2;
        bool inject_lambda = rng.uniform() < 0.2, inject_atom = rng.uniform() < 0.2;
        const double s = 0.5 + rng.uniform(), p = rng.uniform() - 0.5, lam = rng.uniform();

        ModelSpec m;
        m.market.dimension = 1;
        m.market.s0 = Eigen::VectorXd::Constant(1, 1.0);
        m.market.phi_bound = 0.5;
        m.market.sigma = [=](double t) {
            return Eigen::MatrixXd::Constant(1, 1, inject_sigma && t == t_bad ? 0.0 : s);
        };
        m.market.phi = [=](double t) { return Eigen::VectorXd::Constant(1, inject_phi && t == t_bad ? 0.75 : p); };
        m.intensity = IntensitySpec::general([=](double t) { return inject_lambda && t == t_bad ? -0.1 : lam; }, 1.0);
        m.levy = FiniteLevyMeasure({atom(inject_atom ? 0.0 : 0.2, 1.0, 0.3)});
        const bool clean = !(inject_sigma || inject_phi || inject_lambda || inject_atom);
        EXPECT_EQ(validate_model(m, g).valid(), clean) << "trial " << trial;
    }
}

TEST(Claim, BoundEnforced) {
    const auto c = ClaimSpec::constant(2.0).with_bound(1.0);
    EXPECT_THROW((void)c.payoff({}), ValidationError);
    const auto bond = ClaimSpec::defaultable_bond(1.0, 0.0);
    ClaimInputs in;
    in.defaulted = true;
    in.default_time = 0.4;
    EXPECT_EQ(bond.payoff(in), 0.0);
    in.defaulted = false;
    EXPECT_EQ(bond.payoff(in), 1.0);
    EXPECT_EQ(bond.shifted(0.5).payoff(in), 1.5);
}

TEST(Claim, MarketClaimCannotUseDefault) {
    EXPECT_THROW((void)ClaimSpec::defaultable_bond(1.0, 0.0, 0.0, Measurability::market_terminal), ValidationError);
    EXPECT_NO_THROW((void)ClaimSpec::capped_call(1.0, 0.5));
}

TEST(Parallel, ReductionIndependentOfWorkers) {
    const auto run = [](unsigned workers) {
        return ordered_reduce(
            10000, workers, 0.0,
            [](std::size_t b, std::size_t e) {
                double s = 0.0;
                for (std::size_t i = b; i < e; ++i) s += 1.0 / (1.0 + static_cast<double>(i));
                return s;
            },
            [](double& acc, const double& v) { acc += v; });
    };
    EXPECT_EQ(run(1), run(3));
    EXPECT_EQ(run(1), run(8));
}

TEST(Parallel, RethrowsWorkerException) {
    EXPECT_THROW(parallel_for(100, 4,
                              [](std::size_t i) {
                                  if (i == 57) throw NumericalError("core", "boom");
                              }),
                 NumericalError);
}

TEST(Stats, MergeMatchesSequential) {
    RunningStats all, a, b;
    for (int i = 0; i < 100; ++i) {
        const double x = std::sin(i);
        all.add(x);
        (i < 37 ? a : b).add(x);
    }
    a.merge(b);
    EXPECT_NEAR(a.mean(), all.mean(), 1e-15);
    EXPECT_NEAR(a.variance(), all.variance(), 1e-14);
}
