#include <cmath>

#include <gtest/gtest.h>

#include "pelab/enlargement/compensator.hpp"
#include "pelab/enlargement/default_time.hpp"
#include "pelab/market/scenario.hpp"

using namespace pelab;

namespace {

ModelSpec credit_model(double lambda, double atom_rate = 0.0) {
    ModelSpec m;
    m.market = MarketSpec::scalar(1.0, 0.0, 1.0, 1.0);
    m.intensity = IntensitySpec::constant(lambda);
    if (atom_rate > 0.0)
        m.levy = FiniteLevyMeasure({{Eigen::VectorXd::Constant(1, 0.1), 1.0, IntensitySpec::constant(atom_rate)}});
    return m;
}

}  // namespace

TEST(Azema, Values) {
    EXPECT_NEAR(azema(IntensitySpec::constant(0.3), 1.0), 0.7408182206817179, 1e-15);
    EXPECT_EQ(azema(IntensitySpec::affine(0.7, 0.4), 0.0), 1.0);
    EXPECT_NEAR(azema(IntensitySpec::affine(0.2, 0.1), 2.0), 0.5488116360940264, 1e-15);
    EXPECT_THROW((void)azema(IntensitySpec::constant(0.3), -0.1), ValidationError);
}

TEST(Azema, Decreasing) {
    const auto l = IntensitySpec::piecewise({{0.0, 0.1, 0.2}, {1.0, 0.5, 0.0}, {2.0, 0.0, 0.0}});
    double prev = 1.0;
    for (int i = 1; i <= 30; ++i) {
        const double a = azema(l, 0.1 * i);
        EXPECT_LE(a, prev);
        EXPECT_GT(a, 0.0);
        prev = a;
    }
}

TEST(SampleDefault, SurvivalFrequency) {
    const auto l = IntensitySpec::constant(0.3);
    const auto g = build_grid(1.0, 10);
    RunningStats survived;
    for (std::size_t p = 0; p < 100000; ++p) {
        auto s = derive_stream(11, p, StreamChannel::default_time);
        survived.add(sample_default(l, g, s).tau > 1.0 ? 1.0 : 0.0);
    }
    EXPECT_TRUE(survived.estimate().within(std::exp(-0.3), 3.0)) << survived.mean();
}

TEST(SampleDefault, ZeroHazardNeverDefaults) {
    const auto g = build_grid(1.0, 10);
    for (std::size_t p = 0; p < 100; ++p) {
        auto s = derive_stream(1, p, StreamChannel::default_time);
        const auto rec = sample_default(IntensitySpec::constant(0.0), g, s);
        EXPECT_TRUE(std::isinf(rec.tau));
        EXPECT_FALSE(rec.default_step.has_value());
    }
}

TEST(SampleDefault, ThresholdInversion) {
    const auto rec = default_from_threshold(IntensitySpec::constant(0.3), build_grid(1.0, 4), 0.15);
    EXPECT_DOUBLE_EQ(rec.tau, 0.5);
    EXPECT_EQ(rec.default_step, 2u);
}

TEST(EnlargementPaths, StoppedAtDefault) {
    const auto l = IntensitySpec::constant(0.3);
    const auto g = build_grid(1.0, 4);
    const auto p = enlargement_paths(default_from_threshold(l, g, 0.15), l, g);
    EXPECT_NEAR(p.compensator.back(), 0.15, 1e-15);
    EXPECT_NEAR(p.martingale.back(), 0.85, 1e-15);
    EXPECT_EQ(p.exponential.back(), 0.0);
    EXPECT_EQ(p.exponential[2], 0.0);
    EXPECT_GT(p.exponential[1], 0.0);
}

TEST(EnlargementPaths, NoDefaultInHorizon) {
    const auto l = IntensitySpec::constant(0.3);
    const auto g = build_grid(1.0, 5);
    const auto p = enlargement_paths(default_from_threshold(l, g, 0.5), l, g);
    EXPECT_NEAR(p.compensator.back(), 0.3, 1e-15);
    EXPECT_NEAR(p.martingale.back(), -0.3, 1e-15);
    EXPECT_NEAR(p.exponential.back(), 1.3498588075760032, 1e-14);
    EXPECT_NEAR(p.exponential[2], 1.1274968515793757, 1e-14);
    EXPECT_EQ(p.survival.front(), 1.0);
}

TEST(EnlargementPaths, GridMismatch) {
    const auto l = IntensitySpec::constant(0.3);
    const auto rec = default_from_threshold(l, build_grid(1.0, 4), 0.1);
    EXPECT_THROW((void)enlargement_paths(rec, l, build_grid(1.0, 7)), ValidationError);
    EXPECT_THROW((void)enlargement_paths(rec, l, build_grid(0.2, 4)), ValidationError);
}

// Lambda = -log A(tau ^ t) and U A = 1{t < tau}, pathwise, for several
// closed-form intensities.
TEST(EnlargementPaths, PathwiseIdentities) {
    const std::vector<IntensitySpec> intensities{
        IntensitySpec::constant(0.3), IntensitySpec::affine(0.2, 0.1),
        IntensitySpec::piecewise({{0.0, 0.5, 0.0}, {0.3, 0.1, 0.4}, {0.7, 1.2, -0.5}})};
    const auto g = build_grid(1.0, 50);
    double worst_log = 0.0, worst_u = 0.0;
    for (const auto& l : intensities) {
        for (std::size_t p = 0; p < 2000; ++p) {
            auto s = derive_stream(5, p, StreamChannel::default_time);
            const auto rec = sample_default(l, g, s);
            const auto e = enlargement_paths(rec, l, g);
            for (std::size_t k = 0; k < g.n_nodes(); ++k) {
                const double t = g.time(k);
                worst_log = std::max(worst_log, std::abs(e.compensator[k] + std::log(azema(l, std::min(t, rec.tau)))));
                worst_u = std::max(worst_u, std::abs(e.exponential[k] * e.survival[k] - (t < rec.tau ? 1.0 : 0.0)));
                ASSERT_DOUBLE_EQ(e.martingale[k], e.indicator[k] - e.compensator[k]);
                if (k > 0) {
                    ASSERT_GE(e.compensator[k], e.compensator[k - 1]);
                }
            }
        }
    }
    EXPECT_LE(worst_log, 1e-12);
    EXPECT_LE(worst_u, 1e-12);
}

TEST(EnlargementPaths, BracketAndMartingale) {
    const auto l = IntensitySpec::constant(0.3);
    const auto g = build_grid(1.0, 2);
    RunningStats m_half, m_end, bracket_half, bracket_end;
    for (std::size_t p = 0; p < 100000; ++p) {
        auto s = derive_stream(77, p, StreamChannel::default_time);
        const auto e = enlargement_paths(sample_default(l, g, s), l, g);
        m_half.add(e.martingale[1]);
        m_end.add(e.martingale[2]);
        bracket_half.add(e.martingale[1] * e.martingale[1] - e.compensator[1]);
        bracket_end.add(e.martingale[2] * e.martingale[2] - e.compensator[2]);
    }
    EXPECT_TRUE(m_half.estimate().within(0.0, 3.0));
    EXPECT_TRUE(m_end.estimate().within(0.0, 3.0));
    EXPECT_TRUE(bracket_half.estimate().within(0.0, 3.0));
    EXPECT_TRUE(bracket_end.estimate().within(0.0, 3.0));
}

TEST(JointCompensator, DefaultMarkCount) {
    const auto m = credit_model(0.3);
    const auto g = build_grid(1.0, 20);
    const MarkTestFunction w{"default", [](double, const Mark& x) { return x.default_mark ? 1.0 : 0.0; }, 1.0};
    const auto paths = simulate(m, g, 100000, 3);
    const auto r = joint_compensator_residual(std::span<const ScenarioBundle>(paths), m, w);
    EXPECT_TRUE(r.within(0.0, 3.0)) << r.mean << " +- " << r.se;

    // Both sides separately against 1 - exp(-0.3).
    const JointCompensator comp(m, g, w);
    RunningStats realized, compensator;
    for (const auto& b : paths) {
        realized.add(comp.realized(b));
        compensator.add(comp.compensator(b));
    }
    EXPECT_TRUE(realized.estimate().within(0.2591817793182821, 3.0));
    EXPECT_TRUE(compensator.estimate().within(0.2591817793182821, 3.0));
}

TEST(JointCompensator, ZeroFunction) {
    const auto m = credit_model(0.3, 0.5);
    const MarkTestFunction w{"zero", [](double, const Mark&) { return 0.0; }, 0.0};
    const auto r = joint_compensator_residual(m, build_grid(1.0, 10), 1000, 4, w);
    EXPECT_EQ(r.mean, 0.0);
    EXPECT_EQ(r.se, 0.0);
}

TEST(JointCompensator, AtomCount) {
    const auto m = credit_model(0.3, 0.5);
    const auto g = build_grid(1.0, 20);
    const MarkTestFunction w{"atom1", [](double, const Mark& x) { return x.atom == 0u ? 1.0 : 0.0; }, 1.0};
    const auto r = joint_compensator_residual(m, g, 100000, 5, w, 2);
    EXPECT_TRUE(r.within(0.0, 3.0)) << r.mean << " +- " << r.se;
    const JointCompensator comp(m, g, w);
    const auto paths = simulate(m, g, 20000, 5);
    RunningStats count;
    for (const auto& b : paths) count.add(comp.realized(b));
    EXPECT_TRUE(count.estimate().within(0.5, 3.0));
    EXPECT_NEAR(comp.compensator(paths.front()), 0.5, 1e-13);
}

TEST(JointCompensator, TimeDependentFunction) {
    auto m = credit_model(0.0, 0.0);
    m.intensity = IntensitySpec::affine(0.2, 0.4);
    m.levy = FiniteLevyMeasure({{Eigen::VectorXd::Constant(1, 0.1), 2.0, IntensitySpec::affine(0.3, -0.2)}});
    const MarkTestFunction w{"mixed",
                             [](double t, const Mark& x) { return x.default_mark ? std::cos(3 * t) : t * t; }, 1.0};
    const auto r = joint_compensator_residual(m, build_grid(1.0, 25), 100000, 6, w);
    EXPECT_TRUE(r.within(0.0, 3.0)) << r.mean << " +- " << r.se;
}

TEST(JointCompensator, UnboundedFunctionRejected) {
    const auto m = credit_model(0.3);
    const MarkTestFunction w{"big", [](double, const Mark&) { return 5.0; }, 1.0};
    EXPECT_THROW((void)joint_compensator_residual(m, build_grid(1.0, 4), 10, 1, w), ValidationError);
}

TEST(Avoidance, DefaultNeverCoincidesWithJump) {
    const auto m = credit_model(0.5, 2.0);
    const auto paths = simulate(m, build_grid(1.0, 50), 20000, 8);
    std::size_t coincidences = 0;
    for (const auto& b : paths)
        for (const auto& e : b.jumps) coincidences += e.time == b.default_record.tau;
    EXPECT_EQ(coincidences, 0u);
}
