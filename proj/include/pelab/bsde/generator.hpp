#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pelab/core/errors.hpp"
#include "pelab/core/model.hpp"
#include "pelab/oracle/tree_bsde.hpp"

namespace pelab {

enum class Horizon { fixed_T, stopped };

inline constexpr double kExpArgumentLimit = 700.0;

/// Data of the exponential-utility generator: risk aversion, market price of
/// risk, X-atom rates zeta(t, x_i) w_i and the default intensity.
struct GeneratorSpec {
    double alpha = 1.0;
    std::function<Eigen::VectorXd(double)> phi;
    double phi_bound = 0.0;
    std::size_t dimension = 1;
    FiniteLevyMeasure levy;
    IntensitySpec intensity;
    Horizon horizon = Horizon::fixed_T;
    bool default_term = true;  // false: generator g of the market-only problem

    /// phi, per-atom event rates and lambda at one time.
    struct Coefficients {
        Eigen::VectorXd phi;
        std::vector<double> mark_rates;
        double lambda = 0.0;
    };

    static GeneratorSpec from_model(const ModelSpec& model, Horizon horizon = Horizon::fixed_T) {
        GeneratorSpec g;
        g.alpha = model.market.alpha;
        g.phi = model.market.phi;
        g.phi_bound = model.market.phi_bound;
        g.dimension = model.market.dimension;
        g.levy = model.levy;
        g.intensity = model.intensity;
        g.horizon = horizon;
        return g;
    }

    /// Same data with the default term removed.
    [[nodiscard]] GeneratorSpec market_problem() const {
        GeneratorSpec g = *this;
        g.default_term = false;
        return g;
    }

    [[nodiscard]] Coefficients at(double t) const {
        Coefficients c;
        c.phi = phi ? phi(t) : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension));
        c.mark_rates.reserve(levy.size());
        for (const auto& a : levy.atoms()) c.mark_rates.push_back(a.event_rate(t));
        c.lambda = default_term ? intensity.rate(t) : 0.0;
        return c;
    }
};

namespace detail {

/// (e^{a w} - 1 - a w) / a, guarded against overflow.
inline double exp_excess(double alpha, double w) {
    const double x = alpha * w;
    if (!(std::abs(x) <= kExpArgumentLimit))
        throw NumericalError("bsde", "exponential overflow in generator: |alpha w| = " + std::to_string(std::abs(x)) +
                                         " exceeds " + std::to_string(kExpArgumentLimit) +
                                         "; the jump integrand must stay within the a-priori clamp");
    return (std::expm1(x) - x) / alpha;
}

}  // namespace detail

/// f(t, z, w, w_def) with coefficients already evaluated at t.
inline double generator_f(const GeneratorSpec& spec, const GeneratorSpec::Coefficients& c, std::span<const double> z,
                          std::span<const double> w, double w_def, bool pre_default) {
    if (spec.horizon == Horizon::stopped && !pre_default) return 0.0;
    const double a = spec.alpha;
    double zphi = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) zphi += z[j] * c.phi[static_cast<Eigen::Index>(j)];
    double f = -(zphi + c.phi.squaredNorm() / (2.0 * a));
    for (std::size_t i = 0; i < w.size(); ++i)
        if (w[i] != 0.0) f += detail::exp_excess(a, w[i]) * c.mark_rates[i];
    if (pre_default && spec.default_term && w_def != 0.0) f += detail::exp_excess(a, w_def) * c.lambda;
    return f;
}

inline double generator_f(const GeneratorSpec& spec, double t, std::span<const double> z, std::span<const double> w,
                          double w_def, bool pre_default) {
    for (double v : z)
        if (!std::isfinite(v)) throw NumericalError("bsde", "non-finite z in generator");
    return generator_f(spec, spec.at(t), z, w, w_def, pre_default);
}

/// ||xi|| + T phi_max^2 / (2 alpha): bound on |Y| used to clamp regressions.
inline double apriori_bound(const GeneratorSpec& spec, const ClaimSpec& claim, double horizon) {
    return claim.bound() + horizon * spec.phi_bound * spec.phi_bound / (2.0 * spec.alpha);
}

/// The generator as a callback for the one-dimensional event tree.
inline TreeGenerator tree_generator(const GeneratorSpec& spec) {
    return [spec](double t, double z, std::span<const double> w, double w_def, bool pre) {
        const double zz[1] = {z};
        return generator_f(spec, t, zz, w, w_def, pre);
    };
}

}  // namespace pelab
