#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "pelab/bsde/generator.hpp"
#include "pelab/core/errors.hpp"
#include "pelab/core/grid.hpp"
#include "pelab/core/model.hpp"

namespace pelab {

/// Deterministic solution for claims g1 1{tau > T} + g2(tau) 1{tau <= T}
/// when phi and lambda are deterministic. y_post[k] is the value right after
/// a default at t_k.
struct OdeSolution {
    TimeGrid grid;
    std::vector<double> y_pre;
    std::vector<double> y_post;
    double error_estimate = 0.0;
    std::size_t substeps = 4;  // RK4 steps per grid interval

    [[nodiscard]] double y0() const { return y_pre.front(); }
    [[nodiscard]] std::vector<double> w_def() const {
        std::vector<double> w(y_pre.size());
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = y_post[k] - y_pre[k];
        return w;
    }
};

namespace detail {

/// State (y_pre, q) with q(t) = int_t^T |phi|^2 / (2 alpha). Backward in time.
class PreDefaultOde {
public:
    PreDefaultOde(const GeneratorSpec& spec, DeterministicClaim claim) : spec_(spec), claim_(std::move(claim)) {}

    [[nodiscard]] double post_value(double t, double q) const {
        const double g2 = claim_.recovery(t);
        return spec_.horizon == Horizon::stopped ? g2 : g2 - q;
    }

    [[nodiscard]] std::array<double, 2> rhs(double t, const std::array<double, 2>& s) const {
        const auto c = spec_.at(t);
        const double drift = c.phi.squaredNorm() / (2.0 * spec_.alpha);
        double dy = drift;
        if (c.lambda > 0.0) {
            const double w = post_value(t, s[1]) - s[0];
            if (!(std::abs(spec_.alpha * w) <= kExpArgumentLimit))
                throw NumericalError("bsde", "exponential overflow in the pre-default equation");
            dy -= c.lambda / spec_.alpha * std::expm1(spec_.alpha * w);
        }
        return {dy, -drift};
    }

    /// Values at the grid nodes using `sub` RK4 steps per interval.
    void integrate(const TimeGrid& grid, std::size_t sub, std::vector<double>& y, std::vector<double>& q) const {
        const std::size_t n = grid.n_steps();
        y.assign(n + 1, 0.0);
        q.assign(n + 1, 0.0);
        std::array<double, 2> s{claim_.survival, 0.0};
        y[n] = s[0];
        for (std::size_t k = n; k-- > 0;) {
            const double t1 = grid.time(k + 1), t0 = grid.time(k);
            const double h = (t0 - t1) / static_cast<double>(sub);
            for (std::size_t j = 0; j < sub; ++j) {
                const double t = t1 + h * static_cast<double>(j);
                const auto k1 = rhs(t, s);
                const auto k2 = rhs(t + 0.5 * h, {s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]});
                const auto k3 = rhs(t + 0.5 * h, {s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]});
                const auto k4 = rhs(t + h, {s[0] + h * k3[0], s[1] + h * k3[1]});
                for (int i = 0; i < 2; ++i) s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            y[k] = s[0];
            q[k] = s[1];
        }
    }

private:
    const GeneratorSpec& spec_;
    DeterministicClaim claim_;
};

}  // namespace detail

/// Solves the pre-default equation
///   y_pre' = |phi|^2/(2 alpha) - (lambda/alpha)(exp(alpha (y_post - y_pre)) - 1),
/// with y_post(t) = g2(t) - int_t^T |phi|^2/(2 alpha) (fixed horizon) or
/// y_post(t) = g2(t) (stopped), by classical RK4 with step dt/4. The step is
/// halved until the Richardson estimate is at most 1e-9.
inline OdeSolution solve_ode_deterministic(const GeneratorSpec& spec, const ClaimSpec& claim, const TimeGrid& grid) {
    const auto form = claim.deterministic_form();
    if (!form) throw ValidationError("bsde", "claim is not of the form g1 1{tau > T} + g2(tau) 1{tau <= T}");
    if (!spec.levy.empty() && claim.uses_jumps())
        throw ValidationError("bsde", "claim depends on X-jumps; the deterministic reduction does not apply");
    const detail::PreDefaultOde ode(spec, *form);

    std::size_t sub = 4;
    std::vector<double> y, q, y_fine, q_fine;
    ode.integrate(grid, sub, y, q);
    double err = 0.0;
    for (int round = 0; round < 12; ++round) {
        ode.integrate(grid, 2 * sub, y_fine, q_fine);
        err = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) err = std::max(err, std::abs(y_fine[k] - y[k]) / 15.0);
        y.swap(y_fine);
        q.swap(q_fine);
        sub *= 2;
        if (err <= 1e-9) break;
    }
    if (err > 1e-9) throw NumericalError("bsde", "RK4 error estimate " + std::to_string(err) + " above 1e-9");

    OdeSolution out;
    out.grid = grid;
    out.substeps = sub;
    out.error_estimate = err;
    out.y_pre = std::move(y);
    out.y_post.resize(out.y_pre.size());
    for (std::size_t k = 0; k < out.y_post.size(); ++k) out.y_post[k] = ode.post_value(grid.time(k), q[k]);
    return out;
}

}  // namespace pelab
