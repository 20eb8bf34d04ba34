#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "pelab/core/errors.hpp"
#include "pelab/core/model.hpp"
#include "pelab/core/stats.hpp"
#include "pelab/market/scenario.hpp"

namespace pelab {

/// Point of the mark space R^d x {0, 1}: (x_i, 0) for an X jump on atom i,
/// (0, 1) for the default.
struct Mark {
    std::optional<std::size_t> atom;
    bool default_mark = false;

    static Mark jump(std::size_t i) { return {i, false}; }
    static Mark default_event() { return {std::nullopt, true}; }
};

/// Bounded deterministic test function W(t, x1, x2) on the mark space.
struct MarkTestFunction {
    std::string name;
    std::function<double(double, const Mark&)> fn;
    double bound = 1.0;

    [[nodiscard]] double operator()(double t, const Mark& mark) const {
        const double v = fn(t, mark);
        if (!(std::abs(v) <= bound))
            throw ValidationError("enlargement", "test function " + name + " exceeds its bound at t=" + std::to_string(t));
        return v;
    }
};

/// Integrals of W against the predictable compensator of mu^{(X,H)}:
/// sum_i int_0^T W(t, x_i, 0) zeta w_i dt + int_0^{T ^ tau} W(t, 0, 1) lambda dt.
/// The deterministic parts are integrated once per grid step with 10-point
/// Gauss-Legendre; the default part is completed per path up to tau.
class JointCompensator {
public:
    JointCompensator(const ModelSpec& model, const TimeGrid& grid, MarkTestFunction w)
        : model_(&model), grid_(grid), w_(std::move(w)) {
        const std::size_t n = grid.n_steps();
        default_prefix_.assign(n + 1, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            default_prefix_[k + 1] = default_prefix_[k] + default_piece(grid.time(k), grid.time(k + 1));
            for (std::size_t i = 0; i < model.levy.size(); ++i) jump_total_ += jump_piece(i, grid.time(k), grid.time(k + 1));
        }
    }

    /// W * nu^{(X,H)}_T for one path.
    [[nodiscard]] double compensator(const ScenarioBundle& b) const {
        const double tau = b.default_record.tau;
        double def = 0.0;
        if (tau >= grid_.horizon()) {
            def = default_prefix_.back();
        } else {
            const std::size_t k = *b.default_record.default_step;  // t_{k-1} < tau <= t_k
            def = default_prefix_[k - 1] + default_piece(grid_.time(k - 1), tau);
        }
        return jump_total_ + def;
    }

    /// W * mu^{(X,H)}_T for one path.
    [[nodiscard]] double realized(const ScenarioBundle& b) const {
        double total = 0.0;
        for (const auto& e : b.jumps) total += w_(e.time, Mark::jump(e.atom));
        if (b.default_record.tau <= grid_.horizon()) total += w_(b.default_record.tau, Mark::default_event());
        return total;
    }

    [[nodiscard]] double residual(const ScenarioBundle& b) const { return realized(b) - compensator(b); }

private:
    template <class F>
    static double gauss(F&& f, double a, double b) {
        if (!(b > a)) return 0.0;
        return boost::math::quadrature::gauss<double, 10>::integrate(f, a, b);
    }

    [[nodiscard]] double default_piece(double a, double b) const {
        return gauss([&](double t) { return w_(t, Mark::default_event()) * model_->intensity.rate(t); }, a, b);
    }

    [[nodiscard]] double jump_piece(std::size_t i, double a, double b) const {
        const auto& atom = model_->levy.atom(i);
        return gauss([&](double t) { return w_(t, Mark::jump(i)) * atom.event_rate(t); }, a, b);
    }

    const ModelSpec* model_;
    TimeGrid grid_;
    MarkTestFunction w_;
    std::vector<double> default_prefix_;
    double jump_total_ = 0.0;
};

/// MC estimate of E[W * mu_T] - E[W * nu_T] with its standard error.
inline MeanEstimate joint_compensator_residual(std::span<const ScenarioBundle> paths, const ModelSpec& model,
                                               const MarkTestFunction& w) {
    if (paths.empty()) throw ValidationError("enlargement", "no scenarios supplied");
    const JointCompensator comp(model, paths.front().grid, w);
    RunningStats stats;
    for (const auto& b : paths) stats.add(comp.residual(b));
    return stats.estimate();
}

/// Streaming variant: simulates n_paths scenarios without storing them.
inline MeanEstimate joint_compensator_residual(const ModelSpec& model, const TimeGrid& grid, std::size_t n_paths,
                                               std::uint64_t seed, const MarkTestFunction& w, unsigned workers = 1) {
    const JointCompensator comp(model, grid, w);
    return reduce_scenarios(
               model, grid, n_paths, seed, workers, RunningStats{},
               [&](const ScenarioBundle& b) {
                   RunningStats s;
                   s.add(comp.residual(b));
                   return s;
               },
               [](RunningStats& acc, const RunningStats& s) { acc.merge(s); })
        .estimate();
}

}  // namespace pelab
