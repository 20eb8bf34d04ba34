#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "pelab/core/errors.hpp"
#include "pelab/market/path_state.hpp"

namespace pelab {

enum class StrategyKind { constant, feedback, grid_candidate };

/// Bounded state-feedback trading rule theta(t, state), an integrand against
/// the drift-adjusted Brownian motion B^.
class Strategy {
public:
    using Rule = std::function<void(const PathState&, std::span<double>)>;

    Strategy(StrategyKind kind, std::size_t dimension, double bound, Rule rule)
        : kind_(kind), dimension_(dimension), bound_(bound), rule_(std::move(rule)) {}

    static Strategy constant(const Eigen::VectorXd& theta, StrategyKind kind = StrategyKind::constant) {
        const Eigen::VectorXd copy = theta;
        return {kind, static_cast<std::size_t>(theta.size()), theta.cwiseAbs().maxCoeff(),
                [copy](const PathState&, std::span<double> out) {
                    for (std::size_t j = 0; j < out.size(); ++j) out[j] = copy[static_cast<Eigen::Index>(j)];
                }};
    }

    static Strategy constant(double theta, std::size_t dimension = 1, StrategyKind kind = StrategyKind::constant) {
        return constant(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dimension), theta), kind);
    }

    [[nodiscard]] StrategyKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
    [[nodiscard]] double bound() const noexcept { return bound_; }

    /// Writes theta at `state`; throws if any component exceeds the bound.
    void evaluate(const PathState& state, std::span<double> out) const {
        rule_(state, out);
        for (double v : out)
            if (!(std::abs(v) <= bound_ * (1.0 + 1e-12)))
                throw ValidationError("market", "strategy value " + std::to_string(v) + " exceeds its bound " +
                                                    std::to_string(bound_));
    }

    /// 1_{[0, tau]} theta: zero from the first node at which the default has
    /// been observed.
    [[nodiscard]] Strategy stopped_at_default() const {
        Rule inner = rule_;
        return {kind_, dimension_, bound_, [inner](const PathState& s, std::span<double> out) {
                    if (s.defaulted) {
                        for (double& v : out) v = 0.0;
                        return;
                    }
                    inner(s, out);
                }};
    }

private:
    StrategyKind kind_;
    std::size_t dimension_;
    double bound_;
    Rule rule_;
};

}  // namespace pelab
