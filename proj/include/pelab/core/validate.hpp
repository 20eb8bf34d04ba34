#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pelab/core/errors.hpp"
#include "pelab/core/grid.hpp"
#include "pelab/core/model.hpp"

namespace pelab {

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    /// (lambda_max + sum_i zeta_max,i w_i) dt: chance of any event in one step.
    double event_budget = 0.0;

    [[nodiscard]] bool valid() const noexcept { return errors.empty(); }
    [[nodiscard]] bool oracle_usable() const noexcept { return valid() && event_budget < 1.0; }
};

namespace detail {

inline std::string at_time(double t) {
    std::ostringstream os;
    os << " at t=" << t;
    return os.str();
}

}  // namespace detail

/// Checks the standing boundedness assumptions on every grid node.
inline ValidationReport validate_model(const MarketSpec& market, const FiniteLevyMeasure& levy,
                                       const IntensitySpec& intensity, const TimeGrid& grid) {
    ValidationReport report;
    auto& err = report.errors;
    const auto d = static_cast<Eigen::Index>(market.dimension);

    if (market.dimension == 0) err.emplace_back("market dimension must be positive");
    if (!(market.alpha > 0.0) || !std::isfinite(market.alpha)) err.emplace_back("risk aversion alpha must be positive");
    if (market.s0.size() != d) err.emplace_back("S0 has the wrong dimension");
    for (Eigen::Index i = 0; i < market.s0.size(); ++i)
        if (!(market.s0[i] > 0.0)) err.emplace_back("initial prices must be positive");
    if (!std::isfinite(market.initial_wealth)) err.emplace_back("initial wealth must be finite");
    if (!market.sigma || !market.phi) err.emplace_back("volatility and market price of risk must be set");
    if (!std::isfinite(market.phi_bound)) err.emplace_back("market price of risk needs a finite declared bound");

    if (market.sigma && market.phi && market.dimension > 0) {
        for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
            const double t = grid.time(k);
            const Eigen::MatrixXd s = market.sigma(t);
            if (s.rows() != d || s.cols() != d || !s.allFinite()) {
                err.push_back("volatility matrix malformed" + detail::at_time(t));
                break;
            }
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(s);
            const auto& sv = svd.singularValues();
            if (sv.size() == 0 || !(sv(sv.size() - 1) > 1e-12 * std::max(1.0, sv(0)))) {
                err.push_back("singular volatility" + detail::at_time(t));
                break;
            }
            const Eigen::VectorXd p = market.phi(t);
            if (p.size() != d || !p.allFinite()) {
                err.push_back("market price of risk malformed" + detail::at_time(t));
                break;
            }
            if (p.norm() > market.phi_bound * (1.0 + 1e-12)) {
                err.push_back("market price of risk exceeds its declared bound" + detail::at_time(t));
                break;
            }
        }
    }

    const double lambda_max = intensity.sup_on(grid.horizon());
    if (!std::isfinite(lambda_max)) err.emplace_back("default intensity is unbounded (no finite bound declared)");
    for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
        const double t = grid.time(k);
        const double l = intensity.rate(t);
        if (!std::isfinite(l) || l < 0.0) {
            err.push_back("default intensity negative or not finite" + detail::at_time(t));
            break;
        }
        if (l > lambda_max * (1.0 + 1e-12)) {
            err.push_back("default intensity exceeds its declared bound" + detail::at_time(t));
            break;
        }
    }

    double jump_budget = 0.0;
    for (std::size_t i = 0; i < levy.size(); ++i) {
        const auto& a = levy.atom(i);
        const std::string tag = "atom " + std::to_string(i + 1);
        if (a.location.size() != d) err.push_back(tag + " has the wrong dimension");
        if (a.location.size() == 0 || !(a.location.norm() > 0.0)) err.push_back(tag + " is zero");
        if (!(a.weight > 0.0) || !std::isfinite(a.weight)) err.push_back(tag + " weight must be positive");
        const double zmax = a.density.sup_on(grid.horizon());
        if (!std::isfinite(zmax)) err.push_back(tag + " density is unbounded");
        for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
            const double z = a.density.rate(grid.time(k));
            if (!std::isfinite(z) || z < 0.0 || z > zmax * (1.0 + 1e-12)) {
                err.push_back(tag + " density outside [0, declared bound]" + detail::at_time(grid.time(k)));
                break;
            }
        }
        jump_budget += zmax * a.weight;
    }

    report.event_budget = (lambda_max + jump_budget) * grid.dt();
    if (std::isfinite(report.event_budget) && report.event_budget >= 1.0)
        report.warnings.push_back("serial event budget " + std::to_string(report.event_budget) +
                                  " >= 1: not usable for the event-tree oracle");
    return report;
}

inline ValidationReport validate_model(const ModelSpec& model, const TimeGrid& grid) {
    return validate_model(model.market, model.levy, model.intensity, grid);
}

/// Throws the first error; with for_oracle a budget >= 1 is an error as well.
inline void require_valid(const ValidationReport& report, bool for_oracle = false) {
    if (!report.valid()) throw ValidationError("core", report.errors.front());
    if (for_oracle && !report.oracle_usable())
        throw ValidationError("core", "serial event budget " + std::to_string(report.event_budget) + " >= 1");
}

}  // namespace pelab
