#pragma once

#include <cmath>
#include <memory>
#include <string>

#include "pelab/bsde/lsmc.hpp"
#include "pelab/bsde/ode.hpp"
#include "pelab/utility/optimality.hpp"

namespace pelab {

enum class SolverMode { lsmc, ode };

inline std::string to_string(SolverMode m) { return m == SolverMode::ode ? "ode" : "lsmc"; }

struct IndifferenceResult {
    SolverMode mode = SolverMode::lsmc;
    double pi = 0.0;
    double se = 0.0;
    double y0_claim = 0.0, se_claim = 0.0;  // generator f, claim xi
    double y0_zero = 0.0, se_zero = 0.0;    // generator g, zero claim
    double identity_residual = 0.0;         // |U^0(x) - U^xi(x + pi)| / |U^0(x)|
};

/// pi = Y0 (claim, full generator) - Y0 (zero claim, market-only generator).
inline IndifferenceResult indifference_price(const ModelSpec& model, const ClaimSpec& claim, const TimeGrid& grid,
                                             SolverMode mode, const LsmcSettings& settings, double x = 0.0) {
    IndifferenceResult r;
    r.mode = mode;
    if (mode == SolverMode::ode) {
        const auto spec = GeneratorSpec::from_model(model);
        r.y0_claim = solve_ode_deterministic(spec, claim, grid).y0();
        r.y0_zero = solve_ode_deterministic(spec.market_problem(), ClaimSpec::zero(), grid).y0();
    } else {
        const auto with = solve_bsde(model, claim, grid, settings, Horizon::fixed_T, true);
        const auto without = solve_bsde(model, ClaimSpec::zero(), grid, settings, Horizon::fixed_T, false);
        r.y0_claim = with.y0;
        r.se_claim = with.y0_se;
        r.y0_zero = without.y0;
        r.se_zero = without.y0_se;
    }
    r.pi = r.y0_claim - r.y0_zero;
    r.se = std::hypot(r.se_claim, r.se_zero);
    const double alpha = model.market.alpha;
    const double u0 = value_function(r.y0_zero, x, alpha);
    const double u_xi = value_function(r.y0_claim, x + r.pi, alpha);
    r.identity_residual = std::abs(u0 - u_xi) / std::abs(u0);
    if (r.identity_residual > 1e-12)
        throw NumericalError("utility", "indifference identity off by " + std::to_string(r.identity_residual));
    return r;
}

struct RandomHorizonResult {
    SolverMode mode = SolverMode::lsmc;
    double value = 0.0;  // -exp(-alpha (x - Y0))
    double y0 = 0.0;
    double y0_se = 0.0;
    SolutionPtr solution;                  // LSMC mode only
    std::shared_ptr<const Strategy> strategy;  // 1_{[0, tau]} theta*
    std::size_t checked_paths = 0;
    std::size_t localization_violations = 0;
};

/// Value and localized optimal rule for an investor who leaves the market at
/// the default time.
inline RandomHorizonResult random_horizon_value(const ModelSpec& model, const ClaimSpec& claim,
                                                const TimeGrid& grid, SolverMode mode, const LsmcSettings& settings,
                                                double x = 0.0, std::size_t check_paths = 2000) {
    RandomHorizonResult r;
    r.mode = mode;
    const auto spec = GeneratorSpec::from_model(model, Horizon::stopped);
    if (mode == SolverMode::ode) {
        if (claim.measurability() != Measurability::stopped)
            throw ValidationError("utility", "random-horizon claim must be tagged " + to_string(Measurability::stopped));
        r.y0 = solve_ode_deterministic(spec, claim, grid).y0();
        r.strategy = std::make_shared<const Strategy>(optimal_strategy(spec).stopped_at_default());
    } else {
        r.solution = std::make_shared<const BsdeSolution>(solve_random_horizon(model, claim, grid, settings));
        r.y0 = r.solution->y0;
        r.y0_se = r.solution->y0_se;
        r.strategy = std::make_shared<const Strategy>(optimal_strategy(r.solution).stopped_at_default());
    }
    r.value = value_function(r.y0, x, model.market.alpha);

    r.checked_paths = std::min(check_paths, settings.n_paths);
    if (r.checked_paths > 0) {
        const std::size_t n = grid.n_steps(), d = model.market.dimension;
        r.localization_violations = reduce_scenarios(
            model, grid, r.checked_paths, settings.seed + 1, settings.workers, std::size_t{0},
            [&](const ScenarioBundle& b) {
                std::size_t bad = 0;
                std::vector<double> th(d);
                for (std::size_t k = 0; k <= n; ++k) {
                    if (!b.defaulted_at(k)) continue;
                    r.strategy->evaluate(path_state(b, k), th);
                    for (double v : th) bad += v != 0.0;
                }
                return bad;
            },
            [](std::size_t& a, std::size_t b) { a += b; });
        if (r.localization_violations > 0)
            throw NumericalError("utility", "random-horizon strategy is non-zero after default on " +
                                                std::to_string(r.localization_violations) + " nodes");
    }
    return r;
}

}  // namespace pelab
