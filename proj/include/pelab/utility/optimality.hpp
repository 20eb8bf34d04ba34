#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "pelab/bsde/lsmc.hpp"
#include "pelab/core/stats.hpp"
#include "pelab/market/scenario.hpp"
#include "pelab/market/wealth.hpp"
#include "pelab/utility/strategy.hpp"

namespace pelab {

using SolutionPtr = std::shared_ptr<const BsdeSolution>;

namespace detail {

inline double guarded_exp(double x, const char* what) {
    if (!(std::abs(x) <= kExpArgumentLimit))
        throw NumericalError("utility", std::string(what) + ": exponent " + std::to_string(x) + " outside +-" +
                                            std::to_string(kExpArgumentLimit));
    return std::exp(x);
}

}  // namespace detail

/// theta* = z + phi / alpha, componentwise.
inline double optimal_integrand(double z, double phi, double alpha) { return z + phi / alpha; }

/// Feedback rule Z(t, state) + phi(t) / alpha read from a solved BSDE.
inline Strategy optimal_strategy(SolutionPtr sol) {
    const double alpha = sol->spec.alpha;
    const double bound = sol->z_bound + sol->spec.phi_bound / alpha;
    const std::size_t d = sol->spec.dimension;
    return {StrategyKind::feedback, d, bound, [sol, alpha](const PathState& s, std::span<double> out) {
                sol->z_at(s, out);
                const Eigen::VectorXd phi = sol->spec.at(s.time).phi;
                for (std::size_t j = 0; j < out.size(); ++j)
                    out[j] = optimal_integrand(out[j], phi[static_cast<Eigen::Index>(j)], alpha);
            }};
}

/// phi(t) / alpha: the optimum when Z vanishes (claims not reading prices).
inline Strategy optimal_strategy(const GeneratorSpec& spec) {
    const double alpha = spec.alpha;
    return {StrategyKind::feedback, spec.dimension, spec.phi_bound / alpha,
            [spec, alpha](const PathState& s, std::span<double> out) {
                const Eigen::VectorXd phi = spec.at(s.time).phi;
                for (std::size_t j = 0; j < out.size(); ++j) out[j] = phi[static_cast<Eigen::Index>(j)] / alpha;
            }};
}

/// U(x) = -exp(-alpha (x - y0)).
inline double value_function(double y0, double x, double alpha) {
    return -detail::guarded_exp(-alpha * (x - y0), "value function");
}

/// Y_k on a simulated path; at maturity (and after default in the stopped
/// problem) this is the claim itself.
inline double solution_y(const BsdeSolution& sol, const ScenarioBundle& b, std::size_t k) {
    const std::size_t n = b.grid.n_steps();
    if (k == n) return claim_on_path(b, sol.claim, sol.horizon);
    if (sol.horizon == Horizon::stopped && b.defaulted_at(k)) return claim_on_path(b, sol.claim, Horizon::stopped);
    return sol.y_at(path_state(b, k));
}

struct RPath {
    std::vector<double> wealth;
    std::vector<double> y;
    std::vector<double> r;
};

/// R_k = -exp(-alpha (X_k - Y_k)) along one path.
inline RPath r_process(const Strategy& strategy, const BsdeSolution& sol, const ScenarioBundle& b, double x) {
    RPath out;
    out.wealth = wealth(strategy, b, x).values;
    const std::size_t nn = out.wealth.size();
    out.y.resize(nn);
    out.r.resize(nn);
    for (std::size_t k = 0; k < nn; ++k) {
        out.y[k] = solution_y(sol, b, k);
        out.r[k] = -detail::guarded_exp(-sol.spec.alpha * (out.wealth[k] - out.y[k]), "R process");
    }
    return out;
}

struct Factorization {
    double max_relative_residual = 0.0;
    std::vector<double> a_theta;      // A^theta_k
    std::vector<double> exponential;  // E(H^theta)_k
    std::vector<double> r;
};

/// Compares R^theta with e^{-alpha(x - Y0)} A^theta E(H^theta) node by node.
/// E(H^theta) is accumulated in its exponential form, exact for W piecewise
/// constant over a step.
inline Factorization factorization_residual(const Strategy& strategy, const BsdeSolution& sol,
                                            const ScenarioBundle& b, double x) {
    const auto rp = r_process(strategy, sol, b, x);
    const double alpha = sol.spec.alpha, dt = b.grid.dt();
    const std::size_t n = b.grid.n_steps(), d = b.dimension, m = sol.spec.levy.size();
    const bool stopped = sol.horizon == Horizon::stopped;

    Factorization f;
    f.r = rp.r;
    f.a_theta.resize(n + 1);
    f.exponential.resize(n + 1);
    std::vector<double> theta(d), z(d), w(m);
    double a_log = 0.0, e_log = 0.0;
    const double scale = -alpha * (x - rp.y[0]);
    for (std::size_t k = 0;; ++k) {
        f.a_theta[k] = -std::exp(a_log);
        f.exponential[k] = std::exp(e_log);
        if (!(f.exponential[k] > 0.0) || !std::isfinite(f.exponential[k]))
            throw NumericalError("utility", "stochastic exponential left (0, inf) at t=" + std::to_string(b.grid.time(k)) +
                                                " on path " + std::to_string(b.path_id));
        const double rhs = -detail::guarded_exp(scale + a_log + e_log, "factorization");
        f.max_relative_residual = std::max(f.max_relative_residual, std::abs(rp.r[k] - rhs) / std::abs(rp.r[k]));
        if (k == n) break;

        const auto ps = path_state(b, k);
        if (stopped && ps.defaulted) continue;
        const double t0 = b.grid.time(k), t1 = b.grid.time(k + 1);
        strategy.evaluate(ps, theta);
        sol.z_at(ps, z);
        const Eigen::VectorXd phi = sol.spec.at(t0).phi;
        const auto db = b.dB(k);
        for (std::size_t j = 0; j < d; ++j) {
            const double gap = theta[j] - z[j] - phi[static_cast<Eigen::Index>(j)] / alpha;
            const double v = theta[j] - z[j];
            a_log += 0.5 * alpha * alpha * gap * gap * dt;
            e_log += -alpha * v * db[j] - 0.5 * alpha * alpha * v * v * dt;
        }
        if (m > 0) {
            sol.w_at(ps, w);
            const auto c0 = b.counts(k), c1 = b.counts(k + 1);
            for (std::size_t i = 0; i < m; ++i) {
                const double aw = alpha * w[i];
                e_log += aw * (c1[i] - c0[i]) - std::expm1(aw) * sol.spec.levy.atom(i).event_mass(t0, t1);
            }
        }
        if (!ps.defaulted && sol.spec.default_term) {
            const double aw = alpha * sol.w_def_at(ps);
            const double tau = b.default_record.tau;
            const double mass = sol.spec.intensity.cumulative(t0, std::min(t1, tau));
            e_log += aw * (b.defaulted_at(k + 1) ? 1.0 : 0.0) - std::expm1(aw) * mass;
        }
    }
    return f;
}

struct OptimalitySettings {
    std::vector<double> candidates;  // constant theta applied to every component
    std::size_t n_paths = 10000;
    std::uint64_t seed = 11;
    unsigned workers = 1;
    double x = 0.0;
    std::size_t checkpoints = 5;
    double suboptimal_offset = 0.5;

    static std::vector<double> default_grid() {
        std::vector<double> g;
        for (int i = -20; i <= 20; ++i) g.push_back(0.05 * i);
        return g;
    }
};

struct CandidateEstimate {
    double theta = 0.0;
    MeanEstimate value;  // E[-exp(-alpha (X_T - xi))]
    bool dominated = true;
};

struct RPoint {
    double t = 0.0;
    MeanEstimate r;
};

struct OptimalityReport {
    double alpha = 1.0;
    double x = 0.0;
    double value = 0.0;  // -exp(-alpha (x - Y0))
    double theta_star = 0.0;  // first component at t = 0
    std::vector<CandidateEstimate> candidates;
    std::size_t argmax = 0;
    bool argmax_checked = false;
    bool argmax_ok = true;
    MeanEstimate optimal_terminal;
    MeanEstimate q_terminal_wealth;
    std::vector<RPoint> r_series;  // R^{theta*} at every node
    std::vector<std::size_t> checkpoints;
    double suboptimal_theta = 0.0;
    std::vector<RPoint> suboptimal_series;  // at checkpoints
    std::size_t dominance_violations = 0;
    std::size_t constancy_violations = 0;
    std::size_t monotonicity_violations = 0;

    [[nodiscard]] std::size_t violations() const {
        return dominance_violations + constancy_violations + monotonicity_violations + (argmax_ok ? 0 : 1);
    }
};

namespace detail {

struct OptimalityAccumulator {
    std::vector<RunningStats> candidates, r_star, r_sub, sub_steps;
    RunningStats q_wealth;

    OptimalityAccumulator& operator+=(const OptimalityAccumulator& o) {
        const auto merge = [](std::vector<RunningStats>& a, const std::vector<RunningStats>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i].merge(b[i]);
        };
        merge(candidates, o.candidates);
        merge(r_star, o.r_star);
        merge(r_sub, o.r_sub);
        merge(sub_steps, o.sub_steps);
        q_wealth.merge(o.q_wealth);
        return *this;
    }
};

}  // namespace detail

/// Monte Carlo check of the martingale optimality principle: candidates are
/// dominated by the value, R^{theta*} has constant mean, and a suboptimal
/// R^theta has non-increasing mean at the checkpoints.
inline OptimalityReport verify_martingale_optimality(SolutionPtr sol, const ModelSpec& model,
                                                     const OptimalitySettings& st) {
    if (st.candidates.empty()) throw ValidationError("utility", "candidate grid is empty");
    if (st.checkpoints < 2) throw ValidationError("utility", "need at least two checkpoints");
    const TimeGrid& grid = sol->grid;
    const std::size_t n = grid.n_steps(), d = sol->spec.dimension;
    const bool stopped = sol->horizon == Horizon::stopped;

    OptimalityReport rep;
    rep.alpha = sol->spec.alpha;
    rep.x = st.x;
    rep.value = value_function(sol->y0, st.x, rep.alpha);

    auto localize = [stopped](Strategy s) { return stopped ? s.stopped_at_default() : s; };
    const Strategy star = localize(optimal_strategy(sol));
    {
        PathState s0;
        const Eigen::VectorXd s0_price = model.market.s0;
        s0.price = {s0_price.data(), d};
        const std::vector<int> zero_counts(model.levy.size(), 0);
        s0.jump_counts = zero_counts;
        std::vector<double> th(d);
        star.evaluate(s0, th);
        rep.theta_star = th[0];
    }
    rep.suboptimal_theta = rep.theta_star + st.suboptimal_offset;
    std::vector<Strategy> cands;
    for (double th : st.candidates) cands.push_back(localize(Strategy::constant(th, d, StrategyKind::grid_candidate)));
    const Strategy sub = localize(Strategy::constant(rep.suboptimal_theta, d, StrategyKind::grid_candidate));

    for (std::size_t j = 0; j < st.checkpoints; ++j)
        rep.checkpoints.push_back((j * n + (st.checkpoints - 1) / 2) / (st.checkpoints - 1));
    rep.checkpoints.back() = n;

    detail::OptimalityAccumulator init;
    init.candidates.resize(cands.size());
    init.r_star.resize(n + 1);
    init.r_sub.resize(st.checkpoints);
    init.sub_steps.resize(st.checkpoints - 1);
    const GridCoefficients coef(model.market, grid);
    const double alpha = rep.alpha;

    const auto acc = reduce_scenarios(
        model, grid, st.n_paths, st.seed, st.workers, init,
        [&](const ScenarioBundle& b) {
            detail::OptimalityAccumulator a = init;
            const double xi = claim_on_path(b, sol->claim, sol->horizon);
            for (std::size_t c = 0; c < cands.size(); ++c) {
                const double xt = wealth(cands[c], b, st.x).values[n];
                a.candidates[c].add(-detail::guarded_exp(-alpha * (xt - xi), "candidate utility"));
            }
            const auto rs = r_process(star, *sol, b, st.x);
            for (std::size_t k = 0; k <= n; ++k) a.r_star[k].add(rs.r[k]);
            a.q_wealth.add(rs.wealth[n] * girsanov_weight(b, coef));
            const auto rsub = r_process(sub, *sol, b, st.x);
            for (std::size_t j = 0; j < st.checkpoints; ++j) {
                a.r_sub[j].add(rsub.r[rep.checkpoints[j]]);
                if (j > 0) a.sub_steps[j - 1].add(rsub.r[rep.checkpoints[j]] - rsub.r[rep.checkpoints[j - 1]]);
            }
            return a;
        },
        [](detail::OptimalityAccumulator& a, const detail::OptimalityAccumulator& b) { a += b; });

    for (std::size_t c = 0; c < cands.size(); ++c) {
        CandidateEstimate e{st.candidates[c], acc.candidates[c].estimate(), true};
        e.dominated = e.value.mean <= rep.value + 3.0 * e.value.se;
        if (!e.dominated) ++rep.dominance_violations;
        rep.candidates.push_back(e);
        if (e.value.mean > rep.candidates[rep.argmax].value.mean) rep.argmax = c;
    }
    rep.argmax_checked = sol->claim.deterministic_form().has_value() && !sol->uses_counts();
    if (rep.argmax_checked) {
        double step = std::numeric_limits<double>::infinity();
        for (std::size_t c = 1; c < st.candidates.size(); ++c)
            step = std::min(step, std::abs(st.candidates[c] - st.candidates[c - 1]));
        if (!std::isfinite(step)) step = 0.0;
        rep.argmax_ok = std::abs(st.candidates[rep.argmax] - rep.theta_star) <= step * (1.0 + 1e-9);
    }

    for (std::size_t k = 0; k <= n; ++k) rep.r_series.push_back({grid.time(k), acc.r_star[k].estimate()});
    rep.optimal_terminal = rep.r_series.back().r;
    rep.q_terminal_wealth = acc.q_wealth.estimate();
    for (std::size_t k : rep.checkpoints) {
        const auto& e = rep.r_series[k].r;
        if (std::abs(e.mean - rep.value) > 3.0 * e.se + 1e-12 * std::abs(rep.value)) ++rep.constancy_violations;
    }
    for (std::size_t j = 0; j < st.checkpoints; ++j)
        rep.suboptimal_series.push_back({grid.time(rep.checkpoints[j]), acc.r_sub[j].estimate()});
    for (const auto& s : acc.sub_steps)
        if (s.mean() > 3.0 * s.se() + 1e-15) ++rep.monotonicity_violations;
    return rep;
}

}  // namespace pelab
