#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pelab/bsde/basis.hpp"
#include "pelab/bsde/generator.hpp"
#include "pelab/core/errors.hpp"
#include "pelab/core/grid.hpp"
#include "pelab/core/model.hpp"
#include "pelab/core/parallel.hpp"
#include "pelab/core/stats.hpp"
#include "pelab/core/validate.hpp"
#include "pelab/market/path_state.hpp"
#include "pelab/market/scenario.hpp"

namespace pelab {

struct LsmcSettings {
    std::size_t n_paths = 10000;
    int degree = 2;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    double max_condition = 1e12;
    std::size_t min_samples = 50;  // per regime and level, at least 10x the basis size
};

/// Value-function fit of one regime (pre- or post-default) at one level.
struct LevelFit {
    enum class Kind { none, exact, regression };
    Kind kind = Kind::none;
    PolynomialBasis basis;
    Eigen::VectorXd y;  // basis coefficients of Y
    Eigen::MatrixXd z;  // basis x d coefficients of Z
};

struct StepDiagnostics {
    double t = 0.0;
    MeanEstimate y;
    std::vector<double> z_mean;
    std::vector<double> w_mean;
    double w_def_mean = 0.0;
    std::size_t clamp_hits = 0;
    MeanEstimate martingale;  // mean of the re-read forward increment
};

/// Markov state in the solver's coordinates.
struct StateView {
    std::span<const double> log_s;
    std::span<const int> counts;
    bool post = false;
    double tau = std::numeric_limits<double>::infinity();
};

class BsdeSolution {
public:
    TimeGrid grid;
    Horizon horizon = Horizon::fixed_T;
    GeneratorSpec spec;
    ClaimSpec claim;
    double bound = 0.0;    // a-priori clamp on |Y|
    double z_bound = 0.0;  // clamp on each component of Z
    double y0 = 0.0;
    double y0_se = 0.0;
    std::size_t n_paths = 0;
    std::vector<LevelFit> pre, post;  // per node
    std::vector<StepDiagnostics> steps;
    std::vector<double> y_paths;  // n_paths x (n + 1)
    std::vector<std::string> warnings;
    std::size_t clamp_hits = 0;
    std::size_t z_clamp_hits = 0;
    bool saturated = false;
    std::size_t sparse_levels = 0;
    std::size_t martingale_violations = 0;
    double max_post_default_variation = 0.0;

    [[nodiscard]] double y_path(std::size_t p, std::size_t k) const { return y_paths[p * grid.n_nodes() + k]; }

    [[nodiscard]] bool uses_price() const { return claim.uses_price(); }
    [[nodiscard]] bool uses_counts() const { return claim.uses_jumps() && !spec.levy.empty(); }

    /// Feature vector of a state: log S (if the claim reads prices), jump
    /// counts (if it reads them), tau (post-default, if it reads tau).
    [[nodiscard]] std::size_t feature_count(bool post_regime) const {
        return (uses_price() ? spec.dimension : 0) + (uses_counts() ? spec.levy.size() : 0) +
               (post_regime && claim.uses_default_time() ? 1 : 0);
    }

    void features(const StateView& s, std::span<double> out) const {
        std::size_t i = 0;
        if (uses_price())
            for (double v : s.log_s) out[i++] = v;
        if (uses_counts())
            for (int c : s.counts) out[i++] = c;
        if (s.post && claim.uses_default_time()) out[i++] = s.tau;
    }

    /// Claim evaluated at a state (the exact value function at maturity).
    [[nodiscard]] double claim_at(const StateView& s) const {
        double price[16];
        for (std::size_t i = 0; i < s.log_s.size(); ++i) price[i] = std::exp(s.log_s[i]);
        ClaimInputs in;
        in.price = {price, s.log_s.size()};
        in.jump_counts = s.counts;
        in.defaulted = s.post;
        in.default_time = s.post ? s.tau : std::numeric_limits<double>::infinity();
        return claim.payoff(in);
    }

    /// Fitted Y at level k (falls back to the next later fitted level).
    [[nodiscard]] double value(std::size_t k, const StateView& s) const {
        const auto& fits = s.post ? post : pre;
        for (std::size_t j = k; j < fits.size(); ++j) {
            const auto& fit = fits[j];
            if (fit.kind == LevelFit::Kind::exact) return std::clamp(claim_at(s), -bound, bound);
            if (fit.kind == LevelFit::Kind::regression) {
                double f[16], b[256];
                features(s, {f, 16});
                fit.basis.evaluate({f, 16}, {b, fit.basis.size()});
                double v = 0.0;
                for (std::size_t t = 0; t < fit.basis.size(); ++t) v += b[t] * fit.y[static_cast<Eigen::Index>(t)];
                return std::clamp(v, -bound, bound);
            }
        }
        return std::clamp(claim_at(s), -bound, bound);
    }

    void z(std::size_t k, const StateView& s, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        if (horizon == Horizon::stopped && s.post) return;
        const auto& fits = s.post ? post : pre;
        for (std::size_t j = k; j + 1 < fits.size(); ++j) {
            const auto& fit = fits[j];
            if (fit.kind == LevelFit::Kind::exact) return;
            if (fit.kind != LevelFit::Kind::regression) continue;
            double f[16], b[256];
            features(s, {f, 16});
            fit.basis.evaluate({f, 16}, {b, fit.basis.size()});
            for (std::size_t d = 0; d < out.size(); ++d) {
                double v = 0.0;
                for (std::size_t t = 0; t < fit.basis.size(); ++t)
                    v += b[t] * fit.z(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d));
                out[d] = std::clamp(v, -z_bound, z_bound);
            }
            return;
        }
    }

    /// W_i at level k: value change of level k+1 when atom i fires.
    void w(std::size_t k, const StateView& s, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        if (!uses_counts() || (horizon == Horizon::stopped && s.post)) return;
        const double base = value(k + 1, s);
        int shifted[16];
        std::copy(s.counts.begin(), s.counts.end(), shifted);
        StateView t = s;
        t.counts = {shifted, s.counts.size()};
        for (std::size_t i = 0; i < out.size(); ++i) {
            ++shifted[i];
            out[i] = value(k + 1, t) - base;
            --shifted[i];
        }
    }

    /// W_def at level k: post-default value of level k+1 with default in the
    /// middle of the step minus the pre-default value.
    [[nodiscard]] double w_def(std::size_t k, const StateView& s) const {
        if (s.post || !spec.default_term) return 0.0;
        StateView d = s;
        d.post = true;
        d.tau = grid.time(k) + 0.5 * grid.dt();
        return value(k + 1, d) - value(k + 1, s);
    }

    /// Convenience overloads on a simulated path state.
    [[nodiscard]] double y_at(const PathState& ps) const {
        double ls[16];
        return value(ps.step, view(ps, ls));
    }
    void z_at(const PathState& ps, std::span<double> out) const {
        double ls[16];
        z(ps.step, view(ps, ls), out);
    }
    void w_at(const PathState& ps, std::span<double> out) const {
        double ls[16];
        w(ps.step, view(ps, ls), out);
    }
    [[nodiscard]] double w_def_at(const PathState& ps) const {
        double ls[16];
        return w_def(ps.step, view(ps, ls));
    }

    [[nodiscard]] StateView view(const PathState& ps, double* log_buf) const {
        for (std::size_t i = 0; i < ps.price.size(); ++i) log_buf[i] = std::log(ps.price[i]);
        return {std::span<const double>(log_buf, ps.price.size()), ps.jump_counts, ps.defaulted, ps.default_time};
    }
};

namespace detail {

/// Compact per-path data used by the backward induction.
struct LsmcSample {
    std::size_t n_paths = 0, n = 0, d = 1, m = 0;
    bool store_counts = false;
    std::vector<double> log_s;          // p x (n+1) x d
    std::vector<int> counts;            // p x (n+1) x m (if stored)
    std::vector<double> db;             // p x n x d
    std::vector<std::size_t> def_step;  // n+1 when no default by T
    std::vector<double> tau;
    std::vector<double> xi;

    [[nodiscard]] StateView state(std::size_t p, std::size_t k) const {
        StateView s;
        s.log_s = {log_s.data() + (p * (n + 1) + k) * d, d};
        if (store_counts) s.counts = {counts.data() + (p * (n + 1) + k) * m, m};
        s.post = def_step[p] <= k;
        s.tau = s.post ? tau[p] : std::numeric_limits<double>::infinity();
        return s;
    }
};

inline ClaimInputs terminal_inputs(const ScenarioBundle& b, const ClaimSpec& claim, Horizon horizon,
                                   std::vector<int>& scratch) {
    const std::size_t n = b.grid.n_steps();
    ClaimInputs in;
    const auto& rec = b.default_record;
    const bool stopped = horizon == Horizon::stopped || claim.measurability() == Measurability::stopped;
    if (stopped && rec.default_step) {
        in.price = b.price(*rec.default_step);
        scratch.assign(b.atom_count, 0);
        for (const auto& e : b.jumps)
            if (e.time < rec.tau) ++scratch[e.atom];
        in.jump_counts = scratch;
    } else {
        in.price = b.price(n);
        in.jump_counts = b.counts(n);
    }
    in.defaulted = rec.default_step.has_value();
    in.default_time = in.defaulted ? rec.tau : std::numeric_limits<double>::infinity();
    return in;
}

}  // namespace detail

/// Claim payoff on a simulated path, fixed or stopped horizon.
inline double claim_on_path(const ScenarioBundle& b, const ClaimSpec& claim, Horizon horizon = Horizon::fixed_T) {
    std::vector<int> scratch;
    return claim.payoff(detail::terminal_inputs(b, claim, horizon, scratch));
}

namespace detail {

inline LsmcSample simulate_sample(const ModelSpec& model, const TimeGrid& grid, const ClaimSpec& claim,
                                  Horizon horizon, const LsmcSettings& st) {
    LsmcSample s;
    s.n_paths = st.n_paths;
    s.n = grid.n_steps();
    s.d = model.market.dimension;
    s.m = model.levy.size();
    s.store_counts = claim.uses_jumps() && s.m > 0;
    s.log_s.resize(s.n_paths * (s.n + 1) * s.d);
    if (s.store_counts) s.counts.resize(s.n_paths * (s.n + 1) * s.m);
    s.db.resize(s.n_paths * s.n * s.d);
    s.def_step.resize(s.n_paths);
    s.tau.resize(s.n_paths);
    s.xi.resize(s.n_paths);
    const GridCoefficients coef(model.market, grid);
    parallel_for(s.n_paths, st.workers, [&](std::size_t p) {
        const auto b = simulate_path(model, grid, coef, st.seed, p);
        for (std::size_t k = 0; k <= s.n; ++k)
            for (std::size_t i = 0; i < s.d; ++i) s.log_s[(p * (s.n + 1) + k) * s.d + i] = std::log(b.price(k)[i]);
        if (s.store_counts) std::copy(b.jump_counts.begin(), b.jump_counts.end(), s.counts.begin() + static_cast<std::ptrdiff_t>(p * (s.n + 1) * s.m));
        std::copy(b.brownian.begin(), b.brownian.end(), s.db.begin() + static_cast<std::ptrdiff_t>(p * s.n * s.d));
        s.def_step[p] = b.default_record.default_step.value_or(s.n + 1);
        s.tau[p] = b.default_record.tau;
        std::vector<int> scratch;
        s.xi[p] = claim.payoff(terminal_inputs(b, claim, horizon, scratch));
    });
    return s;
}

struct StepAccumulator {
    RunningStats y, mart, integral, w_def;
    std::vector<RunningStats> z, w;
    std::size_t hits = 0;
    StepAccumulator& operator+=(const StepAccumulator& o) {
        y.merge(o.y);
        mart.merge(o.mart);
        integral.merge(o.integral);
        w_def.merge(o.w_def);
        if (z.size() < o.z.size()) z.resize(o.z.size());
        if (w.size() < o.w.size()) w.resize(o.w.size());
        for (std::size_t i = 0; i < o.z.size(); ++i) z[i].merge(o.z[i]);
        for (std::size_t i = 0; i < o.w.size(); ++i) w[i].merge(o.w[i]);
        hits += o.hits;
        return *this;
    }
};

}  // namespace detail

/// Least-squares Monte Carlo for the backward equation with the
/// exponential-utility generator. Pre- and post-default regimes are fitted
/// separately per level; the scheme is explicit (Z, W from level k+1).
inline BsdeSolution solve_bsde(const ModelSpec& model, const ClaimSpec& claim, const TimeGrid& grid,
                               const LsmcSettings& settings, Horizon horizon, bool default_term = true) {
    require_valid(validate_model(model, grid));
    if (settings.n_paths < 2) throw ValidationError("bsde", "need at least two paths");
    if (settings.degree < 0 || settings.degree > 4) throw ValidationError("bsde", "basis degree must be in [0, 4]");
    if (horizon == Horizon::stopped && claim.measurability() != Measurability::stopped)
        throw ValidationError("bsde", "random-horizon solve needs a claim tagged " + to_string(Measurability::stopped) +
                                          ", got " + to_string(claim.measurability()));
    const std::size_t d = model.market.dimension, m = model.levy.size();
    if (d + m + 1 > 16) throw ValidationError("bsde", "state dimension above 16 is not supported");

    BsdeSolution sol;
    sol.grid = grid;
    sol.horizon = horizon;
    sol.spec = GeneratorSpec::from_model(model, horizon);
    if (!default_term) sol.spec = sol.spec.market_problem();
    sol.claim = claim;
    sol.bound = apriori_bound(sol.spec, claim, grid.horizon());
    const double dt = grid.dt();
    sol.z_bound = 2.0 * sol.bound / std::sqrt(dt);
    sol.n_paths = settings.n_paths;

    const auto sample = detail::simulate_sample(model, grid, claim, horizon, settings);
    const std::size_t n = grid.n_steps(), N = settings.n_paths, nn = n + 1;
    const unsigned workers = settings.workers;
    sol.y_paths.assign(N * nn, 0.0);
    for (std::size_t p = 0; p < N; ++p) sol.y_paths[p * nn + n] = sample.xi[p];
    sol.pre.assign(nn, {});
    sol.post.assign(nn, {});
    sol.pre[n].kind = sol.post[n].kind = LevelFit::Kind::exact;
    sol.steps.resize(nn);

    std::vector<double> z_tmp(N * d), w_tmp(N * m), wdef_tmp(N), f_tmp(N);
    std::vector<std::size_t> pre_idx, post_idx;
    pre_idx.reserve(N);
    post_idx.reserve(N);
    const bool counts = sol.uses_counts();

    for (std::size_t k = n; k-- > 0;) {
        const double t = grid.time(k);
        const auto coef = sol.spec.at(t);
        const double q = sol.spec.default_term ? -std::expm1(-model.intensity.cumulative(t, grid.time(k + 1))) : 0.0;
        std::vector<double> mass(m);
        for (std::size_t i = 0; i < m; ++i) mass[i] = model.levy.atom(i).event_mass(t, grid.time(k + 1));

        pre_idx.clear();
        post_idx.clear();
        for (std::size_t p = 0; p < N; ++p) (sample.def_step[p] <= k ? post_idx : pre_idx).push_back(p);

        std::size_t level_hits = 0;
        for (int regime = 0; regime < 2; ++regime) {
            const bool post = regime == 1;
            const auto& idx = post ? post_idx : pre_idx;
            auto& fit = post ? sol.post[k] : sol.pre[k];
            if (idx.empty()) continue;

            if (post && horizon == Horizon::stopped) {
                fit.kind = LevelFit::Kind::exact;
                parallel_for(idx.size(), workers, [&](std::size_t i) {
                    const std::size_t p = idx[i];
                    sol.y_paths[p * nn + k] = sol.y_paths[p * nn + k + 1];
                    std::fill_n(z_tmp.begin() + static_cast<std::ptrdiff_t>(p * d), d, 0.0);
                    std::fill_n(w_tmp.begin() + static_cast<std::ptrdiff_t>(p * m), m, 0.0);
                    wdef_tmp[p] = f_tmp[p] = 0.0;
                });
                continue;
            }

            // Integrands and generator on each path of the regime.
            const auto integrands = [&](std::size_t p, std::span<const double> zp) {
                const auto s = sample.state(p, k);
                std::span<double> wp(w_tmp.data() + p * m, m);
                if (counts) sol.w(k, s, wp);
                else std::fill(wp.begin(), wp.end(), 0.0);
                wdef_tmp[p] = post ? 0.0 : sol.w_def(k, s);
                f_tmp[p] = generator_f(sol.spec, coef, zp, wp, wdef_tmp[p], !post);
            };

            const std::size_t nf = sol.feature_count(post);
            PolynomialBasis basis = fit_basis(std::span<const std::size_t>(idx), nf, settings.degree, workers,
                                              [&](std::size_t p, std::span<double> out) {
                                                  sol.features(sample.state(p, k), out);
                                              });
            if (basis.size() > 256) throw ValidationError("bsde", "regression basis above 256 terms; lower the degree");
            if (idx.size() < std::max(settings.min_samples, 10 * basis.size())) {
                // Too few paths to regress: pathwise explicit step with Z = 0.
                ++sol.sparse_levels;
                fit.kind = LevelFit::Kind::none;
                parallel_for(idx.size(), workers, [&](std::size_t i) {
                    const std::size_t p = idx[i];
                    std::span<double> zp(z_tmp.data() + p * d, d);
                    std::fill(zp.begin(), zp.end(), 0.0);
                    integrands(p, zp);
                    sol.y_paths[p * nn + k] = std::clamp(sol.y_paths[p * nn + k + 1] + f_tmp[p] * dt, -sol.bound, sol.bound);
                });
                continue;
            }

            // Design rows and the Z regression; lower the degree if ill-conditioned.
            std::vector<double> rows;
            Eigen::MatrixXd zcoef;
            std::unique_ptr<RegressionSolver> solver;
            for (;;) {
                const std::size_t P = basis.size();
                rows.assign(idx.size() * P, 0.0);
                parallel_for(idx.size(), workers, [&](std::size_t i) {
                    double f[16];
                    sol.features(sample.state(idx[i], k), {f, 16});
                    basis.evaluate({f, 16}, {rows.data() + i * P, P});
                });
                std::vector<std::size_t> pos(idx.size());
                std::iota(pos.begin(), pos.end(), std::size_t{0});
                const auto ne = ordered_accumulate(std::span<const std::size_t>(pos), workers, NormalEquations(P, d),
                                                   [&](std::size_t i, NormalEquations& acc) {
                                                       const std::size_t p = idx[i];
                                                       const auto s = sample.state(p, k);
                                                       const double diff = sol.y_paths[p * nn + k + 1] - sol.value(k + 1, s);
                                                       double target[16];
                                                       for (std::size_t j = 0; j < d; ++j)
                                                           target[j] = diff * sample.db[(p * n + k) * d + j] / dt;
                                                       acc.add({rows.data() + i * P, P}, {target, d});
                                                   });
                solver = std::make_unique<RegressionSolver>(ne);
                if (solver->condition() > settings.max_condition && basis.degree() > 0) {
                    sol.warnings.push_back("regression at t=" + std::to_string(t) + (post ? " (post-default)" : "") +
                                           " has condition number " + std::to_string(solver->condition()) +
                                           "; basis degree lowered to " + std::to_string(basis.degree() - 1));
                    basis = basis.with_degree(basis.degree() - 1);
                    continue;
                }
                if (!std::isfinite(solver->condition()))
                    throw NumericalError("bsde", "regression design is rank deficient at t=" + std::to_string(t));
                zcoef = solver->solve(ne.rhs);
                // Y does not depend on B when the claim ignores prices.
                if (!sol.uses_price()) zcoef.setZero();
                break;
            }
            const std::size_t P = basis.size();

            parallel_for(idx.size(), workers, [&](std::size_t i) {
                const std::size_t p = idx[i];
                std::span<double> zp(z_tmp.data() + p * d, d);
                for (std::size_t j = 0; j < d; ++j) {
                    double v = 0.0;
                    for (std::size_t c = 0; c < P; ++c) v += rows[i * P + c] * zcoef(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j));
                    zp[j] = v;
                }
                integrands(p, zp);
            });
            std::size_t zhits = 0;
            for (std::size_t p : idx)
                for (std::size_t j = 0; j < d; ++j) {
                    double& v = z_tmp[p * d + j];
                    if (std::abs(v) > sol.z_bound) {
                        ++zhits;
                        v = std::clamp(v, -sol.z_bound, sol.z_bound);
                    }
                }
            if (zhits > 0) {
                // Recompute f with the clamped Z on the affected paths.
                for (std::size_t p : idx)
                    f_tmp[p] = generator_f(sol.spec, coef, {z_tmp.data() + p * d, d}, {w_tmp.data() + p * m, m},
                                           wdef_tmp[p], !post);
                sol.z_clamp_hits += zhits;
            }

            struct YRhs {
                Eigen::VectorXd rhs;
                RunningStats target;
                YRhs& operator+=(const YRhs& o) {
                    rhs += o.rhs;
                    target.merge(o.target);
                    return *this;
                }
            };
            std::vector<std::size_t> pos(idx.size());
            std::iota(pos.begin(), pos.end(), std::size_t{0});
            const auto yr = ordered_accumulate(std::span<const std::size_t>(pos), workers,
                                               YRhs{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(P)), {}},
                                               [&](std::size_t i, YRhs& acc) {
                                                   const std::size_t p = idx[i];
                                                   const double target = sol.y_paths[p * nn + k + 1] + f_tmp[p] * dt;
                                                   for (std::size_t c = 0; c < P; ++c)
                                                       acc.rhs[static_cast<Eigen::Index>(c)] += rows[i * P + c] * target;
                                                   acc.target.add(target);
                                               });
            const Eigen::VectorXd ycoef = solver->solve(yr.rhs);
            fit.kind = LevelFit::Kind::regression;
            fit.basis = basis;
            fit.y = ycoef;
            fit.z = zcoef;
            if (k == 0 && !post) sol.y0_se = yr.target.se();

            std::vector<unsigned char> hit(idx.size(), 0);
            parallel_for(idx.size(), workers, [&](std::size_t i) {
                double v = 0.0;
                for (std::size_t c = 0; c < P; ++c) v += rows[i * P + c] * ycoef[static_cast<Eigen::Index>(c)];
                if (std::abs(v) > sol.bound) hit[i] = 1;
                sol.y_paths[idx[i] * nn + k] = std::clamp(v, -sol.bound, sol.bound);
            });
            for (auto h : hit) level_hits += h;
        }

        // Step diagnostics over all paths.
        std::vector<std::size_t> all(N);
        std::iota(all.begin(), all.end(), std::size_t{0});
        detail::StepAccumulator init;
        init.z.resize(d);
        init.w.resize(m);
        const auto acc = ordered_accumulate(std::span<const std::size_t>(all), workers, init,
                                            [&](std::size_t p, detail::StepAccumulator& a) {
                                                const double y0 = sol.y_paths[p * nn + k], y1 = sol.y_paths[p * nn + k + 1];
                                                double integral = 0.0;
                                                for (std::size_t j = 0; j < d; ++j) {
                                                    integral += z_tmp[p * d + j] * sample.db[(p * n + k) * d + j];
                                                    a.z[j].add(z_tmp[p * d + j]);
                                                }
                                                for (std::size_t i = 0; i < m; ++i) {
                                                    if (counts) {
                                                        const auto c0 = sample.counts[(p * nn + k) * m + i];
                                                        const auto c1 = sample.counts[(p * nn + k + 1) * m + i];
                                                        integral += w_tmp[p * m + i] * (static_cast<double>(c1 - c0) - mass[i]);
                                                    }
                                                    a.w[i].add(w_tmp[p * m + i]);
                                                }
                                                if (sample.def_step[p] > k) {
                                                    const double dh = sample.def_step[p] == k + 1 ? 1.0 : 0.0;
                                                    integral += wdef_tmp[p] * (dh - q);
                                                }
                                                const double r = y1 - y0 + f_tmp[p] * dt - integral;
                                                a.integral.add(integral);
                                                a.y.add(y0);
                                                a.w_def.add(wdef_tmp[p]);
                                                a.mart.add(r);
                                            });
        auto& step = sol.steps[k];
        step.t = t;
        step.y = acc.y.estimate();
        for (const auto& s : acc.z) step.z_mean.push_back(s.mean());
        for (const auto& s : acc.w) step.w_mean.push_back(s.mean());
        step.w_def_mean = acc.w_def.mean();
        step.clamp_hits = level_hits;
        step.martingale = acc.mart.estimate();
        {
            // se covers the stochastic-integral term as well
            const auto m_est = acc.integral.estimate();
            step.martingale.se = std::hypot(step.martingale.se, m_est.se);
        }
        if (std::abs(step.martingale.mean) > 3.0 * step.martingale.se + 1e-12) ++sol.martingale_violations;
        sol.clamp_hits += level_hits;
    }

    {
        RunningStats terminal;
        for (std::size_t p = 0; p < N; ++p) terminal.add(sample.xi[p]);
        auto& last = sol.steps[n];
        last.t = grid.horizon();
        last.y = terminal.estimate();
        last.z_mean.assign(d, 0.0);
        last.w_mean.assign(m, 0.0);
    }

    if (horizon == Horizon::stopped)
        for (std::size_t p = 0; p < N; ++p) {
            if (sample.def_step[p] > n) continue;
            const double ref = sol.y_paths[p * nn + sample.def_step[p]];
            for (std::size_t k = sample.def_step[p]; k <= n; ++k)
                sol.max_post_default_variation = std::max(sol.max_post_default_variation, std::abs(sol.y_paths[p * nn + k] - ref));
        }

    sol.y0 = sol.y_paths[0];
    if (static_cast<double>(sol.clamp_hits) > 0.01 * static_cast<double>(N * n)) {
        sol.saturated = true;
        sol.warnings.push_back("a-priori clamp active on " + std::to_string(sol.clamp_hits) + " of " +
                               std::to_string(N * n) + " samples");
    }
    return sol;
}

/// Fixed-horizon solve.
inline BsdeSolution solve_lsmc(const ModelSpec& model, const ClaimSpec& claim, const TimeGrid& grid,
                               const LsmcSettings& settings) {
    return solve_bsde(model, claim, grid, settings, Horizon::fixed_T);
}

/// Stopped generator 1_{[0, tau]} f with a claim observed at T ^ tau.
inline BsdeSolution solve_random_horizon(const ModelSpec& model, const ClaimSpec& claim, const TimeGrid& grid,
                                         const LsmcSettings& settings) {
    return solve_bsde(model, claim, grid, settings, Horizon::stopped);
}

}  // namespace pelab
