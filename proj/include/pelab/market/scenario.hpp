#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pelab/core/errors.hpp"
#include "pelab/core/grid.hpp"
#include "pelab/core/model.hpp"
#include "pelab/core/parallel.hpp"
#include "pelab/core/random.hpp"
#include "pelab/core/validate.hpp"
#include "pelab/enlargement/default_time.hpp"

namespace pelab {

/// Event of the auxiliary compound-Poisson process X.
struct JumpEvent {
    double time = 0.0;
    std::size_t step = 0;  // first grid node >= time
    std::size_t atom = 0;
};

/// One simulated scenario: Brownian and drift-adjusted increments, price
/// path, X events and the default record. Arrays are row-major per node.
struct ScenarioBundle {
    std::size_t path_id = 0;
    TimeGrid grid;
    std::size_t dimension = 1;
    std::size_t atom_count = 0;
    std::vector<double> brownian;   // n * d: Delta B_k
    std::vector<double> adjusted;   // n * d: Delta B^_k = Delta B_k + phi(t_k) dt
    std::vector<double> prices;     // (n + 1) * d
    std::vector<JumpEvent> jumps;   // sorted by time
    std::vector<int> jump_counts;   // (n + 1) * m, events with step <= k
    DefaultRecord default_record;

    [[nodiscard]] std::span<const double> dB(std::size_t k) const { return {brownian.data() + k * dimension, dimension}; }
    [[nodiscard]] std::span<const double> dB_hat(std::size_t k) const {
        return {adjusted.data() + k * dimension, dimension};
    }
    [[nodiscard]] std::span<const double> price(std::size_t k) const { return {prices.data() + k * dimension, dimension}; }
    [[nodiscard]] std::span<const int> counts(std::size_t k) const {
        return {jump_counts.data() + k * atom_count, atom_count};
    }
    /// H_k.
    [[nodiscard]] bool defaulted_at(std::size_t k) const noexcept { return default_record.defaulted_at_step(k); }
};

/// sigma(t_k), phi(t_k) and the Ito correction, evaluated once per grid.
class GridCoefficients {
public:
    GridCoefficients(const MarketSpec& market, const TimeGrid& grid) : d_(market.dimension) {
        const std::size_t n = grid.n_steps();
        sigma_.resize(n);
        phi_.resize(n * d_);
        half_var_.resize(n * d_);
        for (std::size_t k = 0; k < n; ++k) {
            const double t = grid.time(k);
            sigma_[k] = market.sigma(t);
            const Eigen::VectorXd p = market.phi(t);
            for (std::size_t i = 0; i < d_; ++i) {
                phi_[k * d_ + i] = p[static_cast<Eigen::Index>(i)];
                half_var_[k * d_ + i] = 0.5 * sigma_[k].row(static_cast<Eigen::Index>(i)).squaredNorm();
            }
        }
    }

    [[nodiscard]] const Eigen::MatrixXd& sigma(std::size_t k) const { return sigma_[k]; }
    [[nodiscard]] std::span<const double> phi(std::size_t k) const { return {phi_.data() + k * d_, d_}; }
    [[nodiscard]] std::span<const double> half_variance(std::size_t k) const { return {half_var_.data() + k * d_, d_}; }

private:
    std::size_t d_;
    std::vector<Eigen::MatrixXd> sigma_;
    std::vector<double> phi_;
    std::vector<double> half_var_;
};

/// Simulates path `path_id`. Brownian draws, the default threshold and each
/// atom's arrivals come from separate channels of the path's stream.
inline ScenarioBundle simulate_path(const ModelSpec& model, const TimeGrid& grid, const GridCoefficients& coef,
                                    std::uint64_t seed, std::size_t path_id) {
    const std::size_t n = grid.n_steps();
    const std::size_t d = model.market.dimension;
    const std::size_t m = model.levy.size();
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);

    ScenarioBundle b;
    b.path_id = path_id;
    b.grid = grid;
    b.dimension = d;
    b.atom_count = m;
    b.brownian.resize(n * d);
    b.adjusted.resize(n * d);
    b.prices.resize((n + 1) * d);

    auto dstream = derive_stream(seed, path_id, StreamChannel::default_time);
    b.default_record = sample_default(model.intensity, grid, dstream);

    for (std::size_t a = 0; a < m; ++a) {
        const auto& atom = model.levy.atom(a);
        auto js = derive_stream(seed, path_id, static_cast<std::uint32_t>(StreamChannel::jumps) + static_cast<std::uint32_t>(a));
        double level = 0.0;
        for (;;) {
            level += js.exponential();
            const double t = atom.density.inverse_cumulative(level / atom.weight);
            if (!(t <= grid.horizon())) break;
            b.jumps.push_back({t, grid.first_node_at_or_after(t), a});
        }
    }
    std::sort(b.jumps.begin(), b.jumps.end(), [](const JumpEvent& x, const JumpEvent& y) {
        return x.time < y.time || (x.time == y.time && x.atom < y.atom);
    });
    b.jump_counts.assign((n + 1) * m, 0);
    for (const auto& e : b.jumps)
        for (std::size_t k = e.step; k <= n; ++k) ++b.jump_counts[k * m + e.atom];

    auto bs = derive_stream(seed, path_id, StreamChannel::brownian);
    std::vector<double> log_s(d);
    for (std::size_t i = 0; i < d; ++i) {
        log_s[i] = std::log(model.market.s0[static_cast<Eigen::Index>(i)]);
        b.prices[i] = model.market.s0[static_cast<Eigen::Index>(i)];
    }
    for (std::size_t k = 0; k < n; ++k) {
        const auto phi = coef.phi(k);
        const auto half_var = coef.half_variance(k);
        const auto& sigma = coef.sigma(k);
        for (std::size_t j = 0; j < d; ++j) {
            const double db = sqrt_dt * bs.normal();
            b.brownian[k * d + j] = db;
            b.adjusted[k * d + j] = db + phi[j] * dt;
        }
        for (std::size_t i = 0; i < d; ++i) {
            double x = -half_var[i] * dt;
            for (std::size_t j = 0; j < d; ++j)
                x += sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * b.adjusted[k * d + j];
            log_s[i] += x;
            b.prices[(k + 1) * d + i] = std::exp(log_s[i]);
        }
    }
    return b;
}

/// n_paths scenarios; bundle p depends only on (seed, p), never on workers.
inline std::vector<ScenarioBundle> simulate(const ModelSpec& model, const TimeGrid& grid, std::size_t n_paths,
                                            std::uint64_t seed, unsigned workers = 1) {
    if (n_paths == 0) throw ValidationError("market", "n_paths must be positive");
    require_valid(validate_model(model, grid));
    const GridCoefficients coef(model.market, grid);
    std::vector<ScenarioBundle> out(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t p) { out[p] = simulate_path(model, grid, coef, seed, p); });
    return out;
}

/// Streams paths through map(bundle) -> T and folds results in path order.
/// Used where storing every bundle would be wasteful.
template <class T, class Map, class Combine>
T reduce_scenarios(const ModelSpec& model, const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                   unsigned workers, T init, Map&& map, Combine&& combine) {
    if (n_paths == 0) throw ValidationError("market", "n_paths must be positive");
    require_valid(validate_model(model, grid));
    const GridCoefficients coef(model.market, grid);
    return ordered_reduce(
        n_paths, workers, init,
        [&](std::size_t begin, std::size_t end) {
            T acc = init;
            for (std::size_t p = begin; p < end; ++p) combine(acc, map(simulate_path(model, grid, coef, seed, p)));
            return acc;
        },
        combine);
}

/// Discrete density exp(-sum phi.dB - 1/2 sum |phi|^2 dt) of the measure
/// under which B^ is a Brownian motion.
inline double girsanov_weight(const ScenarioBundle& b, const GridCoefficients& coef) {
    const double dt = b.grid.dt();
    double exponent = 0.0;
    for (std::size_t k = 0; k < b.grid.n_steps(); ++k) {
        const auto phi = coef.phi(k);
        const auto db = b.dB(k);
        for (std::size_t j = 0; j < b.dimension; ++j) exponent -= phi[j] * db[j] + 0.5 * phi[j] * phi[j] * dt;
    }
    return std::exp(exponent);
}

inline double girsanov_weight(const ScenarioBundle& b, const MarketSpec& market) {
    return girsanov_weight(b, GridCoefficients(market, b.grid));
}

}  // namespace pelab
