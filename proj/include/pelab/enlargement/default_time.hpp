#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "pelab/core/errors.hpp"
#include "pelab/core/grid.hpp"
#include "pelab/core/intensity.hpp"
#include "pelab/core/random.hpp"

namespace pelab {

/// Default time from the Cox construction: tau = inf{t : int_0^t lambda >= Theta}.
struct DefaultRecord {
    double tau = std::numeric_limits<double>::infinity();
    double threshold = std::numeric_limits<double>::infinity();
    /// First grid node with t_k >= tau, when tau <= T.
    std::optional<std::size_t> default_step;

    [[nodiscard]] bool defaulted_by(double t) const noexcept { return t >= tau; }
    /// H_k = 1{t_k >= tau} on the grid.
    [[nodiscard]] bool defaulted_at_step(std::size_t k) const noexcept { return default_step && k >= *default_step; }
};

/// A_t = P[tau > t | F_t] = exp(-int_0^t lambda) under the Cox construction.
inline double azema(const IntensitySpec& intensity, double t) {
    if (t < 0.0) throw ValidationError("enlargement", "Azema supermartingale needs t >= 0");
    return std::exp(-intensity.cumulative(t));
}

/// Default time for a given unit-exponential threshold.
inline DefaultRecord default_from_threshold(const IntensitySpec& intensity, const TimeGrid& grid, double threshold) {
    DefaultRecord rec;
    rec.threshold = threshold;
    rec.tau = intensity.inverse_cumulative(threshold);
    if (rec.tau <= grid.horizon()) rec.default_step = grid.first_node_at_or_after(rec.tau);
    return rec;
}

/// Draws Theta ~ Exp(1) from the stream and inverts the integrated hazard.
inline DefaultRecord sample_default(const IntensitySpec& intensity, const TimeGrid& grid, RandomStream& stream) {
    return default_from_threshold(intensity, grid, stream.exponential());
}

/// Grid images of the progressive-enlargement processes for one path.
struct EnlargementPaths {
    std::vector<double> survival;     // A_k
    std::vector<double> compensator;  // Lambda^G_k
    std::vector<double> indicator;    // H_k
    std::vector<double> martingale;   // M_k = H_k - Lambda_k
    std::vector<double> exponential;  // U_k = E(-M)_k
};

/// Computes A, Lambda^G, H, M and U = E(-M) on the grid. Lambda^G uses the
/// exact default time; U is the Doleans-Dade exponential of -M, i.e.
/// exp(continuous part of Lambda) times prod(1 - Delta H).
inline EnlargementPaths enlargement_paths(const DefaultRecord& rec, const IntensitySpec& intensity,
                                          const TimeGrid& grid) {
    const bool in_horizon = rec.tau <= grid.horizon();
    if (in_horizon != rec.default_step.has_value() ||
        (rec.default_step && *rec.default_step != grid.first_node_at_or_after(rec.tau)))
        throw ValidationError("enlargement", "default record was sampled on a different grid");

    const std::size_t n = grid.n_nodes();
    EnlargementPaths out;
    out.survival.resize(n);
    out.compensator.resize(n);
    out.indicator.resize(n);
    out.martingale.resize(n);
    out.exponential.resize(n);

    double jump_factor = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = grid.time(k);
        const double h = rec.defaulted_by(t) ? 1.0 : 0.0;
        const double prev_h = k == 0 ? 0.0 : out.indicator[k - 1];
        const double lambda = intensity.cumulative(std::min(t, rec.tau));
        out.survival[k] = std::exp(-intensity.cumulative(t));
        out.compensator[k] = lambda;
        out.indicator[k] = h;
        out.martingale[k] = h - lambda;
        jump_factor *= 1.0 - (h - prev_h);
        out.exponential[k] = jump_factor == 0.0 ? 0.0 : std::exp(lambda) * jump_factor;
    }
    return out;
}

}  // namespace pelab
