#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pelab/core/errors.hpp"

namespace pelab {

/// Deterministic nonnegative rate function of time with its integral.
///
/// Two representations:
///  - piecewise affine: lambda(t) = level_j + slope_j (t - start_j) on
///    [start_j, start_{j+1}); cumulative and inverse are closed form. Pieces
///    whose slope would drive the rate below zero are cut at the crossing and
///    continued at zero.
///  - general callable with a declared bound; the integral uses adaptive
///    Gauss-Kronrod at 1e-10 absolute accuracy and the inverse uses bisection.
class IntensitySpec {
public:
    struct Piece {
        double start = 0.0;
        double level = 0.0;
        double slope = 0.0;
    };

    IntensitySpec() = default;

    static IntensitySpec constant(double level) { return piecewise({{0.0, level, 0.0}}); }

    static IntensitySpec affine(double level, double slope) { return piecewise({{0.0, level, slope}}); }

    static IntensitySpec piecewise(std::vector<Piece> pieces) {
        if (pieces.empty() || pieces.front().start != 0.0)
            throw ValidationError("core", "piecewise intensity must start at t = 0");
        for (std::size_t j = 1; j < pieces.size(); ++j)
            if (!(pieces[j].start > pieces[j - 1].start))
                throw ValidationError("core", "piecewise intensity knots must be strictly increasing");
        for (const auto& p : pieces)
            if (!std::isfinite(p.level) || !std::isfinite(p.slope))
                throw ValidationError("core", "intensity coefficients must be finite");

        IntensitySpec spec;
        spec.pieces_.clear();
        for (std::size_t j = 0; j < pieces.size(); ++j) {
            const Piece p = pieces[j];
            const double end = j + 1 < pieces.size() ? pieces[j + 1].start
                                                     : std::numeric_limits<double>::infinity();
            spec.pieces_.push_back(p);
            if (p.slope < 0.0 && p.level >= 0.0) {
                const double zero_at = p.start + p.level / -p.slope;
                if (zero_at < end) spec.pieces_.push_back({zero_at, 0.0, 0.0});
            }
        }
        spec.prefix_.assign(spec.pieces_.size() + 1, 0.0);
        for (std::size_t j = 0; j + 1 < spec.pieces_.size(); ++j)
            spec.prefix_[j + 1] = spec.prefix_[j] + spec.piece_integral(j, spec.pieces_[j + 1].start);
        return spec;
    }

    static IntensitySpec general(std::function<double(double)> rate, double declared_max) {
        IntensitySpec spec;
        spec.pieces_.clear();
        spec.prefix_.clear();
        spec.general_ = std::make_shared<std::function<double(double)>>(std::move(rate));
        spec.declared_max_ = declared_max;
        return spec;
    }

    /// Overrides the bound that validation compares sampled rates against.
    IntensitySpec& declare_bound(double bound) {
        declared_max_ = bound;
        return *this;
    }

    [[nodiscard]] bool closed_form() const noexcept { return !general_; }

    [[nodiscard]] double rate(double t) const {
        if (general_) return (*general_)(t);
        const std::size_t j = piece_index(t);
        const auto& p = pieces_[j];
        return p.level + p.slope * (t - p.start);
    }

    /// Integral of the rate over [0, t].
    [[nodiscard]] double cumulative(double t) const {
        if (t <= 0.0) return 0.0;
        if (general_) return integrate_general(0.0, t);
        if (std::isinf(t)) {
            const auto& last = pieces_.back();
            return (last.level > 0.0 || last.slope > 0.0) ? std::numeric_limits<double>::infinity()
                                                           : prefix_[pieces_.size() - 1];
        }
        const std::size_t j = piece_index(t);
        return prefix_[j] + piece_integral(j, t);
    }

    /// Integral of the rate over [from, to].
    [[nodiscard]] double cumulative(double from, double to) const {
        if (general_) return to > from ? integrate_general(from, to) : 0.0;
        return cumulative(to) - cumulative(from);
    }

    /// Smallest t with cumulative(t) >= target; +inf if the target is never reached.
    [[nodiscard]] double inverse_cumulative(double target) const {
        if (target <= 0.0) return 0.0;
        if (general_) return invert_general(target);
        for (std::size_t j = 0; j < pieces_.size(); ++j) {
            const bool last = j + 1 == pieces_.size();
            const double reach = last ? std::numeric_limits<double>::infinity() : prefix_[j + 1];
            if (!last && reach < target) continue;
            const auto& p = pieces_[j];
            const double remaining = target - prefix_[j];
            double u = 0.0;
            if (p.slope == 0.0) {
                if (p.level <= 0.0) {
                    if (last) return std::numeric_limits<double>::infinity();
                    continue;
                }
                u = remaining / p.level;
            } else {
                const double disc = p.level * p.level + 2.0 * p.slope * remaining;
                if (disc < 0.0) return std::numeric_limits<double>::infinity();
                u = 2.0 * remaining / (p.level + std::sqrt(disc));
            }
            if (last || p.start + u <= pieces_[j + 1].start) return p.start + u;
            return pieces_[j + 1].start;
        }
        return std::numeric_limits<double>::infinity();
    }

    /// Supremum of the rate on [0, horizon]: exact for piecewise-affine rates,
    /// the declared bound for general ones (if a bound was declared for a
    /// piecewise rate, that bound is returned).
    [[nodiscard]] double sup_on(double horizon) const {
        if (general_ || std::isfinite(declared_max_)) return declared_max_;
        double best = 0.0;
        for (std::size_t j = 0; j < pieces_.size() && pieces_[j].start <= horizon; ++j) {
            const double end = j + 1 < pieces_.size() ? std::min(pieces_[j + 1].start, horizon) : horizon;
            best = std::max({best, pieces_[j].level, pieces_[j].level + pieces_[j].slope * (end - pieces_[j].start)});
        }
        return best;
    }

    [[nodiscard]] double declared_bound() const noexcept { return declared_max_; }

private:
    [[nodiscard]] std::size_t piece_index(double t) const {
        auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                                   [](double v, const Piece& p) { return v < p.start; });
        return it == pieces_.begin() ? 0 : static_cast<std::size_t>(it - pieces_.begin() - 1);
    }

    [[nodiscard]] double piece_integral(std::size_t j, double t) const {
        const auto& p = pieces_[j];
        const double u = t - p.start;
        return p.level * u + 0.5 * p.slope * u * u;
    }

    [[nodiscard]] double integrate_general(double a, double b) const {
        const auto& f = *general_;
        double error = 0.0;
        double total = 0.0;
        // unit sub-intervals keep the per-piece error target meaningful for long horizons
        for (double lo = a; lo < b;) {
            const double hi = std::min(b, std::floor(lo) + 1.0);
            total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, lo, hi, 20, 1e-13, &error);
            if (error > 1e-10)
                throw NumericalError("core", "intensity quadrature did not reach 1e-10 on [" +
                                                 std::to_string(lo) + ", " + std::to_string(hi) + "]");
            lo = hi;
        }
        return total;
    }

    [[nodiscard]] double invert_general(double target) const {
        double hi = 1.0;
        while (integrate_general(0.0, hi) < target) {
            hi *= 2.0;
            if (hi > 1e6) return std::numeric_limits<double>::infinity();
        }
        double lo = 0.0;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            (integrate_general(0.0, mid) < target ? lo : hi) = mid;
        }
        return hi;
    }

    std::vector<Piece> pieces_{{0.0, 0.0, 0.0}};
    std::vector<double> prefix_{0.0, 0.0};
    std::shared_ptr<std::function<double(double)>> general_;
    double declared_max_ = std::numeric_limits<double>::infinity();
};

}  // namespace pelab
