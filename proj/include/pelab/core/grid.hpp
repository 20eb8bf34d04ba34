#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pelab/core/errors.hpp"

namespace pelab {

/// Uniform time grid t_k = k T / n on [0, T].
class TimeGrid {
public:
    TimeGrid() = default;
    TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {}

    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] std::size_t n_steps() const noexcept { return n_steps_; }
    [[nodiscard]] std::size_t n_nodes() const noexcept { return n_steps_ + 1; }
    [[nodiscard]] double dt() const noexcept { return horizon_ / static_cast<double>(n_steps_); }

    /// Node k; the last node is exactly T.
    [[nodiscard]] double time(std::size_t k) const noexcept {
        if (k >= n_steps_) return horizon_;
        return horizon_ * static_cast<double>(k) / static_cast<double>(n_steps_);
    }

    [[nodiscard]] std::vector<double> nodes() const {
        std::vector<double> out(n_nodes());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = time(k);
        return out;
    }

    /// First node index with t_k >= t, or n_nodes() when t > T.
    [[nodiscard]] std::size_t first_node_at_or_after(double t) const noexcept {
        if (t <= 0.0) return 0;
        if (t > horizon_) return n_nodes();
        auto k = static_cast<std::size_t>(std::ceil(t / dt()));
        if (k > n_steps_) k = n_steps_;
        while (k > 0 && time(k - 1) >= t) --k;
        while (k < n_steps_ && time(k) < t) ++k;
        return k;
    }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    double horizon_ = 1.0;
    std::size_t n_steps_ = 1;
};

inline TimeGrid build_grid(double horizon, long long n_steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw ValidationError("core", "time horizon must be positive, got " + std::to_string(horizon));
    if (n_steps < 1)
        throw ValidationError("core", "grid needs at least one step, got " + std::to_string(n_steps));
    return TimeGrid(horizon, static_cast<std::size_t>(n_steps));
}

}  // namespace pelab
