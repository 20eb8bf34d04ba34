#pragma once

#include <vector>

#include "pelab/market/path_state.hpp"
#include "pelab/market/scenario.hpp"
#include "pelab/utility/strategy.hpp"

namespace pelab {

struct WealthPath {
    double initial = 0.0;
    std::vector<double> values;  // X_k, k = 0..n
};

/// X_{k+1} = X_k + theta_k . Delta B^_k with theta_k read at node k.
inline WealthPath wealth(const Strategy& strategy, const ScenarioBundle& b, double x) {
    if (strategy.dimension() != b.dimension)
        throw ValidationError("market", "strategy dimension does not match the market");
    const std::size_t n = b.grid.n_steps();
    WealthPath w;
    w.initial = x;
    w.values.resize(n + 1);
    w.values[0] = x;
    std::vector<double> theta(b.dimension);
    for (std::size_t k = 0; k < n; ++k) {
        strategy.evaluate(path_state(b, k), theta);
        const auto inc = b.dB_hat(k);
        double dx = 0.0;
        for (std::size_t j = 0; j < b.dimension; ++j) dx += theta[j] * inc[j];
        w.values[k + 1] = w.values[k] + dx;
    }
    return w;
}

}  // namespace pelab
