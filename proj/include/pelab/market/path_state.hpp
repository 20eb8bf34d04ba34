#pragma once

#include <limits>
#include <span>

#include "pelab/market/scenario.hpp"

namespace pelab {

/// Information available at grid node k of a path: the Markov state used by
/// feedback strategies and by the regression value functions.
struct PathState {
    std::size_t step = 0;
    double time = 0.0;
    std::span<const double> price;
    std::span<const int> jump_counts;
    bool defaulted = false;  // H_k
    double default_time = std::numeric_limits<double>::infinity();
};

inline PathState path_state(const ScenarioBundle& b, std::size_t k) {
    PathState s;
    s.step = k;
    s.time = b.grid.time(k);
    s.price = b.price(k);
    s.jump_counts = b.counts(k);
    s.defaulted = b.defaulted_at(k);
    s.default_time = s.defaulted ? b.default_record.tau : std::numeric_limits<double>::infinity();
    return s;
}

}  // namespace pelab
