#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pelab/core/errors.hpp"
#include "pelab/oracle/event_tree.hpp"
#include "pelab/oracle/representation.hpp"

namespace pelab {

/// f(t, z, w_1..w_m, w_def, pre_default) on a one-dimensional tree.
using TreeGenerator = std::function<double(double, double, std::span<const double>, double, bool)>;

struct TreeBsdeResult {
    std::vector<double> y;                            // every node
    std::vector<NodeRepresentation<double>> integrands;  // internal nodes
    double max_residual = 0.0;

    [[nodiscard]] double y0() const { return y.front(); }
};

/// Discrete backward equation: Y = xi at the leaves and
/// Y_k = E[Y_{k+1} | node] + f(t_k, Z_k, W_k) dt with (Z, W) the exact
/// representation of Y_{k+1} - E[Y_{k+1} | node].
inline TreeBsdeResult tree_bsde(const EventTree<double>& tree, const std::vector<double>& leaves,
                                const TreeGenerator& f) {
    if (leaves.size() != tree.leaf_count())
        throw ValidationError("oracle", "expected " + std::to_string(tree.leaf_count()) + " leaf values");
    const double dt = tree.spec().dt;
    TreeBsdeResult out;
    out.y.assign(tree.size(), 0.0);
    out.integrands.resize(tree.size());
    const std::size_t first_leaf = tree.level_range(tree.depth()).first;
    std::copy(leaves.begin(), leaves.end(), out.y.begin() + static_cast<std::ptrdiff_t>(first_leaf));

    // Representation of Y_{k+1} around its conditional mean: place the mean
    // at the parent slot temporarily.
    for (std::size_t id = first_leaf; id-- > 0;) {
        const auto& nd = tree.node(id);
        double mean = 0.0;
        for (std::size_t c = nd.first_child; c < nd.first_child + nd.n_children; ++c) mean += tree.prob(c) * out.y[c];
        out.y[id] = mean;
        auto rep = represent_node(tree, id, std::span<const double>(out.y));
        double g = 0.0;
        try {
            g = f(tree.time(id), rep.k, rep.w, rep.w_def, !nd.defaulted);
        } catch (const Error& e) {
            throw NumericalError("oracle", "generator failed at node " + std::to_string(id) + " (level " +
                                               std::to_string(nd.level) + ", " + tree.state_label(id) +
                                               "): " + e.what());
        }
        out.max_residual = std::max(out.max_residual, rep.residual);
        out.y[id] = mean + g * dt;
        out.integrands[id] = std::move(rep);
    }
    return out;
}

}  // namespace pelab
