#pragma once

#include <algorithm>
#include <functional>
#include <span>
#include <vector>

#include "pelab/core/errors.hpp"
#include "pelab/oracle/event_tree.hpp"
#include "pelab/oracle/linear_solve.hpp"

namespace pelab {

/// Leaf values from a payoff evaluated at each leaf node id.
template <class Scalar, class Payoff>
std::vector<Scalar> tree_leaf_values(const EventTree<Scalar>& tree, Payoff&& payoff) {
    const auto [begin, end] = tree.level_range(tree.depth());
    std::vector<Scalar> out;
    out.reserve(end - begin);
    for (std::size_t id = begin; id < end; ++id) out.push_back(payoff(id));
    return out;
}

/// Conditional expectations of the leaf values at every node (martingale
/// closed by the leaves).
template <class Scalar>
std::vector<Scalar> tree_values(const EventTree<Scalar>& tree, std::span<const Scalar> leaves) {
    if (leaves.size() != tree.leaf_count())
        throw ValidationError("oracle", "expected " + std::to_string(tree.leaf_count()) + " leaf values, got " +
                                            std::to_string(leaves.size()));
    std::vector<Scalar> v(tree.size(), Scalar(0));
    const std::size_t first_leaf = tree.level_range(tree.depth()).first;
    std::copy(leaves.begin(), leaves.end(), v.begin() + static_cast<std::ptrdiff_t>(first_leaf));
    for (std::size_t id = first_leaf; id-- > 0;) {
        const auto& nd = tree.node(id);
        Scalar s(0);
        for (std::size_t c = nd.first_child; c < nd.first_child + nd.n_children; ++c) s += tree.prob(c) * v[c];
        v[id] = s;
    }
    return v;
}

template <class Scalar>
std::vector<Scalar> tree_values(const EventTree<Scalar>& tree, const std::vector<Scalar>& leaves) {
    return tree_values(tree, std::span<const Scalar>(leaves));
}

/// Values at the nodes of level k, in node order.
template <class Scalar>
std::vector<Scalar> tree_conditional_expectation(const EventTree<Scalar>& tree, const std::vector<Scalar>& leaves,
                                                 std::size_t k) {
    if (k > tree.depth()) throw ValidationError("oracle", "level " + std::to_string(k) + " out of range");
    const auto all = tree_values(tree, leaves);
    const auto [begin, end] = tree.level_range(k);
    return {all.begin() + static_cast<std::ptrdiff_t>(begin), all.begin() + static_cast<std::ptrdiff_t>(end)};
}

/// Integrands of one node's martingale increment:
/// Delta N = K Delta B + sum_i W_i (1{mark_i} - pi_i) + W_def (1{default} - q).
template <class Scalar>
struct NodeRepresentation {
    Scalar k = Scalar(0);
    std::vector<Scalar> w;
    Scalar w_def = Scalar(0);
    Scalar residual = Scalar(0);   // max over positive-probability children
    std::size_t rank = 0;          // dimension of the spanned increment space
    std::size_t outcomes = 0;      // positive-probability children
    std::size_t dropped = 0;       // basis directions without support
};

/// Compensated basis at a node, one column per direction: diffusion, each
/// mark, and default (only before default). Column j evaluated at child c.
template <class Scalar>
struct NodeBasis {
    std::size_t columns = 0;
    std::vector<Scalar> values;  // children x columns
};

template <class Scalar>
NodeBasis<Scalar> node_basis(const EventTree<Scalar>& tree, std::size_t id) {
    const auto& nd = tree.node(id);
    const std::size_t m = tree.atom_count();
    const bool pre = !nd.defaulted && !tree.spec().default_q.empty();
    const Scalar q = pre ? tree.spec().default_q[nd.level] : Scalar(0);
    NodeBasis<Scalar> b;
    b.columns = 1 + m + (pre ? 1 : 0);
    b.values.reserve(nd.n_children * b.columns);
    for (std::size_t c = nd.first_child; c < nd.first_child + nd.n_children; ++c) {
        const auto& ch = tree.node(c);
        b.values.push_back(tree.increment(c));
        for (std::size_t i = 0; i < m; ++i)
            b.values.push_back((ch.branch == Branch::mark && ch.mark == i ? Scalar(1) : Scalar(0)) - tree.spec().marks[i]);
        if (pre) b.values.push_back((ch.branch == Branch::default_event ? Scalar(1) : Scalar(0)) - q);
    }
    return b;
}

/// Represents the one-step increments of `values` (one per node) at node id
/// by weighted least squares on the compensated basis. On the serial tree
/// the basis spans the mean-zero increments, so the residual vanishes.
template <class Scalar>
NodeRepresentation<Scalar> represent_node(const EventTree<Scalar>& tree, std::size_t id,
                                          std::span<const Scalar> values) {
    const auto& nd = tree.node(id);
    if (nd.leaf()) throw ValidationError("oracle", "node " + std::to_string(id) + " is a leaf");
    const std::size_t m = tree.atom_count();
    const auto basis = node_basis(tree, id);
    const std::size_t p = basis.columns;

    std::vector<Scalar> gram(p * p, Scalar(0)), rhs(p, Scalar(0));
    NodeRepresentation<Scalar> rep;
    for (std::size_t j = 0; j < nd.n_children; ++j) {
        const std::size_t c = nd.first_child + j;
        const Scalar& pc = tree.prob(c);
        if (!(pc > Scalar(0))) continue;
        ++rep.outcomes;
        const Scalar inc = values[c] - values[id];
        const Scalar* e = basis.values.data() + j * p;
        for (std::size_t a = 0; a < p; ++a) {
            const Scalar pe = pc * e[a];
            rhs[a] += pe * inc;
            for (std::size_t b = 0; b < p; ++b) gram[a * p + b] += pe * e[b];
        }
    }
    const auto sol = solve_full_pivot(std::move(gram), std::move(rhs), p);
    rep.rank = sol.rank;
    rep.dropped = sol.free_columns.size();
    rep.k = sol.x[0];
    rep.w.assign(sol.x.begin() + 1, sol.x.begin() + 1 + static_cast<std::ptrdiff_t>(m));
    if (p > 1 + m) rep.w_def = sol.x[1 + m];

    for (std::size_t j = 0; j < nd.n_children; ++j) {
        const std::size_t c = nd.first_child + j;
        if (!(tree.prob(c) > Scalar(0))) continue;
        Scalar fit(0);
        const Scalar* e = basis.values.data() + j * p;
        for (std::size_t a = 0; a < p; ++a) fit += sol.x[a] * e[a];
        const Scalar err = detail::magnitude(Scalar(values[c] - values[id] - fit));
        if (err > rep.residual) rep.residual = err;
    }
    return rep;
}

/// Representation at every internal node of the martingale closed by the
/// given leaf values. Entries for leaves are left default-constructed.
template <class Scalar>
std::vector<NodeRepresentation<Scalar>> tree_representation(const EventTree<Scalar>& tree,
                                                            const std::vector<Scalar>& leaves) {
    const auto values = tree_values(tree, leaves);
    std::vector<NodeRepresentation<Scalar>> out(tree.size());
    const std::size_t first_leaf = tree.level_range(tree.depth()).first;
    for (std::size_t id = 0; id < first_leaf; ++id) out[id] = represent_node(tree, id, std::span<const Scalar>(values));
    return out;
}

/// Summary over all internal nodes.
struct RepresentationSummary {
    double max_residual = 0.0;
    bool spanning = true;       // rank == outcomes - 1 everywhere
    std::size_t nodes = 0;
    std::size_t dropped = 0;
};

template <class Scalar>
RepresentationSummary summarize(const EventTree<Scalar>& tree, const std::vector<NodeRepresentation<Scalar>>& reps) {
    RepresentationSummary s;
    for (std::size_t id = 0; id < tree.size(); ++id) {
        if (tree.node(id).leaf()) continue;
        const auto& r = reps[id];
        ++s.nodes;
        s.max_residual = std::max(s.max_residual, detail::to_double(r.residual));
        s.dropped += r.dropped;
        if (r.rank + 1 != r.outcomes) s.spanning = false;
    }
    return s;
}

}  // namespace pelab
