#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pelab/core/errors.hpp"
#include "pelab/oracle/event_tree.hpp"

namespace pelab {

struct TreeDpResult {
    double value = 0.0;           // -exp(-alpha x) G_0
    double y0 = 0.0;              // (1/alpha) log G_0
    std::vector<double> g;        // G at every node
    std::vector<double> theta;    // optimal position at internal nodes
};

namespace detail {

/// argmin over theta of sum_c p_c exp(log_g_c - a theta b_c), a > 0.
/// Works in log space; safeguarded Newton inside an expanding bracket.
inline std::pair<double, double> dp_node_minimize(const std::vector<double>& p, const std::vector<double>& log_g,
                                                  const std::vector<double>& b, double a, std::size_t node) {
    bool has_pos = false, has_neg = false;
    for (std::size_t c = 0; c < p.size(); ++c) {
        if (!(p[c] > 0.0)) continue;
        has_pos |= b[c] > 0.0;
        has_neg |= b[c] < 0.0;
    }
    const auto log_h = [&](double th) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < p.size(); ++c)
            if (p[c] > 0.0) mx = std::max(mx, std::log(p[c]) + log_g[c] - a * th * b[c]);
        double s = 0.0;
        for (std::size_t c = 0; c < p.size(); ++c)
            if (p[c] > 0.0) s += std::exp(std::log(p[c]) + log_g[c] - a * th * b[c] - mx);
        return mx + std::log(s);
    };
    if (!has_pos && !has_neg) return {0.0, log_h(0.0)};
    if (!(has_pos && has_neg))
        throw NumericalError("oracle", "no finite optimal position at node " + std::to_string(node) +
                                           ": adjusted increments all have one sign");

    // Derivatives of h scaled by exp(-log_h) at theta.
    const auto derivs = [&](double th, double& d1, double& d2) {
        const double lh = log_h(th);
        d1 = d2 = 0.0;
        for (std::size_t c = 0; c < p.size(); ++c) {
            if (!(p[c] > 0.0)) continue;
            const double w = std::exp(std::log(p[c]) + log_g[c] - a * th * b[c] - lh);
            d1 -= a * b[c] * w;
            d2 += a * a * b[c] * b[c] * w;
        }
    };

    double lo = -1.0, hi = 1.0, d1 = 0.0, d2 = 0.0;
    for (int i = 0;; ++i) {
        derivs(lo, d1, d2);
        if (d1 < 0.0) break;
        lo *= 2.0;
        if (i > 200) throw NumericalError("oracle", "bracket search failed at node " + std::to_string(node));
    }
    for (int i = 0;; ++i) {
        derivs(hi, d1, d2);
        if (d1 > 0.0) break;
        hi *= 2.0;
        if (i > 200) throw NumericalError("oracle", "bracket search failed at node " + std::to_string(node));
    }
    double th = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        derivs(th, d1, d2);
        if (d1 > 0.0) hi = th; else lo = th;
        double next = d2 > 0.0 ? th - d1 / d2 : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double step = std::abs(next - th);
        th = next;
        if (step <= 1e-12 * std::max(1.0, std::abs(th)) || hi - lo <= 1e-15 * std::max(1.0, std::abs(th)))
            return {th, log_h(th)};
    }
    throw NumericalError("oracle", "safeguarded Newton did not converge at node " + std::to_string(node));
}

}  // namespace detail

/// Exponential-utility dynamic programming on the tree. With the value
/// written as -exp(-alpha X) G, G_n = exp(alpha xi) and
/// G_k = min_theta sum_c p_c exp(-alpha theta dB^_c) G_c where
/// dB^_c = dB_c + phi dt. One risky asset with unit volatility in B.
inline TreeDpResult tree_dp_optimize(const EventTree<double>& tree, const std::vector<double>& leaves, double alpha,
                                     double x, double phi) {
    if (!(alpha > 0.0)) throw ValidationError("oracle", "alpha must be positive");
    if (leaves.size() != tree.leaf_count())
        throw ValidationError("oracle", "expected " + std::to_string(tree.leaf_count()) + " leaf values");
    const double dt = tree.spec().dt;
    TreeDpResult out;
    std::vector<double> log_g(tree.size(), 0.0);
    out.theta.assign(tree.size(), 0.0);
    const std::size_t first_leaf = tree.level_range(tree.depth()).first;
    for (std::size_t j = 0; j < leaves.size(); ++j) log_g[first_leaf + j] = alpha * leaves[j];

    std::vector<double> p, lg, b;
    for (std::size_t id = first_leaf; id-- > 0;) {
        const auto& nd = tree.node(id);
        p.clear();
        lg.clear();
        b.clear();
        for (std::size_t c = nd.first_child; c < nd.first_child + nd.n_children; ++c) {
            p.push_back(tree.prob(c));
            lg.push_back(log_g[c]);
            b.push_back(tree.increment(c) + phi * dt);
        }
        const auto [th, lh] = detail::dp_node_minimize(p, lg, b, alpha, id);
        out.theta[id] = th;
        log_g[id] = lh;
    }
    out.g.resize(tree.size());
    for (std::size_t i = 0; i < tree.size(); ++i) out.g[i] = std::exp(log_g[i]);
    out.y0 = log_g[0] / alpha;
    out.value = -std::exp(-alpha * x + log_g[0]);
    return out;
}

}  // namespace pelab
