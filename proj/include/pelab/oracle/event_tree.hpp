#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pelab/core/errors.hpp"
#include "pelab/oracle/linear_solve.hpp"

namespace pelab {

inline constexpr std::size_t kTreeNodeCap = 10'000'000;

/// Scaffold of a serial event tree. Probabilities are given per step:
/// one probability per mark and one default probability q_k per step
/// (empty = no default branch). Up and down share what is left equally.
template <class Scalar>
struct TreeSpec {
    std::size_t depth = 1;
    Scalar dt = Scalar(1);
    Scalar delta = Scalar(1);
    std::vector<Scalar> marks;
    std::vector<Scalar> default_q;
    bool keep_null_branches = false;

    /// Probabilities from continuous-time rates: pi_i = 1 - exp(-rate_i dt),
    /// q = 1 - exp(-lambda dt), delta = sqrt(dt).
    static TreeSpec from_rates(std::size_t n, double dt, const std::vector<double>& mark_rates, double lambda)
        requires std::is_floating_point_v<Scalar>
    {
        TreeSpec s;
        s.depth = n;
        s.dt = dt;
        s.delta = std::sqrt(dt);
        for (double r : mark_rates) s.marks.push_back(-std::expm1(-r * dt));
        if (lambda > 0.0) s.default_q.assign(n, -std::expm1(-lambda * dt));
        return s;
    }
};

enum class Branch : std::uint8_t { root, up, down, mark, default_event };

struct TreeNode {
    std::uint32_t parent = 0;
    std::uint32_t first_child = 0;
    std::uint32_t n_children = 0;
    std::uint32_t level = 0;
    Branch branch = Branch::root;
    std::uint32_t mark = 0;       // atom index when branch == mark
    int position = 0;             // ups minus downs
    bool defaulted = false;
    int default_level = -1;       // level at which the default branch was taken

    [[nodiscard]] bool leaf() const noexcept { return n_children == 0; }
};

/// Full non-recombining serial tree stored level by level, so that node ids
/// increase with depth and children of a node are contiguous.
template <class Scalar>
class EventTree {
public:
    [[nodiscard]] const TreeSpec<Scalar>& spec() const noexcept { return spec_; }
    [[nodiscard]] std::size_t depth() const noexcept { return spec_.depth; }
    [[nodiscard]] std::size_t atom_count() const noexcept { return spec_.marks.size(); }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] const TreeNode& node(std::size_t id) const { return nodes_.at(id); }
    [[nodiscard]] const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    /// Probability of reaching `id` from its parent.
    [[nodiscard]] const Scalar& prob(std::size_t id) const { return prob_.at(id); }
    [[nodiscard]] std::span<const int> tally(std::size_t id) const {
        return {tally_.data() + id * atom_count(), atom_count()};
    }
    /// Node ids [begin, end) at level k.
    [[nodiscard]] std::pair<std::size_t, std::size_t> level_range(std::size_t k) const {
        if (k > depth()) throw ValidationError("oracle", "level " + std::to_string(k) + " out of range");
        return {level_start_[k], level_start_[k + 1]};
    }
    [[nodiscard]] std::size_t leaf_count() const { return level_start_[depth() + 1] - level_start_[depth()]; }

    [[nodiscard]] Scalar time(std::size_t id) const { return Scalar(static_cast<long>(nodes_[id].level)) * spec_.dt; }
    /// Brownian proxy B at the node: position * delta.
    [[nodiscard]] Scalar diffusion(std::size_t id) const { return Scalar(nodes_[id].position) * spec_.delta; }
    /// Increment of the Brownian proxy on the edge into `id`.
    [[nodiscard]] Scalar increment(std::size_t id) const {
        switch (nodes_[id].branch) {
            case Branch::up: return spec_.delta;
            case Branch::down: return Scalar(-spec_.delta);
            default: return Scalar(0);
        }
    }

    [[nodiscard]] std::string state_label(std::size_t id) const {
        const auto& nd = nodes_[id];
        std::ostringstream os;
        os << "B=" << nd.position << ";N=";
        const auto t = tally(id);
        for (std::size_t i = 0; i < t.size(); ++i) os << (i ? "," : "") << t[i];
        os << ";H=" << (nd.defaulted ? 1 : 0);
        return os.str();
    }

private:
    template <class S>
    friend EventTree<S> build_tree(const TreeSpec<S>& spec);

    TreeSpec<Scalar> spec_;
    std::vector<TreeNode> nodes_;
    std::vector<Scalar> prob_;
    std::vector<int> tally_;
    std::vector<std::size_t> level_start_;
};

template <class Scalar>
std::size_t tree_node_count(const TreeSpec<Scalar>& spec) {
    std::size_t live_marks = 0;
    for (const auto& p : spec.marks)
        if (spec.keep_null_branches || p > Scalar(0)) ++live_marks;
    double pre = 1.0, post = 0.0, total = 1.0;
    for (std::size_t k = 0; k < spec.depth; ++k) {
        const bool def = k < spec.default_q.size() && (spec.keep_null_branches || spec.default_q[k] > Scalar(0));
        const double next_post = post * static_cast<double>(2 + live_marks) + (def ? pre : 0.0);
        pre *= static_cast<double>(2 + live_marks);
        post = next_post;
        total += pre + post;
        if (total > static_cast<double>(kTreeNodeCap)) return std::numeric_limits<std::size_t>::max();
    }
    return static_cast<std::size_t>(total);
}

/// Builds the serial tree: each step is exactly one of up, down, mark_i or
/// default; no default branch after default. Null branches are omitted
/// unless keep_null_branches is set.
template <class Scalar>
EventTree<Scalar> build_tree(const TreeSpec<Scalar>& spec) {
    if (spec.depth == 0) throw ValidationError("oracle", "tree depth must be positive");
    if (!spec.default_q.empty() && spec.default_q.size() != spec.depth)
        throw ValidationError("oracle", "need one default probability per step");
    if (!(spec.delta > Scalar(0)) || !(spec.dt > Scalar(0)))
        throw ValidationError("oracle", "dt and delta must be positive");
    Scalar mark_mass(0);
    for (const auto& p : spec.marks) {
        if (p < Scalar(0)) throw ValidationError("oracle", "negative mark probability");
        mark_mass += p;
    }
    for (std::size_t k = 0; k < spec.default_q.size(); ++k) {
        const auto& q = spec.default_q[k];
        if (q < Scalar(0) || mark_mass + q > Scalar(1))
            throw ValidationError("oracle", "probability budget violated at step " + std::to_string(k));
    }
    if (mark_mass > Scalar(1)) throw ValidationError("oracle", "probability budget violated: marks exceed 1");

    const std::size_t count = tree_node_count(spec);
    if (count > kTreeNodeCap)
        throw ValidationError("oracle", "tree exceeds the node cap of " + std::to_string(kTreeNodeCap));

    const std::size_t m = spec.marks.size();
    EventTree<Scalar> tree;
    tree.spec_ = spec;
    tree.nodes_.reserve(count);
    tree.prob_.reserve(count);
    tree.tally_.reserve(count * m);
    tree.nodes_.push_back(TreeNode{});
    tree.prob_.push_back(Scalar(1));
    tree.tally_.resize(m, 0);
    tree.level_start_ = {0, 1};

    for (std::size_t k = 0; k < spec.depth; ++k) {
        const std::size_t begin = tree.level_start_[k], end = tree.level_start_[k + 1];
        const bool has_q = !spec.default_q.empty();
        const Scalar q = has_q ? spec.default_q[k] : Scalar(0);
        for (std::size_t id = begin; id < end; ++id) {
            const TreeNode parent = tree.nodes_[id];
            const bool def_branch = has_q && !parent.defaulted && (spec.keep_null_branches || q > Scalar(0));
            const Scalar diff_mass = Scalar(1) - mark_mass - (parent.defaulted ? Scalar(0) : q);
            const Scalar half = diff_mass / Scalar(2);
            tree.nodes_[id].first_child = static_cast<std::uint32_t>(tree.nodes_.size());

            auto add = [&](Branch br, std::uint32_t mark, const Scalar& p) {
                if (!spec.keep_null_branches && !(p > Scalar(0))) return;
                TreeNode c = parent;
                c.parent = static_cast<std::uint32_t>(id);
                c.first_child = 0;
                c.n_children = 0;
                c.level = static_cast<std::uint32_t>(k + 1);
                c.branch = br;
                c.mark = mark;
                if (br == Branch::up) ++c.position;
                if (br == Branch::down) --c.position;
                if (br == Branch::default_event) {
                    c.defaulted = true;
                    c.default_level = static_cast<int>(k + 1);
                }
                const std::size_t base = tree.tally_.size();
                tree.tally_.insert(tree.tally_.end(), tree.tally_.begin() + static_cast<std::ptrdiff_t>(id * m),
                                   tree.tally_.begin() + static_cast<std::ptrdiff_t>(id * m + m));
                if (br == Branch::mark) ++tree.tally_[base + mark];
                tree.nodes_.push_back(c);
                tree.prob_.push_back(p);
                ++tree.nodes_[id].n_children;
            };
            add(Branch::up, 0, half);
            add(Branch::down, 0, half);
            for (std::size_t i = 0; i < m; ++i) add(Branch::mark, static_cast<std::uint32_t>(i), spec.marks[i]);
            if (def_branch) add(Branch::default_event, 0, q);
        }
        tree.level_start_.push_back(tree.nodes_.size());
    }
    return tree;
}

/// Discrete hazard on the tree per level: the compensator sum q_j of H and
/// the log-survival -log prod(1 - q_j) = -log A_k.
struct TreeHazard {
    std::vector<double> compensator;
    std::vector<double> log_survival;
};

template <class Scalar>
TreeHazard tree_hazard(const TreeSpec<Scalar>& spec) {
    TreeHazard h;
    h.compensator.assign(spec.depth + 1, 0.0);
    h.log_survival.assign(spec.depth + 1, 0.0);
    for (std::size_t k = 0; k < spec.depth; ++k) {
        const double q = spec.default_q.empty() ? 0.0 : detail::to_double(spec.default_q[k]);
        h.compensator[k + 1] = h.compensator[k] + q;
        h.log_survival[k + 1] = h.log_survival[k] - std::log1p(-q);
    }
    return h;
}

}  // namespace pelab
