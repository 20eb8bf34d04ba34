#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pelab/core/errors.hpp"
#include "pelab/core/parallel.hpp"
#include "pelab/core/stats.hpp"

namespace pelab {

/// Monomials of total degree <= degree in standardized features. Features
/// that are constant on the sample are dropped.
class PolynomialBasis {
public:
    PolynomialBasis() = default;

    PolynomialBasis(std::vector<double> mean, std::vector<double> scale, std::vector<std::size_t> active, int degree)
        : mean_(std::move(mean)), scale_(std::move(scale)), active_(std::move(active)), degree_(degree) {
        std::vector<int> exps(active_.size(), 0);
        build(exps, 0, degree_);
    }

    [[nodiscard]] std::size_t size() const noexcept { return terms_.size(); }
    [[nodiscard]] int degree() const noexcept { return degree_; }
    [[nodiscard]] std::size_t active_features() const noexcept { return active_.size(); }

    void evaluate(std::span<const double> features, std::span<double> out) const {
        double z[16];
        for (std::size_t a = 0; a < active_.size(); ++a) z[a] = (features[active_[a]] - mean_[a]) / scale_[a];
        for (std::size_t t = 0; t < terms_.size(); ++t) {
            double v = 1.0;
            for (std::size_t a = 0; a < active_.size(); ++a)
                for (int e = 0; e < terms_[t][a]; ++e) v *= z[a];
            out[t] = v;
        }
    }

    /// Same standardization at a lower degree.
    [[nodiscard]] PolynomialBasis with_degree(int degree) const { return {mean_, scale_, active_, degree}; }

private:
    void build(std::vector<int>& exps, std::size_t pos, int remaining) {
        if (pos == exps.size()) {
            terms_.push_back(exps);
            return;
        }
        for (int e = 0; e <= remaining; ++e) {
            exps[pos] = e;
            build(exps, pos + 1, remaining - e);
        }
        exps[pos] = 0;
    }

    std::vector<double> mean_, scale_;
    std::vector<std::size_t> active_;
    int degree_ = 0;
    std::vector<std::vector<int>> terms_;
};

/// Chunk-ordered reduction over the items of `index`; results do not depend
/// on the worker count.
template <class T, class Body>
T ordered_accumulate(std::span<const std::size_t> index, unsigned workers, const T& init, Body&& body) {
    return ordered_reduce(
        index.size(), workers, init,
        [&](std::size_t b, std::size_t e) {
            T acc = init;
            for (std::size_t i = b; i < e; ++i) body(index[i], acc);
            return acc;
        },
        [](T& acc, const T& part) { acc += part; });
}

struct FeatureMoments {
    std::vector<RunningStats> stats;
    FeatureMoments& operator+=(const FeatureMoments& o) {
        if (stats.empty()) stats.resize(o.stats.size());
        for (std::size_t i = 0; i < o.stats.size(); ++i) stats[i].merge(o.stats[i]);
        return *this;
    }
};

/// Basis over the sample: `features(path, out)` writes p features.
template <class Features>
PolynomialBasis fit_basis(std::span<const std::size_t> index, std::size_t p, int degree, unsigned workers,
                          Features&& features) {
    FeatureMoments init;
    init.stats.resize(p);
    const auto m = ordered_accumulate(index, workers, init, [&](std::size_t path, FeatureMoments& acc) {
        double f[16];
        features(path, std::span<double>(f, p));
        for (std::size_t i = 0; i < p; ++i) acc.stats[i].add(f[i]);
    });
    std::vector<double> mean, scale;
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < p; ++i) {
        const double sd = std::sqrt(m.stats[i].variance());
        if (!(sd > 1e-12 * std::max(1.0, std::abs(m.stats[i].mean())))) continue;
        active.push_back(i);
        mean.push_back(m.stats[i].mean());
        scale.push_back(sd);
    }
    return {std::move(mean), std::move(scale), std::move(active), degree};
}

/// Normal equations B'B c = B'Y for several right-hand sides.
struct NormalEquations {
    Eigen::MatrixXd gram;
    Eigen::MatrixXd rhs;

    NormalEquations() = default;
    NormalEquations(std::size_t p, std::size_t r)
        : gram(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p))),
          rhs(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(r))) {}

    NormalEquations& operator+=(const NormalEquations& o) {
        gram += o.gram;
        rhs += o.rhs;
        return *this;
    }

    void add(std::span<const double> b, std::span<const double> y) {
        const auto p = static_cast<Eigen::Index>(b.size());
        for (Eigen::Index i = 0; i < p; ++i) {
            const double bi = b[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j <= i; ++j) gram(i, j) += bi * b[static_cast<std::size_t>(j)];
            for (Eigen::Index r = 0; r < rhs.cols(); ++r) rhs(i, r) += bi * y[static_cast<std::size_t>(r)];
        }
    }
};

/// Factorized Gram matrix with its condition number.
class RegressionSolver {
public:
    explicit RegressionSolver(const NormalEquations& ne) {
        gram_ = ne.gram.selfadjointView<Eigen::Lower>();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_, Eigen::EigenvaluesOnly);
        const auto& ev = eig.eigenvalues();
        cond_ = ev.size() == 0 ? 1.0 : (ev[0] > 0.0 ? ev[ev.size() - 1] / ev[0] : std::numeric_limits<double>::infinity());
        ldlt_.compute(gram_);
    }

    [[nodiscard]] double condition() const noexcept { return cond_; }

    [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return ldlt_.solve(rhs); }

private:
    Eigen::MatrixXd gram_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    double cond_ = 1.0;
};

}  // namespace pelab
