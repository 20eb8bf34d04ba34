#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <type_traits>
#include <vector>

namespace pelab {

namespace detail {

template <class Scalar>
double to_double(const Scalar& x) {
    if constexpr (std::is_floating_point_v<Scalar>)
        return static_cast<double>(x);
    else
        return x.template convert_to<double>();
}

template <class Scalar>
Scalar magnitude(const Scalar& x) {
    return x < Scalar(0) ? Scalar(-x) : x;
}

}  // namespace detail

template <class Scalar>
struct LinearSolution {
    std::vector<Scalar> x;
    std::size_t rank = 0;
    std::vector<std::size_t> free_columns;  // set to zero
};

/// Solves the square system A x = b (A row-major, size n x n) by Gaussian
/// elimination with full pivoting. Columns beyond the numerical rank are
/// fixed at zero. Exact scalar types use an exact zero test; floating point
/// treats pivots below rel_tol * max|A| as zero.
template <class Scalar>
LinearSolution<Scalar> solve_full_pivot(std::vector<Scalar> a, std::vector<Scalar> b, std::size_t n,
                                        double rel_tol = 1e-13) {
    std::vector<std::size_t> col(n);
    std::iota(col.begin(), col.end(), std::size_t{0});

    Scalar scale(0);
    for (const auto& v : a)
        if (detail::magnitude(v) > scale) scale = detail::magnitude(v);
    const auto negligible = [&](const Scalar& v) {
        if constexpr (std::is_floating_point_v<Scalar>)
            return !(detail::magnitude(v) > rel_tol * scale) || scale == Scalar(0);
        else
            return v == Scalar(0);
    };

    std::size_t rank = 0;
    for (; rank < n; ++rank) {
        std::size_t pr = rank, pc = rank;
        Scalar best(0);
        for (std::size_t r = rank; r < n; ++r)
            for (std::size_t c = rank; c < n; ++c)
                if (detail::magnitude(a[r * n + c]) > best) {
                    best = detail::magnitude(a[r * n + c]);
                    pr = r;
                    pc = c;
                }
        if (negligible(best)) break;
        if (pr != rank) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[pr * n + c], a[rank * n + c]);
            std::swap(b[pr], b[rank]);
        }
        if (pc != rank) {
            for (std::size_t r = 0; r < n; ++r) std::swap(a[r * n + pc], a[r * n + rank]);
            std::swap(col[pc], col[rank]);
        }
        const Scalar pivot = a[rank * n + rank];
        for (std::size_t r = rank + 1; r < n; ++r) {
            if (a[r * n + rank] == Scalar(0)) continue;
            const Scalar factor = a[r * n + rank] / pivot;
            for (std::size_t c = rank; c < n; ++c) a[r * n + c] -= factor * a[rank * n + c];
            b[r] -= factor * b[rank];
        }
    }

    std::vector<Scalar> y(n, Scalar(0));
    for (std::size_t i = rank; i-- > 0;) {
        Scalar s = b[i];
        for (std::size_t c = i + 1; c < rank; ++c) s -= a[i * n + c] * y[c];
        y[i] = s / a[i * n + i];
    }

    LinearSolution<Scalar> out;
    out.x.assign(n, Scalar(0));
    out.rank = rank;
    for (std::size_t i = 0; i < n; ++i) {
        out.x[col[i]] = y[i];
        if (i >= rank) out.free_columns.push_back(col[i]);
    }
    return out;
}

}  // namespace pelab
