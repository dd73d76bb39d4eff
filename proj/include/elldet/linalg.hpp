#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "elldet/matrix.hpp"
#include "elldet/tracked_value.hpp"

namespace elldet {

template <typename Real = double>
struct DetResultT {
    TrackedValueT<Real> value;
    double growth_factor = 1.0; // element growth during elimination
    bool rank_deficient = false;
};

using DetResult = DetResultT<double>;

/// Pivot handling of det_lu. The default threshold implements the
/// exactly-singular detection the binomial family needs; the identity
/// checkers run on screened generic draws whose matrices are strongly
/// graded (legitimate pivots sit orders of magnitude below any norm), so
/// they disable the threshold instead of risking false deficiency.
struct PivotPolicy {
    double rtol = 1e-13;

    static PivotPolicy exact_only() { return {0.0}; }
};

/// Determinant by Gaussian elimination with partial pivoting on the entry
/// magnitudes. Exact-zero entries participate as true zeros; pole entries
/// are rejected. Rows and columns are equilibrated by exact powers of two
/// first, so neither the accumulated exponent nor the q-power grading of
/// the elliptic families can overflow or skew the pivot comparison.
template <typename Real>
DetResultT<Real> det_lu(const TrackedMatrixT<Real>& m, PivotPolicy pivot = {}) {
    using C = std::complex<Real>;
    if (m.rows() != m.cols()) throw std::invalid_argument("det_lu: matrix must be square");
    const std::size_t n = m.rows();
    DetResultT<Real> res;
    if (n == 0) return res; // empty product convention

    std::vector<C> a(n * n);
    std::int64_t exp_acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::int64_t emax = 0;
        bool any = false;
        for (std::size_t j = 0; j < n; ++j) {
            const auto& v = m.at(i, j);
            if (v.is_pole()) throw pole_error("det_lu: pole entry");
            if (!v.is_zero()) {
                emax = any ? std::max(emax, v.exp2()) : v.exp2();
                any = true;
            }
        }
        if (!any) {
            res.rank_deficient = true;
            res.value = TrackedValueT<Real>::exact_zero();
            return res;
        }
        exp_acc += emax;
        for (std::size_t j = 0; j < n; ++j) {
            const auto& v = m.at(i, j);
            a[i * n + j] = v.is_zero() ? C(Real(0), Real(0))
                                       : (v * tracked_ipow(C(Real(2), Real(0)), -emax)).value();
        }
    }

    auto scale_slice = [&](std::size_t start, std::size_t stride, int e) {
        for (std::size_t k = 0; k < n; ++k) {
            C& v = a[start + k * stride];
            v = C(real_ops<Real>::ldexp(v.real(), -e), real_ops<Real>::ldexp(v.imag(), -e));
        }
    };
    for (int pass = 0; pass < 4; ++pass) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            Real mx = Real(0);
            for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, cabs(a[i * n + j]));
            if (is_exact_zero(C(mx, Real(0)))) continue;
            int e = 0;
            real_ops<Real>::frexp(mx, &e);
            if (e != 0) {
                changed = true;
                exp_acc += e;
                scale_slice(i * n, 1, e);
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            Real mx = Real(0);
            for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, cabs(a[i * n + j]));
            if (is_exact_zero(C(mx, Real(0)))) continue;
            int e = 0;
            real_ops<Real>::frexp(mx, &e);
            if (e != 0) {
                changed = true;
                exp_acc += e;
                scale_slice(j, n, e);
            }
        }
        if (!changed) break;
    }

    Real max0 = Real(0), max_row_norm = Real(0);
    for (std::size_t i = 0; i < n; ++i) {
        Real rn = Real(0);
        for (std::size_t j = 0; j < n; ++j) {
            Real c = cabs(a[i * n + j]);
            max0 = std::max(max0, c);
            rn += c;
        }
        max_row_norm = std::max(max_row_norm, rn);
    }

    int sign = 1;
    TrackedValueT<Real> det = TrackedValueT<Real>::one();
    Real max_elem = max0;
    const Real threshold = static_cast<Real>(pivot.rtol) * max_row_norm;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        Real best = cabs(a[k * n + k]);
        for (std::size_t i = k + 1; i < n; ++i) {
            Real c = cabs(a[i * n + k]);
            if (c > best) {
                best = c;
                piv = i;
            }
        }
        if (is_exact_zero(C(best, Real(0))) || best < threshold) {
            res.rank_deficient = true;
            res.value = TrackedValueT<Real>::exact_zero();
            res.growth_factor =
                real_ops<Real>::to_double(max0 > Real(0) ? max_elem / max0 : Real(1));
            return res;
        }
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[piv * n + j]);
            sign = -sign;
        }
        const C pv = a[k * n + k];
        det *= pv;
        for (std::size_t i = k + 1; i < n; ++i) {
            const C mult = a[i * n + k] / pv;
            a[i * n + k] = C(Real(0), Real(0));
            if (is_exact_zero(mult)) continue;
            for (std::size_t j = k + 1; j < n; ++j) {
                a[i * n + j] -= mult * a[k * n + j];
                max_elem = std::max(max_elem, cabs(a[i * n + j]));
            }
        }
    }
    det *= tracked_ipow(C(Real(2), Real(0)), exp_acc);
    if (sign < 0) det = -det;
    res.value = det;
    res.growth_factor = real_ops<Real>::to_double(max0 > Real(0) ? max_elem / max0 : Real(1));
    return res;
}

/// A strictly increasing column subset k_0 < ... < k_{r-1} of {0..n-1}
/// together with its complement and the block-Laplace sign
/// (-1)^{C(r,2) + sum k_i}.
struct SubsetIndex {
    std::vector<int> ks;
    std::vector<int> complement;
    int n = 0;
    int sign = 1;
};

namespace detail {

inline SubsetIndex make_subset(const std::vector<int>& ks, int n) {
    SubsetIndex s;
    s.ks = ks;
    s.n = n;
    s.complement.reserve(static_cast<std::size_t>(n) - ks.size());
    std::size_t t = 0;
    long sum = 0;
    for (int v : ks) sum += v;
    for (int i = 0; i < n; ++i) {
        if (t < ks.size() && ks[t] == i) {
            ++t;
        } else {
            s.complement.push_back(i);
        }
    }
    long r = static_cast<long>(ks.size());
    s.sign = ((r * (r - 1) / 2 + sum) % 2 == 0) ? 1 : -1;
    return s;
}

inline bool next_combination(std::vector<int>& ks, int n) {
    int r = static_cast<int>(ks.size());
    for (int i = r - 1; i >= 0; --i) {
        if (ks[i] < n - r + i) {
            ++ks[i];
            for (int j = i + 1; j < r; ++j) ks[j] = ks[j - 1] + 1;
            return true;
        }
    }
    return false;
}

} // namespace detail

/// All C(n, r) subsets in lexicographic order.
inline std::vector<SubsetIndex> subsets(int n, int r) {
    if (r < 0 || r > n) throw std::invalid_argument("subsets: need 0 <= r <= n");
    std::vector<SubsetIndex> out;
    std::vector<int> ks(static_cast<std::size_t>(r));
    std::iota(ks.begin(), ks.end(), 0);
    do {
        out.push_back(detail::make_subset(ks, n));
    } while (detail::next_combination(ks, n));
    return out;
}

/// Visit subsets one at a time without materializing the list.
template <typename Fn>
void for_each_subset(int n, int r, Fn&& fn) {
    if (r < 0 || r > n) throw std::invalid_argument("for_each_subset: need 0 <= r <= n");
    std::vector<int> ks(static_cast<std::size_t>(r));
    std::iota(ks.begin(), ks.end(), 0);
    do {
        fn(detail::make_subset(ks, n));
    } while (detail::next_combination(ks, n));
}

/// Signed block Laplace expansion over the first `block_rows` rows:
/// sum over column subsets of sign * det(top minor) * det(bottom minor),
/// accumulated in lexicographic subset order. Each minor is a fresh copy.
template <typename Real, typename PerTerm>
TrackedValueT<Real> laplace_block_expand(const TrackedMatrixT<Real>& m, int block_rows,
                                         PerTerm&& per_term, PivotPolicy pivot = {}) {
    if (m.rows() != m.cols()) throw std::invalid_argument("laplace_block_expand: square only");
    const int n = static_cast<int>(m.rows());
    if (block_rows < 0 || block_rows > n)
        throw std::invalid_argument("laplace_block_expand: bad block size");
    std::vector<int> top_rows(static_cast<std::size_t>(block_rows));
    std::iota(top_rows.begin(), top_rows.end(), 0);
    std::vector<int> bottom_rows(static_cast<std::size_t>(n - block_rows));
    std::iota(bottom_rows.begin(), bottom_rows.end(), block_rows);

    TrackedSumT<Real> sum;
    for_each_subset(n, block_rows, [&](const SubsetIndex& s) {
        DetResultT<Real> d1 = det_lu(m.minor_at(top_rows, s.ks), pivot);
        DetResultT<Real> d2 = det_lu(m.minor_at(bottom_rows, s.complement), pivot);
        per_term(s, d1, d2);
        TrackedValueT<Real> term = d1.value * d2.value;
        if (s.sign < 0) term = -term;
        sum.add(term);
    });
    return sum.total();
}

template <typename Real>
TrackedValueT<Real> laplace_block_expand(const TrackedMatrixT<Real>& m, int block_rows) {
    return laplace_block_expand(
        m, block_rows, [](const SubsetIndex&, const DetResultT<Real>&, const DetResultT<Real>&) {});
}

} // namespace elldet
