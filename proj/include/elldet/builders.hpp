#pragma once

#include <array>
#include <complex>
#include <stdexcept>

#include "elldet/matrix.hpp"
#include "elldet/monomial.hpp"
#include "elldet/theta.hpp"

namespace elldet {

// ---------------------------------------------------------------------------
// Parameter bundles
// ---------------------------------------------------------------------------

struct SylvesterBinomialParams {
    cplx s1, s2;
    int r1 = 0, r2 = 0;
};

struct HypergeomParams {
    cplx s1, s2;
    int r1 = 0, r2 = 0;
};

struct EllipticFParams {
    BaseNome bn;
    cplx s1, s2, t1, t2;
    int r1 = 0, r2 = 0;
};

/// Parameters of the two q-hypergeometric (p = 0) families.
struct UVParams {
    BaseNome bn; // bn.p must be exactly 0
    cplx s1, s2;
    int r1 = 0, r2 = 0;
};

struct EllipticGParams {
    BaseNome bn;
    cplx a, b, c, d, e, f;
    int r1 = 0, r2 = 0;

    /// lambda = a^2 q^{2-r2} / (b c d), always recomputed.
    cplx lambda() const { return lambda_as<double>(); }

    /// Same quantity at backend precision; identities that hold only for
    /// the exact lambda must not round it through double.
    template <typename Real>
    std::complex<Real> lambda_as() const {
        using C = std::complex<Real>;
        const C ar = to_real_complex<Real>(a);
        C v = ar * ar / (to_real_complex<Real>(b) * to_real_complex<Real>(c) *
                         to_real_complex<Real>(d));
        int m = 2 - r2;
        const C qr = to_real_complex<Real>(bn.q);
        C base = m < 0 ? C(Real(1), Real(0)) / qr : qr;
        for (int k = std::abs(m); k > 0; --k) v *= base;
        return v;
    }
};

namespace detail {

inline void check_dims(int r1, int r2, const char* who) {
    if (r1 < 0 || r2 < 0 || r1 + r2 < 1)
        throw std::invalid_argument(std::string(who) + ": need r1, r2 >= 0 and r1 + r2 >= 1");
}

/// Per-build cache of prefix factorial tables, keyed by the parameter
/// exponent vector of the argument family. The q-exponent of the argument
/// monomial folds into the table's absolute exponent window, so all blocks
/// of a matrix share tables for common families.
template <std::size_t N, typename Real>
class FamilyCache {
public:
    FamilyCache(std::span<const cplx> vals, const BaseNome& bn, const TruncationPolicy& pol)
        : vals_(vals), bn_(bn), pol_(pol) {}

    /// Table over absolute exponents [lo, hi] for the family of `mon`
    /// (its own q-exponent included in the caller's shift, not the key).
    const PrefixFactorial<Real>& table(const Monomial<N>& mon, int lo, int hi) {
        for (auto& e : entries_) {
            if (e.deg == mon.deg) {
                if (lo >= e.lo && hi <= e.hi) return e.table;
                e.lo = std::min(e.lo, lo);
                e.hi = std::max(e.hi, hi);
                e.table = make(mon, e.lo, e.hi);
                return e.table;
            }
        }
        entries_.push_back({mon.deg, lo, hi, make(mon, lo, hi)});
        return entries_.back().table;
    }

    /// (family(mon) q^{mon.qexp + shift})_k via the cached table. `lo` and
    /// `hi` bound shift and shift+k over the caller's loop; the monomial's
    /// own q-exponent offsets them into the absolute window.
    TrackedValueT<Real> fact(const Monomial<N>& mon, int shift, long k, int lo, int hi) {
        return table(mon, mon.qexp + lo, mon.qexp + hi).fact(mon.qexp + shift, k);
    }

private:
    struct Entry {
        std::array<int, N> deg;
        int lo, hi;
        PrefixFactorial<Real> table;
    };

    PrefixFactorial<Real> make(const Monomial<N>& mon, int lo, int hi) const {
        Monomial<N> base = mon;
        base.qexp = 0;
        return PrefixFactorial<Real>(base.template bind<Real>(vals_), lo, hi, bn_, pol_);
    }

    std::span<const cplx> vals_;
    BaseNome bn_;
    TruncationPolicy pol_;
    std::vector<Entry> entries_;
};

/// Fills `rows0 .. rows0+R2-1` of `out` with the four-parameter entry
/// family at slots (s1, s2, t1, t2) and block dimensions (R1, R2).
/// Out-of-band indices produce reciprocal poles of (q)_k which surface as
/// exact-zero entries.
template <std::size_t N, typename Real>
void fill_f_block(TrackedMatrixT<Real>& out, int rows0, const Monomial<N>& s1,
                  const Monomial<N>& s2, const Monomial<N>& t1, const Monomial<N>& t2, int R1,
                  int R2, FamilyCache<N, Real>& cache, const BaseNome& bn) {
    const int n = static_cast<int>(out.cols());
    const Monomial<N> unit_q = Monomial<N>::qpow(1);
    const Monomial<N> s12 = s1 * s2;
    const Monomial<N> w = s1 * s2.pow(2) / (t1 * t2);
    const auto q = to_real_complex<Real>(bn.q);
    const int qlo = -n - 1, qhi = 2 * n + 1;
    const int plo = 0, phi = n + 1;
    const int wlo = R1 - R2 - 1, whi = R1 - R2 + n + 1;
    const int slo = -2, shi = R1 + 2 * n + 1;

    for (int i = 0; i < R2; ++i) {
        for (int j = 0; j < n; ++j) {
            const int d = j - i;
            TrackedValueT<Real> v =
                tracked_ipow(q, binom2(d) + static_cast<long>(R2) * d);
            v *= cache.fact(unit_q, 0, R1, qlo, qhi);
            v /= cache.fact(unit_q, 0, R1 - d, qlo, qhi);
            v *= cache.fact(s1, i, d, plo, phi);
            v *= cache.fact(t1, i, d, plo, phi);
            v *= cache.fact(t2, i, d, plo, phi);
            v *= cache.fact(w, R1 - R2 + i, d, wlo, whi);
            v /= cache.fact(unit_q, 0, d, qlo, qhi);
            v /= cache.fact(s12, i + j - 1, d, slo, shi);
            v /= cache.fact(s12, R1 + 2 * i, d, slo, shi);
            out.at(static_cast<std::size_t>(rows0 + i), static_cast<std::size_t>(j)) = v;
        }
    }
}

/// Same for the six-parameter entry family at slots (a; b, c, d, e, f).
template <std::size_t N, typename Real>
void fill_g_block(TrackedMatrixT<Real>& out, int rows0, const Monomial<N>& a,
                  const Monomial<N>& b, const Monomial<N>& c, const Monomial<N>& d,
                  const Monomial<N>& e, const Monomial<N>& f, int R1, int R2,
                  FamilyCache<N, Real>& cache, const BaseNome& bn) {
    const int n = static_cast<int>(out.cols());
    const Monomial<N> unit_q = Monomial<N>::qpow(1);
    const Monomial<N> sixth = a.pow(3) / (b * c * d * e * f);
    const auto q = to_real_complex<Real>(bn.q);
    const int qlo = -n - 1, qhi = 2 * n + 1;
    const int plo = 0, phi = n + 1;
    const int xlo = R1 - R2 + 2, xhi = R1 - R2 + n + 4;
    const int alo = 0, ahi = R1 + 2 * n + 2;

    for (int i = 0; i < R2; ++i) {
        for (int j = 0; j < n; ++j) {
            const int k = j - i;
            TrackedValueT<Real> v =
                tracked_ipow(q, binom2(k) + static_cast<long>(R2) * k);
            v *= cache.fact(unit_q, 0, R1, qlo, qhi);
            v /= cache.fact(unit_q, 0, R1 - k, qlo, qhi);
            for (const Monomial<N>* m : {&b, &c, &d, &e, &f}) v *= cache.fact(*m, i, k, plo, phi);
            v *= cache.fact(sixth, R1 - R2 + i + 3, k, xlo, xhi);
            v /= cache.fact(unit_q, 0, k, qlo, qhi);
            v /= cache.fact(a, i + j, k, alo, ahi);
            v /= cache.fact(a, R1 + 2 * i + 1, k, alo, ahi);
            out.at(static_cast<std::size_t>(rows0 + i), static_cast<std::size_t>(j)) = v;
        }
    }
}

/// The q-hypergeometric limit entries (p = 0).
template <std::size_t N, typename Real>
void fill_u_block(TrackedMatrixT<Real>& out, int rows0, const Monomial<N>& s1,
                  const Monomial<N>& s2, int R1, int R2, FamilyCache<N, Real>& cache,
                  const BaseNome& bn) {
    const int n = static_cast<int>(out.cols());
    const Monomial<N> unit_q = Monomial<N>::qpow(1);
    const Monomial<N> s12 = s1 * s2;
    const auto q = to_real_complex<Real>(bn.q);
    const int qlo = -n - 1, qhi = 2 * n + 1;
    const int plo = 0, phi = n + 1;
    const int slo = -2, shi = R1 + 2 * n + 1;

    for (int i = 0; i < R2; ++i) {
        for (int j = 0; j < n; ++j) {
            const int d = j - i;
            TrackedValueT<Real> v = tracked_ipow(q, binom2(d));
            v *= cache.fact(unit_q, 0, R1, qlo, qhi);
            v /= cache.fact(unit_q, 0, R1 - d, qlo, qhi);
            v *= cache.fact(s1, i, d, plo, phi);
            v /= cache.fact(unit_q, 0, d, qlo, qhi);
            v /= cache.fact(s12, i + j - 1, d, slo, shi);
            v /= cache.fact(s12, R1 + 2 * i, d, slo, shi);
            out.at(static_cast<std::size_t>(rows0 + i), static_cast<std::size_t>(j)) = v;
        }
    }
}

inline cplx rising_factorial(cplx x, int k) {
    cplx v(1.0, 0.0);
    for (int j = 0; j < k; ++j) v *= x + static_cast<double>(j);
    return v;
}

inline void require_p_zero(const BaseNome& bn, const char* who) {
    if (bn.p != cplx(0.0, 0.0))
        throw std::domain_error(std::string(who) + ": requires bn.p = 0");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

/// Two-block binomial Sylvester matrix: rows of binomial coefficients times
/// powers of s1 (first r2 rows) and of s2 (last r1 rows).
template <typename Real = double>
TrackedMatrixT<Real> build_B(const SylvesterBinomialParams& p) {
    detail::check_dims(p.r1, p.r2, "build_B");
    const int n = p.r1 + p.r2;
    TrackedMatrixT<Real> m(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
    auto fill = [&](int row, int local, cplx s, int r) {
        for (int j = 0; j < n; ++j) {
            long c = binom(r, j - local);
            if (c == 0) continue;
            m.at(static_cast<std::size_t>(row), static_cast<std::size_t>(j)) =
                TrackedValueT<Real>::of(std::complex<Real>(Real(c), Real(0))) *
                tracked_ipow(to_real_complex<Real>(s), j - local);
        }
    };
    for (int i = 0; i < p.r2; ++i) fill(i, i, p.s1, p.r1);
    for (int i = p.r2; i < n; ++i) fill(i, i - p.r2, p.s2, p.r2);
    return m;
}

/// Two-block matrix of rising-factorial ratios, with alternating signs in
/// the lower block.
template <typename Real = double>
TrackedMatrixT<Real> build_M(const HypergeomParams& p) {
    detail::check_dims(p.r1, p.r2, "build_M");
    using C = std::complex<Real>;
    const int n = p.r1 + p.r2;
    auto rising = [](C x, int k) {
        C v(Real(1), Real(0));
        for (int j = 0; j < k; ++j) v *= x + C(Real(j), Real(0));
        return v;
    };
    auto entry = [&](int i, int j, cplx s1d, cplx s2d, int r) -> TrackedValueT<Real> {
        long c = binom(r, j - i);
        if (c == 0) return TrackedValueT<Real>::exact_zero();
        C s1 = to_real_complex<Real>(s1d), s2 = to_real_complex<Real>(s2d);
        TrackedValueT<Real> v = TrackedValueT<Real>::of(C(Real(c), Real(0)));
        v *= TrackedValueT<Real>::of(rising(s1 + C(Real(i), Real(0)), j - i));
        v /= TrackedValueT<Real>::of(rising(s1 + s2 + C(Real(i + j - 1), Real(0)), j - i));
        v /= TrackedValueT<Real>::of(rising(s1 + s2 + C(Real(r + 2 * i), Real(0)), j - i));
        return v;
    };
    TrackedMatrixT<Real> m(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
    for (int i = 0; i < p.r2; ++i)
        for (int j = 0; j < n; ++j)
            m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                entry(i, j, p.s1, p.s2, p.r1);
    for (int i = p.r2; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            TrackedValueT<Real> e = entry(i - p.r2, j, p.s2, p.s1, p.r2);
            if ((j - i - p.r2) % 2 != 0) e = -e;
            m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = e;
        }
    return m;
}

/// The elliptic Sylvesteresque matrix of the four-parameter family.
template <typename Real = double>
TrackedMatrixT<Real> build_F(const EllipticFParams& p, const TruncationPolicy& pol = {}) {
    detail::check_dims(p.r1, p.r2, "build_F");
    using M = Monomial<4>;
    const std::array<cplx, 4> vals{p.s1, p.s2, p.t1, p.t2};
    const M S1 = M::param(0), S2 = M::param(1), T1 = M::param(2), T2 = M::param(3);
    const int n = p.r1 + p.r2;
    TrackedMatrixT<Real> m(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
    detail::FamilyCache<4, Real> cache(vals, p.bn, pol);
    detail::fill_f_block(m, 0, S1, S2, T1, T2, p.r1, p.r2, cache, p.bn);
    detail::fill_f_block(m, p.r2, S2, S1, S1 * S2 / T1, S1 * S2 / T2, p.r2, p.r1, cache, p.bn);
    return m;
}

/// q-hypergeometric two-block matrix with (-1/s2)-power signs in the lower
/// block. Requires p = 0.
template <typename Real = double>
TrackedMatrixT<Real> build_U(const UVParams& p, const TruncationPolicy& pol = {}) {
    detail::require_p_zero(p.bn, "build_U");
    detail::check_dims(p.r1, p.r2, "build_U");
    using M = Monomial<2>;
    const std::array<cplx, 2> vals{p.s1, p.s2};
    const M S1 = M::param(0), S2 = M::param(1);
    const int n = p.r1 + p.r2;
    const auto q = to_real_complex<Real>(p.bn.q);
    TrackedMatrixT<Real> m(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
    detail::FamilyCache<2, Real> cache(vals, p.bn, pol);
    detail::fill_u_block(m, 0, S1, S2, p.r1, p.r2, cache, p.bn);
    detail::fill_u_block(m, p.r2, S2, S1, p.r2, p.r1, cache, p.bn);
    for (int i = 0; i < p.r2; ++i)
        for (int j = 0; j < n; ++j)
            m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) *=
                tracked_ipow(q, binom2(j) - binom2(i));
    const auto ms2 = to_real_complex<Real>(-1.0 / p.s2);
    for (int i = p.r2; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) *=
                tracked_ipow(ms2, j - i + p.r2);
    return m;
}

/// Variant with (s1/s2)^{(j-i+r2)/2} factors in the lower block. The square
/// root branch is fixed once (principal root of s1/s2) and must be shared
/// with the closed-form evaluator.
template <typename Real = double>
TrackedMatrixT<Real> build_V(const UVParams& p, const TruncationPolicy& pol = {}) {
    detail::require_p_zero(p.bn, "build_V");
    detail::check_dims(p.r1, p.r2, "build_V");
    using M = Monomial<2>;
    const std::array<cplx, 2> vals{p.s1, p.s2};
    const M S1 = M::param(0), S2 = M::param(1);
    const int n = p.r1 + p.r2;
    const auto w =
        complex_sqrt<Real>(to_real_complex<Real>(p.s1) / to_real_complex<Real>(p.s2));
    TrackedMatrixT<Real> m(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
    detail::FamilyCache<2, Real> cache(vals, p.bn, pol);
    detail::fill_u_block(m, 0, S1, S2, p.r1, p.r2, cache, p.bn);
    detail::fill_u_block(m, p.r2, S2, S1, p.r2, p.r1, cache, p.bn);
    for (int i = p.r2; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) *=
                tracked_ipow(w, j - i + p.r2);
    return m;
}

namespace detail {

using GMon = Monomial<6>;

struct GSlots {
    GMon a, b, c, d, e, f;
};

inline GSlots g_base_slots() {
    return {GMon::param(0), GMon::param(1), GMon::param(2),
            GMon::param(3), GMon::param(4), GMon::param(5)};
}

template <typename Real>
TrackedMatrixT<Real> build_g_family(const EllipticGParams& p, const GSlots& top,
                                    const GSlots& bottom, const TruncationPolicy& pol,
                                    const char* who) {
    check_dims(p.r1, p.r2, who);
    const std::array<cplx, 6> vals{p.a, p.b, p.c, p.d, p.e, p.f};
    const int n = p.r1 + p.r2;
    TrackedMatrixT<Real> m(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
    FamilyCache<6, Real> cache(vals, p.bn, pol);
    fill_g_block(m, 0, top.a, top.b, top.c, top.d, top.e, top.f, p.r1, p.r2, cache, p.bn);
    fill_g_block(m, p.r2, bottom.a, bottom.b, bottom.c, bottom.d, bottom.e, bottom.f, p.r2, p.r1,
                 cache, p.bn);
    return m;
}

} // namespace detail

/// Six-parameter matrix G: base slots on top, the aq/x reflections below.
template <typename Real = double>
TrackedMatrixT<Real> build_G(const EllipticGParams& p, const TruncationPolicy& pol = {}) {
    detail::GSlots s = detail::g_base_slots();
    detail::GSlots bottom{s.a,
                          s.a.shift_q(1) / s.b,
                          s.a.shift_q(1) / s.c,
                          s.a.shift_q(1) / s.d,
                          s.a.shift_q(1) / s.e,
                          s.a.shift_q(1) / s.f};
    return detail::build_g_family<Real>(p, s, bottom, pol, "build_G");
}

/// Companion matrix H with lambda = a^2 q^{2-r2}/(b c d) in the base slot.
template <typename Real = double>
TrackedMatrixT<Real> build_H(const EllipticGParams& p, const TruncationPolicy& pol = {}) {
    detail::GSlots s = detail::g_base_slots();
    const detail::GMon lam = s.a.pow(2).shift_q(2 - p.r2) / (s.b * s.c * s.d);
    detail::GSlots top{lam, lam * s.b / s.a, lam * s.c / s.a, lam * s.d / s.a, s.e, s.f};
    detail::GSlots bottom{lam,
                          s.a.shift_q(1) / s.b,
                          s.a.shift_q(1) / s.c,
                          s.a.shift_q(1) / s.d,
                          lam.shift_q(1) / s.e,
                          lam.shift_q(1) / s.f};
    return detail::build_g_family<Real>(p, top, bottom, pol, "build_H");
}

/// G with d set to aq/c symbolically. The numeric d field is ignored.
template <typename Real = double>
TrackedMatrixT<Real> build_Gprime(const EllipticGParams& p, const TruncationPolicy& pol = {}) {
    detail::GSlots s = detail::g_base_slots();
    s.d = s.a.shift_q(1) / s.c;
    detail::GSlots bottom{s.a,
                          s.a.shift_q(1) / s.b,
                          s.a.shift_q(1) / s.c,
                          s.a.shift_q(1) / s.d,
                          s.a.shift_q(1) / s.e,
                          s.a.shift_q(1) / s.f};
    return detail::build_g_family<Real>(p, s, bottom, pol, "build_Gprime");
}

/// H with d set to aq/c symbolically; then lambda b/a = q^{1-r2} is a pure
/// q-power and the forced zeros make the matrix exactly block-triangular.
template <typename Real = double>
TrackedMatrixT<Real> build_Hprime(const EllipticGParams& p, const TruncationPolicy& pol = {}) {
    detail::GSlots s = detail::g_base_slots();
    s.d = s.a.shift_q(1) / s.c;
    const detail::GMon lam = s.a.pow(2).shift_q(2 - p.r2) / (s.b * s.c * s.d);
    detail::GSlots top{lam, lam * s.b / s.a, lam * s.c / s.a, lam * s.d / s.a, s.e, s.f};
    detail::GSlots bottom{lam,
                          s.a.shift_q(1) / s.b,
                          s.a.shift_q(1) / s.c,
                          s.a.shift_q(1) / s.d,
                          lam.shift_q(1) / s.e,
                          lam.shift_q(1) / s.f};
    return detail::build_g_family<Real>(p, top, bottom, pol, "build_Hprime");
}

/// The four-parameter matrix that the d = aq/c specialization reduces to:
/// parameters (b, aq/b, e, f) over the six-parameter alphabet.
template <typename Real = double>
TrackedMatrixT<Real> build_Fprime(const EllipticGParams& p, const TruncationPolicy& pol = {}) {
    detail::check_dims(p.r1, p.r2, "build_Fprime");
    using M = Monomial<6>;
    const std::array<cplx, 6> vals{p.a, p.b, p.c, p.d, p.e, p.f};
    const M A = M::param(0), B = M::param(1), E = M::param(4), F_ = M::param(5);
    const M S1 = B, S2 = A.shift_q(1) / B, T1 = E, T2 = F_;
    const int n = p.r1 + p.r2;
    TrackedMatrixT<Real> m(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
    detail::FamilyCache<6, Real> cache(vals, p.bn, pol);
    detail::fill_f_block(m, 0, S1, S2, T1, T2, p.r1, p.r2, cache, p.bn);
    detail::fill_f_block(m, p.r2, S2, S1, S1 * S2 / T1, S1 * S2 / T2, p.r2, p.r1, cache, p.bn);
    return m;
}

/// Integer predicate for where a two-block banded matrix must vanish:
/// row blocks carry bands [i, i + width] with width r1 on top, r2 below.
inline bool band_zero_expected(int i, int j, int r1, int r2) {
    if (i < r2) return j < i || j > r1 + i;
    int il = i - r2;
    return j < il || j > r2 + il;
}

} // namespace elldet
