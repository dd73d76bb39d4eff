#pragma once

#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

#include "elldet/tracked_value.hpp"

namespace elldet {

/// Base q and nome p of the theta shifted factorials.
struct BaseNome {
    cplx q{1.0, 0.0};
    cplx p{0.0, 0.0};

    BaseNome() = default;
    BaseNome(cplx base, cplx nome) : q(base), p(nome) {
        if (q == cplx(0.0, 0.0)) throw std::domain_error("BaseNome: q must be nonzero");
        if (std::abs(p) >= 1.0) throw std::domain_error("BaseNome: |p| must be < 1");
    }
};

/// Truncation of the theta infinite product: stop at the first j with
/// |p|^j < tail_eps, hard cap max_factors. Geometric convergence makes the
/// tail bound |p|^j/(1-|p|) explicit; the cap guards |p| near 1. The
/// extended-precision backend tightens the tail to match its mantissa.
struct TruncationPolicy {
    double tail_eps = 1e-18;
    int max_factors = 400;

    template <typename Real>
    double effective_tail() const {
        if constexpr (std::is_same_v<Real, double>) return tail_eps;
        return std::min(tail_eps, 1e-36);
    }
};

/// A factorial/theta argument coeff * q^qexp. `unit` marks arguments whose
/// coefficient is structurally 1 (a pure q-power), which is what makes
/// zeros like theta(q^0) detectable by integer arithmetic instead of
/// floating-point closeness.
template <typename Real = double>
struct ThetaArgT {
    std::complex<Real> coeff{Real(1), Real(0)};
    int qexp = 0;
    bool unit = true;

    static ThetaArgT generic(std::complex<Real> a, int m = 0) { return {a, m, false}; }
    static ThetaArgT generic(cplx a, int m = 0)
        requires(!std::is_same_v<Real, double>)
    {
        return {to_real_complex<Real>(a), m, false};
    }
    static ThetaArgT qpow(int m) { return {{Real(1), Real(0)}, m, true}; }

    ThetaArgT shifted(int dm) const { return {coeff, qexp + dm, unit}; }

    std::complex<Real> numeric(std::complex<Real> q) const {
        std::complex<Real> v = coeff;
        int m = qexp;
        std::complex<Real> b = m < 0 ? std::complex<Real>(Real(1), Real(0)) / q : q;
        int k = m < 0 ? -m : m;
        while (k) {
            if (k & 1) v *= b;
            b *= b;
            k >>= 1;
        }
        return v;
    }
};

using ThetaArg = ThetaArgT<double>;

/// Modified Jacobi theta function theta(a; p) = (a; p)_inf (p/a; p)_inf,
/// truncated per policy. Factors that are exactly 0.0 raise the zero order
/// instead of entering the mantissa, so theta(1, p) is an exact zero.
template <typename Real>
TrackedValueT<Real> theta_eval(std::complex<Real> a, std::complex<Real> p,
                               const TruncationPolicy& pol = {}) {
    using C = std::complex<Real>;
    if (is_exact_zero(a)) throw std::domain_error("theta: a must be nonzero");
    double pm = real_ops<Real>::to_double(cabs(p));
    if (pm >= 1.0) throw std::domain_error("theta: |p| must be < 1");

    const double tail = pol.template effective_tail<Real>();
    TrackedValueT<Real> acc = TrackedValueT<Real>::one();
    int zeros = 0;
    C pj(Real(1), Real(0)); // p^j
    double pmj = 1.0;
    const C one(Real(1), Real(0));
    for (int j = 0; j < pol.max_factors && pmj >= tail; ++j) {
        C f1 = one - a * pj;
        C f2 = one - (p * pj) / a;
        if (is_exact_zero(f1)) ++zeros; else acc *= f1;
        if (is_exact_zero(f2)) ++zeros; else acc *= f2;
        pj *= p;
        pmj *= pm;
    }
    if (zeros > 0) acc *= TrackedValueT<Real>::exact_zero(zeros);
    return acc;
}

inline TrackedValue theta(cplx a, cplx p, const TruncationPolicy& pol = {}) {
    return theta_eval<double>(a, p, pol);
}

/// Structural variant: a pure q-power argument q^0 is an exact zero of
/// theta regardless of rounding in the bound coefficient.
template <typename Real>
TrackedValueT<Real> theta(const ThetaArgT<Real>& a, const BaseNome& bn,
                          const TruncationPolicy& pol = {}) {
    const std::complex<Real> p = to_real_complex<Real>(bn.p);
    if (a.unit && a.qexp == 0) {
        // theta(1; p): the vanishing factor is (1 - a); the mantissa keeps
        // the remaining product (p; p)_inf^2.
        return theta_eval<Real>({Real(1), Real(0)}, p, pol);
    }
    return theta_eval<Real>(a.numeric(to_real_complex<Real>(bn.q)), p, pol);
}

/// q,p-shifted factorial (a; q, p)_k for any integer k:
///   k >= 0:  prod_{j=0}^{k-1} theta(a q^j; p)
///   k <  0:  1 / prod_{j=1}^{-k} theta(a q^{-j}; p)
/// following the standard product convention for empty and reversed ranges.
template <typename Real>
TrackedValueT<Real> qp_factorial(const ThetaArgT<Real>& a, long k, const BaseNome& bn,
                                 const TruncationPolicy& pol = {}) {
    TrackedValueT<Real> acc = TrackedValueT<Real>::one();
    if (k >= 0) {
        for (long j = 0; j < k; ++j) acc *= theta(a.shifted(static_cast<int>(j)), bn, pol);
        return acc;
    }
    for (long j = 1; j <= -k; ++j) acc *= theta(a.shifted(static_cast<int>(-j)), bn, pol);
    return reciprocal(acc);
}

inline TrackedValue qp_factorial(cplx a, long k, const BaseNome& bn,
                                 const TruncationPolicy& pol = {}) {
    return qp_factorial(ThetaArg::generic(a), k, bn, pol);
}

/// Shorthand (a_1, ..., a_r; q, p)_k: product over the argument list.
inline TrackedValue qp_factorial_multi(std::span<const cplx> args, long k, const BaseNome& bn,
                                       const TruncationPolicy& pol = {}) {
    TrackedValue acc = TrackedValue::one();
    for (cplx a : args) acc *= qp_factorial(a, k, bn, pol);
    return acc;
}

inline TrackedValue qp_factorial_multi(std::initializer_list<cplx> args, long k,
                                       const BaseNome& bn, const TruncationPolicy& pol = {}) {
    return qp_factorial_multi(std::span<const cplx>(args.begin(), args.size()), k, bn, pol);
}

/// n(n-1)/2 for any integer n (the binomial C(n, 2) extended to negatives).
constexpr long binom2(long n) { return n * (n - 1) / 2; }

/// C(n, k) with the convention C(n, k) = 0 for k < 0 or k > n (n >= 0).
inline long binom(long n, long k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    long r = 1;
    for (long i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// Prefix factorial table over an absolute q-exponent window [lo, hi]:
/// P[e - lo] = prod_{u=lo}^{e-1} theta(coeff q^u), so that
/// (coeff q^a)_b = P[a+b]/P[a] for indices of either sign. Zero orders flow
/// through the prefix products, keeping band zeros exact.
template <typename Real = double>
class PrefixFactorial {
public:
    PrefixFactorial() = default;
    PrefixFactorial(const ThetaArgT<Real>& base, int lo, int hi, const BaseNome& bn,
                    const TruncationPolicy& pol)
        : lo_(lo) {
        if (hi < lo) throw std::invalid_argument("PrefixFactorial: empty window");
        prefix_.reserve(static_cast<std::size_t>(hi - lo) + 2);
        prefix_.push_back(TrackedValueT<Real>::one());
        for (int u = lo; u <= hi; ++u)
            prefix_.push_back(prefix_.back() * theta(base.shifted(u), bn, pol));
    }

    /// (coeff q^a)_b; a and a+b must lie within [lo, hi+1].
    TrackedValueT<Real> fact(int a, long b) const {
        return prefix_.at(static_cast<std::size_t>(a + b - lo_)) /
               prefix_.at(static_cast<std::size_t>(a - lo_));
    }

private:
    int lo_ = 0;
    std::vector<TrackedValueT<Real>> prefix_;
};

} // namespace elldet
