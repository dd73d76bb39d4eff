#pragma once

#include <cmath>
#include <complex>
#include <quadmath.h>

namespace elldet {

using cplx = std::complex<double>;

/// IEEE binary128, the extended-precision backend. The identity checkers
/// default to it: the transformation sums cancel by up to ~15 digits on
/// generic draws, which double precision cannot survive at 1e-8 tolerances.
using quad = __float128;

template <typename Real>
struct real_ops;

template <>
struct real_ops<double> {
    static double fabs(double x) { return std::fabs(x); }
    static double sqrt(double x) { return std::sqrt(x); }
    static double frexp(double x, int* e) { return std::frexp(x, e); }
    static double ldexp(double x, int e) { return std::ldexp(x, e); }
    static bool finite(double x) { return std::isfinite(x); }
    static double to_double(double x) { return x; }
    static double log2_abs(double x) { return std::log2(std::fabs(x)); }
};

template <>
struct real_ops<quad> {
    static quad fabs(quad x) { return fabsq(x); }
    static quad sqrt(quad x) { return sqrtq(x); }
    static quad frexp(quad x, int* e) { return frexpq(x, e); }
    static quad ldexp(quad x, int e) { return ldexpq(x, e); }
    static bool finite(quad x) { return !isnanq(x) && !isinfq(x); }
    static double to_double(quad x) { return static_cast<double>(x); }
    static double log2_abs(quad x) {
        int e = 0;
        double m = static_cast<double>(frexpq(fabsq(x), &e));
        return std::log2(m) + e;
    }
};

/// |z| without overflow concerns: only ever applied to values whose norm is
/// representable (normalized mantissas, equilibrated matrix entries).
template <typename Real>
Real cabs(const std::complex<Real>& z) {
    return real_ops<Real>::sqrt(z.real() * z.real() + z.imag() * z.imag());
}

template <typename Real>
std::complex<Real> to_real_complex(cplx z) {
    return {static_cast<Real>(z.real()), static_cast<Real>(z.imag())};
}

template <typename Real>
cplx to_double_complex(const std::complex<Real>& z) {
    return {real_ops<Real>::to_double(z.real()), real_ops<Real>::to_double(z.imag())};
}

template <typename Real>
bool is_exact_zero(const std::complex<Real>& z) {
    return z.real() == Real(0) && z.imag() == Real(0);
}

/// Principal complex square root at backend precision. The quad variant
/// refines the double seed by Newton steps, which keeps the branch of the
/// double result while removing its rounding error (shared-branch values
/// feed both sides of an identity, so their accuracy matters).
template <typename Real>
std::complex<Real> complex_sqrt(std::complex<Real> z) {
    if constexpr (std::is_same_v<Real, double>) {
        return std::sqrt(z);
    } else {
        if (is_exact_zero(z)) return z;
        cplx seed = std::sqrt(to_double_complex(z));
        std::complex<Real> w = to_real_complex<Real>(seed);
        const std::complex<Real> half(Real(0.5), Real(0));
        w = half * (w + z / w);
        w = half * (w + z / w);
        return w;
    }
}

/// Numeric backend selector for the checking pipelines.
enum class Backend { f64, f128 };

} // namespace elldet
