#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>

#include "elldet/numeric.hpp"

namespace elldet {

/// Thrown when a value with negative zero order (an exact pole) is used
/// where a finite number is required.
class pole_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A nonzero complex mantissa scaled by an explicit power of two, together
/// with an integer count of exact zero factors.
///
/// The represented value is
///   - 0                        if zero_order > 0,
///   - mantissa * 2^exp2        if zero_order == 0,
///   - a pole (not a number)    if zero_order < 0.
///
/// Exact zeros are never folded into the mantissa, so products that contain
/// them can still be divided and recombined without ever dividing by zero.
/// The power-of-two exponent keeps long products of theta factors and large
/// q-powers representable; all rescaling is exact. The scalar type is the
/// pluggable precision backend (double by default, binary128 in the
/// checkers).
template <typename Real = double>
class TrackedValueT {
public:
    using C = std::complex<Real>;

    TrackedValueT() : m_(Real(1), Real(0)) {}

    static TrackedValueT one() { return TrackedValueT(); }

    static TrackedValueT exact_zero(int order = 1) {
        TrackedValueT v;
        v.zo_ = order;
        return v;
    }

    /// Wrap a complex number. An exact 0.0 becomes an exact zero.
    static TrackedValueT of(C v) {
        TrackedValueT t;
        if (is_exact_zero(v)) {
            t.zo_ = 1;
            return t;
        }
        t.m_ = v;
        t.normalize();
        return t;
    }

    static TrackedValueT of(cplx v)
        requires(!std::is_same_v<Real, double>)
    {
        return of(to_real_complex<Real>(v));
    }

    C mantissa() const { return m_; }
    std::int64_t exp2() const { return e2_; }
    int zero_order() const { return zo_; }

    bool is_zero() const { return zo_ > 0; }
    bool is_pole() const { return zo_ < 0; }
    bool is_finite_nonzero() const { return zo_ == 0; }

    /// The represented value as a plain complex. May overflow to inf for
    /// extreme exponents; poles throw.
    C value() const {
        if (zo_ > 0) return {Real(0), Real(0)};
        if (zo_ < 0) throw pole_error("TrackedValue: pole has no finite value");
        return scale_by_exp2(m_, e2_);
    }

    /// log10 of |value| (-inf for exact zeros; poles throw).
    double log10_abs() const {
        if (zo_ > 0) return -std::numeric_limits<double>::infinity();
        if (zo_ < 0) throw pole_error("TrackedValue: pole has no magnitude");
        return (real_ops<Real>::log2_abs(cabs(m_)) + static_cast<double>(e2_)) *
               0.30102999566398120;
    }

    TrackedValueT& operator*=(const TrackedValueT& o) {
        m_ *= o.m_;
        e2_ += o.e2_;
        zo_ += o.zo_;
        normalize();
        return *this;
    }

    TrackedValueT& operator*=(C s) { return *this *= of(s); }

    TrackedValueT& operator/=(const TrackedValueT& o) {
        m_ /= o.m_;
        e2_ -= o.e2_;
        zo_ -= o.zo_;
        normalize();
        return *this;
    }

    TrackedValueT& operator/=(C s) { return *this /= of(s); }

    friend TrackedValueT operator*(TrackedValueT a, const TrackedValueT& b) { return a *= b; }
    friend TrackedValueT operator*(TrackedValueT a, C b) { return a *= b; }
    friend TrackedValueT operator*(C a, TrackedValueT b) { return b *= a; }
    friend TrackedValueT operator/(TrackedValueT a, const TrackedValueT& b) { return a /= b; }
    friend TrackedValueT operator/(TrackedValueT a, C b) { return a /= b; }

    friend TrackedValueT reciprocal(const TrackedValueT& v) {
        TrackedValueT r;
        r.m_ = C(Real(1), Real(0)) / v.m_;
        r.e2_ = -v.e2_;
        r.zo_ = -v.zo_;
        r.normalize();
        return r;
    }

    friend TrackedValueT operator-(TrackedValueT v) {
        v.m_ = -v.m_;
        return v;
    }

private:
    // Keep max(|re|,|im|) of the mantissa in [1, 2); rescaling by powers of
    // two is exact, so normalization never loses precision.
    void normalize() {
        Real a = std::max(real_ops<Real>::fabs(m_.real()), real_ops<Real>::fabs(m_.imag()));
        if (is_exact_zero(C(a, Real(0))) || !real_ops<Real>::finite(a)) {
            throw std::domain_error("TrackedValue: mantissa left the finite nonzero range");
        }
        int e = 0;
        real_ops<Real>::frexp(a, &e);
        // frexp puts a in [0.5, 1); shift so the mantissa lands in [1, 2).
        e -= 1;
        if (e != 0) {
            m_ = scale_by_exp2(m_, -static_cast<std::int64_t>(e));
            e2_ += e;
        }
    }

    static C scale_by_exp2(C v, std::int64_t e) {
        auto shift = [](C z, int k) {
            return C(real_ops<Real>::ldexp(z.real(), k), real_ops<Real>::ldexp(z.imag(), k));
        };
        while (e > 1000) { v = shift(v, 1000); e -= 1000; }
        while (e < -1000) { v = shift(v, -1000); e += 1000; }
        return shift(v, static_cast<int>(e));
    }

    C m_;
    std::int64_t e2_ = 0;
    int zo_ = 0;
};

using TrackedValue = TrackedValueT<double>;

/// z^n for integer n of either sign, exponent-tracked.
template <typename Real>
TrackedValueT<Real> tracked_ipow(std::complex<Real> z, std::int64_t n) {
    if (n == 0) return TrackedValueT<Real>::one();
    bool inv = n < 0;
    std::uint64_t k = inv ? static_cast<std::uint64_t>(-(n + 1)) + 1 : static_cast<std::uint64_t>(n);
    TrackedValueT<Real> base = TrackedValueT<Real>::of(z);
    TrackedValueT<Real> acc = TrackedValueT<Real>::one();
    while (k) {
        if (k & 1) acc *= base;
        base *= base;
        k >>= 1;
    }
    return inv ? reciprocal(acc) : acc;
}

template <typename Real>
TrackedValueT<Real> tracked_ipow(const TrackedValueT<Real>& z, std::int64_t n) {
    if (n == 0) return TrackedValueT<Real>::one();
    bool inv = n < 0;
    std::uint64_t k = inv ? static_cast<std::uint64_t>(-(n + 1)) + 1 : static_cast<std::uint64_t>(n);
    TrackedValueT<Real> base = z;
    TrackedValueT<Real> acc = TrackedValueT<Real>::one();
    while (k) {
        if (k & 1) acc *= base;
        base *= base;
        k >>= 1;
    }
    return inv ? reciprocal(acc) : acc;
}

/// Downconvert a tracked value to the double backend (for reports).
template <typename Real>
TrackedValue to_tracked_double(const TrackedValueT<Real>& v) {
    if (v.zero_order() != 0) return TrackedValue::exact_zero(v.zero_order());
    TrackedValue t = TrackedValue::of(to_double_complex(v.mantissa()));
    return t * tracked_ipow(cplx(2.0, 0.0), v.exp2());
}

/// Exponent-aligned accumulator for sums of TrackedValues (poles rejected).
/// Addends far below the running scale underflow harmlessly to zero.
template <typename Real = double>
class TrackedSumT {
public:
    using TV = TrackedValueT<Real>;
    using C = std::complex<Real>;

    void add(const TV& t) {
        if (t.is_pole()) throw pole_error("TrackedSum: cannot add a pole");
        ++count_;
        if (t.is_zero()) return;
        double la = real_ops<Real>::log2_abs(cabs(t.mantissa())) + static_cast<double>(t.exp2());
        peak_log2_ = std::max(peak_log2_, la);
        if (empty_) {
            acc_ = t.mantissa();
            e2_ = t.exp2();
            empty_ = false;
            return;
        }
        std::int64_t d = t.exp2() - e2_;
        if (d > 0) {
            acc_ = t.mantissa() + shift(acc_, -d);
            e2_ = t.exp2();
        } else {
            acc_ += shift(t.mantissa(), d);
        }
        if (is_exact_zero(acc_)) empty_ = true;
    }

    /// Sum so far. An empty (or fully cancelled) sum is an exact zero.
    TV total() const {
        if (empty_) return TV::exact_zero();
        return TV::of(acc_) * tracked_ipow(C(Real(2), Real(0)), e2_);
    }

    std::size_t count() const { return count_; }

    /// log2 of the largest addend magnitude seen (cancellation diagnostic).
    double peak_log2() const { return peak_log2_; }

private:
    static C shift(C v, std::int64_t e) {
        auto sh = [](C z, int k) {
            return C(real_ops<Real>::ldexp(z.real(), k), real_ops<Real>::ldexp(z.imag(), k));
        };
        while (e < -1000) { v = sh(v, -1000); e += 1000; }
        if (e > 1000) throw std::domain_error("TrackedSum: shift out of range");
        return sh(v, static_cast<int>(e));
    }

    bool empty_ = true;
    C acc_{Real(0), Real(0)};
    std::int64_t e2_ = 0;
    std::size_t count_ = 0;
    double peak_log2_ = -std::numeric_limits<double>::infinity();
};

using TrackedSum = TrackedSumT<double>;

/// Relative residual |lhs - rhs| / max(|lhs|, |rhs|, floor), evaluated in
/// double regardless of backend. Two exact zeros agree perfectly; a pole on
/// either side is reported as inf.
template <typename Real>
double rel_residual(const TrackedValueT<Real>& lhs, const TrackedValueT<Real>& rhs,
                    double floor = 1e-300) {
    if (lhs.is_pole() || rhs.is_pole()) return std::numeric_limits<double>::infinity();
    if (lhs.is_zero() && rhs.is_zero()) return 0.0;
    if (lhs.is_zero() || rhs.is_zero()) {
        const TrackedValueT<Real>& nz = lhs.is_zero() ? rhs : lhs;
        double lg = real_ops<Real>::log2_abs(cabs(nz.mantissa())) + static_cast<double>(nz.exp2());
        return lg <= std::log2(floor) ? std::exp2(lg) / floor : 1.0;
    }
    std::int64_t e = std::max(lhs.exp2(), rhs.exp2());
    auto down = [](std::complex<Real> v, std::int64_t d) {
        auto sh = [](std::complex<Real> z, int k) {
            return std::complex<Real>(real_ops<Real>::ldexp(z.real(), k),
                                      real_ops<Real>::ldexp(z.imag(), k));
        };
        while (d < -1000) { v = sh(v, -1000); d += 1000; }
        return sh(v, static_cast<int>(d));
    };
    std::complex<Real> l = down(lhs.mantissa(), lhs.exp2() - e);
    std::complex<Real> r = down(rhs.mantissa(), rhs.exp2() - e);
    double den = std::max(real_ops<Real>::to_double(cabs(l)), real_ops<Real>::to_double(cabs(r)));
    double scale_log2 = static_cast<double>(e);
    double floor_scaled = std::exp2(std::log2(floor) - scale_log2);
    return real_ops<Real>::to_double(cabs(l - r)) / std::max(den, floor_scaled);
}

} // namespace elldet
