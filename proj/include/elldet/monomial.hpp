#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "elldet/theta.hpp"

namespace elldet {

/// A Laurent monomial q^qexp * prod_i param_i^deg[i] over a fixed parameter
/// alphabet. Matrix builders assemble every factorial argument as one of
/// these, so cancellations such as (lambda b / a) = q^{1-r2} are found by
/// integer arithmetic on the exponent vector and survive as structural
/// q-powers all the way into the theta evaluator.
template <std::size_t N>
struct Monomial {
    std::array<int, N> deg{};
    int qexp = 0;

    static Monomial param(std::size_t i, int e = 1) {
        Monomial m;
        m.deg[i] = e;
        return m;
    }

    static Monomial qpow(int e) {
        Monomial m;
        m.qexp = e;
        return m;
    }

    Monomial operator*(const Monomial& o) const {
        Monomial r = *this;
        for (std::size_t i = 0; i < N; ++i) r.deg[i] += o.deg[i];
        r.qexp += o.qexp;
        return r;
    }

    Monomial operator/(const Monomial& o) const {
        Monomial r = *this;
        for (std::size_t i = 0; i < N; ++i) r.deg[i] -= o.deg[i];
        r.qexp -= o.qexp;
        return r;
    }

    Monomial pow(int e) const {
        Monomial r;
        for (std::size_t i = 0; i < N; ++i) r.deg[i] = deg[i] * e;
        r.qexp = qexp * e;
        return r;
    }

    Monomial shift_q(int dm) const {
        Monomial r = *this;
        r.qexp += dm;
        return r;
    }

    bool is_pure_qpow() const {
        for (int d : deg)
            if (d != 0) return false;
        return true;
    }

    /// Bind parameter values in the backend's precision: the result keeps
    /// the q-exponent symbolic and flags pure q-powers as structural units.
    template <typename Real = double>
    ThetaArgT<Real> bind(std::span<const cplx> vals) const {
        if (is_pure_qpow()) return ThetaArgT<Real>::qpow(qexp);
        using C = std::complex<Real>;
        C c(Real(1), Real(0));
        for (std::size_t i = 0; i < N; ++i) {
            if (deg[i] == 0) continue;
            C v = to_real_complex<Real>(vals[i]);
            C b = deg[i] < 0 ? C(Real(1), Real(0)) / v : v;
            for (int k = std::abs(deg[i]); k > 0; --k) c *= b;
        }
        return ThetaArgT<Real>{c, qexp, false};
    }
};

} // namespace elldet
