#pragma once

#include <functional>
#include <string>
#include <vector>

#include "elldet/builders.hpp"
#include "elldet/linalg.hpp"
#include "elldet/report.hpp"

namespace elldet {

inline nlohmann::json cplx_json(cplx z) { return nlohmann::json::array({z.real(), z.imag()}); }

/// Evaluation settings of the checkers. The extended-precision backend is
/// the default: the transformation sums and the larger eliminations cancel
/// by 10-15 digits on screened generic draws, which the double backend
/// cannot absorb at 1e-8 tolerances.
struct CheckContext {
    TruncationPolicy pol;
    double tolerance = 1e-8;
    Backend backend = Backend::f128;
};

namespace detail {

template <typename Fn>
auto dispatch(Backend b, Fn&& fn) {
    if (b == Backend::f64) return fn.template operator()<double>();
    return fn.template operator()<quad>();
}

/// Generic draws of the elliptic families are strongly graded, so pivot
/// thresholds cannot distinguish legitimate decay from singularity there.
inline PivotPolicy generic_pivot() { return PivotPolicy::exact_only(); }

} // namespace detail

// ---------------------------------------------------------------------------
// Closed-form right-hand sides
// ---------------------------------------------------------------------------

template <typename Real = double>
TrackedValueT<Real> rhs_syl_bin(const SylvesterBinomialParams& p) {
    long e = static_cast<long>(p.r1) * p.r2;
    TrackedValueT<Real> v =
        tracked_ipow(to_real_complex<Real>(p.s1) - to_real_complex<Real>(p.s2), e);
    if (e % 2 != 0) v = -v;
    return v;
}

template <typename Real = double>
TrackedValueT<Real> rhs_fkx(const HypergeomParams& p) {
    using C = std::complex<Real>;
    const C s12 = to_real_complex<Real>(p.s1) + to_real_complex<Real>(p.s2);
    TrackedValueT<Real> v = TrackedValueT<Real>::one();
    for (int j = 1; j <= p.r1; ++j) {
        C x = s12 + C(Real(p.r1 + p.r2 + j - 2), Real(0));
        C rf(Real(1), Real(0));
        for (int u = 0; u < p.r2; ++u) rf *= x + C(Real(u), Real(0));
        v /= TrackedValueT<Real>::of(rf);
    }
    if ((static_cast<long>(p.r1) * p.r2) % 2 != 0) v = -v;
    return v;
}

enum class Thm21Form { main, alt };

template <typename Real = double>
TrackedValueT<Real> rhs_thm21(const EllipticFParams& p, Thm21Form form,
                              const TruncationPolicy& pol = {}) {
    using C = std::complex<Real>;
    const C q = to_real_complex<Real>(p.bn.q);
    const C s1 = to_real_complex<Real>(p.s1), s2 = to_real_complex<Real>(p.s2);
    const C t1 = to_real_complex<Real>(p.t1), t2 = to_real_complex<Real>(p.t2);
    const long rr = static_cast<long>(p.r1) * p.r2;
    auto qp = [&](C a, int shift, long k) {
        return qp_factorial(ThetaArgT<Real>::generic(a, shift), k, p.bn, pol);
    };
    TrackedValueT<Real> v;
    if (form == Thm21Form::main) {
        v = tracked_ipow(t1 * t2 / s2, rr) * tracked_ipow(q, rr * (p.r1 + 4L * p.r2 - 3) / 2);
        if (rr % 2 != 0) v = -v;
    } else {
        v = tracked_ipow(s1, rr) *
            tracked_ipow(q, rr * (p.r1 + p.r2 - 1) + p.r1 * binom2(p.r2));
    }
    for (int j = 1; j <= p.r1; ++j) {
        v *= qp(s2 / t1, -p.r2 + j, p.r2);
        v *= qp(s2 / t2, -p.r2 + j, p.r2);
        if (form == Thm21Form::main)
            v *= qp(s1 * s2 / (t1 * t2), -p.r2 + j, p.r2);
        else
            v *= qp(t1 * t2 / (s1 * s2), -p.r1 + j, p.r2);
        v /= qp(s1 * s2, p.r1 + p.r2 + j - 2, p.r2);
    }
    return v;
}

template <typename Real = double>
TrackedValueT<Real> rhs_cor22(const UVParams& p, const TruncationPolicy& pol = {}) {
    detail::require_p_zero(p.bn, "rhs_cor22");
    using C = std::complex<Real>;
    const C q = to_real_complex<Real>(p.bn.q);
    const C s1 = to_real_complex<Real>(p.s1), s2 = to_real_complex<Real>(p.s2);
    const long rr = static_cast<long>(p.r1) * p.r2;
    TrackedValueT<Real> v =
        reciprocal(tracked_ipow(s2, rr)) * tracked_ipow(q, static_cast<long>(p.r1) * binom2(p.r2));
    if (rr % 2 != 0) v = -v;
    for (int j = 1; j <= p.r1; ++j)
        v /= qp_factorial(ThetaArgT<Real>::generic(s1 * s2, p.r1 + p.r2 + j - 2), p.r2, p.bn, pol);
    return v;
}

/// Shares one square root w = sqrt(s1/s2) with build_V; the other roots are
/// derived from it ((s2/s1)^{1/2} = 1/w, (s1 s2)^{1/2} = w s2) so that both
/// sides of the identity sit on the same branch.
template <typename Real = double>
TrackedValueT<Real> rhs_cor23(const UVParams& p, const TruncationPolicy& pol = {}) {
    detail::require_p_zero(p.bn, "rhs_cor23");
    using C = std::complex<Real>;
    const C q = to_real_complex<Real>(p.bn.q);
    const C s1 = to_real_complex<Real>(p.s1), s2 = to_real_complex<Real>(p.s2);
    const C w = complex_sqrt<Real>(s1 / s2);
    const C root_s1s2 = w * s2;
    TrackedValueT<Real> v = tracked_ipow(w, static_cast<long>(p.r1) * p.r2) *
                            tracked_ipow(q, static_cast<long>(p.r1) * binom2(p.r2));
    const C one(Real(1), Real(0));
    for (int j = 1; j <= p.r1; ++j) {
        v *= qp_factorial(ThetaArgT<Real>::generic(one / w, -p.r2 + j), p.r2, p.bn, pol);
        v /= qp_factorial(ThetaArgT<Real>::generic(root_s1s2, j - 1), p.r2, p.bn, pol);
        v /= qp_factorial(ThetaArgT<Real>::generic(s1 * s2, p.r1 + p.r2 + j - 2), p.r2, p.bn, pol);
    }
    return v;
}

// ---------------------------------------------------------------------------
// Determinant-vs-product checkers
// ---------------------------------------------------------------------------

namespace detail {

template <typename Real>
void finish_report(IdentityReport& rep, const TrackedValueT<Real>& lhs,
                   const TrackedValueT<Real>& rhs, double tol) {
    rep.lhs = to_tracked_double(lhs);
    rep.rhs = to_tracked_double(rhs);
    rep.finish(tol, rel_residual(lhs, rhs));
}

} // namespace detail

inline IdentityReport check_syl_bin(const SylvesterBinomialParams& p, const CheckContext& ctx) {
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        IdentityReport rep;
        rep.id = IdentityId::SYL_BIN;
        DetResultT<R> d = det_lu(build_B<R>(p)); // default pivot policy: catches s1 = s2
        rep.params_echo = {{"s1", cplx_json(p.s1)}, {"s2", cplx_json(p.s2)}};
        rep.diagnostics["growth"] = d.growth_factor;
        rep.diagnostics["rank_deficient"] = d.rank_deficient;
        detail::finish_report(rep, d.value, rhs_syl_bin<R>(p), ctx.tolerance);
        return rep;
    });
}

inline IdentityReport check_fkx(const HypergeomParams& p, const CheckContext& ctx) {
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        IdentityReport rep;
        rep.id = IdentityId::FKX;
        DetResultT<R> d = det_lu(build_M<R>(p), detail::generic_pivot());
        rep.params_echo = {{"s1", cplx_json(p.s1)}, {"s2", cplx_json(p.s2)}};
        rep.diagnostics["growth"] = d.growth_factor;
        detail::finish_report(rep, d.value, rhs_fkx<R>(p), ctx.tolerance);
        return rep;
    });
}

inline nlohmann::json f_params_echo(const EllipticFParams& p) {
    return {{"q", cplx_json(p.bn.q)}, {"p", cplx_json(p.bn.p)}, {"s1", cplx_json(p.s1)},
            {"s2", cplx_json(p.s2)},  {"t1", cplx_json(p.t1)}, {"t2", cplx_json(p.t2)}};
}

inline nlohmann::json g_params_echo(const EllipticGParams& p) {
    return {{"q", cplx_json(p.bn.q)}, {"p", cplx_json(p.bn.p)}, {"a", cplx_json(p.a)},
            {"b", cplx_json(p.b)},    {"c", cplx_json(p.c)},    {"d", cplx_json(p.d)},
            {"e", cplx_json(p.e)},    {"f", cplx_json(p.f)}};
}

inline IdentityReport check_thm21(const EllipticFParams& p, Thm21Form form,
                                  const CheckContext& ctx) {
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        IdentityReport rep;
        rep.id = form == Thm21Form::main ? IdentityId::THM21 : IdentityId::THM21_ALT;
        DetResultT<R> d = det_lu(build_F<R>(p, ctx.pol), detail::generic_pivot());
        rep.params_echo = f_params_echo(p);
        rep.diagnostics["growth"] = d.growth_factor;
        rep.diagnostics["forms_residual"] = rel_residual(rhs_thm21<R>(p, Thm21Form::main, ctx.pol),
                                                         rhs_thm21<R>(p, Thm21Form::alt, ctx.pol));
        detail::finish_report(rep, d.value, rhs_thm21<R>(p, form, ctx.pol), ctx.tolerance);
        return rep;
    });
}

inline nlohmann::json uv_params_echo(const UVParams& p) {
    return {{"q", cplx_json(p.bn.q)}, {"s1", cplx_json(p.s1)}, {"s2", cplx_json(p.s2)}};
}

inline IdentityReport check_cor22(const UVParams& p, const CheckContext& ctx) {
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        IdentityReport rep;
        rep.id = IdentityId::COR22;
        DetResultT<R> d = det_lu(build_U<R>(p, ctx.pol), detail::generic_pivot());
        rep.params_echo = uv_params_echo(p);
        rep.diagnostics["growth"] = d.growth_factor;
        detail::finish_report(rep, d.value, rhs_cor22<R>(p, ctx.pol), ctx.tolerance);
        return rep;
    });
}

inline IdentityReport check_cor23(const UVParams& p, const CheckContext& ctx) {
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        IdentityReport rep;
        rep.id = IdentityId::COR23;
        DetResultT<R> d = det_lu(build_V<R>(p, ctx.pol), detail::generic_pivot());
        rep.params_echo = uv_params_echo(p);
        rep.diagnostics["growth"] = d.growth_factor;
        detail::finish_report(rep, d.value, rhs_cor23<R>(p, ctx.pol), ctx.tolerance);
        return rep;
    });
}

// ---------------------------------------------------------------------------
// Determinant lemma (quasi-periodic symmetric row families)
// ---------------------------------------------------------------------------

/// A row family P_i(x), evaluated in the chosen backend.
template <typename Real = double>
struct PFamilyT {
    std::string name;
    std::function<TrackedValueT<Real>(int i, std::complex<Real> x)> eval;
};

using PFamily = PFamilyT<double>;

/// The row family used throughout: P_i(x) = (sqrt(c)/x)^i (x q^{1-i}, x/c)_i.
template <typename Real = double>
PFamilyT<Real> default_p_family(cplx c, const BaseNome& bn, const TruncationPolicy& pol = {}) {
    using C = std::complex<Real>;
    const C cr = to_real_complex<Real>(c);
    const C root_c = complex_sqrt<Real>(cr);
    return {"(sqrt(c)/x)^i (x q^{1-i}, x/c)_i",
            [root_c, cr, bn, pol](int i, C x) {
                TrackedValueT<Real> v = tracked_ipow(root_c / x, i);
                v *= qp_factorial(ThetaArgT<Real>::generic(x, 1 - i), i, bn, pol);
                v *= qp_factorial(ThetaArgT<Real>::generic(x / cr), i, bn, pol);
                return v;
            }};
}

struct WarnaarParams {
    BaseNome bn;
    int n = 0;
    std::vector<cplx> A;
    cplx c;
    std::vector<cplx> x;
};

namespace detail {

template <typename Real>
IdentityReport warnaar_impl(const WarnaarParams& p, const PFamilyT<Real>& fam,
                            const CheckContext& ctx, double pretest_tol) {
    using C = std::complex<Real>;
    if (static_cast<int>(p.A.size()) != p.n || static_cast<int>(p.x.size()) != p.n)
        throw std::invalid_argument("warnaar_lemma_check: A and x must have length n");
    IdentityReport rep;
    rep.id = IdentityId::WARNAAR_LEMMA;

    const C pr = to_real_complex<Real>(p.bn.p);
    const C cr = to_real_complex<Real>(p.c);
    double worst_qp = 0.0, worst_sym = 0.0;
    for (int i = 0; i < p.n; ++i) {
        for (cplx xd : p.x) {
            const C x = to_real_complex<Real>(xd);
            TrackedValueT<Real> lhs = fam.eval(i, pr * x);
            TrackedValueT<Real> rhs = tracked_ipow(cr / (x * x * pr), i) * fam.eval(i, x);
            worst_qp = std::max(worst_qp, rel_residual(lhs, rhs));
            TrackedValueT<Real> lhs2 = fam.eval(i, cr / x);
            worst_sym = std::max(worst_sym, rel_residual(lhs2, fam.eval(i, x)));
        }
    }
    rep.diagnostics["pretest_quasi_periodicity"] = worst_qp;
    rep.diagnostics["pretest_symmetry"] = worst_sym;
    if (worst_qp > pretest_tol)
        throw std::domain_error("warnaar_lemma_check: P-family fails quasi-periodicity pretest");
    if (worst_sym > pretest_tol)
        throw std::domain_error("warnaar_lemma_check: P-family fails symmetry pretest");

    TrackedMatrixT<Real> m(static_cast<std::size_t>(p.n), static_cast<std::size_t>(p.n));
    for (int i = 0; i < p.n; ++i)
        for (int j = 0; j < p.n; ++j) {
            const C xj = to_real_complex<Real>(p.x[static_cast<std::size_t>(j)]);
            TrackedValueT<Real> v = fam.eval(i, xj);
            for (int k = i + 1; k < p.n; ++k) {
                const C ak = to_real_complex<Real>(p.A[static_cast<std::size_t>(k)]);
                v *= theta_eval<Real>(ak * xj, pr, ctx.pol);
                v *= theta_eval<Real>(cr * ak / xj, pr, ctx.pol);
            }
            m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = v;
        }
    DetResultT<Real> d = det_lu(m, generic_pivot());

    TrackedValueT<Real> rhs = TrackedValueT<Real>::one();
    for (int i = 0; i < p.n; ++i)
        for (int j = i + 1; j < p.n; ++j) {
            const C xi = to_real_complex<Real>(p.x[static_cast<std::size_t>(i)]);
            const C xj = to_real_complex<Real>(p.x[static_cast<std::size_t>(j)]);
            const C aj = to_real_complex<Real>(p.A[static_cast<std::size_t>(j)]);
            rhs *= cr * aj / xj;
            rhs *= theta_eval<Real>(xj / xi, pr, ctx.pol);
            rhs *= theta_eval<Real>(xi * xj / cr, pr, ctx.pol);
        }
    for (int i = 0; i < p.n; ++i) {
        const C ai = to_real_complex<Real>(p.A[static_cast<std::size_t>(i)]);
        rhs *= fam.eval(i, C(Real(1), Real(0)) / ai);
    }

    nlohmann::json aj = nlohmann::json::array(), xj = nlohmann::json::array();
    for (cplx v : p.A) aj.push_back(cplx_json(v));
    for (cplx v : p.x) xj.push_back(cplx_json(v));
    rep.params_echo = {{"q", cplx_json(p.bn.q)}, {"p", cplx_json(p.bn.p)},
                       {"c", cplx_json(p.c)},    {"A", aj},
                       {"x", xj},                {"n", p.n}};
    rep.diagnostics["growth"] = d.growth_factor;
    rep.diagnostics["p_family"] = fam.name;
    finish_report(rep, d.value, rhs, ctx.tolerance);
    return rep;
}

} // namespace detail

/// Verifies the P-family's quasi-periodicity and symmetry numerically, then
/// compares the n x n determinant with the closed double product.
inline IdentityReport warnaar_lemma_check(const WarnaarParams& p, const CheckContext& ctx,
                                          double pretest_tol = 1e-10) {
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        return detail::warnaar_impl<R>(p, default_p_family<R>(p.c, p.bn, ctx.pol), ctx,
                                       pretest_tol);
    });
}

/// Variant with a caller-supplied row family (double backend).
inline IdentityReport warnaar_lemma_check(const WarnaarParams& p, const PFamily& fam,
                                          const CheckContext& ctx, double pretest_tol = 1e-10) {
    return detail::warnaar_impl<double>(p, fam, ctx, pretest_tol);
}

// ---------------------------------------------------------------------------
// Banded minor determinant in closed form
// ---------------------------------------------------------------------------

struct Lemma32Params {
    BaseNome bn;
    int r1 = 0, r2 = 1;
    cplx a;
    std::vector<int> kvec;
};

template <typename Real = double>
TrackedMatrixT<Real> build_lemma32_matrix(const Lemma32Params& p,
                                          const TruncationPolicy& pol = {}) {
    using TA = ThetaArgT<Real>;
    const auto q = to_real_complex<Real>(p.bn.q);
    const auto a = to_real_complex<Real>(p.a);
    TrackedMatrixT<Real> m(static_cast<std::size_t>(p.r2), static_cast<std::size_t>(p.r2));
    for (int i = 0; i < p.r2; ++i)
        for (int j = 0; j < p.r2; ++j) {
            const int k = p.kvec[static_cast<std::size_t>(j)];
            TrackedValueT<Real> v = tracked_ipow(q, -static_cast<long>(i) * k);
            v *= qp_factorial(TA::qpow(k - i + 1), i, p.bn, pol);
            v *= qp_factorial(TA::generic(a, k), i, p.bn, pol);
            v *= qp_factorial(TA::qpow(p.r1 - k + i + 1), p.r2 - i - 1, p.bn, pol);
            v *= qp_factorial(TA::generic(a, p.r1 + k + i + 1), p.r2 - i - 1, p.bn, pol);
            m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = v;
        }
    return m;
}

template <typename Real = double>
TrackedValueT<Real> rhs_lemma32(const Lemma32Params& p, const TruncationPolicy& pol = {}) {
    using TA = ThetaArgT<Real>;
    const auto q = to_real_complex<Real>(p.bn.q);
    const auto a = to_real_complex<Real>(p.a);
    long e = 0;
    for (int i = 0; i < p.r2; ++i) e += static_cast<long>(i) * p.kvec[static_cast<std::size_t>(i)];
    TrackedValueT<Real> v = tracked_ipow(q, -e);
    for (int i = 0; i < p.r2; ++i)
        for (int j = i + 1; j < p.r2; ++j) {
            v *= theta(TA::qpow(p.kvec[j] - p.kvec[i]), p.bn, pol);
            v *= theta(TA::generic(a, p.kvec[i] + p.kvec[j]), p.bn, pol);
        }
    for (int i = 0; i < p.r2; ++i) {
        v *= qp_factorial(TA::qpow(p.r1 + 1), i, p.bn, pol);
        v *= qp_factorial(TA::generic(a, p.r1 + i), i, p.bn, pol);
    }
    return v;
}

inline IdentityReport lemma32_check(const Lemma32Params& p, const CheckContext& ctx) {
    if (static_cast<int>(p.kvec.size()) != p.r2)
        throw std::invalid_argument("lemma32_check: kvec must have length r2");
    for (std::size_t i = 1; i < p.kvec.size(); ++i)
        if (p.kvec[i] <= p.kvec[i - 1])
            throw std::invalid_argument("lemma32_check: kvec must be strictly increasing");
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        IdentityReport rep;
        rep.id = IdentityId::LEMMA32;
        DetResultT<R> d = det_lu(build_lemma32_matrix<R>(p, ctx.pol), detail::generic_pivot());
        rep.params_echo = {{"q", cplx_json(p.bn.q)}, {"p", cplx_json(p.bn.p)},
                           {"a", cplx_json(p.a)},    {"r1", p.r1},
                           {"r2", p.r2},             {"kvec", p.kvec}};
        rep.diagnostics["growth"] = d.growth_factor;
        detail::finish_report(rep, d.value, rhs_lemma32<R>(p, ctx.pol), ctx.tolerance);
        return rep;
    });
}

// ---------------------------------------------------------------------------
// C_n multiple summation
// ---------------------------------------------------------------------------

namespace detail {

/// Prefix factorial table f[k] = (x)_k for k = 0..kmax.
template <typename Real>
std::vector<TrackedValueT<Real>> fact_table(const ThetaArgT<Real>& x, int kmax, const BaseNome& bn,
                                            const TruncationPolicy& pol) {
    std::vector<TrackedValueT<Real>> f(static_cast<std::size_t>(kmax) + 1,
                                       TrackedValueT<Real>::one());
    for (int k = 0; k < kmax; ++k) f[k + 1] = f[k] * theta(x.shifted(k), bn, pol);
    return f;
}

/// Tables shared by the terms of a C_n sum. The per-index factorial ratios
/// (numerators interleaved with denominators to bound magnitude), the
/// well-poised ratio theta(wp q^{2k})/theta(wp) and the k-proportional part
/// of the q-power collapse into one combined factor per column index; the
/// pair products and the position-dependent q-powers are separate lookups.
template <typename Real>
struct CnTables {
    std::vector<TrackedValueT<Real>> combined;             // [k]
    std::vector<std::vector<TrackedValueT<Real>>> pos_pow; // [i][k] = q^{-2 i k}
    std::vector<TrackedValueT<Real>> pair2; // [x*(m+1)+y] = (theta(q^{y-x}) theta(wp q^{x+y}))^2
    int m = 0, r2 = 0;
    std::complex<Real> q;

    void build(const std::vector<std::vector<TrackedValueT<Real>>>& num,
               const std::vector<std::vector<TrackedValueT<Real>>>& den,
               const std::vector<TrackedValueT<Real>>& theta_qd,
               const std::vector<TrackedValueT<Real>>& theta_a, std::complex<Real> q) {
        combined.assign(static_cast<std::size_t>(m) + 1, TrackedValueT<Real>::one());
        for (int k = 0; k <= m; ++k) {
            TrackedValueT<Real>& t = combined[static_cast<std::size_t>(k)];
            for (std::size_t a = 0; a < num.size(); ++a) {
                t *= num[a][static_cast<std::size_t>(k)];
                t /= den[a][static_cast<std::size_t>(k)];
            }
            t *= theta_a[static_cast<std::size_t>(2 * k)] / theta_a[0];
            t *= tracked_ipow(q, (2L * r2 - 1) * k);
        }
        pos_pow.assign(static_cast<std::size_t>(r2), {});
        for (int i = 0; i < r2; ++i) {
            pos_pow[static_cast<std::size_t>(i)].reserve(static_cast<std::size_t>(m) + 1);
            for (int k = 0; k <= m; ++k)
                pos_pow[static_cast<std::size_t>(i)].push_back(
                    tracked_ipow(q, -2L * i * k));
        }
        pair2.assign(static_cast<std::size_t>(m + 1) * static_cast<std::size_t>(m + 1),
                     TrackedValueT<Real>::one());
        for (int x = 0; x <= m; ++x)
            for (int y = x + 1; y <= m; ++y) {
                TrackedValueT<Real> v = theta_qd[static_cast<std::size_t>(y - x - 1)] *
                                        theta_a[static_cast<std::size_t>(x + y)];
                pair2[static_cast<std::size_t>(x * (m + 1) + y)] = v * v;
            }
    }

    TrackedValueT<Real> term(const SubsetIndex& s) const {
        TrackedValueT<Real> t = TrackedValueT<Real>::one();
        for (std::size_t i = 0; i < s.ks.size(); ++i) {
            t *= combined[static_cast<std::size_t>(s.ks[i])];
            t *= pos_pow[i][static_cast<std::size_t>(s.ks[i])];
        }
        for (std::size_t i = 0; i < s.ks.size(); ++i)
            for (std::size_t j = i + 1; j < s.ks.size(); ++j)
                t *= pair2[static_cast<std::size_t>(s.ks[i] * (m + 1) + s.ks[j])];
        return t;
    }
};

/// Sum of term(s) over all r2-subsets of {0..m}, lexicographic unless
/// reversed (the reversal exists to let tests probe accumulation order).
/// `cancel_digits`, when given, receives log10(peak term / |sum|), the
/// decimal digits lost to cancellation.
template <typename Real>
TrackedValueT<Real> cn_accumulate(const CnTables<Real>& tb, bool reverse_order,
                                  double* cancel_digits = nullptr) {
    TrackedSumT<Real> sum;
    if (!reverse_order) {
        for_each_subset(tb.m + 1, tb.r2, [&](const SubsetIndex& s) { sum.add(tb.term(s)); });
    } else {
        std::vector<SubsetIndex> all = subsets(tb.m + 1, tb.r2);
        for (auto it = all.rbegin(); it != all.rend(); ++it) sum.add(tb.term(*it));
    }
    TrackedValueT<Real> t = sum.total();
    if (cancel_digits)
        *cancel_digits =
            t.is_zero() ? 0.0 : (sum.peak_log2() * 0.30102999566398120 - t.log10_abs());
    return t;
}

template <typename Real>
CnTables<Real> cn_sum_tables(const EllipticFParams& p, const TruncationPolicy& pol) {
    using TA = ThetaArgT<Real>;
    using C = std::complex<Real>;
    const int m = p.r1 + p.r2 - 1;
    const C s1 = to_real_complex<Real>(p.s1), s2 = to_real_complex<Real>(p.s2);
    const C t1 = to_real_complex<Real>(p.t1), t2 = to_real_complex<Real>(p.t2);
    const C s12 = s1 * s2;
    const C w = s1 * s2 * s2 / (t1 * t2);
    CnTables<Real> tb;
    tb.m = m;
    tb.r2 = p.r2;
    tb.q = to_real_complex<Real>(p.bn.q);
    const std::vector<TA> num{TA::generic(s12, -1), TA::generic(s1),
                              TA::generic(t1),      TA::generic(t2),
                              TA::generic(w, p.r1 - p.r2), TA::qpow(-m)};
    const std::vector<TA> den{TA::qpow(1),
                              TA::generic(s2),
                              TA::generic(s12 / t1),
                              TA::generic(s12 / t2),
                              TA::generic(t1 * t2 / s2, p.r2 - p.r1),
                              TA::generic(s12, m)};
    std::vector<std::vector<TrackedValueT<Real>>> numt, dent;
    for (const auto& a : num) numt.push_back(fact_table<Real>(a, m, p.bn, pol));
    for (const auto& a : den) dent.push_back(fact_table<Real>(a, m, p.bn, pol));
    std::vector<TrackedValueT<Real>> theta_qd, theta_a;
    for (int d = 1; d <= std::max(m, 1); ++d)
        theta_qd.push_back(theta(TA::qpow(d), p.bn, pol));
    // well-poised base s1 s2 / q: pair exponents k_i + k_j land on s1 s2 q^{k_i+k_j-1}
    for (int e = 0; e <= 2 * m; ++e)
        theta_a.push_back(theta(TA::generic(s12, e - 1), p.bn, pol));
    tb.build(numt, dent, theta_qd, theta_a, tb.q);
    return tb;
}

} // namespace detail

/// Left-hand side of the C_n summation: the multiple sum itself.
template <typename Real = double>
TrackedValueT<Real> cn_sum_lhs(const EllipticFParams& p, const TruncationPolicy& pol = {},
                               bool reverse_order = false, double* cancel_digits = nullptr) {
    if (p.r2 == 0) return TrackedValueT<Real>::one(); // single empty subset
    return detail::cn_accumulate(detail::cn_sum_tables<Real>(p, pol), reverse_order,
                                 cancel_digits);
}

/// Right-hand side of the C_n summation: the closed product. All factors,
/// including the ones not indexed by j, sit inside the product over j.
template <typename Real = double>
TrackedValueT<Real> cn_sum_rhs(const EllipticFParams& p, const TruncationPolicy& pol = {}) {
    if (p.r2 == 0) return TrackedValueT<Real>::one();
    using TA = ThetaArgT<Real>;
    using C = std::complex<Real>;
    const int m = p.r1 + p.r2 - 1;
    const C q = to_real_complex<Real>(p.bn.q);
    const C s1 = to_real_complex<Real>(p.s1), s2 = to_real_complex<Real>(p.s2);
    const C t1 = to_real_complex<Real>(p.t1), t2 = to_real_complex<Real>(p.t2);
    const C s12 = s1 * s2;
    const C w = s1 * s2 * s2 / (t1 * t2);
    auto qp = [&](TA a, long k) { return qp_factorial(a, k, p.bn, pol); };

    TrackedValueT<Real> v = tracked_ipow(q, -4 * binom(p.r2, 3)) *
                            tracked_ipow(s2 / (t1 * t2 * q * q), binom2(p.r2));
    for (int j = 1; j <= p.r2; ++j) {
        v *= qp(TA::qpow(1), j - 1);
        v *= qp(TA::generic(s1), j - 1);
        v *= qp(TA::generic(t1), j - 1);
        v *= qp(TA::generic(t2), j - 1);
        v *= qp(TA::generic(w, p.r1 - p.r2), j - 1);
        v *= qp(TA::qpow(1), m);
        v *= qp(TA::generic(s12), m);
        v *= qp(TA::generic(s2 / t1, 1 - j), p.r1);
        v *= qp(TA::generic(s2 / t2, 1 - j), p.r1);
        v *= qp(TA::generic(s12 / (t1 * t2), 1 - j), p.r1);
        v /= qp(TA::qpow(1), p.r1 + p.r2 - j);
        v /= qp(TA::generic(s2), p.r1 + p.r2 - j);
        v /= qp(TA::generic(s12 / t1), p.r1 + p.r2 - j);
        v /= qp(TA::generic(s12 / t2), p.r1 + p.r2 - j);
        v /= qp(TA::generic(s2 / (t1 * t2), 1 - 2 * p.r2 + j), p.r1 + p.r2 - j);
    }
    return v;
}

inline IdentityReport cn_sum_check(const EllipticFParams& p, const CheckContext& ctx) {
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        IdentityReport rep;
        rep.id = IdentityId::CN_SUM;
        rep.params_echo = f_params_echo(p);
        rep.diagnostics["terms"] = binom(p.r1 + p.r2, p.r2);
        double cancel = 0.0;
        TrackedValueT<R> lhs = cn_sum_lhs<R>(p, ctx.pol, false, &cancel);
        rep.diagnostics["cancel_digits"] = cancel;
        detail::finish_report(rep, lhs, cn_sum_rhs<R>(p, ctx.pol), ctx.tolerance);
        return rep;
    });
}

// ---------------------------------------------------------------------------
// C_n transformation
// ---------------------------------------------------------------------------

namespace detail {

template <typename Real>
CnTables<Real> rcg_side_tables(const EllipticGParams& p, bool lambda_side,
                               const TruncationPolicy& pol) {
    using TA = ThetaArgT<Real>;
    using C = std::complex<Real>;
    const int m = p.r1 + p.r2 - 1;
    const C a = to_real_complex<Real>(p.a), b = to_real_complex<Real>(p.b);
    const C c = to_real_complex<Real>(p.c), d = to_real_complex<Real>(p.d);
    const C e = to_real_complex<Real>(p.e), f = to_real_complex<Real>(p.f);
    const C lam = p.template lambda_as<Real>();
    const C wp = lambda_side ? lam : a; // the very-well-poised base of the side
    CnTables<Real> tb;
    tb.m = m;
    tb.r2 = p.r2;
    tb.q = to_real_complex<Real>(p.bn.q);
    std::vector<TA> num, den;
    if (!lambda_side) {
        num = {TA::generic(a), TA::generic(b), TA::generic(c), TA::generic(d),
               TA::generic(e), TA::generic(f), TA::generic(lam * a / (e * f), p.r1 + 1),
               TA::qpow(-m)};
        den = {TA::qpow(1),
               TA::generic(a / b, 1),
               TA::generic(a / c, 1),
               TA::generic(a / d, 1),
               TA::generic(a / e, 1),
               TA::generic(a / f, 1),
               TA::generic(e * f / lam, -p.r1),
               TA::generic(a, p.r1 + p.r2)};
    } else {
        num = {TA::generic(lam),         TA::generic(lam * b / a),
               TA::generic(lam * c / a), TA::generic(lam * d / a),
               TA::generic(e),           TA::generic(f),
               TA::generic(lam * a / (e * f), p.r1 + 1), TA::qpow(-m)};
        den = {TA::qpow(1),
               TA::generic(a / b, 1),
               TA::generic(a / c, 1),
               TA::generic(a / d, 1),
               TA::generic(lam / e, 1),
               TA::generic(lam / f, 1),
               TA::generic(e * f / a, -p.r1),
               TA::generic(lam, p.r1 + p.r2)};
    }
    std::vector<std::vector<TrackedValueT<Real>>> numt, dent;
    for (const auto& x : num) numt.push_back(fact_table<Real>(x, m, p.bn, pol));
    for (const auto& x : den) dent.push_back(fact_table<Real>(x, m, p.bn, pol));
    std::vector<TrackedValueT<Real>> theta_qd, theta_a;
    for (int dd = 1; dd <= std::max(m, 1); ++dd)
        theta_qd.push_back(theta(TA::qpow(dd), p.bn, pol));
    for (int ee = 0; ee <= 2 * m; ++ee)
        theta_a.push_back(theta(TA::generic(wp, ee), p.bn, pol));
    tb.build(numt, dent, theta_qd, theta_a, to_real_complex<Real>(p.bn.q));
    return tb;
}

} // namespace detail

template <typename Real = double>
TrackedValueT<Real> rcg_lhs(const EllipticGParams& p, const TruncationPolicy& pol = {},
                            bool reverse_order = false, double* cancel_digits = nullptr) {
    if (p.r2 == 0) return TrackedValueT<Real>::one();
    return detail::cn_accumulate(detail::rcg_side_tables<Real>(p, false, pol), reverse_order,
                                 cancel_digits);
}

template <typename Real = double>
TrackedValueT<Real> rcg_rhs_sum(const EllipticGParams& p, const TruncationPolicy& pol = {},
                                double* cancel_digits = nullptr) {
    if (p.r2 == 0) return TrackedValueT<Real>::one();
    return detail::cn_accumulate(detail::rcg_side_tables<Real>(p, true, pol), false,
                                 cancel_digits);
}

/// The prefactor of the transformed sum, transcribed exactly as displayed
/// (the factors not indexed by j stay inside the product over j).
template <typename Real = double>
TrackedValueT<Real> rcg_prefactor(const EllipticGParams& p, const TruncationPolicy& pol = {}) {
    using C = std::complex<Real>;
    const int m = p.r1 + p.r2 - 1;
    const C a = to_real_complex<Real>(p.a), b = to_real_complex<Real>(p.b);
    const C c = to_real_complex<Real>(p.c), d = to_real_complex<Real>(p.d);
    const C e = to_real_complex<Real>(p.e), f = to_real_complex<Real>(p.f);
    const C lam = p.template lambda_as<Real>();
    auto qp = [&](C x, int shift, long k) {
        return qp_factorial(ThetaArgT<Real>::generic(x, shift), k, p.bn, pol);
    };
    TrackedValueT<Real> v = TrackedValueT<Real>::one();
    for (int j = 1; j <= p.r2; ++j) {
        v *= qp(b, 0, j - 1);
        v *= qp(c, 0, j - 1);
        v *= qp(d, 0, j - 1);
        v *= qp(e * f / a, 0, j - 1);
        v *= qp(a, 1, m);
        v *= qp(a / (e * f), 1, p.r1);
        v *= qp(lam / e, 1, p.r1 + p.r2 - j);
        v *= qp(lam / f, 1, p.r1 + p.r2 - j);
        v /= qp(lam * b / a, 0, j - 1);
        v /= qp(lam * c / a, 0, j - 1);
        v /= qp(lam * d / a, 0, j - 1);
        v /= qp(e * f / lam, 0, j - 1);
        v /= qp(lam, 1, m);
        v /= qp(lam / (e * f), 1, p.r1);
        v /= qp(a / e, 1, p.r1 + p.r2 - j);
        v /= qp(a / f, 1, p.r1 + p.r2 - j);
    }
    return v;
}

inline IdentityReport rcg_check(const EllipticGParams& p, const CheckContext& ctx) {
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        IdentityReport rep;
        rep.id = IdentityId::RCG;
        rep.params_echo = g_params_echo(p);
        rep.diagnostics["terms"] = binom(p.r1 + p.r2, p.r2);
        double cancel_l = 0.0, cancel_r = 0.0;
        TrackedValueT<R> lhs = rcg_lhs<R>(p, ctx.pol, false, &cancel_l);
        TrackedValueT<R> pref = rcg_prefactor<R>(p, ctx.pol);
        TrackedValueT<R> rsum = rcg_rhs_sum<R>(p, ctx.pol, &cancel_r);
        rep.diagnostics["cancel_digits_lhs"] = cancel_l;
        rep.diagnostics["cancel_digits_rhs"] = cancel_r;
        rep.diagnostics["prefactor_log10"] = pref.is_zero() ? 0.0 : pref.log10_abs();
        detail::finish_report(rep, lhs, pref * rsum, ctx.tolerance);
        return rep;
    });
}

// ---------------------------------------------------------------------------
// Determinant transformation and its d = aq/c specialization
// ---------------------------------------------------------------------------

/// (a/lambda)^{r1 r2} prod_j (lambda q^{r1+r2+j-1})_{r2} / (a q^{r1+r2+j-1})_{r2}.
template <typename Real = double>
TrackedValueT<Real> thm41_factor(const EllipticGParams& p, const TruncationPolicy& pol = {}) {
    using C = std::complex<Real>;
    const C a = to_real_complex<Real>(p.a);
    const C lam = p.template lambda_as<Real>();
    TrackedValueT<Real> v = tracked_ipow(a / lam, static_cast<long>(p.r1) * p.r2);
    for (int j = 1; j <= p.r1; ++j) {
        v *= qp_factorial(ThetaArgT<Real>::generic(lam, p.r1 + p.r2 + j - 1), p.r2, p.bn, pol);
        v /= qp_factorial(ThetaArgT<Real>::generic(a, p.r1 + p.r2 + j - 1), p.r2, p.bn, pol);
    }
    return v;
}

inline IdentityReport thm41_check(const EllipticGParams& p, const CheckContext& ctx) {
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        IdentityReport rep;
        rep.id = IdentityId::THM41;
        DetResultT<R> dg = det_lu(build_G<R>(p, ctx.pol), detail::generic_pivot());
        DetResultT<R> dh = det_lu(build_H<R>(p, ctx.pol), detail::generic_pivot());
        TrackedValueT<R> factor = thm41_factor<R>(p, ctx.pol);
        rep.params_echo = g_params_echo(p);
        rep.diagnostics["growth_g"] = dg.growth_factor;
        rep.diagnostics["growth_h"] = dh.growth_factor;
        rep.diagnostics["factor_log10"] = factor.log10_abs();
        detail::finish_report(rep, dg.value, factor * dh.value, ctx.tolerance);
        return rep;
    });
}

/// Row/column scaling factor of the d = aq/c reduction:
/// prod_{i=0}^{r1-1} (c, aq/c)_{r2+i} / (c, aq/c)_i.
template <typename Real = double>
TrackedValueT<Real> sec5_lhs_factor(const EllipticGParams& p, const TruncationPolicy& pol = {}) {
    using C = std::complex<Real>;
    const C a = to_real_complex<Real>(p.a), c = to_real_complex<Real>(p.c);
    TrackedValueT<Real> v = TrackedValueT<Real>::one();
    for (int i = 0; i < p.r1; ++i) {
        v *= qp_factorial(ThetaArgT<Real>::generic(c), p.r2 + i, p.bn, pol);
        v *= qp_factorial(ThetaArgT<Real>::generic(a / c, 1), p.r2 + i, p.bn, pol);
        v /= qp_factorial(ThetaArgT<Real>::generic(c), i, p.bn, pol);
        v /= qp_factorial(ThetaArgT<Real>::generic(a / c, 1), i, p.bn, pol);
    }
    return v;
}

inline nlohmann::json sec5_params_echo(const EllipticGParams& p) {
    return {{"q", cplx_json(p.bn.q)}, {"p", cplx_json(p.bn.p)}, {"a", cplx_json(p.a)},
            {"b", cplx_json(p.b)},    {"c", cplx_json(p.c)},    {"e", cplx_json(p.e)},
            {"f", cplx_json(p.f)}};
}

/// det G' = scaling factor * det F' at d = aq/c.
inline IdentityReport sec5_lhs_check(const EllipticGParams& p, const CheckContext& ctx) {
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        IdentityReport rep;
        rep.id = IdentityId::SEC5_LHS;
        DetResultT<R> dg = det_lu(build_Gprime<R>(p, ctx.pol), detail::generic_pivot());
        DetResultT<R> df = det_lu(build_Fprime<R>(p, ctx.pol), detail::generic_pivot());
        rep.params_echo = sec5_params_echo(p);
        rep.diagnostics["growth_gprime"] = dg.growth_factor;
        rep.diagnostics["growth_fprime"] = df.growth_factor;
        detail::finish_report(rep, dg.value, sec5_lhs_factor<R>(p, ctx.pol) * df.value,
                              ctx.tolerance);
        return rep;
    });
}

/// Closed form of det H' (product of the diagonal entries, simplified),
/// with lambda = a q^{1-r2}/b.
template <typename Real = double>
TrackedValueT<Real> hprime_det_closed(const EllipticGParams& p, const TruncationPolicy& pol = {}) {
    using C = std::complex<Real>;
    const C q = to_real_complex<Real>(p.bn.q);
    const C a = to_real_complex<Real>(p.a), b = to_real_complex<Real>(p.b);
    const C c = to_real_complex<Real>(p.c);
    const C e = to_real_complex<Real>(p.e), f = to_real_complex<Real>(p.f);
    const C lam_b = a / b; // lambda = (a/b) q^{1-r2}
    auto qp = [&](C x, int shift, long k) {
        return qp_factorial(ThetaArgT<Real>::generic(x, shift), k, p.bn, pol);
    };
    TrackedValueT<Real> v =
        tracked_ipow(q, static_cast<long>(p.r1) * p.r1 * p.r2 + p.r1 * binom2(p.r2));
    for (int i = 0; i < p.r1; ++i) {
        v *= qp(c, 0, p.r2 + i);
        v *= qp(a / c, 1, p.r2 + i);
        v /= qp(c, 0, i);
        v /= qp(a / c, 1, i);
        v /= qp(lam_b, 1 - p.r2 + p.r1 + p.r2 + i, p.r2);
    }
    for (int i = 1; i <= p.r1; ++i) {
        v *= qp(a / (b * e), -p.r2 + i + 1, p.r2);
        v *= qp(a / (b * f), -p.r2 + i + 1, p.r2);
        v *= qp(e * f / a, -p.r1 + i - 1, p.r2);
    }
    return v;
}

/// H' must be exactly block-triangular and its determinant the product of
/// the diagonal entries. The zero-pattern violations are counted in the
/// diagnostics; any violation fails the check.
inline IdentityReport sec5_hprime_check(const EllipticGParams& p, const CheckContext& ctx) {
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        IdentityReport rep;
        rep.id = IdentityId::SEC5_HPRIME;
        TrackedMatrixT<R> h = build_Hprime<R>(p, ctx.pol);
        const int n = p.r1 + p.r2;
        int violations = 0;
        for (int i = 0; i < p.r2; ++i)
            for (int j = 0; j < n; ++j)
                if ((j > p.r2 - 1 || j < i) &&
                    !h.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)).is_zero())
                    ++violations;
        for (int i = p.r2; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (j > i &&
                    !h.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)).is_zero())
                    ++violations;

        DetResultT<R> d = det_lu(h, detail::generic_pivot());
        TrackedValueT<R> diag = TrackedValueT<R>::one();
        for (int i = 0; i < n; ++i)
            diag *= h.at(static_cast<std::size_t>(i), static_cast<std::size_t>(i));
        rep.params_echo = sec5_params_echo(p);
        rep.diagnostics["zero_pattern_violations"] = violations;
        rep.diagnostics["closed_form_residual"] =
            rel_residual(diag, hprime_det_closed<R>(p, ctx.pol));
        detail::finish_report(rep, d.value, diag, ctx.tolerance);
        if (violations > 0) rep.passed = false;
        return rep;
    });
}

/// Right-hand side of the specialized transformation: the fully simplified
/// product that the scaling factor times det F' must equal.
template <typename Real = double>
TrackedValueT<Real> sec5_rhs_closed(const EllipticGParams& p, const TruncationPolicy& pol = {}) {
    using C = std::complex<Real>;
    const C q = to_real_complex<Real>(p.bn.q);
    const C a = to_real_complex<Real>(p.a), b = to_real_complex<Real>(p.b);
    const C c = to_real_complex<Real>(p.c);
    const C e = to_real_complex<Real>(p.e), f = to_real_complex<Real>(p.f);
    auto qp = [&](C x, int shift, long k) {
        return qp_factorial(ThetaArgT<Real>::generic(x, shift), k, p.bn, pol);
    };
    const long rr = static_cast<long>(p.r1) * p.r2;
    TrackedValueT<Real> v =
        tracked_ipow(b, rr) * tracked_ipow(q, rr * (p.r1 + p.r2 - 1) + p.r1 * binom2(p.r2));
    for (int i = 0; i < p.r1; ++i) {
        v *= qp(c, 0, p.r2 + i);
        v *= qp(a / c, 1, p.r2 + i);
        v /= qp(c, 0, i);
        v /= qp(a / c, 1, i);
    }
    for (int i = 1; i <= p.r1; ++i) {
        v *= qp(a / (b * e), -p.r2 + i + 1, p.r2);
        v *= qp(a / (b * f), -p.r2 + i + 1, p.r2);
        v *= qp(e * f / a, -p.r1 + i - 1, p.r2);
        v /= qp(a, p.r1 + p.r2 + i - 1, p.r2);
    }
    return v;
}

/// The specialized transformation reproduces the alternate product form
/// under (a, b, e, f) -> (s1 s2 / q, s1, t1, t2): closed form vs closed form.
inline IdentityReport sec5_rhs_check(const EllipticGParams& p, const CheckContext& ctx) {
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        IdentityReport rep;
        rep.id = IdentityId::SEC5_RHS;
        EllipticFParams fp;
        fp.bn = p.bn;
        fp.s1 = p.b;
        fp.s2 = p.a * p.bn.q / p.b;
        fp.t1 = p.e;
        fp.t2 = p.f;
        fp.r1 = p.r1;
        fp.r2 = p.r2;
        rep.params_echo = sec5_params_echo(p);
        detail::finish_report(rep,
                              sec5_rhs_closed<R>(p, ctx.pol) / sec5_lhs_factor<R>(p, ctx.pol),
                              rhs_thm21<R>(fp, Thm21Form::alt, ctx.pol), ctx.tolerance);
        return rep;
    });
}

// ---------------------------------------------------------------------------
// Laplace expansion cross-check
// ---------------------------------------------------------------------------

namespace detail {

/// Precomputed pieces of the top-minor closed form: the subset-independent
/// row part, one combined factor per admissible column index, and theta
/// lookups for the pair products.
template <typename Real>
struct D1ClosedTables {
    TrackedValueT<Real> row_part;
    std::vector<TrackedValueT<Real>> per_k;    // combined k-indexed factor
    std::vector<TrackedValueT<Real>> theta_qd; // theta(q^d), d = 1..n-1
    std::vector<TrackedValueT<Real>> theta_s12; // theta(s1 s2 q^e), e = -1..2n-3
    int r1 = 0, r2 = 0;
    std::complex<Real> q;

    TrackedValueT<Real> eval(std::span<const int> kvec) const {
        long e = -(2L * r2 - 1) * binom2(r2) / 3; // always an integer
        for (int j = 0; j < r2; ++j) {
            const int k = kvec[static_cast<std::size_t>(j)];
            e += binom2(k) + static_cast<long>(r2) * k - static_cast<long>(j) * k;
        }
        TrackedValueT<Real> v = row_part * tracked_ipow(q, e);
        for (int j = 0; j < r2; ++j) v *= per_k[static_cast<std::size_t>(kvec[j])];
        for (int i = 0; i < r2; ++i)
            for (int j = i + 1; j < r2; ++j) {
                v *= theta_qd[static_cast<std::size_t>(kvec[j] - kvec[i] - 1)];
                v *= theta_s12[static_cast<std::size_t>(kvec[i] + kvec[j])];
            }
        return v;
    }
};

template <typename Real>
D1ClosedTables<Real> d1_closed_tables(const EllipticFParams& p, const TruncationPolicy& pol) {
    using TA = ThetaArgT<Real>;
    using C = std::complex<Real>;
    const C s1 = to_real_complex<Real>(p.s1), s2 = to_real_complex<Real>(p.s2);
    const C t1 = to_real_complex<Real>(p.t1), t2 = to_real_complex<Real>(p.t2);
    const C s12 = s1 * s2;
    const C w = s1 * s2 * s2 / (t1 * t2);
    const int n = p.r1 + p.r2;
    auto qp = [&](TA a, long k) { return qp_factorial(a, k, p.bn, pol); };

    D1ClosedTables<Real> tb;
    tb.r1 = p.r1;
    tb.r2 = p.r2;
    tb.q = to_real_complex<Real>(p.bn.q);
    tb.row_part = TrackedValueT<Real>::one();
    for (int i = 0; i < p.r2; ++i) {
        tb.row_part *= qp(TA::qpow(1), p.r1);
        tb.row_part *= qp(TA::qpow(p.r1 + 1), i);
        tb.row_part *= qp(TA::generic(s12, p.r1 + i - 1), i);
        tb.row_part *= qp(TA::generic(s12, p.r1), 2 * i);
        tb.row_part /= qp(TA::generic(s1), i);
        tb.row_part /= qp(TA::generic(t1), i);
        tb.row_part /= qp(TA::generic(t2), i);
        tb.row_part /= qp(TA::generic(w, p.r1 - p.r2), i);
    }
    for (int k = 0; k < n; ++k) {
        TrackedValueT<Real> v = qp(TA::generic(s1), k);
        v *= qp(TA::generic(t1), k);
        v *= qp(TA::generic(t2), k);
        v *= qp(TA::generic(w, p.r1 - p.r2), k);
        v /= qp(TA::qpow(1), k);
        v /= qp(TA::generic(s12, k - 1), k);
        v /= qp(TA::qpow(1), n - k - 1);
        v /= qp(TA::generic(s12, p.r1), p.r2 + k - 1);
        tb.per_k.push_back(v);
    }
    for (int d = 1; d <= std::max(n - 1, 1); ++d)
        tb.theta_qd.push_back(theta(TA::qpow(d), p.bn, pol));
    for (int e = -1; e <= 2 * n - 3 + 1; ++e)
        tb.theta_s12.push_back(theta(TA::generic(s12, e), p.bn, pol));
    return tb;
}

} // namespace detail

/// Closed form of the top-block minor determinant at columns kvec, obtained
/// from the banded-minor lemma with a -> s1 s2 / q.
template <typename Real = double>
TrackedValueT<Real> d1_closed_form(const EllipticFParams& p, std::span<const int> kvec,
                                   const TruncationPolicy& pol = {}) {
    return detail::d1_closed_tables<Real>(p, pol).eval(kvec);
}

/// Expands det F over the first r2 rows, comparing every top minor with its
/// closed form and the accumulated sum with det_lu. The reported residual is
/// the worst of the per-minor and the sum-vs-LU residuals.
inline IdentityReport laplace_cross_check(const EllipticFParams& p, const CheckContext& ctx) {
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        IdentityReport rep;
        rep.id = IdentityId::LAPLACE_XCHECK;
        TrackedMatrixT<R> f = build_F<R>(p, ctx.pol);
        detail::D1ClosedTables<R> closed_tables = detail::d1_closed_tables<R>(p, ctx.pol);
        double worst_minor = 0.0;
        TrackedValueT<R> sum = laplace_block_expand(
            f, p.r2,
            [&](const SubsetIndex& s, const DetResultT<R>& d1, const DetResultT<R>&) {
                worst_minor = std::max(worst_minor, rel_residual(d1.value, closed_tables.eval(s.ks)));
            },
            detail::generic_pivot());
        DetResultT<R> lu = det_lu(f, detail::generic_pivot());
        double sum_vs_lu = rel_residual(sum, lu.value);
        rep.params_echo = f_params_echo(p);
        rep.diagnostics["worst_minor_residual"] = worst_minor;
        rep.diagnostics["laplace_vs_lu"] = sum_vs_lu;
        rep.diagnostics["terms"] = binom(p.r1 + p.r2, p.r2);
        detail::finish_report(rep, sum, lu.value, ctx.tolerance);
        rep.rel_residual = std::max(worst_minor, sum_vs_lu);
        rep.passed = rep.rel_residual <= ctx.tolerance;
        return rep;
    });
}

// ---------------------------------------------------------------------------
// Elementary reflection identities for the shifted factorials
// ---------------------------------------------------------------------------

/// Checks (a)_n = (pa)_n (-a)^n q^{C(n,2)} and
///        (a)_n = (q^{1-n}/a)_n (-a)^n q^{C(n,2)};
/// the reported residual is the worse of the two.
inline IdentityReport reflect_identities_check(cplx a, int n, const BaseNome& bn,
                                               const CheckContext& ctx) {
    if (n < 0) throw std::invalid_argument("reflect_identities_check: n must be >= 0");
    return detail::dispatch(ctx.backend, [&]<typename R>() {
        using C = std::complex<R>;
        IdentityReport rep;
        const C ar = to_real_complex<R>(a);
        const C qr = to_real_complex<R>(bn.q);
        const C pr = to_real_complex<R>(bn.p);
        TrackedValueT<R> lhs = qp_factorial(ThetaArgT<R>::generic(ar), n, bn, ctx.pol);
        TrackedValueT<R> tail = tracked_ipow(-ar, n) * tracked_ipow(qr, binom2(n));
        TrackedValueT<R> rhs1 =
            qp_factorial(ThetaArgT<R>::generic(pr * ar), n, bn, ctx.pol) * tail;
        TrackedValueT<R> rhs2 =
            qp_factorial(ThetaArgT<R>::generic(C(R(1), R(0)) / ar, 1 - n), n, bn, ctx.pol) * tail;
        double res1 = rel_residual(lhs, rhs1);
        double res2 = rel_residual(lhs, rhs2);
        rep.params_echo = {{"q", cplx_json(bn.q)}, {"p", cplx_json(bn.p)},
                           {"a", cplx_json(a)},    {"n", n}};
        rep.diagnostics["op"] = "reflect_identities_check";
        rep.diagnostics["nome_shift_residual"] = res1;
        rep.diagnostics["index_reversal_residual"] = res2;
        detail::finish_report(rep, lhs, res1 >= res2 ? rhs1 : rhs2, ctx.tolerance);
        rep.rel_residual = std::max(res1, res2);
        rep.passed = rep.rel_residual <= ctx.tolerance;
        return rep;
    });
}

} // namespace elldet
