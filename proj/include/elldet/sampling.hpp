#pragma once

#include <string>
#include <variant>
#include <vector>

#include "elldet/identities.hpp"
#include "elldet/rng.hpp"

namespace elldet {

/// Raised when rejection sampling cannot reach generic position.
class genericity_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using ParamBundle = std::variant<SylvesterBinomialParams, HypergeomParams, EllipticFParams,
                                 UVParams, EllipticGParams, WarnaarParams, Lemma32Params>;

/// Evaluate one identity on a parameter bundle.
inline IdentityReport run_identity_check(IdentityId id, const ParamBundle& b,
                                         const CheckContext& ctx) {
    switch (id) {
        case IdentityId::SYL_BIN: return check_syl_bin(std::get<SylvesterBinomialParams>(b), ctx);
        case IdentityId::FKX: return check_fkx(std::get<HypergeomParams>(b), ctx);
        case IdentityId::THM21:
            return check_thm21(std::get<EllipticFParams>(b), Thm21Form::main, ctx);
        case IdentityId::THM21_ALT:
            return check_thm21(std::get<EllipticFParams>(b), Thm21Form::alt, ctx);
        case IdentityId::COR22: return check_cor22(std::get<UVParams>(b), ctx);
        case IdentityId::COR23: return check_cor23(std::get<UVParams>(b), ctx);
        case IdentityId::WARNAAR_LEMMA:
            return warnaar_lemma_check(std::get<WarnaarParams>(b), ctx);
        case IdentityId::LEMMA32: return lemma32_check(std::get<Lemma32Params>(b), ctx);
        case IdentityId::CN_SUM: return cn_sum_check(std::get<EllipticFParams>(b), ctx);
        case IdentityId::LAPLACE_XCHECK:
            return laplace_cross_check(std::get<EllipticFParams>(b), ctx);
        case IdentityId::THM41: return thm41_check(std::get<EllipticGParams>(b), ctx);
        case IdentityId::RCG: return rcg_check(std::get<EllipticGParams>(b), ctx);
        case IdentityId::SEC5_LHS: return sec5_lhs_check(std::get<EllipticGParams>(b), ctx);
        case IdentityId::SEC5_HPRIME: return sec5_hprime_check(std::get<EllipticGParams>(b), ctx);
        case IdentityId::SEC5_RHS: return sec5_rhs_check(std::get<EllipticGParams>(b), ctx);
    }
    throw std::logic_error("run_identity_check: unknown identity");
}

struct SamplerOptions {
    double modulus_lo = 0.2;
    double modulus_hi = 2.0;
    double p_modulus_max = 0.5;
    double min_theta = 1e-6; // genericity floor for screened theta factors
    // A draw is also rejected when the double-backend evaluation of the
    // identity loses more than ~13 digits; the extended-precision check then
    // always verifies at several orders below the tolerance.
    double precheck_max_residual = 1e-3;
    int max_retries = 1000;
    TruncationPolicy pol;
};

namespace detail {

/// Screens a list of theta factors; returns the offending description or
/// empty when all factors clear the genericity floor.
class GenericityScreen {
public:
    GenericityScreen(const BaseNome& bn, const SamplerOptions& opt) : bn_(bn), opt_(opt) {}

    /// Check theta(coeff q^e) for e in [elo, ehi].
    void factor_range(const char* label, cplx coeff, int elo, int ehi) {
        if (!offender_.empty()) return;
        for (int e = elo; e <= ehi; ++e) {
            TrackedValue t = theta(ThetaArg::generic(coeff, e), bn_, opt_.pol);
            if (!t.is_zero() && std::abs(t.value()) < opt_.min_theta) {
                offender_ = std::string(label) + " at q-shift " + std::to_string(e);
                return;
            }
            if (t.is_zero()) {
                offender_ = std::string(label) + " exactly zero at q-shift " + std::to_string(e);
                return;
            }
        }
    }

    void plain(const char* label, cplx v) {
        if (!offender_.empty()) return;
        if (std::abs(v) < opt_.min_theta) offender_ = label;
    }

    bool ok() const { return offender_.empty(); }
    const std::string& offender() const { return offender_; }

private:
    BaseNome bn_;
    const SamplerOptions& opt_;
    std::string offender_;
};

/// Pure q-powers q^e, e in [1, n], always screened (|q| near 1 makes
/// theta(q) small).
inline void screen_q_powers(GenericityScreen& s, int n) {
    s.factor_range("theta(q^e)", cplx(1.0, 0.0), 1, std::max(n, 1));
}


inline void screen_f_family(GenericityScreen& s, const EllipticFParams& p) {
    const int n = p.r1 + p.r2;
    const cplx s12 = p.s1 * p.s2;
    screen_q_powers(s, n);
    s.factor_range("theta(s1 s2 q^e)", s12, -1, 3 * n);
    // the C_n summand and closed-form denominators
    s.factor_range("theta(s2 q^e)", p.s2, 0, n);
    s.factor_range("theta(s1 s2 q^e / t1)", s12 / p.t1, 0, n);
    s.factor_range("theta(s1 s2 q^e / t2)", s12 / p.t2, 0, n);
    s.factor_range("theta(t1 t2 q^e / s2)", p.t1 * p.t2 / p.s2, p.r2 - p.r1, p.r2 - p.r1 + n);
    s.factor_range("theta(s2 q^e / t1 t2)", p.s2 / (p.t1 * p.t2), 1 - 2 * p.r2, n);
    // closed-form numerators: their zeros are the determinant's zero locus,
    // where the elimination would have to cancel catastrophically
    s.factor_range("theta(s2 q^e / t1)", p.s2 / p.t1, -n, n + 1);
    s.factor_range("theta(s2 q^e / t2)", p.s2 / p.t2, -n, n + 1);
    s.factor_range("theta(s1 s2 q^e / t1 t2)", s12 / (p.t1 * p.t2), -n, n + 1);
    s.factor_range("theta(t1 t2 q^e / s1 s2)", p.t1 * p.t2 / s12, -n, n + 1);
}

inline void screen_g_family(GenericityScreen& s, const EllipticGParams& p, bool lambda_side) {
    const int n = p.r1 + p.r2;
    screen_q_powers(s, n);
    s.factor_range("theta(a q^e)", p.a, 0, 3 * n);
    s.factor_range("theta(a q^e / b)", p.a / p.b, 1, 1 + n);
    s.factor_range("theta(a q^e / c)", p.a / p.c, 1, 1 + n);
    s.factor_range("theta(a q^e / d)", p.a / p.d, 1, 1 + n);
    s.factor_range("theta(a q^e / e)", p.a / p.e, 1, 1 + n);
    s.factor_range("theta(a q^e / f)", p.a / p.f, 1, 1 + n);
    if (lambda_side) {
        const cplx lam = p.lambda();
        s.factor_range("theta(lambda q^e)", lam, 0, 3 * n);
        s.factor_range("theta(lambda q^e / e)", lam / p.e, 1, 1 + 2 * n);
        s.factor_range("theta(lambda q^e / f)", lam / p.f, 1, 1 + 2 * n);
        s.factor_range("theta(e f q^e / lambda)", p.e * p.f / lam, -p.r1, n - p.r1);
        s.factor_range("theta(e f q^e / a)", p.e * p.f / p.a, -p.r1, n - p.r1);
        s.factor_range("theta(lambda q^e / ef)", lam / (p.e * p.f), 1, 1 + p.r1);
        s.factor_range("theta(lambda b q^e / a)", lam * p.b / p.a, 0, n);
        s.factor_range("theta(lambda c q^e / a)", lam * p.c / p.a, 0, n);
        s.factor_range("theta(lambda d q^e / a)", lam * p.d / p.a, 0, n);
    }
}

} // namespace detail

namespace detail {

/// The binomial and rising-factorial families are numerically benign; every
/// theta-based check gets the conditioning precheck.
inline bool wants_conditioning_precheck(IdentityId id) {
    return id != IdentityId::SYL_BIN && id != IdentityId::FKX;
}

} // namespace detail

/// Rejection-samples a generic parameter bundle for the given identity and
/// grid cell. Bounded retries; exhaustion reports the offending factor.
inline ParamBundle sample_params(IdentityId id, int r1, int r2, Rng& rng,
                                 const SamplerOptions& opt = {}) {
    auto draw = [&] { return rng.sample_annulus(opt.modulus_lo, opt.modulus_hi); };
    auto draw_p = [&] { return rng.sample_annulus(opt.p_modulus_max / 10.0, opt.p_modulus_max); };
    std::string last_offender = "none";

    auto accept = [&](const ParamBundle& cand) -> bool {
        if (!detail::wants_conditioning_precheck(id)) return true;
        try {
            CheckContext pre;
            pre.pol = opt.pol;
            pre.tolerance = 1.0;
            pre.backend = Backend::f64;
            IdentityReport rep = run_identity_check(id, cand, pre);
            if (rep.rel_residual <= opt.precheck_max_residual) return true;
            last_offender = "conditioning precheck (double-backend residual " +
                            std::to_string(rep.rel_residual) + ")";
        } catch (const std::exception& e) {
            last_offender = std::string("conditioning precheck: ") + e.what();
        }
        return false;
    };

    for (int attempt = 0; attempt < opt.max_retries; ++attempt) {
        switch (id) {
            case IdentityId::SYL_BIN: {
                SylvesterBinomialParams p{draw(), draw(), r1, r2};
                if (std::abs(p.s1 - p.s2) < opt.min_theta) {
                    last_offender = "|s1 - s2|";
                    break;
                }
                if (accept(p)) return p;
                break;
            }
            case IdentityId::FKX: {
                HypergeomParams p{draw(), draw(), r1, r2};
                bool ok = true;
                for (int m = -1; m <= 4 * (r1 + r2) && ok; ++m)
                    ok = std::abs(p.s1 + p.s2 + static_cast<double>(m)) >= opt.min_theta;
                if (ok && accept(p)) return p;
                if (!ok) last_offender = "rising factorial argument s1 + s2 + m";
                break;
            }
            case IdentityId::THM21:
            case IdentityId::THM21_ALT:
            case IdentityId::CN_SUM:
            case IdentityId::LAPLACE_XCHECK: {
                EllipticFParams p{BaseNome(draw(), draw_p()), draw(), draw(), draw(), draw(),
                                  r1, r2};
                detail::GenericityScreen s(p.bn, opt);
                detail::screen_f_family(s, p);
                if (!s.ok()) {
                    last_offender = s.offender();
                    break;
                }
                if (accept(p)) return p;
                break;
            }
            case IdentityId::COR22:
            case IdentityId::COR23: {
                UVParams p{BaseNome(draw(), cplx(0.0, 0.0)), draw(), draw(), r1, r2};
                const int n = r1 + r2;
                const cplx w = std::sqrt(p.s1 / p.s2);
                detail::GenericityScreen s(p.bn, opt);
                detail::screen_q_powers(s, n);
                s.factor_range("theta(s1 s2 q^e)", p.s1 * p.s2, -1, 3 * n);
                s.factor_range("theta(sqrt(s1 s2) q^e)", w * p.s2, 0, 2 * n);
                s.factor_range("theta(sqrt(s2/s1) q^e)", 1.0 / w, -n, n);
                if (s.ok() && accept(p)) return p;
                if (!s.ok()) last_offender = s.offender();
                break;
            }
            case IdentityId::WARNAAR_LEMMA: {
                WarnaarParams p;
                p.bn = BaseNome(draw(), draw_p());
                p.n = r2;
                p.c = draw();
                for (int i = 0; i < p.n; ++i) p.A.push_back(draw());
                for (int i = 0; i < p.n; ++i) p.x.push_back(draw());
                detail::GenericityScreen s(p.bn, opt);
                for (int i = 0; i < p.n && s.ok(); ++i)
                    for (int j = i + 1; j < p.n && s.ok(); ++j) {
                        s.factor_range("theta(x_j/x_i)", p.x[j] / p.x[i], 0, 0);
                        s.factor_range("theta(x_i x_j / c)", p.x[i] * p.x[j] / p.c, 0, 0);
                    }
                for (int i = 0; i < p.n && s.ok(); ++i) {
                    s.factor_range("theta(A x)", p.A[i] * p.x[i], 0, 0);
                    s.plain("P_i argument 1/A", p.A[i]);
                }
                if (s.ok() && accept(p)) return p;
                if (!s.ok()) last_offender = s.offender();
                break;
            }
            case IdentityId::LEMMA32: {
                Lemma32Params p;
                p.bn = BaseNome(draw(), draw_p());
                p.r1 = r1;
                p.r2 = r2;
                p.a = draw();
                // strictly increasing subset of {0..r1+r2-1}
                std::vector<SubsetIndex> all = subsets(r1 + r2, r2);
                p.kvec = all[static_cast<std::size_t>(rng.uniform_int(
                                 0, static_cast<int>(all.size()) - 1))]
                             .ks;
                detail::GenericityScreen s(p.bn, opt);
                detail::screen_q_powers(s, r1 + r2);
                s.factor_range("theta(a q^e)", p.a, 0, 3 * (r1 + r2));
                if (s.ok() && accept(p)) return p;
                if (!s.ok()) last_offender = s.offender();
                break;
            }
            case IdentityId::RCG:
            case IdentityId::THM41: {
                EllipticGParams p{BaseNome(draw(), draw_p()), draw(), draw(), draw(),
                                  draw(),                      draw(), draw(), r1,
                                  r2};
                detail::GenericityScreen s(p.bn, opt);
                detail::screen_g_family(s, p, true);
                if (!s.ok()) {
                    last_offender = s.offender();
                    break;
                }
                if (accept(p)) return p;
                break;
            }
            case IdentityId::SEC5_LHS:
            case IdentityId::SEC5_HPRIME:
            case IdentityId::SEC5_RHS: {
                EllipticGParams p{BaseNome(draw(), draw_p()), draw(), draw(), draw(),
                                  cplx(1.0, 0.0),              draw(), draw(), r1,
                                  r2};
                p.d = p.a * p.bn.q / p.c; // constructed, not sampled
                const int n = r1 + r2;
                detail::GenericityScreen s(p.bn, opt);
                detail::screen_q_powers(s, n);
                // G' and F' entry denominators plus the scaling factors
                s.factor_range("theta(a q^e)", p.a, 0, 3 * n);
                s.factor_range("theta(c q^e)", p.c, 0, 2 * n);
                s.factor_range("theta(a q^e / c)", p.a / p.c, 1, 1 + 2 * n);
                // H' families with lambda = (a/b) q^{1-r2}; the lambda b/a
                // slot is a pure q-power whose zeros are structural, so it
                // is deliberately not screened.
                s.factor_range("theta(a q^e / b)", p.a / p.b, 1 - r2, 1 - r2 + 3 * n);
                s.factor_range("theta(c q^e / b)", p.c / p.b, 1 - r2, 1 - r2 + n);
                s.factor_range("theta(a q^e / (b c))", p.a / (p.b * p.c), 2 - r2, 2 - r2 + n);
                s.factor_range("theta(a q^e / (b e))", p.a / (p.b * p.e), 1 - r2, 2 + r1);
                s.factor_range("theta(a q^e / (b f))", p.a / (p.b * p.f), 1 - r2, 2 + r1);
                s.factor_range("theta(e f q^e / a)", p.e * p.f / p.a, -r1, r2);
                s.factor_range("theta(e f b q^e / a)", p.e * p.f * p.b / p.a, r2 - 2, r2 - 2 + n);
                // the reduced four-parameter matrix uses (b, aq/b, e, f)
                EllipticFParams fp{p.bn, p.b, p.a * p.bn.q / p.b, p.e, p.f, r1, r2};
                detail::screen_f_family(s, fp);
                if (s.ok() && accept(p)) return p;
                if (!s.ok()) last_offender = s.offender();
                break;
            }
        }
    }
    throw genericity_error("sample_params: no generic draw for " + std::string(to_string(id)) +
                           " after " + std::to_string(opt.max_retries) +
                           " retries; last offender: " + last_offender);
}

} // namespace elldet
