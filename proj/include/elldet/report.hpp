#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "elldet/tracked_value.hpp"

namespace elldet {

enum class IdentityId {
    SYL_BIN,
    FKX,
    THM21,
    THM21_ALT,
    COR22,
    COR23,
    WARNAAR_LEMMA,
    LEMMA32,
    CN_SUM,
    LAPLACE_XCHECK,
    THM41,
    RCG,
    SEC5_LHS,
    SEC5_HPRIME,
    SEC5_RHS,
};

inline constexpr std::array<IdentityId, 15> all_identities{
    IdentityId::SYL_BIN,     IdentityId::FKX,          IdentityId::THM21,
    IdentityId::THM21_ALT,   IdentityId::COR22,        IdentityId::COR23,
    IdentityId::WARNAAR_LEMMA, IdentityId::LEMMA32,    IdentityId::CN_SUM,
    IdentityId::LAPLACE_XCHECK, IdentityId::THM41,     IdentityId::RCG,
    IdentityId::SEC5_LHS,    IdentityId::SEC5_HPRIME,  IdentityId::SEC5_RHS,
};

inline std::string_view to_string(IdentityId id) {
    switch (id) {
        case IdentityId::SYL_BIN: return "syl_bin";
        case IdentityId::FKX: return "fkx";
        case IdentityId::THM21: return "thm21";
        case IdentityId::THM21_ALT: return "thm21_alt";
        case IdentityId::COR22: return "cor22";
        case IdentityId::COR23: return "cor23";
        case IdentityId::WARNAAR_LEMMA: return "warnaar_lemma";
        case IdentityId::LEMMA32: return "lemma32";
        case IdentityId::CN_SUM: return "cn_sum";
        case IdentityId::LAPLACE_XCHECK: return "laplace_xcheck";
        case IdentityId::THM41: return "thm41";
        case IdentityId::RCG: return "rcg";
        case IdentityId::SEC5_LHS: return "sec5_lhs";
        case IdentityId::SEC5_HPRIME: return "sec5_hprime";
        case IdentityId::SEC5_RHS: return "sec5_rhs";
    }
    return "?";
}

/// One-line legend shown by `elldet list`.
inline std::string_view describe(IdentityId id) {
    switch (id) {
        case IdentityId::SYL_BIN:
            return "binomial Sylvester determinant equals (-1)^{r1 r2} (s1-s2)^{r1 r2}";
        case IdentityId::FKX:
            return "rising-factorial Sylvesteresque determinant, product formula";
        case IdentityId::THM21:
            return "elliptic Sylvesteresque determinant, main product form";
        case IdentityId::THM21_ALT:
            return "elliptic Sylvesteresque determinant, alternate product form";
        case IdentityId::COR22:
            return "q-hypergeometric limit with alternating-sign lower block";
        case IdentityId::COR23:
            return "q-hypergeometric limit with square-root-power lower block";
        case IdentityId::WARNAAR_LEMMA:
            return "determinant lemma for quasi-periodic symmetric row families";
        case IdentityId::LEMMA32:
            return "banded theta-factorial minor determinant in closed form";
        case IdentityId::CN_SUM:
            return "C_n multiple summation over increasing index tuples";
        case IdentityId::LAPLACE_XCHECK:
            return "block Laplace expansion terms against their closed minors";
        case IdentityId::THM41:
            return "transformation between two elliptic determinants";
        case IdentityId::RCG:
            return "C_n multiple-sum transformation with prefactor";
        case IdentityId::SEC5_LHS:
            return "d = aq/c specialization: row/column scaling reduction";
        case IdentityId::SEC5_HPRIME:
            return "d = aq/c specialization: block-triangular determinant";
        case IdentityId::SEC5_RHS:
            return "d = aq/c specialization reproduces the alternate product form";
    }
    return "?";
}

inline std::optional<IdentityId> identity_from_string(std::string_view s) {
    for (IdentityId id : all_identities)
        if (to_string(id) == s) return id;
    return std::nullopt;
}

/// Outcome of evaluating one identity at one parameter draw.
struct IdentityReport {
    IdentityId id = IdentityId::SYL_BIN;
    TrackedValue lhs;
    TrackedValue rhs;
    double rel_residual = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    nlohmann::json params_echo;
    nlohmann::json diagnostics;

    /// Record the residual (computed in the evaluation backend's precision)
    /// and derive the verdict.
    void finish(double tol, double residual) {
        tolerance = tol;
        rel_residual = residual;
        passed = (lhs.is_zero() && rhs.is_zero()) || rel_residual <= tol;
        if (lhs.is_pole() || rhs.is_pole()) passed = false;
        diagnostics["lhs_log10"] =
            lhs.is_finite_nonzero() ? nlohmann::json(lhs.log10_abs()) : nlohmann::json();
        diagnostics["rhs_log10"] =
            rhs.is_finite_nonzero() ? nlohmann::json(rhs.log10_abs()) : nlohmann::json();
    }
};

inline nlohmann::json side_to_json(const TrackedValue& v) {
    nlohmann::json j;
    if (v.is_pole()) {
        j["pole"] = true;
        j["zero_order"] = v.zero_order();
        return j;
    }
    cplx val = v.is_zero() ? cplx(0.0, 0.0) : (std::abs(v.log10_abs()) < 290 ? v.value() : cplx(0, 0));
    j["re"] = val.real();
    j["im"] = val.imag();
    j["zero_order"] = v.zero_order();
    if (!v.is_zero()) j["log10"] = v.log10_abs();
    return j;
}

} // namespace elldet
