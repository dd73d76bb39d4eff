#include <catch_amalgamated.hpp>

#include "elldet/rng.hpp"
#include "elldet/theta.hpp"

using namespace elldet;

namespace {

// Brute-force oracle: the same infinite product summed to 200 factors in
// extended precision, independent of the truncation policy.
std::complex<long double> theta_oracle(cplx a_, cplx p_) {
    std::complex<long double> a(a_.real(), a_.imag()), p(p_.real(), p_.imag());
    std::complex<long double> acc(1.0L, 0.0L), pj(1.0L, 0.0L);
    for (int j = 0; j < 200; ++j) {
        acc *= (1.0L - a * pj) * (1.0L - p * pj / a);
        pj *= p;
    }
    return acc;
}

cplx to_cplx(std::complex<long double> z) {
    return {static_cast<double>(z.real()), static_cast<double>(z.imag())};
}

} // namespace

TEST_CASE("theta at p = 0 reduces to 1 - a") {
    for (cplx a : {cplx(0.7, 0.1), cplx(-2.0, 3.0), cplx(0.0, -0.4)}) {
        if (a == cplx(0.0, 0.0)) continue;
        TrackedValue t = theta(a, cplx(0.0, 0.0));
        CHECK(std::abs(t.value() - (1.0 - a)) < 1e-15 * std::abs(1.0 - a));
    }
}

TEST_CASE("theta(1, p) is an exact zero") {
    for (double pm : {0.0, 0.1, 0.5, 0.9}) {
        TrackedValue t = theta(cplx(1.0, 0.0), cplx(pm, pm / 3));
        CHECK(t.zero_order() == 1);
        CHECK(t.is_zero());
    }
}

TEST_CASE("theta matches the 200-factor extended-precision oracle") {
    cplx a(0.3, 0.2), p(0.1, 0.05);
    TrackedValue t = theta(a, p);
    cplx want = to_cplx(theta_oracle(a, p));
    CHECK(std::abs(t.value() - want) < 1e-14 * std::abs(want));

    Rng rng(11, 0);
    for (int i = 0; i < 50; ++i) {
        cplx ar = rng.sample_annulus(0.1, 10.0);
        cplx pr = rng.sample_annulus(0.01, 0.6);
        cplx got = theta(ar, pr).value();
        cplx w = to_cplx(theta_oracle(ar, pr));
        CHECK(std::abs(got - w) <= 1e-12 * std::abs(w));
    }
}

TEST_CASE("theta domain errors") {
    CHECK_THROWS_AS(theta(cplx(0.0, 0.0), cplx(0.1, 0.0)), std::domain_error);
    CHECK_THROWS_AS(theta(cplx(1.0, 0.0), cplx(1.0, 0.0)), std::domain_error);
    CHECK_THROWS_AS(BaseNome(cplx(0.0, 0.0), cplx(0.1, 0.0)), std::domain_error);
    CHECK_THROWS_AS(BaseNome(cplx(1.0, 0.0), cplx(2.0, 0.0)), std::domain_error);
}

TEST_CASE("theta quasi-periodicity: theta(p a) = (-1/a) theta(a)") {
    Rng rng(11, 1);
    for (int i = 0; i < 100; ++i) {
        cplx a = rng.sample_annulus(0.1, 10.0);
        cplx p = rng.sample_annulus(0.05, 0.5);
        TrackedValue lhs = theta(p * a, p);
        TrackedValue rhs = theta(a, p) * (-1.0 / a);
        CHECK(rel_residual(lhs, rhs) < 1e-10);
    }
}

TEST_CASE("factorial product convention") {
    BaseNome bn(cplx(0.6, 0.3), cplx(0.2, 0.1));

    SECTION("index 0 is the empty product") {
        CHECK(qp_factorial(cplx(0.4, 0.7), 0, bn).value() == cplx(1.0, 0.0));
    }

    SECTION("reciprocal of (q)_{-r} is an exact zero") {
        for (long r : {1L, 2L, 3L}) {
            TrackedValue f = qp_factorial(ThetaArg::qpow(1), -r, bn);
            CHECK(f.zero_order() == -1); // the factorial itself is a pole
            CHECK(reciprocal(f).is_zero());
        }
    }

    SECTION("p = 0 reduces to the classical q-shifted factorial") {
        BaseNome b0(cplx(0.37, -0.2), cplx(0.0, 0.0));
        Rng rng(11, 2);
        for (int i = 0; i < 20; ++i) {
            cplx a = rng.sample_annulus(0.2, 2.0);
            for (long k : {0L, 1L, 3L, 7L}) {
                cplx direct(1.0, 0.0), qj(1.0, 0.0);
                for (long j = 0; j < k; ++j) {
                    direct *= 1.0 - a * qj;
                    qj *= b0.q;
                }
                TrackedValue f = qp_factorial(a, k, b0);
                CHECK(std::abs(f.value() - direct) <= 1e-12 * std::abs(direct));
            }
        }
    }

    SECTION("telescoping (a)_{k+1} = (a)_k theta(a q^k) for both signs of k") {
        Rng rng(11, 3);
        cplx a = rng.sample_annulus(0.2, 2.0);
        for (long k = -10; k <= 10; ++k) {
            TrackedValue lhs = qp_factorial(a, k + 1, bn);
            cplx aqk = a;
            for (long j = 0; j < std::labs(k); ++j) aqk = k > 0 ? aqk * bn.q : aqk / bn.q;
            TrackedValue rhs = qp_factorial(a, k, bn) * theta(aqk, bn.p);
            CHECK(rel_residual(lhs, rhs) < 1e-12);
        }
    }
}

TEST_CASE("multi-argument shorthand") {
    BaseNome bn(cplx(0.8, 0.1), cplx(0.15, -0.1));
    cplx a(0.5, 0.2), b(1.2, -0.3), c(-0.7, 0.4);

    CHECK(rel_residual(qp_factorial_multi({a}, 3, bn), qp_factorial(a, 3, bn)) == 0.0);
    CHECK(qp_factorial_multi({a, b}, 0, bn).value() == cplx(1.0, 0.0));

    // product of three 2-factor factorials equals the expanded theta product
    TrackedValue got = qp_factorial_multi({a, b, c}, 2, bn);
    TrackedValue want = TrackedValue::one();
    for (cplx x : {a, b, c})
        for (int j = 0; j < 2; ++j) want *= theta(x * (j ? bn.q : cplx(1.0, 0.0)), bn.p);
    CHECK(rel_residual(got, want) < 1e-14);
}

TEST_CASE("structural q-power arguments vanish by integer arithmetic") {
    BaseNome bn(cplx(1.0000000001, 0.0), cplx(0.3, 0.0)); // q very close to 1
    // theta(q^0) is exactly zero even though no float comparison could see it
    CHECK(theta(ThetaArg::qpow(0), bn).is_zero());
    CHECK(!theta(ThetaArg::qpow(1), bn).is_zero());
}

TEST_CASE("prefix factorial tables agree with direct evaluation") {
    BaseNome bn(cplx(0.45, 0.55), cplx(0.2, 0.05));
    TruncationPolicy pol;
    ThetaArg base = ThetaArg::generic(cplx(0.9, -0.4));
    PrefixFactorial<double> table(base, -5, 10, bn, pol);
    for (int a = -4; a <= 6; ++a) {
        for (long k = -6; k <= 4; ++k) {
            if (a + k < -5 || a + k > 11) continue;
            TrackedValue want = qp_factorial(base.shifted(a), k, bn, pol);
            CHECK(rel_residual(table.fact(a, k), want) < 1e-13);
        }
    }
}

TEST_CASE("binomial helpers") {
    CHECK(binom2(-1) == 1);
    CHECK(binom2(0) == 0);
    CHECK(binom2(5) == 10);
    CHECK(binom(5, -1) == 0);
    CHECK(binom(5, 6) == 0);
    CHECK(binom(8, 4) == 70);
}
