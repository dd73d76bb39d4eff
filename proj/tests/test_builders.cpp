#include <catch_amalgamated.hpp>

#include "elldet/builders.hpp"
#include "elldet/identities.hpp"
#include "elldet/rng.hpp"

using namespace elldet;

namespace {

Rng make_rng(std::uint64_t tag) { return Rng(99, tag); }

EllipticFParams random_f(Rng& rng, int r1, int r2) {
    auto d = [&] { return rng.sample_annulus(0.2, 2.0); };
    return {BaseNome(d(), rng.sample_annulus(0.05, 0.4)), d(), d(), d(), d(), r1, r2};
}

EllipticGParams random_g(Rng& rng, int r1, int r2) {
    auto d = [&] { return rng.sample_annulus(0.2, 2.0); };
    return {BaseNome(d(), rng.sample_annulus(0.05, 0.4)), d(), d(), d(), d(), d(), d(), r1, r2};
}

} // namespace

TEST_CASE("binomial Sylvester matrix reproduces the integer example") {
    // r1=2, r2=3 at s1 = s2 = 1: the classic matrix whose determinant is 0
    TrackedMatrix b = build_B({cplx(1, 0), cplx(1, 0), 2, 3});
    const double want[5][5] = {{1, 2, 1, 0, 0},
                               {0, 1, 2, 1, 0},
                               {0, 0, 1, 2, 1},
                               {1, 3, 3, 1, 0},
                               {0, 1, 3, 3, 1}};
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            cplx v = b.at(i, j).is_zero() ? cplx(0, 0) : b.at(i, j).value();
            CHECK(v == cplx(want[i][j], 0.0));
        }
}

TEST_CASE("degenerate dimensions build single-block matrices") {
    TrackedMatrix id1 = build_B({cplx(0.3, 0.4), cplx(1.5, -0.2), 0, 3});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK((i == j ? id1.at(i, j).value() == cplx(1, 0) : id1.at(i, j).is_zero()));

    Rng rng = make_rng(1);
    EllipticFParams p = random_f(rng, 3, 0);
    TrackedMatrix f = build_F(p);
    REQUIRE(f.rows() == 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK((i == j ? rel_residual(f.at(i, j), TrackedValue::one()) < 1e-14
                          : f.at(i, j).is_zero()));
}

TEST_CASE("hypergeometric matrix entries") {
    HypergeomParams p{cplx(0.31, 0.0), cplx(0.77, 0.0), 2, 3};
    TrackedMatrix m = build_M(p);

    SECTION("diagonal of the upper block is 1") {
        for (int i = 0; i < p.r2; ++i) CHECK(m.at(i, i).value() == cplx(1.0, 0.0));
    }
    SECTION("binomial vanishing outside the band") {
        for (int i = 0; i < p.r1 + p.r2; ++i)
            for (int j = 0; j < p.r1 + p.r2; ++j)
                CHECK(m.at(i, j).is_zero() == band_zero_expected(i, j, p.r1, p.r2));
    }
    SECTION("pole flag when a rising-factorial denominator vanishes") {
        // s1 + s2 + i + j - 1 = 0 at i=0, j=1 when s1 + s2 = 0
        HypergeomParams bad{cplx(2.0, 0.0), cplx(-2.0, 0.0), 1, 1};
        TrackedMatrix mb = build_M(bad);
        bool any_pole = false;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) any_pole = any_pole || mb.at(i, j).is_pole();
        CHECK(any_pole);
    }
}

TEST_CASE("band structure and unit diagonal of the theta families") {
    Rng rng = make_rng(2);
    for (auto [r1, r2] : {std::pair{1, 1}, {2, 3}, {3, 2}, {4, 1}, {0, 2}}) {
        EllipticFParams fp = random_f(rng, r1, r2);
        TrackedMatrix f = build_F(fp);
        EllipticGParams gp = random_g(rng, r1, r2);
        TrackedMatrix g = build_G(gp);
        TrackedMatrix h = build_H(gp);
        UVParams uv{BaseNome(rng.sample_annulus(0.2, 2.0), cplx(0, 0)),
                    rng.sample_annulus(0.2, 2.0), rng.sample_annulus(0.2, 2.0), r1, r2};
        TrackedMatrix u = build_U(uv);
        TrackedMatrix v = build_V(uv);

        const int n = r1 + r2;
        for (const TrackedMatrix* m : {&f, &g, &h, &u, &v}) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    CHECK(m->at(i, j).is_zero() == band_zero_expected(i, j, r1, r2));
            for (int i = 0; i < r2; ++i)
                CHECK(rel_residual(m->at(i, i), TrackedValue::one()) < 1e-12);
        }
    }
}

TEST_CASE("layout swap symmetry of the four-parameter family") {
    Rng rng = make_rng(3);
    EllipticFParams p = random_f(rng, 2, 3);
    EllipticFParams swapped{p.bn,
                            p.s2,
                            p.s1,
                            p.s1 * p.s2 / p.t1,
                            p.s1 * p.s2 / p.t2,
                            p.r2,
                            p.r1};
    TrackedMatrix a = build_F(p);
    TrackedMatrix b = build_F(swapped);
    // lower block of F(p) equals the upper block of F(swapped), row for row
    for (int i = 0; i < p.r1; ++i)
        for (int j = 0; j < p.r1 + p.r2; ++j) {
            const TrackedValue &x = a.at(p.r2 + i, j), &y = b.at(i, j);
            CHECK(x.zero_order() == y.zero_order());
            if (x.is_finite_nonzero()) CHECK(rel_residual(x, y) < 1e-13);
        }
}

TEST_CASE("U and V require p = 0") {
    UVParams p{BaseNome(cplx(0.5, 0.1), cplx(0.1, 0.0)), cplx(0.4, 0.0), cplx(0.9, 0.0), 1, 1};
    CHECK_THROWS_AS(build_U(p), std::domain_error);
    CHECK_THROWS_AS(build_V(p), std::domain_error);
}

TEST_CASE("H' is exactly block-triangular under the symbolic substitution") {
    Rng rng = make_rng(4);
    for (auto [r1, r2] : {std::pair{2, 2}, {3, 1}, {1, 3}}) {
        EllipticGParams p = random_g(rng, r1, r2);
        p.d = p.a * p.bn.q / p.c;
        TrackedMatrix h = build_Hprime(p);
        const int n = r1 + r2;
        for (int i = 0; i < r2; ++i) {
            CHECK(rel_residual(h.at(i, i), TrackedValue::one()) < 1e-12);
            for (int j = 0; j < n; ++j)
                if (j > r2 - 1 || j < i) CHECK(h.at(i, j).is_zero());
        }
        for (int i = r2; i < n; ++i)
            for (int j = i + 1; j < n; ++j) CHECK(h.at(i, j).is_zero());
    }
}

TEST_CASE("matrix JSON serialization round-trips") {
    Rng rng = make_rng(5);
    EllipticFParams p = random_f(rng, 2, 2);
    TrackedMatrix f = build_F(p);
    nlohmann::json j = matrix_to_json(f, "F", p.r1, p.r2, f_params_echo(p));
    CHECK(j["family"] == "F");
    CHECK(j["entries"].size() == 16);

    TrackedMatrix back = matrix_from_json(j);
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k) {
            CHECK(back.at(i, k).is_zero() == f.at(i, k).is_zero());
            if (f.at(i, k).is_finite_nonzero())
                CHECK(rel_residual(back.at(i, k), f.at(i, k)) < 1e-14);
        }
}

TEST_CASE("quad and double builders agree") {
    Rng rng = make_rng(6);
    EllipticGParams p = random_g(rng, 2, 2);
    TrackedMatrix d = build_H(p);
    TrackedMatrixT<quad> q = build_H<quad>(p);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            CHECK(d.at(i, j).zero_order() == q.at(i, j).zero_order());
            if (d.at(i, j).is_finite_nonzero())
                CHECK(rel_residual(d.at(i, j), to_tracked_double(q.at(i, j))) < 1e-13);
        }
}
