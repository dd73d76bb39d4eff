#include <catch_amalgamated.hpp>

#include "elldet/builders.hpp"
#include "elldet/linalg.hpp"
#include "elldet/rng.hpp"

using namespace elldet;

namespace {

TrackedMatrix random_matrix(Rng& rng, int n) {
    TrackedMatrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m.at(i, j) = TrackedValue::of(rng.sample_annulus(0.1, 3.0));
    return m;
}

// Naive cofactor expansion, the independent determinant oracle.
cplx cofactor_det(const TrackedMatrix& m) {
    const int n = static_cast<int>(m.rows());
    if (n == 0) return {1.0, 0.0};
    if (n == 1) return m.at(0, 0).is_zero() ? cplx(0, 0) : m.at(0, 0).value();
    cplx acc(0.0, 0.0);
    std::vector<int> rows(n - 1);
    std::iota(rows.begin(), rows.end(), 1);
    for (int j = 0; j < n; ++j) {
        if (m.at(0, j).is_zero()) continue;
        std::vector<int> cols;
        for (int k = 0; k < n; ++k)
            if (k != j) cols.push_back(k);
        cplx sub = cofactor_det(m.minor_at(rows, cols));
        acc += (j % 2 ? -1.0 : 1.0) * m.at(0, j).value() * sub;
    }
    return acc;
}

} // namespace

TEST_CASE("determinant of the identity") {
    TrackedMatrix m(5, 5);
    for (int i = 0; i < 5; ++i) m.at(i, i) = TrackedValue::one();
    DetResult d = det_lu(m);
    CHECK(!d.rank_deficient);
    CHECK(d.value.value() == cplx(1.0, 0.0));
}

TEST_CASE("the integer Sylvester matrix is rank deficient") {
    DetResult d = det_lu(build_B({cplx(1, 0), cplx(1, 0), 2, 3}));
    CHECK(d.rank_deficient);
    CHECK(d.value.is_zero());
}

TEST_CASE("random 4x4 matches the cofactor oracle") {
    Rng rng(5, 0);
    for (int t = 0; t < 20; ++t) {
        TrackedMatrix m = random_matrix(rng, 4);
        DetResult d = det_lu(m);
        cplx want = cofactor_det(m);
        CHECK(std::abs(d.value.value() - want) <= 1e-12 * std::abs(want));
    }
}

TEST_CASE("pole entries are rejected") {
    TrackedMatrix m(2, 2);
    m.at(0, 0) = TrackedValue::one();
    m.at(0, 1) = reciprocal(TrackedValue::exact_zero());
    m.at(1, 0) = TrackedValue::one();
    m.at(1, 1) = TrackedValue::one();
    CHECK_THROWS_AS(det_lu(m), pole_error);
}

TEST_CASE("row scaling multiplies the determinant exactly") {
    Rng rng(5, 1);
    TrackedMatrix m = random_matrix(rng, 5);
    cplx alpha = rng.sample_annulus(0.3, 3.0);
    TrackedMatrix scaled = m;
    for (int j = 0; j < 5; ++j) scaled.at(2, j) *= alpha;
    CHECK(rel_residual(det_lu(scaled).value, det_lu(m).value * alpha) < 1e-12);
}

TEST_CASE("subset enumeration") {
    SECTION("n = 3, r = 0: one empty subset with sign +1") {
        auto s = subsets(3, 0);
        REQUIRE(s.size() == 1);
        CHECK(s[0].ks.empty());
        CHECK(s[0].complement == std::vector<int>{0, 1, 2});
        CHECK(s[0].sign == 1);
    }
    SECTION("n = 3, r = 2: lexicographic order and signs") {
        auto s = subsets(3, 2);
        REQUIRE(s.size() == 3);
        CHECK(s[0].ks == std::vector<int>{0, 1});
        CHECK(s[0].sign == 1);  // (-1)^{1+1}
        CHECK(s[1].ks == std::vector<int>{0, 2});
        CHECK(s[1].sign == -1); // (-1)^{1+2}
        CHECK(s[2].ks == std::vector<int>{1, 2});
        CHECK(s[2].sign == 1);  // (-1)^{1+3}
    }
    SECTION("n = 10, r = 5 against the bitmask oracle") {
        auto got = subsets(10, 5);
        REQUIRE(got.size() == 252);
        std::size_t idx = 0;
        std::vector<std::vector<int>> oracle;
        for (int mask = 0; mask < 1024; ++mask) {
            if (__builtin_popcount(static_cast<unsigned>(mask)) != 5) continue;
            std::vector<int> ks;
            for (int b = 0; b < 10; ++b)
                if (mask & (1 << b)) ks.push_back(b);
            oracle.push_back(ks);
        }
        std::sort(oracle.begin(), oracle.end());
        for (const auto& s : got) {
            CHECK(s.ks == oracle[idx++]);
            // complement is disjoint and exhaustive
            std::vector<int> all = s.ks;
            all.insert(all.end(), s.complement.begin(), s.complement.end());
            std::sort(all.begin(), all.end());
            std::vector<int> want(10);
            std::iota(want.begin(), want.end(), 0);
            CHECK(all == want);
        }
    }
}

TEST_CASE("block Laplace expansion") {
    Rng rng(5, 2);

    SECTION("r2 = 0 is the single-term convention") {
        TrackedMatrix m = random_matrix(rng, 4);
        TrackedValue lap = laplace_block_expand(m, 0);
        CHECK(rel_residual(lap, det_lu(m).value) < 1e-12);
    }

    SECTION("5x5 binomial matrix") {
        SylvesterBinomialParams p{rng.sample_annulus(0.3, 2.0), rng.sample_annulus(0.3, 2.0), 2,
                                  3};
        TrackedMatrix b = build_B(p);
        CHECK(rel_residual(laplace_block_expand(b, 3), det_lu(b).value) < 1e-12);
    }

    SECTION("random matrices up to n = 10, several block sizes") {
        for (int n : {2, 5, 7, 10}) {
            TrackedMatrix m = random_matrix(rng, n);
            for (int r : {0, 1, n / 2, n}) {
                CHECK(rel_residual(laplace_block_expand(m, r), det_lu(m).value) < 1e-9);
            }
        }
    }

    SECTION("per-term callback sees every subset once") {
        TrackedMatrix m = random_matrix(rng, 6);
        std::size_t calls = 0;
        laplace_block_expand(
            m, 2, [&](const SubsetIndex& s, const DetResult&, const DetResult&) {
                ++calls;
                CHECK(s.ks.size() == 2);
                CHECK(s.complement.size() == 4);
            });
        CHECK(calls == 15);
    }
}

TEST_CASE("block-triangular determinants factor") {
    Rng rng(5, 3);
    // assemble an explicit 2x2-block triangular matrix
    TrackedMatrix m(5, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            m.at(i, j) = (i < 2 && j >= 2) ? TrackedValue::exact_zero()
                                           : TrackedValue::of(rng.sample_annulus(0.2, 2.0));
    std::vector<int> top{0, 1}, bottom{2, 3, 4};
    TrackedValue want =
        det_lu(m.minor_at(top, top)).value * det_lu(m.minor_at(bottom, bottom)).value;
    CHECK(rel_residual(det_lu(m).value, want) < 1e-10);
}

TEST_CASE("equilibration preserves strongly graded determinants") {
    // diag(2^200, 2^-200, 1) with small off-diagonal noise
    TrackedMatrix m(3, 3);
    m.at(0, 0) = tracked_ipow(cplx(2.0, 0.0), 200);
    m.at(1, 1) = tracked_ipow(cplx(2.0, 0.0), -200);
    m.at(2, 2) = TrackedValue::one();
    m.at(0, 1) = TrackedValue::of({0.25, 0.0});
    m.at(1, 0) = TrackedValue::of({0.125, 0.0});
    DetResult d = det_lu(m, PivotPolicy::exact_only());
    CHECK(!d.rank_deficient);
    // det = 2^200 * 2^-200 * 1 - 0.25 * 0.125 * 1 = 0.96875
    CHECK(std::abs(d.value.value() - cplx(0.96875, 0.0)) < 1e-12);
}
