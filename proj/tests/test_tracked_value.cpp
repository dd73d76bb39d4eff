#include <catch_amalgamated.hpp>

#include "elldet/rng.hpp"
#include "elldet/tracked_value.hpp"

using namespace elldet;

namespace {

TrackedValue random_tracked(Rng& rng) {
    int kind = rng.uniform_int(0, 5);
    if (kind == 0) return TrackedValue::exact_zero(rng.uniform_int(1, 2));
    TrackedValue v = TrackedValue::of(rng.sample_annulus(1e-3, 1e3));
    if (kind == 1) return reciprocal(v) * TrackedValue::exact_zero(); // mixed orders
    return v * tracked_ipow(cplx(2.0, 0.0), rng.uniform_int(-40, 40));
}

cplx repr(const TrackedValue& v) { return v.value(); }

} // namespace

TEST_CASE("representation of the three states") {
    TrackedValue one;
    CHECK(one.value() == cplx(1.0, 0.0));
    CHECK(one.zero_order() == 0);

    TrackedValue z = TrackedValue::exact_zero();
    CHECK(z.is_zero());
    CHECK(z.value() == cplx(0.0, 0.0));

    TrackedValue pole = reciprocal(z);
    CHECK(pole.is_pole());
    CHECK_THROWS_AS(pole.value(), pole_error);

    // zeros are never folded into the mantissa
    CHECK(TrackedValue::of(cplx(0.0, 0.0)).is_zero());
}

TEST_CASE("multiplication adds zero orders, reciprocal negates") {
    TrackedValue z = TrackedValue::exact_zero(2);
    TrackedValue v = TrackedValue::of({3.0, -1.0});
    CHECK((z * v).zero_order() == 2);
    CHECK((z * z).zero_order() == 4);
    CHECK(reciprocal(z).zero_order() == -2);
    CHECK((z * reciprocal(z)).zero_order() == 0);
    // a cancelled zero recovers the mantissa product exactly
    CHECK((z * reciprocal(z)).value() == cplx(1.0, 0.0));
}

TEST_CASE("zero-order arithmetic is consistent with plain complex arithmetic") {
    Rng rng(7, 1);
    for (int i = 0; i < 300; ++i) {
        TrackedValue u = random_tracked(rng);
        TrackedValue v = random_tracked(rng);
        if (u.is_pole() || v.is_pole()) continue;
        cplx want = repr(u) * repr(v);
        cplx got = repr(u * v);
        CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("reciprocal is an involution") {
    Rng rng(7, 2);
    for (int i = 0; i < 200; ++i) {
        TrackedValue u = random_tracked(rng);
        TrackedValue back = reciprocal(reciprocal(u));
        CHECK(back.zero_order() == u.zero_order());
        if (u.is_finite_nonzero()) {
            CHECK(std::abs(back.value() - u.value()) <= 1e-14 * std::abs(u.value()));
        }
    }
}

TEST_CASE("huge exponents survive without overflow") {
    TrackedValue v = tracked_ipow(cplx(2.0, 0.0), 100000);
    v *= tracked_ipow(cplx(2.0, 0.0), -99990);
    CHECK(v.value() == cplx(1024.0, 0.0));
    CHECK(tracked_ipow(cplx(0.5, 0.0), 4).value() == cplx(0.0625, 0.0));
    CHECK(tracked_ipow(cplx(2.0, 0.0), -2).value() == cplx(0.25, 0.0));
    CHECK(tracked_ipow(cplx(5.0, 1.0), 0).value() == cplx(1.0, 0.0));
}

TEST_CASE("tracked sums align exponents and detect emptiness") {
    TrackedSum s;
    CHECK(s.total().is_zero()); // empty sum

    s.add(TrackedValue::of({1.0, 0.0}) * tracked_ipow(cplx(2.0, 0.0), 400));
    s.add(TrackedValue::of({1.0, 0.0}));
    s.add(TrackedValue::exact_zero());
    CHECK(s.count() == 3);
    double lg = s.total().log10_abs();
    CHECK(lg == Catch::Approx(400 * std::log10(2.0)).epsilon(1e-12));
}

TEST_CASE("relative residual") {
    TrackedValue a = TrackedValue::of({1.0, 0.0});
    TrackedValue b = TrackedValue::of({1.0 + 1e-10, 0.0});
    CHECK(rel_residual(a, b) == Catch::Approx(1e-10).margin(1e-12));
    CHECK(rel_residual(a, a) == 0.0);
    CHECK(rel_residual(TrackedValue::exact_zero(), TrackedValue::exact_zero()) == 0.0);
    CHECK(rel_residual(a, TrackedValue::exact_zero()) == 1.0);
    CHECK(std::isinf(rel_residual(a, reciprocal(TrackedValue::exact_zero()))));
    // scale-free across exponents
    TrackedValue big = a * tracked_ipow(cplx(2.0, 0.0), 4000);
    TrackedValue big2 = b * tracked_ipow(cplx(2.0, 0.0), 4000);
    CHECK(rel_residual(big, big2) == Catch::Approx(1e-10).margin(1e-12));
}

TEST_CASE("quad backend converts to the double representation") {
    TrackedValueT<quad> v = TrackedValueT<quad>::of(cplx(1.5, -2.5));
    v *= tracked_ipow(std::complex<quad>(quad(2), quad(0)), 100);
    TrackedValue d = to_tracked_double(v);
    CHECK(d.log10_abs() == Catch::Approx(v.log10_abs()).epsilon(1e-12));
}
