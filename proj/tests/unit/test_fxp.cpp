#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "harsim/errors.hpp"
#include "harsim/fxp.hpp"

using namespace harsim;
using namespace harsim::fxp;

TEST_CASE("round_nearest breaks ties away from zero") {
    CHECK(round_nearest(2.5) == 3);
    CHECK(round_nearest(-2.5) == -3);
    CHECK(round_nearest(0.0) == 0);
    CHECK(round_nearest(0.49999999999999994) == 0);
    CHECK(round_nearest(-1.4) == -1);
    CHECK_THROWS_AS(round_nearest(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
    CHECK_THROWS_AS(round_nearest(std::numeric_limits<double>::infinity()), std::domain_error);
    CHECK_THROWS_AS(round_nearest(1e30), std::domain_error);
}

TEST_CASE("round_nearest stays within half a unit") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 20000; ++i) {
        const double x = u(rng);
        CHECK(std::fabs(double(round_nearest(x)) - x) <= 0.5);
    }
}

TEST_CASE("saturate clamps into the signed range") {
    const auto f11 = FxFormat::with_width(11);
    CHECK(saturate(5000, f11) == 1023);
    CHECK(saturate(-5000, f11) == -1024);
    CHECK(saturate(7, f11) == 7);
    CHECK(f11.frac_bits == 10);
    CHECK_THROWS(FxFormat::with_width(1));
    CHECK_THROWS(FxFormat::with_width(33));

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::int64_t> u(-100000, 100000);
    for (int w = 2; w <= 16; ++w) {
        const auto f = FxFormat::with_width(w);
        CHECK(f.max() == (1 << (w - 1)) - 1);
        CHECK(f.min() == -(1 << (w - 1)));
        for (int i = 0; i < 200; ++i) {
            const auto v = u(rng);
            CHECK(saturate(saturate(v, f), f) == saturate(v, f));
        }
    }
}

TEST_CASE("mac accumulates exactly") {
    CHECK(mac(Accumulator(32, 0), 3, 4).value() == 12);
    CHECK(mac(Accumulator(32, 12), -3, 4).value() == 0);
    CHECK(mac(Accumulator(32, 0), 0, 123456).value() == 0);
}

TEST_CASE("mac never returns a wrapped value") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::int64_t> u(-(1 << 15), (1 << 15) - 1);
    int overflows = 0;
    for (int trial = 0; trial < 300; ++trial) {
        Accumulator acc(32);
        __int128 exact = 0;
        bool threw = false;
        for (int i = 0; i < 64; ++i) {
            const auto a = u(rng), b = u(rng);
            try {
                acc = mac(acc, a, b);
            } catch (const OverflowError&) {
                threw = true;
                exact += (__int128)a * b;
                break;
            }
            exact += (__int128)a * b;
            REQUIRE((__int128)acc.value() == exact);
        }
        if (threw) {
            ++overflows;
            const __int128 lim = (__int128)1 << 31;
            CHECK((exact >= lim || exact < -lim));
        }
    }
    CHECK(overflows > 0);
}

TEST_CASE("requantize examples") {
    const auto f11 = FxFormat::with_width(11);
    CHECK(requantize(Accumulator(32, 1000), 1, 0, f11, false) == 1000);
    CHECK(requantize(Accumulator(32, -300), 1, 0, f11, true) == 0);
    CHECK(requantize(Accumulator(32, 3000), 1, 1, f11, false) == 1023);
    // exact rounding shift, ties away from zero
    CHECK(requantize(Accumulator(32, 3), 1, 1, f11, false) == 2);
    CHECK(requantize(Accumulator(32, -3), 1, 1, f11, false) == -2);
    CHECK(requantize(Accumulator(32, 5), 3, 2, f11, false) == 4);
}

TEST_CASE("requantize with relu lands in [0, max]") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::int64_t> u(-(std::int64_t{1} << 30), std::int64_t{1} << 30);
    for (int w = 2; w <= 16; ++w) {
        const auto f = FxFormat::with_width(w);
        for (int i = 0; i < 200; ++i) {
            const auto r = requantize(Accumulator(32, u(rng)), 1, w - 1, f, true);
            CHECK(r >= 0);
            CHECK(r <= f.max());
        }
    }
}
