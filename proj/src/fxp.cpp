#include "harsim/fxp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "harsim/errors.hpp"

namespace harsim::fxp {

namespace {

__extension__ typedef __int128 wide;

bool fits(wide v, int width) {
    const wide hi = (wide{1} << (width - 1)) - 1;
    const wide lo = -(wide{1} << (width - 1));
    return v >= lo && v <= hi;
}

}  // namespace

FxFormat FxFormat::with_width(int n_bits) {
    if (n_bits < 2 || n_bits > 32) {
        throw std::invalid_argument("fixed-point width must be in [2, 32], got " +
                                    std::to_string(n_bits));
    }
    return FxFormat{n_bits, n_bits - 1};
}

std::int64_t round_nearest(double x) {
    if (!std::isfinite(x)) {
        throw std::domain_error("round_nearest: non-finite input");
    }
    const double r = std::round(x);  // half away from zero
    if (r >= 9.2233720368547758e18 || r < -9.2233720368547758e18) {
        throw std::domain_error("round_nearest: value outside int64 range");
    }
    return static_cast<std::int64_t>(r);
}

std::int64_t saturate(std::int64_t v, FxFormat fmt) {
    if (v > fmt.max()) return fmt.max();
    if (v < fmt.min()) return fmt.min();
    return v;
}

Accumulator::Accumulator(int width, std::int64_t value) : width_(width), value_(value) {
    if (width < 2 || width > 64) {
        throw std::invalid_argument("accumulator width must be in [2, 64]");
    }
    if (!fits(value, width)) {
        throw OverflowError("accumulator initial value exceeds " + std::to_string(width) +
                            " bits");
    }
}

Accumulator mac(Accumulator acc, std::int64_t a, std::int64_t b) {
    const wide sum = wide{acc.value()} + wide{a} * wide{b};
    if (!fits(sum, acc.width())) {
        throw OverflowError("MAC overflow: sum exceeds " + std::to_string(acc.width()) +
                            "-bit accumulator");
    }
    return Accumulator(acc.width(), static_cast<std::int64_t>(sum));
}

std::int64_t requantize(const Accumulator& acc, std::int64_t mult, int shift, FxFormat fmt,
                        bool relu) {
    if (mult < 1) throw std::invalid_argument("requantize: mult must be >= 1");
    if (shift < 0 || shift > 62) throw std::invalid_argument("requantize: shift out of range");

    const wide p = wide{acc.value()} * wide{mult};
    wide q = p;
    if (shift > 0) {
        const wide half = wide{1} << (shift - 1);
        const wide mag = (p < 0 ? -p : p) + half;
        q = mag >> shift;
        if (p < 0) q = -q;
    }
    if (relu && q < 0) q = 0;
    if (q > fmt.max()) return fmt.max();
    if (q < fmt.min()) return fmt.min();
    return static_cast<std::int64_t>(q);
}

}  // namespace harsim::fxp
