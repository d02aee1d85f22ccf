#pragma once

#include <cstdint>

namespace harsim::fxp {

/// Signed two's-complement storage format.
struct FxFormat {
    int n_bits = 11;     ///< total width including the sign bit
    int frac_bits = 10;  ///< fractional bits, n_bits - 1 for values in [-1, 1)

    /// Validates 2 <= n_bits <= 32 and returns the format with frac_bits = n_bits - 1.
    static FxFormat with_width(int n_bits);

    std::int64_t max() const { return (std::int64_t{1} << (n_bits - 1)) - 1; }
    std::int64_t min() const { return -(std::int64_t{1} << (n_bits - 1)); }
};

/// Round to nearest, ties away from zero. Throws std::domain_error on
/// non-finite input or values outside the int64 range.
std::int64_t round_nearest(double x);

std::int64_t saturate(std::int64_t v, FxFormat fmt);

/// MAC accumulation register. The value never wraps: mac() throws
/// OverflowError when the exact sum leaves the signed `width`-bit range.
class Accumulator {
public:
    explicit Accumulator(int width = 32, std::int64_t value = 0);

    std::int64_t value() const { return value_; }
    int width() const { return width_; }

private:
    int width_;
    std::int64_t value_;
};

Accumulator mac(Accumulator acc, std::int64_t a, std::int64_t b);

/// out = saturate(round_nearest(acc * mult / 2^shift)), with negatives mapped
/// to zero before saturation when relu is set. Exact integer arithmetic.
std::int64_t requantize(const Accumulator& acc, std::int64_t mult, int shift, FxFormat fmt,
                        bool relu);

}  // namespace harsim::fxp
