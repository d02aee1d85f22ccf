#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "harsim/fxp.hpp"
#include "harsim/netgraph.hpp"

namespace harsim {

/// Per-layer normalization coefficients: one shared R per conv depth across
/// all branches, one scale per dense layer.
struct RescaleSet {
    std::array<double, 3> conv{};
    std::array<double, 2> dense{};
    bool operator==(const RescaleSet&) const = default;
};

/// out = round(acc * mult / 2^shift)
struct Requant {
    std::int64_t mult = 1;
    int shift = 0;
    bool operator==(const Requant&) const = default;
};

struct QConvLayer {
    ConvGeometry geo;
    std::vector<std::int64_t> weights;  ///< [kt][ks][in_c][filters]
    Requant rq;
    bool operator==(const QConvLayer& o) const { return weights == o.weights && rq == o.rq; }
};

struct QDenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<std::int64_t> weights;  ///< [in][out]
    Requant rq;
    bool relu = false;
    bool operator==(const QDenseLayer&) const = default;
};

/// Integer model: every weight and activation is a signed (n_bits + 1)-bit
/// word carrying n_bits fractional bits of the R-normalized value.
struct QuantizedModel {
    ModelSpec spec;
    int n_bits = 10;
    int acc_bits = 32;
    RescaleSet rescale;
    std::vector<std::array<QConvLayer, 3>> branches;
    std::vector<std::int64_t> mix;  ///< quantized softmax(alpha), empty without mixing
    Requant mix_rq;
    std::array<QDenseLayer, 2> dense;

    int stored_width() const { return n_bits + 1; }
    fxp::FxFormat storage() const { return fxp::FxFormat::with_width(n_bits + 1); }
    bool operator==(const QuantizedModel&) const = default;
};

struct QFrame {
    std::vector<ITensor> branches;
    bool operator==(const QFrame&) const = default;
};

}  // namespace harsim
