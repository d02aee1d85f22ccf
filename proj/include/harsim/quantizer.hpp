#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "harsim/netgraph.hpp"
#include "harsim/qmodel.hpp"
#include "harsim/trainer.hpp"

namespace harsim {

struct LayerStat {
    double max_w = 0.0;  ///< max |W|
    double max_o = 0.0;  ///< max |O| over the calibration set
    bool operator==(const LayerStat&) const = default;
};

/// conv[l][branch] for the three conv depths, one entry per dense layer.
struct CalibStats {
    std::array<std::vector<LayerStat>, 3> conv;
    std::array<LayerStat, 2> dense;
    std::size_t samples = 0;
};

/// Walks the network depth by depth; the outputs of depth l are measured on
/// inputs already divided by R_1..R_{l-1}, so each R_l sees the activations
/// the integer engine will see.
CalibStats calibrate(const ModelSpec& spec, const ModelParams& params,
                     std::span<const Frame> calib_set);

/// R_l = max over branches of max|W_{l,i}| and max|O_{l,i}| (l = 1..3).
/// Throws std::domain_error for a dead layer (R_l = 0).
double compute_rescale(const CalibStats& stats, int layer);
double compute_dense_scale(const CalibStats& stats, int dense_layer);
RescaleSet rescale_set(const CalibStats& stats);

/// round_nearest(w / r * 2^n) saturated to signed (n + 1)-bit storage.
std::int64_t quantize_weight(double w, double r, int n_bits);

/// Integer weights for every layer plus (mult, shift) requantization pairs.
QuantizedModel quantize_weights(const ModelSpec& spec, const ModelParams& params,
                                const RescaleSet& rescale, int n_bits);

QuantizedModel quantize_model(const ModelSpec& spec, const ModelParams& params,
                              std::span<const Frame> calib_set, int n_bits);

/// Integer argmax accuracy divided by the float argmax accuracy.
double quantized_accuracy_ratio(const ModelSpec& spec, const ModelParams& params,
                                const QuantizedModel& qmodel, std::span<const Sample> test_set);

struct SweepPoint {
    int n_bits = 0;
    double float_accuracy = 0.0;
    double quantized_accuracy = 0.0;
    double ratio = 0.0;
};

/// One point per precision from a single shared calibration pass.
std::vector<SweepPoint> sweep_bits(const ModelSpec& spec, const ModelParams& params,
                                   std::span<const Frame> calib_set,
                                   std::span<const Sample> test_set, std::span<const int> n_range);

}  // namespace harsim
