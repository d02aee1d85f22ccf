#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "harsim/qmodel.hpp"

namespace harsim {

enum class Schedule { kSerial, kParallel };

std::string to_string(Schedule s);
Schedule parse_schedule(const std::string& s);

/// Free parameters of the analytic timing model.
struct CostModel {
    std::uint64_t kappa = 4;        ///< pipeline overhead per layer, cycles
    std::uint64_t dense_lanes = 8;  ///< parallel MACs in the dense engine
};

/// Stepped integer convolution: a K-row shift register feeds a MAC per
/// output-channel lane, the Q stage requantizes with ReLU folded in, and
/// comparators fold the kernel max-pool (from the layer geometry) and, if
/// `global_pool` is set, the global max-pool into the output stream.
ITensor qconv_layer(const ITensor& input, const QConvLayer& layer, fxp::FxFormat fmt, int acc_bits,
                    bool global_pool);

std::vector<std::int64_t> qdense_layer(std::span<const std::int64_t> input, const QDenseLayer& layer,
                                       fxp::FxFormat fmt, int acc_bits, bool relu);

struct CycleReport {
    Schedule schedule = Schedule::kSerial;
    std::vector<std::vector<std::uint64_t>> branch_layers;
    std::vector<std::uint64_t> branch_totals;
    std::vector<std::uint64_t> dense_layers;
    std::uint64_t dense_total = 0;
    std::uint64_t total = 0;
    double clock_hz = 100e6;
    double latency_s = 0.0;
    double throughput = 0.0;  ///< labels per second
    bool operator==(const CycleReport&) const = default;
};

/// in_channels * output_positions * kernel_taps + kappa.
std::uint64_t conv_cycles(const ConvGeometry& geo, std::uint64_t kappa);
/// ceil(in * out / lanes) + kappa.
std::uint64_t dense_cycles(std::size_t in, std::size_t out, std::uint64_t lanes, std::uint64_t kappa);

/// serial total = sum(branches) + dense, parallel total = max(branches) + dense.
CycleReport schedule_latency(const std::vector<std::uint64_t>& branch_cycles,
                             std::uint64_t dense_cycles, Schedule mode, double clock_hz);

/// Per-layer costs of a model composed under a schedule.
CycleReport model_cycles(const ModelSpec& spec, Schedule mode, const CostModel& cost,
                         double clock_hz);

struct QInferResult {
    std::size_t cls = 0;
    std::vector<std::int64_t> logits;
    std::vector<std::vector<std::int64_t>> features;  ///< per-branch global-pool output
    CycleReport cycles;
};

QFrame quantize_frame(const Frame& frame, int n_bits);

/// Integer inference. The schedule only changes the timing report; parallel
/// mode evaluates branches on worker threads with identical results.
QInferResult qinfer(const QuantizedModel& model, const QFrame& frame, Schedule schedule,
                    const CostModel& cost = {}, double clock_hz = 100e6);

struct ResourceReport {
    Schedule schedule = Schedule::kSerial;
    int stored_width = 0;
    std::uint64_t weight_words = 0;
    std::uint64_t feature_words = 0;
    std::uint64_t memory_bits = 0;
    std::uint64_t mac_lanes = 0;
    std::uint64_t multipliers_per_lane = 0;
    std::uint64_t multiplier_units = 0;
    bool operator==(const ResourceReport&) const = default;
};

/// memory_bits = (weight + feature-buffer words) * stored_width;
/// multiplier_units = MAC lanes * ceil(stored_width / 9).
ResourceReport estimate_resources(const QuantizedModel& model, Schedule schedule, int stored_width,
                                  const CostModel& cost = {});

}  // namespace harsim
