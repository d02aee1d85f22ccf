#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "harsim/tensor.hpp"

namespace harsim {

enum class ConvDim { k1D, k2D };
enum class FusionMode { kFeature, kData };

struct ConvLayerSpec {
    int filters = 8;
    int kernel = 5;
    bool pool = false;  ///< folded max-pool with window = kernel, stride = kernel
    bool operator==(const ConvLayerSpec&) const = default;
};

/// One sensor branch: three valid-padding stride-1 conv layers + global max-pool.
struct BranchSpec {
    std::string sensor;
    ConvDim dim = ConvDim::k1D;
    int timesteps = 20;
    int channels = 1;
    std::array<ConvLayerSpec, 3> layers{};

    int features() const { return layers[2].filters; }
    bool operator==(const BranchSpec&) const = default;
};

struct ModelSpec {
    std::vector<BranchSpec> branches;
    int hidden = 32;
    int classes = 10;
    FusionMode fusion = FusionMode::kFeature;
    bool alpha_enabled = false;

    /// Width of the first dense layer's input.
    int dense_inputs() const;
    /// Throws std::invalid_argument on any structural violation.
    void validate() const;
    bool operator==(const ModelSpec&) const = default;
};

/// Shapes of one conv layer as laid out in a branch.
struct ConvGeometry {
    std::size_t in_t = 0, in_s = 0, in_c = 0;
    std::size_t kt = 0, ks = 0, filters = 0;
    std::size_t out_t = 0, out_s = 0;
    bool pool = false;
    std::size_t pt = 1, ps = 1;
    std::size_t pooled_t = 0, pooled_s = 0;

    std::size_t weight_count() const { return kt * ks * in_c * filters; }
    std::size_t taps() const { return kt * ks; }
    std::size_t output_positions() const { return out_t * out_s; }
};

/// Per-layer geometry of a branch; throws std::invalid_argument when the
/// window is too short for the kernels.
std::array<ConvGeometry, 3> branch_geometry(const BranchSpec& branch);

/// Bias-free weights. Conv weights are laid out [kt][ks][in_c][filters];
/// dense weights [in][out].
struct ModelParams {
    std::vector<std::array<std::vector<double>, 3>> conv;
    std::array<std::vector<double>, 2> dense;
    std::vector<double> alpha;

    static ModelParams zeros_like(const ModelSpec& spec);
    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;
    std::size_t count() const;
    bool operator==(const ModelParams&) const = default;
};

/// One window snapshot: per-branch tensors shaped (timesteps, 1, channels).
struct Frame {
    std::vector<Tensor> branches;
};

/// Training-set value range of one sensor (channel group).
struct SensorRange {
    std::string sensor;
    double min = -1.0;
    double max = 1.0;
    bool operator==(const SensorRange&) const = default;
};

struct PoolWindow {
    std::size_t t = 1;
    std::size_t s = 1;
};

/// Valid-padding, stride-1 convolution with optional ReLU and kernel max-pool.
/// `weights` is laid out [kt][ks][in_c][filters].
Tensor conv_forward(const Tensor& input, std::span<const double> weights, std::size_t kt,
                    std::size_t ks, std::size_t filters, bool relu,
                    std::optional<PoolWindow> pool = std::nullopt);

/// Max over every (time, space) position per channel -> (1, 1, F).
Tensor global_max_pool(const Tensor& input);

/// Importance-weighted mixing: sum_i softmax(alpha)_i * features_i.
std::vector<double> mix_features(const std::vector<std::vector<double>>& features,
                                 std::span<const double> alpha);

std::vector<double> softmax(std::span<const double> values);

/// Index of the largest value; the lowest index wins ties.
template <typename T>
std::size_t argmax(std::span<const T> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

struct Inference {
    std::vector<double> logits;
    std::size_t cls = 0;
};

/// Reshapes a (T, 1, C) frame tensor into the branch's conv input layout.
Tensor branch_input(const BranchSpec& branch, const Tensor& frame_tensor);

/// Pooled 1xF feature vector of one branch.
std::vector<double> branch_features(const BranchSpec& branch,
                                    const std::array<std::vector<double>, 3>& weights,
                                    const Tensor& frame_tensor);

Inference forward(const ModelSpec& spec, const ModelParams& params, const Frame& frame);

std::int64_t count_params(const ModelSpec& spec);

/// Affine map of each sensor's training range onto [-1, 1], clipped.
Frame normalize_inputs(const std::vector<Tensor>& raw, const std::vector<SensorRange>& stats);

/// Concatenates branch tensors along channels for the data-fusion input.
Frame fuse_channels(const Frame& frame);

/// Checks params against the spec shapes; throws ShapeError.
void check_params(const ModelSpec& spec, const ModelParams& params);

}  // namespace harsim
