#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "harsim/netgraph.hpp"

namespace harsim {

struct Sample {
    Frame frame;
    int label = 0;
};

using Dataset = std::vector<Sample>;

/// Adam hyperparameters and the seed that fixes initialization and batch order.
struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    std::uint64_t seed = 1;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    bool operator==(const EpochStats&) const = default;
};

using History = std::vector<EpochStats>;

struct TrainResult {
    ModelParams params;
    History history;
};

/// Raised when the loss becomes non-finite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int epoch, const std::string& what)
        : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

/// Sparse categorical cross-entropy: -log softmax(logits)[label].
double loss_ce(std::span<const double> logits, int label);

/// Glorot-uniform weights, alpha = 0.
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

/// Gradients of the mean batch loss w.r.t. every parameter tensor (same layout
/// as ModelParams). Max-pools route the gradient to the first maximal element.
ModelParams backward(const ModelSpec& spec, const ModelParams& params,
                     std::span<const Sample> batch, double* mean_loss = nullptr);

double mean_loss(const ModelSpec& spec, const ModelParams& params, std::span<const Sample> data);
double accuracy(const ModelSpec& spec, const ModelParams& params, std::span<const Sample> data);

/// Flattened ReLU masks and pool argmax positions for one frame. Two
/// parameter points with equal signatures lie in the same smooth region.
std::vector<std::uint32_t> activation_signature(const ModelSpec& spec, const ModelParams& params,
                                                const Frame& frame);

TrainResult train(const ModelSpec& spec, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg);
TrainResult train_from(const ModelSpec& spec, ModelParams init, const Dataset& train_set,
                       const Dataset& val_set, const TrainConfig& cfg);

struct ImportanceReport {
    std::vector<std::string> sensors;
    std::vector<double> alpha;
    std::vector<double> weights;       ///< softmax(alpha)
    std::vector<std::size_t> ranking;  ///< sensor indices, most important first
};

ImportanceReport make_importance_report(std::vector<std::string> sensors,
                                        std::vector<double> alpha);

struct ImportanceRun {
    ImportanceReport report;
    TrainResult training;
};

/// Trains alpha jointly with all weights and ranks the branches by alpha.
ImportanceRun train_importance(const ModelSpec& spec, const Dataset& train_set,
                               const Dataset& val_set, const TrainConfig& cfg);

/// Indices of the `keep` top-ranked sensors, returned in input order.
std::vector<std::size_t> select_modalities(const ImportanceReport& report, int keep);

/// Spec reduced to the given branches; alpha mixing switched off.
ModelSpec restrict_spec(const ModelSpec& spec, std::span<const std::size_t> keep);
Dataset restrict_dataset(const Dataset& data, std::span<const std::size_t> keep);

}  // namespace harsim
