#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "harsim/daqsim.hpp"
#include "harsim/io.hpp"
#include "harsim/quantizer.hpp"
#include "harsim/rtl_engine.hpp"
#include "harsim/trainer.hpp"

namespace harsim {

/// Everything a run depends on; a run is reproducible from this plus the seed.
struct PipelineConfig {
    std::uint64_t seed = 1;

    // dataset
    std::vector<std::string> sensors;           ///< empty: whole modality catalog
    std::map<std::string, int> channels;        ///< per-sensor channel overrides
    std::vector<std::string> uninformative;     ///< sensors generated as pure noise
    int classes = 10;
    int n_per_class = 12;
    double segment_s = 3.0;
    double noise = 0.3;
    double test_fraction = 0.25;

    // windowing
    double window_ms = 1000.0;
    double step_ms = 500.0;
    Alignment alignment = Alignment::kCommon;
    double target_rate_hz = 20.0;
    Interp method = Interp::kLinear;

    // model
    int filters = 8;
    int kernel = 5;
    int kernel_2d = 3;
    bool pool = false;
    bool pool_2d = false;
    int hidden = 32;
    FusionMode fusion = FusionMode::kFeature;

    // training
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 1e-3;
    int keep = 3;

    // quantization and hardware
    int n_bits = 10;
    std::vector<int> sweep_bits{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
    std::vector<int> report_bits{8, 10};
    int calib_frames = 0;  ///< 0: whole training split
    std::string model_file = "model.json";
    Schedule schedule = Schedule::kSerial;
    double clock_hz = 100e6;
    CostModel cost;

    std::filesystem::path out = "out";

    /// Resolved configuration; the output directory is left out so that
    /// artifacts do not depend on where they were written.
    io::json to_json() const;
    /// Missing keys keep their defaults; unknown keys raise ValidationError.
    static PipelineConfig from_json(const io::json& j);
    void validate() const;

    std::vector<SensorSpec> sensor_specs() const;
    WindowConfig window() const;
    TrainConfig train_config() const;
    DatasetConfig dataset_config() const;
};

PipelineConfig load_config(const std::filesystem::path& path);

/// Labeled raw frames cut from a recording, split by segment.
struct PreparedData {
    std::vector<std::string> sensors;  ///< frame branch order
    Dataset train;
    Dataset test;
    std::vector<SensorRange> ranges;  ///< training-split range of every sensor
};

/// Per class, a seeded share of the segments goes to the test split.
std::vector<bool> test_segments(const Recording& rec, double test_fraction, std::uint64_t seed);
/// Min/max of each sensor over the samples that fall in the selected segments.
std::vector<SensorRange> sensor_ranges(const Recording& rec, const std::vector<bool>& selected);
PreparedData prepare_data(const PipelineConfig& cfg, const Recording& rec);

/// Picks the sensors named in `ranges` out of a raw frame, normalizes them
/// and applies the model's fusion layout.
Frame model_input(const ModelSpec& spec, const std::vector<SensorRange>& ranges,
                  const std::vector<std::string>& sensors, const Frame& raw);
Dataset model_dataset(const ModelSpec& spec, const std::vector<SensorRange>& ranges,
                      const std::vector<std::string>& sensors, const Dataset& raw);
ModelSpec build_spec(const PipelineConfig& cfg, const std::vector<SensorSpec>& sensors);

struct TrainSummary {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::int64_t params = 0;
};

struct SelectSummary {
    ImportanceReport report;
    std::vector<std::string> kept;
    double full_accuracy = 0.0;
    double selected_accuracy = 0.0;
};

struct SimulateSummary {
    std::size_t labels = 0;
    CycleReport cycles;
    StreamStats stream;
};

struct InferSummary {
    std::size_t frames = 0;
    double accuracy = 0.0;
};

// Each command reads its inputs from and writes its artifacts into cfg.out.
std::filesystem::path cmd_gen_data(const PipelineConfig& cfg);
TrainSummary cmd_train(const PipelineConfig& cfg);
SelectSummary cmd_select(const PipelineConfig& cfg);
QuantizedModel cmd_quantize(const PipelineConfig& cfg);
std::vector<SweepPoint> cmd_sweep(const PipelineConfig& cfg);
InferSummary cmd_infer(const PipelineConfig& cfg);
SimulateSummary cmd_simulate(const PipelineConfig& cfg);
std::vector<io::json> cmd_report(const PipelineConfig& cfg);

/// gen-data, train, select, quantize, sweep, infer, simulate, report.
void run_pipeline(const PipelineConfig& cfg);

}  // namespace harsim
