#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "harsim/daqsim.hpp"
#include "harsim/errors.hpp"
#include "harsim/netgraph.hpp"
#include "harsim/qmodel.hpp"
#include "harsim/rtl_engine.hpp"
#include "harsim/trainer.hpp"

namespace harsim::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;

inline constexpr std::string_view kModelSchema = "harsim.model";
inline constexpr std::string_view kQModelSchema = "harsim.qmodel";
inline constexpr std::string_view kRecordingSchema = "harsim.recording";
inline constexpr std::string_view kImportanceSchema = "harsim.importance";
inline constexpr std::string_view kCyclesSchema = "harsim.cycles";
inline constexpr std::string_view kReportSchema = "harsim.report";

/// {"schema": name, "version": v}
json envelope(std::string_view schema, int version = kFormatVersion);
/// Throws ValidationError naming the expected and found schema/version.
void check_schema(const json& j, std::string_view schema, int version = kFormatVersion);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
/// Throws ValidationError on malformed input.
double parse_double(std::string_view s);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Writes to a sibling temp file and renames it over `path`.
void write_text_atomic(const fs::path& path, const std::string& text);
/// Throws std::runtime_error naming the path.
std::string read_text(const fs::path& path);
json read_json(const fs::path& path);

/// First line of every CSV artifact: "# config=<compact json>".
std::string config_comment(const json& config);

json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const json& j);
json to_json(const ModelParams& params);
ModelParams params_from_json(const json& j);
json to_json(const SensorSpec& s);
SensorSpec sensor_from_json(const json& j);
json to_json(const std::vector<SensorRange>& ranges);
std::vector<SensorRange> ranges_from_json(const json& j);
json to_json(const History& history);
json to_json(const RescaleSet& r);
RescaleSet rescale_from_json(const json& j);
json to_json(const QuantizedModel& q);
QuantizedModel qmodel_from_json(const json& j);
json to_json(const CycleReport& r);
json to_json(const ResourceReport& r);
json to_json(const ImportanceReport& r);

/// Float model plus the input normalization it was trained with.
struct ModelFile {
    ModelSpec spec;
    ModelParams params;
    std::vector<SensorRange> ranges;
    History history;
    json config;
};

void save_model(const fs::path& path, const ModelFile& m);
ModelFile load_model(const fs::path& path);

struct QModelFile {
    QuantizedModel model;
    std::vector<SensorRange> ranges;
    json config;
};

void save_qmodel(const fs::path& path, const QModelFile& m);
QModelFile load_qmodel(const fs::path& path);

/// manifest.json plus one CSV per sensor (timestamp_ns, ch0..chN). The
/// directory is assembled next to `dir` and renamed into place.
void write_recording(const fs::path& dir, const Recording& rec, const json& config);
/// Verifies the manifest schema and every per-file hash.
Recording read_recording(const fs::path& dir);

}  // namespace harsim::io
