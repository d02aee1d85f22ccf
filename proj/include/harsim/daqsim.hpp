#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "harsim/netgraph.hpp"

namespace harsim {

constexpr std::int64_t kNsPerSecond = 1'000'000'000;

struct SensorSpec {
    std::string name;
    int channels = 1;
    double native_rate = 1.0;  ///< Hz
    ConvDim conv_dim = ConvDim::k1D;
    double min_value = -1.0;
    double max_value = 1.0;

    double period_ns() const { return 1e9 / native_rate; }
    /// Throws std::invalid_argument.
    void validate() const;
    bool operator==(const SensorSpec&) const = default;
};

/// The six sensor boards of the reference platform.
std::vector<SensorSpec> reference_sensors();
/// Same boards as modalities; the IMU splits into its 119 Hz motion part and
/// its 20 Hz magnetometer.
std::vector<SensorSpec> modality_catalog();
/// Looks a sensor up by name; throws std::out_of_range.
const SensorSpec& find_sensor(const std::vector<SensorSpec>& catalog, const std::string& name);

struct SensorSample {
    std::int64_t t_ns = 0;  ///< virtual time since the start signal
    std::vector<double> values;
    bool operator==(const SensorSample&) const = default;
};

/// Nominal timestamp of sample `index` for a sensor running at `rate` Hz.
std::int64_t sample_time_ns(std::uint64_t index, double rate);

/// A sensor read out sample by sample once started.
class Source {
public:
    virtual ~Source() = default;
    virtual const SensorSpec& spec() const = 0;
    /// Next sample in time order, or nothing when the source is exhausted.
    virtual std::optional<SensorSample> next() = 0;
};

/// Samples a function of (sample index, timestamp) on the nominal grid.
class FunctionSource : public Source {
public:
    using Fn = std::function<std::vector<double>(std::uint64_t, std::int64_t)>;
    FunctionSource(SensorSpec spec, Fn fn, std::optional<std::uint64_t> limit = std::nullopt);
    const SensorSpec& spec() const override { return spec_; }
    std::optional<SensorSample> next() override;

private:
    SensorSpec spec_;
    Fn fn_;
    std::optional<std::uint64_t> limit_;
    std::uint64_t index_ = 0;
};

/// Replays a recorded stream.
class ReplaySource : public Source {
public:
    ReplaySource(SensorSpec spec, std::vector<SensorSample> samples);
    const SensorSpec& spec() const override { return spec_; }
    std::optional<SensorSample> next() override;

private:
    SensorSpec spec_;
    std::vector<SensorSample> samples_;
    std::size_t pos_ = 0;
};

/// Re-times another source: each interval is nominal * (1 + d) with d drawn
/// uniformly from [-ppm, ppm] * 1e-6.
class JitterSource : public Source {
public:
    JitterSource(std::unique_ptr<Source> inner, double jitter_ppm, std::uint64_t seed);
    const SensorSpec& spec() const override { return inner_->spec(); }
    std::optional<SensorSample> next() override;

private:
    std::unique_ptr<Source> inner_;
    double ppm_;
    std::mt19937_64 rng_;
    double clock_ns_ = 0.0;
    bool first_ = true;
};

std::unique_ptr<Source> jitter_model(std::unique_ptr<Source> source, double jitter_ppm,
                                     std::uint64_t seed);

struct SampleEvent {
    std::size_t sensor = 0;
    SensorSample sample;
};

/// A set of sources sharing one virtual-time origin. Samples come out in
/// (timestamp, sensor index) order.
class Session {
public:
    Session() = default;
    explicit Session(std::vector<std::unique_ptr<Source>> sources);

    void add(std::unique_ptr<Source> source);
    /// The start signal. Throws std::logic_error when already started or empty.
    void start();
    bool started() const { return started_; }

    std::size_t size() const { return sources_.size(); }
    const SensorSpec& spec(std::size_t i) const { return sources_.at(i)->spec(); }

    /// Pops the next sample strictly earlier than `limit_ns`.
    std::optional<SampleEvent> pop_before(std::int64_t limit_ns);

private:
    struct Pending {
        std::int64_t t_ns;
        std::size_t sensor;
        bool operator>(const Pending& o) const {
            return t_ns != o.t_ns ? t_ns > o.t_ns : sensor > o.sensor;
        }
    };
    void refill(std::size_t sensor);

    std::vector<std::unique_ptr<Source>> sources_;
    std::vector<std::optional<SensorSample>> heads_;
    std::priority_queue<Pending, std::vector<Pending>, std::greater<Pending>> queue_;
    bool started_ = false;
};

Session start_sync(std::vector<std::unique_ptr<Source>> sources);

/// Bounded ring buffer of timestamped channel vectors.
class SensorFifo {
public:
    SensorFifo(std::size_t depth, std::size_t channels);

    /// False (and nothing stored) when full.
    bool push(const SensorSample& sample);
    void pop();

    std::size_t size() const { return count_; }
    std::size_t depth() const { return times_.size(); }
    std::size_t channels() const { return channels_; }
    bool empty() const { return count_ == 0; }
    bool full() const { return count_ == times_.size(); }

    /// i = 0 is the oldest entry.
    std::int64_t time_at(std::size_t i) const;
    std::span<const double> values_at(std::size_t i) const;

private:
    std::size_t slot(std::size_t i) const { return (head_ + i) % times_.size(); }

    std::size_t channels_;
    std::vector<std::int64_t> times_;
    std::vector<double> values_;
    std::size_t head_ = 0;
    std::size_t count_ = 0;
};

enum class Alignment { kNative, kCommon };
enum class Interp { kNearest, kLinear };

std::string to_string(Alignment a);
std::string to_string(Interp m);
Alignment parse_alignment(const std::string& s);
Interp parse_interp(const std::string& s);

struct WindowConfig {
    std::int64_t window_ns = kNsPerSecond;
    std::int64_t step_ns = kNsPerSecond / 2;
    Alignment alignment = Alignment::kNative;
    double target_rate = 0.0;  ///< Hz, common-rate mode only
    Interp method = Interp::kLinear;
    double fifo_slack = 2.0;
    std::size_t fifo_depth = 0;  ///< 0 derives the depth from timesteps and slack

    /// Window long enough for `timesteps` samples at `rate`; step defaults
    /// to the window (tumbling).
    static WindowConfig from_timesteps(int timesteps, double rate, std::int64_t step_ns = 0);

    /// Native samples per window: round(window * rate).
    int timesteps(double rate) const;
    /// Rows a sensor contributes to each frame in the configured alignment.
    int rows(double rate) const;
    std::size_t depth_for(double rate) const;
    void validate(const std::vector<SensorSpec>& sensors) const;
};

struct StreamEvent {
    enum class Kind { kOverflow, kUnderfill };
    Kind kind = Kind::kOverflow;
    std::int64_t t_ns = 0;
    std::string sensor;
    std::size_t missing = 0;  ///< rows filled by holding the last sample
};

struct SensorCounters {
    std::uint64_t produced = 0;
    std::uint64_t consumed = 0;
    std::uint64_t overflowed = 0;
    std::uint64_t occupancy = 0;
};

struct StreamStats {
    std::vector<SensorCounters> sensors;
    std::vector<StreamEvent> events;
    std::uint64_t frames = 0;
};

struct TimedFrame {
    std::uint64_t index = 0;
    std::int64_t start_ns = 0;
    std::int64_t end_ns = 0;
    Frame frame;  ///< one (rows, 1, channels) tensor per sensor
    std::vector<std::int64_t> first_sample_ns;  ///< per sensor, first row used
    std::vector<std::int64_t> last_sample_ns;   ///< per sensor, last row used
};

/// Drains the session's sources into per-sensor FIFOs and cuts a frame every
/// step once the first window has elapsed. Frame k covers
/// [k * step, k * step + window) and is emitted at its end time.
class StreamController {
public:
    StreamController(Session& session, WindowConfig cfg);

    /// Advances virtual time to the next frame boundary; nothing if that
    /// boundary lies beyond `until_ns`.
    std::optional<TimedFrame> next_frame(std::int64_t until_ns);
    /// Pulls every sample strictly before `t_ns` into the FIFOs.
    void advance_to(std::int64_t t_ns);

    const StreamStats& stats() const { return stats_; }
    const WindowConfig& config() const { return cfg_; }
    std::int64_t now_ns() const { return now_ns_; }

private:
    TimedFrame cut(std::int64_t start_ns, std::int64_t end_ns);
    Tensor native_rows(std::size_t s, std::int64_t start_ns, std::int64_t end_ns, TimedFrame& out);
    Tensor common_rows(std::size_t s, std::int64_t start_ns, std::int64_t end_ns, TimedFrame& out);
    void retire(std::int64_t next_start_ns);

    Session& session_;
    WindowConfig cfg_;
    std::vector<SensorFifo> fifos_;
    std::vector<int> rows_;
    StreamStats stats_;
    std::int64_t now_ns_ = 0;
    std::uint64_t next_index_ = 0;
};

/// Every frame ending at or before `until_ns`, handed to `sink` in order.
StreamStats stream_frames(Session& session, const WindowConfig& cfg, std::int64_t until_ns,
                          const std::function<void(const TimedFrame&)>& sink);
std::vector<TimedFrame> stream_frames(Session& session, const WindowConfig& cfg,
                                      std::int64_t until_ns, StreamStats* stats = nullptr);

/// Samples `stream` on the grid start + round(k * 1e9 / target_rate), k < count.
/// Throws std::domain_error when a grid point falls outside the stream.
std::vector<SensorSample> resample(const std::vector<SensorSample>& stream, double target_rate,
                                   Interp method, std::int64_t start_ns, std::size_t count);
/// Grid anchored at the first sample, extending up to the last one.
std::vector<SensorSample> resample(const std::vector<SensorSample>& stream, double target_rate,
                                   Interp method);

struct Segment {
    int label = 0;
    std::int64_t start_ns = 0;
    std::int64_t end_ns = 0;
    bool operator==(const Segment&) const = default;
};

/// One continuous labeled recording.
struct Recording {
    std::vector<SensorSpec> sensors;
    std::vector<std::vector<SensorSample>> streams;
    std::vector<Segment> segments;
    int classes = 0;
    std::uint64_t seed = 0;

    std::int64_t duration_ns() const { return segments.empty() ? 0 : segments.back().end_ns; }
    /// Label of the segment containing [start, end), or -1 across a boundary.
    int label_for(std::int64_t start_ns, std::int64_t end_ns) const;
    bool operator==(const Recording&) const = default;
};

struct DatasetConfig {
    std::vector<SensorSpec> sensors;
    std::vector<bool> informative;  ///< per sensor; empty means all informative
    int classes = 10;
    int n_per_class = 10;
    double segment_s = 4.0;
    double noise = 0.3;
    std::uint64_t seed = 1;
};

/// Shuffled labeled segments. Informative sensors carry class-specific
/// sinusoid mixtures plus Gaussian noise, the rest carry noise only.
Recording gen_dataset(const DatasetConfig& cfg);

/// Replay sources for every stream of a recording.
Session replay_session(const Recording& rec);

}  // namespace harsim
