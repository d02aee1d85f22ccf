#include "harsim/daqsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "harsim/rng.hpp"

namespace harsim {

void SensorSpec::validate() const {
    if (name.empty()) throw std::invalid_argument("sensor name must not be empty");
    if (channels < 1) throw std::invalid_argument("sensor " + name + ": channels must be >= 1");
    if (!(native_rate > 0.0) || !std::isfinite(native_rate)) {
        throw std::invalid_argument("sensor " + name + ": native rate must be > 0");
    }
    if (!(max_value > min_value)) {
        throw std::invalid_argument("sensor " + name + ": value range is empty");
    }
}

std::vector<SensorSpec> reference_sensors() {
    return {
        {"optical", 10, 20.0, ConvDim::k1D, 0.0, 1000.0},
        {"gas", 2, 4.0, ConvDim::k1D, 400.0, 8192.0},
        {"thermal", 768, 32.0, ConvDim::k2D, -40.0, 300.0},
        {"baro", 1, 75.0, ConvDim::k1D, 260.0, 1260.0},
        {"imu", 9, 119.0, ConvDim::k1D, -16.0, 16.0},
        {"tof", 1, 50.0, ConvDim::k1D, 0.0, 2000.0},
    };
}

std::vector<SensorSpec> modality_catalog() {
    return {
        {"optical", 10, 20.0, ConvDim::k1D, 0.0, 1000.0},
        {"gas", 2, 4.0, ConvDim::k1D, 400.0, 8192.0},
        {"thermal", 768, 32.0, ConvDim::k2D, -40.0, 300.0},
        {"baro", 1, 75.0, ConvDim::k1D, 260.0, 1260.0},
        {"motion", 6, 119.0, ConvDim::k1D, -16.0, 16.0},
        {"magnetic", 3, 20.0, ConvDim::k1D, -16.0, 16.0},
        {"tof", 1, 50.0, ConvDim::k1D, 0.0, 2000.0},
    };
}

const SensorSpec& find_sensor(const std::vector<SensorSpec>& catalog, const std::string& name) {
    for (const auto& s : catalog) {
        if (s.name == name) return s;
    }
    throw std::out_of_range("unknown sensor '" + name + "'");
}

std::int64_t sample_time_ns(std::uint64_t index, double rate) {
    return std::llround(static_cast<long double>(index) * 1e9L / static_cast<long double>(rate));
}

// ---- sources ---------------------------------------------------------------

FunctionSource::FunctionSource(SensorSpec spec, Fn fn, std::optional<std::uint64_t> limit)
    : spec_(std::move(spec)), fn_(std::move(fn)), limit_(limit) {
    spec_.validate();
    if (!fn_) throw std::invalid_argument("FunctionSource needs a sample function");
}

std::optional<SensorSample> FunctionSource::next() {
    if (limit_ && index_ >= *limit_) return std::nullopt;
    SensorSample s;
    s.t_ns = sample_time_ns(index_, spec_.native_rate);
    s.values = fn_(index_, s.t_ns);
    if (s.values.size() != static_cast<std::size_t>(spec_.channels)) {
        throw std::length_error("sensor " + spec_.name + ": sample has wrong channel count");
    }
    ++index_;
    return s;
}

ReplaySource::ReplaySource(SensorSpec spec, std::vector<SensorSample> samples)
    : spec_(std::move(spec)), samples_(std::move(samples)) {
    spec_.validate();
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (samples_[i].values.size() != static_cast<std::size_t>(spec_.channels)) {
            throw std::invalid_argument("sensor " + spec_.name + ": replay sample has wrong width");
        }
        if (i > 0 && samples_[i].t_ns <= samples_[i - 1].t_ns) {
            throw std::invalid_argument("sensor " + spec_.name + ": replay timestamps not increasing");
        }
    }
}

std::optional<SensorSample> ReplaySource::next() {
    if (pos_ >= samples_.size()) return std::nullopt;
    return samples_[pos_++];
}

JitterSource::JitterSource(std::unique_ptr<Source> inner, double jitter_ppm, std::uint64_t seed)
    : inner_(std::move(inner)), ppm_(jitter_ppm), rng_(seed) {
    if (!inner_) throw std::invalid_argument("JitterSource needs a source");
    if (!(jitter_ppm >= 0.0) || !std::isfinite(jitter_ppm)) {
        throw std::invalid_argument("jitter_ppm must be >= 0");
    }
}

std::optional<SensorSample> JitterSource::next() {
    auto s = inner_->next();
    if (!s) return s;
    if (first_) {
        first_ = false;
    } else {
        double d = 0.0;
        if (ppm_ > 0.0) d = std::uniform_real_distribution<double>(-ppm_, ppm_)(rng_) * 1e-6;
        clock_ns_ += inner_->spec().period_ns() * (1.0 + d);
    }
    s->t_ns = std::llround(clock_ns_);
    return s;
}

std::unique_ptr<Source> jitter_model(std::unique_ptr<Source> source, double jitter_ppm,
                                     std::uint64_t seed) {
    return std::make_unique<JitterSource>(std::move(source), jitter_ppm, seed);
}

// ---- session ---------------------------------------------------------------

Session::Session(std::vector<std::unique_ptr<Source>> sources) {
    for (auto& s : sources) add(std::move(s));
}

void Session::add(std::unique_ptr<Source> source) {
    if (started_) throw std::logic_error("cannot add a source after the start signal");
    if (!source) throw std::invalid_argument("null source");
    sources_.push_back(std::move(source));
}

void Session::start() {
    if (started_) throw std::logic_error("session already started");
    if (sources_.empty()) throw std::logic_error("start signal with no sources");
    started_ = true;
    heads_.resize(sources_.size());
    for (std::size_t i = 0; i < sources_.size(); ++i) refill(i);
}

void Session::refill(std::size_t sensor) {
    auto s = sources_[sensor]->next();
    if (s) {
        if (heads_[sensor] && s->t_ns < heads_[sensor]->t_ns) {
            throw std::logic_error("sensor " + spec(sensor).name + " went back in time");
        }
        queue_.push({s->t_ns, sensor});
    }
    heads_[sensor] = std::move(s);
}

std::optional<SampleEvent> Session::pop_before(std::int64_t limit_ns) {
    if (!started_) throw std::logic_error("session not started");
    if (queue_.empty() || queue_.top().t_ns >= limit_ns) return std::nullopt;
    const auto top = queue_.top();
    queue_.pop();
    SampleEvent ev{top.sensor, std::move(*heads_[top.sensor])};
    // keep the popped timestamp for the monotonicity check
    heads_[top.sensor] = SensorSample{ev.sample.t_ns, {}};
    refill(top.sensor);
    return ev;
}

Session start_sync(std::vector<std::unique_ptr<Source>> sources) {
    Session s(std::move(sources));
    s.start();
    return s;
}

// ---- FIFO ------------------------------------------------------------------

SensorFifo::SensorFifo(std::size_t depth, std::size_t channels)
    : channels_(channels), times_(depth), values_(depth * channels) {
    if (depth == 0) throw std::invalid_argument("FIFO depth must be >= 1");
    if (channels == 0) throw std::invalid_argument("FIFO channels must be >= 1");
}

bool SensorFifo::push(const SensorSample& sample) {
    if (sample.values.size() != channels_) throw std::length_error("FIFO sample width mismatch");
    if (full()) return false;
    const std::size_t s = slot(count_);
    times_[s] = sample.t_ns;
    std::copy(sample.values.begin(), sample.values.end(),
              values_.begin() + static_cast<std::ptrdiff_t>(s * channels_));
    ++count_;
    return true;
}

void SensorFifo::pop() {
    if (empty()) throw std::out_of_range("pop from empty FIFO");
    head_ = (head_ + 1) % times_.size();
    --count_;
}

std::int64_t SensorFifo::time_at(std::size_t i) const {
    if (i >= count_) throw std::out_of_range("FIFO index");
    return times_[slot(i)];
}

std::span<const double> SensorFifo::values_at(std::size_t i) const {
    if (i >= count_) throw std::out_of_range("FIFO index");
    return {values_.data() + slot(i) * channels_, channels_};
}

// ---- window configuration --------------------------------------------------

std::string to_string(Alignment a) { return a == Alignment::kNative ? "native" : "common"; }
std::string to_string(Interp m) { return m == Interp::kNearest ? "nearest" : "linear"; }

Alignment parse_alignment(const std::string& s) {
    if (s == "native") return Alignment::kNative;
    if (s == "common") return Alignment::kCommon;
    throw std::invalid_argument("alignment must be native|common, got '" + s + "'");
}

Interp parse_interp(const std::string& s) {
    if (s == "nearest") return Interp::kNearest;
    if (s == "linear") return Interp::kLinear;
    throw std::invalid_argument("interpolation must be nearest|linear, got '" + s + "'");
}

WindowConfig WindowConfig::from_timesteps(int timesteps, double rate, std::int64_t step_ns) {
    if (timesteps < 1 || !(rate > 0.0)) {
        throw std::invalid_argument("from_timesteps: timesteps >= 1 and rate > 0 required");
    }
    WindowConfig cfg;
    cfg.window_ns = std::llround(static_cast<long double>(timesteps) * 1e9L / rate);
    cfg.step_ns = step_ns > 0 ? step_ns : cfg.window_ns;
    return cfg;
}

int WindowConfig::timesteps(double rate) const {
    return static_cast<int>(std::llround(static_cast<double>(window_ns) * 1e-9 * rate));
}

int WindowConfig::rows(double rate) const {
    return alignment == Alignment::kCommon ? timesteps(target_rate) : timesteps(rate);
}

std::size_t WindowConfig::depth_for(double rate) const {
    if (fifo_depth > 0) return fifo_depth;
    const auto n = static_cast<std::size_t>(std::max(timesteps(rate), 0));
    // one extra sample ahead of the window start and one for timing jitter
    const auto slack = static_cast<std::size_t>(std::ceil(fifo_slack * static_cast<double>(n)));
    return std::max(slack, n + 2);
}

void WindowConfig::validate(const std::vector<SensorSpec>& sensors) const {
    if (window_ns <= 0) throw std::invalid_argument("window duration must be > 0");
    if (step_ns <= 0 || step_ns > window_ns) {
        throw std::invalid_argument("step must be in (0, window]");
    }
    if (!(fifo_slack >= 1.0)) throw std::invalid_argument("FIFO slack must be >= 1");
    if (alignment == Alignment::kCommon) {
        if (!(target_rate > 0.0)) throw std::invalid_argument("common-rate mode needs target_rate > 0");
        if (timesteps(target_rate) < 1) {
            throw std::invalid_argument("window holds no sample at the target rate");
        }
    }
    for (const auto& s : sensors) {
        s.validate();
        if (alignment == Alignment::kNative && timesteps(s.native_rate) < 1) {
            throw std::invalid_argument("window holds no sample of sensor " + s.name);
        }
    }
}

// ---- interpolation ---------------------------------------------------------

namespace {

/// Value of a sorted sample sequence at `t`; `at(i)` returns (time, values).
/// Outside the covered span the edge sample is held.
template <typename At>
void interpolate(std::size_t n, const At& at, std::int64_t t, Interp method, double* out,
                 std::size_t channels) {
    auto copy = [&](std::size_t i) {
        const auto v = at(i).second;
        std::copy(v.begin(), v.end(), out);
    };
    if (t <= at(0).first) return copy(0);
    if (t >= at(n - 1).first) return copy(n - 1);
    std::size_t lo = 0, hi = n - 1;  // at(lo).t < t < at(hi).t
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        const auto tm = at(mid).first;
        if (tm == t) return copy(mid);
        (tm < t ? lo : hi) = mid;
    }
    const auto [t0, v0] = at(lo);
    const auto [t1, v1] = at(hi);
    if (method == Interp::kNearest) return copy(t - t0 <= t1 - t ? lo : hi);
    const double w = static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
    for (std::size_t c = 0; c < channels; ++c) out[c] = v0[c] + (v1[c] - v0[c]) * w;
}

}  // namespace

std::vector<SensorSample> resample(const std::vector<SensorSample>& stream, double target_rate,
                                   Interp method, std::int64_t start_ns, std::size_t count) {
    if (!(target_rate > 0.0)) throw std::invalid_argument("target rate must be > 0");
    if (stream.empty()) throw std::invalid_argument("resample of an empty stream");
    const std::size_t channels = stream.front().values.size();
    for (std::size_t i = 1; i < stream.size(); ++i) {
        if (stream[i].t_ns <= stream[i - 1].t_ns) {
            throw std::invalid_argument("resample: timestamps must increase");
        }
        if (stream[i].values.size() != channels) throw std::invalid_argument("resample: ragged stream");
    }
    auto at = [&](std::size_t i) {
        return std::pair<std::int64_t, std::span<const double>>{stream[i].t_ns, stream[i].values};
    };
    std::vector<SensorSample> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::int64_t t = start_ns + sample_time_ns(k, target_rate);
        if (t < stream.front().t_ns || t > stream.back().t_ns) {
            throw std::domain_error("resample grid point at " + std::to_string(t) +
                                    " ns lies outside the stream");
        }
        SensorSample s{t, std::vector<double>(channels)};
        interpolate(stream.size(), at, t, method, s.values.data(), channels);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<SensorSample> resample(const std::vector<SensorSample>& stream, double target_rate,
                                   Interp method) {
    if (!(target_rate > 0.0)) throw std::invalid_argument("target rate must be > 0");
    if (stream.empty()) throw std::invalid_argument("resample of an empty stream");
    const std::int64_t first = stream.front().t_ns;
    const std::int64_t span = stream.back().t_ns - first;
    auto count = static_cast<std::size_t>(
                     std::floor(static_cast<double>(span) * 1e-9 * target_rate)) + 1;
    while (count > 1 && sample_time_ns(count - 1, target_rate) > span) --count;
    return resample(stream, target_rate, method, first, count);
}

// ---- stream controller -----------------------------------------------------

StreamController::StreamController(Session& session, WindowConfig cfg)
    : session_(session), cfg_(cfg) {
    if (!session_.started()) throw std::logic_error("stream controller needs a started session");
    std::vector<SensorSpec> specs;
    for (std::size_t i = 0; i < session_.size(); ++i) specs.push_back(session_.spec(i));
    cfg_.validate(specs);
    for (const auto& s : specs) {
        fifos_.emplace_back(cfg_.depth_for(s.native_rate), static_cast<std::size_t>(s.channels));
        rows_.push_back(cfg_.rows(s.native_rate));
    }
    stats_.sensors.resize(specs.size());
}

void StreamController::advance_to(std::int64_t t_ns) {
    while (auto ev = session_.pop_before(t_ns)) {
        auto& counters = stats_.sensors[ev->sensor];
        ++counters.produced;
        if (!fifos_[ev->sensor].push(ev->sample)) {
            ++counters.overflowed;
            stats_.events.push_back({StreamEvent::Kind::kOverflow, ev->sample.t_ns,
                                     session_.spec(ev->sensor).name, 0});
        }
    }
    now_ns_ = std::max(now_ns_, t_ns);
    for (std::size_t s = 0; s < fifos_.size(); ++s) stats_.sensors[s].occupancy = fifos_[s].size();
}

Tensor StreamController::native_rows(std::size_t s, std::int64_t start_ns, std::int64_t end_ns,
                                     TimedFrame& out) {
    const auto& fifo = fifos_[s];
    const auto rows = static_cast<std::size_t>(rows_[s]);
    const std::size_t channels = fifo.channels();
    Tensor t(rows, 1, channels);
    // the anchor kept for interpolation sits before the window and is not a row
    std::size_t in_window = fifo.size();
    while (in_window > 0 && fifo.time_at(fifo.size() - in_window) < start_ns) --in_window;
    const std::size_t n = std::min(in_window, rows);
    const std::size_t first = fifo.size() - n;
    for (std::size_t r = 0; r < n; ++r) {
        const auto v = fifo.values_at(first + r);
        for (std::size_t c = 0; c < channels; ++c) t.at(r, 0, c) = v[c];
    }
    if (n < rows) {
        stats_.events.push_back(
            {StreamEvent::Kind::kUnderfill, end_ns, session_.spec(s).name, rows - n});
        std::vector<double> hold(channels, 0.0);
        if (!fifo.empty()) {
            const auto v = fifo.values_at(fifo.size() - 1);
            hold.assign(v.begin(), v.end());
        }
        for (std::size_t r = n; r < rows; ++r) {
            for (std::size_t c = 0; c < channels; ++c) t.at(r, 0, c) = hold[c];
        }
    }
    out.first_sample_ns[s] = n > 0 ? fifo.time_at(first) : end_ns;
    out.last_sample_ns[s] = n > 0 ? fifo.time_at(fifo.size() - 1) : end_ns;
    return t;
}

Tensor StreamController::common_rows(std::size_t s, std::int64_t start_ns, std::int64_t end_ns,
                                     TimedFrame& out) {
    const auto& fifo = fifos_[s];
    const auto rows = static_cast<std::size_t>(rows_[s]);
    const std::size_t channels = fifo.channels();
    Tensor t(rows, 1, channels);
    const auto native = static_cast<std::size_t>(cfg_.timesteps(session_.spec(s).native_rate));
    if (fifo.size() < native) {
        stats_.events.push_back(
            {StreamEvent::Kind::kUnderfill, end_ns, session_.spec(s).name, native - fifo.size()});
    }
    out.first_sample_ns[s] = fifo.empty() ? end_ns : fifo.time_at(0);
    out.last_sample_ns[s] = fifo.empty() ? end_ns : fifo.time_at(fifo.size() - 1);
    if (fifo.empty()) return t;
    auto at = [&](std::size_t i) {
        return std::pair<std::int64_t, std::span<const double>>{fifo.time_at(i), fifo.values_at(i)};
    };
    std::vector<double> row(channels);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::int64_t tg = start_ns + sample_time_ns(r, cfg_.target_rate);
        interpolate(fifo.size(), at, tg, cfg_.method, row.data(), channels);
        for (std::size_t c = 0; c < channels; ++c) t.at(r, 0, c) = row[c];
    }
    return t;
}

TimedFrame StreamController::cut(std::int64_t start_ns, std::int64_t end_ns) {
    TimedFrame f;
    f.index = next_index_;
    f.start_ns = start_ns;
    f.end_ns = end_ns;
    f.first_sample_ns.resize(fifos_.size());
    f.last_sample_ns.resize(fifos_.size());
    for (std::size_t s = 0; s < fifos_.size(); ++s) {
        f.frame.branches.push_back(cfg_.alignment == Alignment::kNative
                                       ? native_rows(s, start_ns, end_ns, f)
                                       : common_rows(s, start_ns, end_ns, f));
    }
    return f;
}

void StreamController::retire(std::int64_t next_start_ns) {
    for (std::size_t s = 0; s < fifos_.size(); ++s) {
        auto& fifo = fifos_[s];
        // one sample before the next window is kept as the interpolation anchor
        const double keep_from = static_cast<double>(next_start_ns) - session_.spec(s).period_ns();
        while (!fifo.empty() && static_cast<double>(fifo.time_at(0)) < keep_from) {
            fifo.pop();
            ++stats_.sensors[s].consumed;
        }
        stats_.sensors[s].occupancy = fifo.size();
    }
}

std::optional<TimedFrame> StreamController::next_frame(std::int64_t until_ns) {
    const std::int64_t start = static_cast<std::int64_t>(next_index_) * cfg_.step_ns;
    const std::int64_t end = start + cfg_.window_ns;
    if (end > until_ns) return std::nullopt;
    advance_to(end);
    TimedFrame f = cut(start, end);
    ++next_index_;
    ++stats_.frames;
    retire(start + cfg_.step_ns);
    return f;
}

StreamStats stream_frames(Session& session, const WindowConfig& cfg, std::int64_t until_ns,
                          const std::function<void(const TimedFrame&)>& sink) {
    StreamController ctl(session, cfg);
    while (auto f = ctl.next_frame(until_ns)) {
        if (sink) sink(*f);
    }
    ctl.advance_to(until_ns);
    return ctl.stats();
}

std::vector<TimedFrame> stream_frames(Session& session, const WindowConfig& cfg,
                                      std::int64_t until_ns, StreamStats* stats) {
    std::vector<TimedFrame> frames;
    auto st = stream_frames(session, cfg, until_ns,
                            [&frames](const TimedFrame& f) { frames.push_back(f); });
    if (stats) *stats = std::move(st);
    return frames;
}

// ---- synthetic recordings --------------------------------------------------

int Recording::label_for(std::int64_t start_ns, std::int64_t end_ns) const {
    auto it = std::upper_bound(segments.begin(), segments.end(), start_ns,
                               [](std::int64_t t, const Segment& s) { return t < s.end_ns; });
    if (it == segments.end() || start_ns < it->start_ns || end_ns > it->end_ns) return -1;
    return it->label;
}

namespace {

struct Tone {
    double amp;
    double freq;
};

struct ChannelPattern {
    double offset;
    std::array<Tone, 2> tones;
};

}  // namespace

Recording gen_dataset(const DatasetConfig& cfg) {
    if (cfg.classes < 2) throw std::invalid_argument("gen_dataset: classes must be >= 2");
    if (cfg.n_per_class < 1) throw std::invalid_argument("gen_dataset: n_per_class must be >= 1");
    if (cfg.sensors.empty()) throw std::invalid_argument("gen_dataset: no sensors");
    if (!(cfg.segment_s > 0.0)) throw std::invalid_argument("gen_dataset: segment_s must be > 0");
    if (!(cfg.noise >= 0.0)) throw std::invalid_argument("gen_dataset: noise must be >= 0");
    if (!cfg.informative.empty() && cfg.informative.size() != cfg.sensors.size()) {
        throw std::invalid_argument("gen_dataset: informative map size mismatch");
    }
    for (const auto& s : cfg.sensors) s.validate();

    Recording rec;
    rec.sensors = cfg.sensors;
    rec.classes = cfg.classes;
    rec.seed = cfg.seed;

    std::vector<int> labels;
    for (int c = 0; c < cfg.classes; ++c) labels.insert(labels.end(), cfg.n_per_class, c);
    auto order_rng = substream(cfg.seed, "datagen/order");
    std::shuffle(labels.begin(), labels.end(), order_rng);
    const std::int64_t seg_ns = std::llround(cfg.segment_s * 1e9);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto start = static_cast<std::int64_t>(i) * seg_ns;
        rec.segments.push_back({labels[i], start, start + seg_ns});
    }
    const std::int64_t duration = rec.duration_ns();
    const double two_pi = 2.0 * std::numbers::pi;

    for (std::size_t si = 0; si < cfg.sensors.size(); ++si) {
        const auto& sensor = cfg.sensors[si];
        const bool informative = cfg.informative.empty() || cfg.informative[si];
        const auto channels = static_cast<std::size_t>(sensor.channels);
        // tones stay below 0.4 x the native rate and below 4 Hz
        const double f_cap = 0.4 * std::min(sensor.native_rate, 10.0);

        auto pattern_rng = substream(cfg.seed, "datagen/pattern/" + sensor.name);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<ChannelPattern> patterns(static_cast<std::size_t>(cfg.classes) * channels);
        for (auto& p : patterns) {
            p.offset = unit(pattern_rng) - 0.5;
            for (auto& tone : p.tones) {
                tone.amp = 0.2 + 0.8 * unit(pattern_rng);
                tone.freq = f_cap * (0.1 + 0.9 * unit(pattern_rng));
            }
        }

        auto noise_rng = substream(cfg.seed, "datagen/noise/" + sensor.name);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double sigma = informative ? cfg.noise : 1.0;
        const double mid = 0.5 * (sensor.min_value + sensor.max_value);
        const double half = 0.5 * (sensor.max_value - sensor.min_value);

        // per-segment, per-channel phases
        std::vector<double> phases(rec.segments.size() * channels * 2);
        for (auto& ph : phases) ph = two_pi * unit(noise_rng);

        std::vector<SensorSample> stream;
        for (std::uint64_t j = 0;; ++j) {
            const std::int64_t t = sample_time_ns(j, sensor.native_rate);
            if (t >= duration) break;
            const auto seg = static_cast<std::size_t>(t / seg_ns);
            const auto label = static_cast<std::size_t>(rec.segments[seg].label);
            const double ts = static_cast<double>(t - rec.segments[seg].start_ns) * 1e-9;
            SensorSample s{t, std::vector<double>(channels)};
            for (std::size_t c = 0; c < channels; ++c) {
                double v = 0.0;
                if (informative) {
                    const auto& p = patterns[label * channels + c];
                    v = p.offset;
                    for (std::size_t k = 0; k < 2; ++k) {
                        v += p.tones[k].amp *
                             std::sin(two_pi * p.tones[k].freq * ts + phases[(seg * channels + c) * 2 + k]);
                    }
                }
                v += sigma * gauss(noise_rng);
                const double phys = std::clamp(mid + 0.25 * half * v, sensor.min_value, sensor.max_value);
                s.values[c] = static_cast<double>(static_cast<float>(phys));
            }
            stream.push_back(std::move(s));
        }
        rec.streams.push_back(std::move(stream));
    }
    return rec;
}

Session replay_session(const Recording& rec) {
    std::vector<std::unique_ptr<Source>> sources;
    for (std::size_t i = 0; i < rec.sensors.size(); ++i) {
        sources.push_back(std::make_unique<ReplaySource>(rec.sensors[i], rec.streams.at(i)));
    }
    return start_sync(std::move(sources));
}

}  // namespace harsim
