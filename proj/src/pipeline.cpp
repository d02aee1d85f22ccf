#include "harsim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "harsim/rng.hpp"

namespace harsim {

namespace fs = std::filesystem;
using io::json;

// ---- configuration --------------------------------------------------------

namespace {

/// Reads known keys of one config section and rejects everything else.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ValidationError("config section '" + name_ + "' must be an object");
    }

    template <typename T>
    void get(const char* key, T& dst) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            dst = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ValidationError("config " + name_ + "." + key + ": " + e.what());
        }
    }

    template <typename T, typename Parse>
    void get_enum(const char* key, T& dst, Parse parse) {
        std::string s;
        get(key, s);
        if (s.empty()) return;
        try {
            dst = parse(s);
        } catch (const std::invalid_argument& e) {
            throw ValidationError("config " + name_ + "." + key + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (!seen_.count(key)) throw ValidationError("unknown config key '" + name_ + "." + key + "'");
        }
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

std::string fusion_name(FusionMode f) { return f == FusionMode::kFeature ? "feature" : "data"; }

FusionMode parse_fusion(const std::string& s) {
    if (s == "feature") return FusionMode::kFeature;
    if (s == "data") return FusionMode::kData;
    throw std::invalid_argument("fusion must be feature|data, got '" + s + "'");
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError("config: " + what);
}

}  // namespace

json PipelineConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["dataset"] = {{"sensors", sensors},     {"channels", channels},   {"uninformative", uninformative},
                    {"classes", classes},     {"n_per_class", n_per_class},
                    {"segment_s", segment_s}, {"noise", noise},         {"test_fraction", test_fraction}};
    j["window"] = {{"window_ms", window_ms},
                   {"step_ms", step_ms},
                   {"alignment", harsim::to_string(alignment)},
                   {"target_rate_hz", target_rate_hz},
                   {"method", harsim::to_string(method)}};
    j["model"] = {{"filters", filters}, {"kernel", kernel}, {"kernel_2d", kernel_2d},
                  {"pool", pool},       {"pool_2d", pool_2d}, {"hidden", hidden},
                  {"fusion", fusion_name(fusion)}};
    j["train"] = {{"epochs", epochs}, {"batch_size", batch_size}, {"learning_rate", learning_rate}};
    j["select"] = {{"keep", keep}};
    j["quant"] = {{"n_bits", n_bits},
                  {"sweep_bits", sweep_bits},
                  {"report_bits", report_bits},
                  {"calib_frames", calib_frames},
                  {"model_file", model_file}};
    j["hardware"] = {{"schedule", harsim::to_string(schedule)},
                     {"clock_hz", clock_hz},
                     {"kappa", cost.kappa},
                     {"dense_lanes", cost.dense_lanes}};
    return j;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig c;
    Section top(j, "config");
    top.get("seed", c.seed);
    if (const json* s = top.child("dataset")) {
        Section d(*s, "dataset");
        d.get("sensors", c.sensors);
        d.get("channels", c.channels);
        d.get("uninformative", c.uninformative);
        d.get("classes", c.classes);
        d.get("n_per_class", c.n_per_class);
        d.get("segment_s", c.segment_s);
        d.get("noise", c.noise);
        d.get("test_fraction", c.test_fraction);
        d.finish();
    }
    if (const json* s = top.child("window")) {
        Section w(*s, "window");
        w.get("window_ms", c.window_ms);
        w.get("step_ms", c.step_ms);
        w.get_enum("alignment", c.alignment, parse_alignment);
        w.get("target_rate_hz", c.target_rate_hz);
        w.get_enum("method", c.method, parse_interp);
        w.finish();
    }
    if (const json* s = top.child("model")) {
        Section m(*s, "model");
        m.get("filters", c.filters);
        m.get("kernel", c.kernel);
        m.get("kernel_2d", c.kernel_2d);
        m.get("pool", c.pool);
        m.get("pool_2d", c.pool_2d);
        m.get("hidden", c.hidden);
        m.get_enum("fusion", c.fusion, parse_fusion);
        m.finish();
    }
    if (const json* s = top.child("train")) {
        Section t(*s, "train");
        t.get("epochs", c.epochs);
        t.get("batch_size", c.batch_size);
        t.get("learning_rate", c.learning_rate);
        t.finish();
    }
    if (const json* s = top.child("select")) {
        Section t(*s, "select");
        t.get("keep", c.keep);
        t.finish();
    }
    if (const json* s = top.child("quant")) {
        Section q(*s, "quant");
        q.get("n_bits", c.n_bits);
        q.get("sweep_bits", c.sweep_bits);
        q.get("report_bits", c.report_bits);
        q.get("calib_frames", c.calib_frames);
        q.get("model_file", c.model_file);
        q.finish();
    }
    if (const json* s = top.child("hardware")) {
        Section h(*s, "hardware");
        h.get_enum("schedule", c.schedule, parse_schedule);
        h.get("clock_hz", c.clock_hz);
        h.get("kappa", c.cost.kappa);
        h.get("dense_lanes", c.cost.dense_lanes);
        h.finish();
    }
    top.finish();
    return c;
}

void PipelineConfig::validate() const {
    const auto catalog = modality_catalog();
    auto known = [&catalog](const std::string& n) {
        return std::any_of(catalog.begin(), catalog.end(), [&n](const SensorSpec& s) { return s.name == n; });
    };
    std::set<std::string> uniq;
    for (const auto& s : sensors) {
        require(known(s), "unknown sensor '" + s + "'");
        require(uniq.insert(s).second, "sensor '" + s + "' listed twice");
    }
    for (const auto& [name, ch] : channels) {
        require(known(name), "channel override for unknown sensor '" + name + "'");
        require(ch >= 1, "channel override for '" + name + "' must be >= 1");
    }
    for (const auto& s : uninformative) require(known(s), "unknown uninformative sensor '" + s + "'");
    require(classes >= 2, "classes must be >= 2");
    require(n_per_class >= 1, "n_per_class must be >= 1");
    require(segment_s > 0.0, "segment_s must be > 0");
    require(noise >= 0.0, "noise must be >= 0");
    require(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction must be in (0, 1)");
    require(window_ms > 0.0 && step_ms > 0.0 && step_ms <= window_ms, "need 0 < step_ms <= window_ms");
    require(alignment != Alignment::kCommon || target_rate_hz > 0.0, "target_rate_hz must be > 0");
    require(filters >= 1 && kernel >= 1 && kernel_2d >= 1 && hidden >= 1, "layer sizes must be >= 1");
    require(epochs >= 0, "epochs must be >= 0");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(learning_rate > 0.0, "learning_rate must be > 0");
    require(keep >= 1, "keep must be >= 1");
    auto bits_ok = [](int n) { return n >= 2 && n <= 31; };
    require(bits_ok(n_bits), "n_bits must be in [2, 31]");
    require(!sweep_bits.empty() && std::all_of(sweep_bits.begin(), sweep_bits.end(), bits_ok),
            "sweep_bits must be a nonempty list in [2, 31]");
    require(!report_bits.empty() && std::all_of(report_bits.begin(), report_bits.end(), bits_ok),
            "report_bits must be a nonempty list in [2, 31]");
    require(calib_frames >= 0, "calib_frames must be >= 0");
    require(clock_hz > 0.0, "clock_hz must be > 0");
    require(cost.dense_lanes >= 1, "dense_lanes must be >= 1");
}

std::vector<SensorSpec> PipelineConfig::sensor_specs() const {
    const auto catalog = modality_catalog();
    std::vector<SensorSpec> out;
    if (sensors.empty()) {
        out = catalog;
    } else {
        for (const auto& n : sensors) out.push_back(find_sensor(catalog, n));
    }
    for (auto& s : out) {
        if (auto it = channels.find(s.name); it != channels.end()) s.channels = it->second;
    }
    return out;
}

WindowConfig PipelineConfig::window() const {
    WindowConfig w;
    w.window_ns = std::llround(window_ms * 1e6);
    w.step_ns = std::llround(step_ms * 1e6);
    w.alignment = alignment;
    w.target_rate = target_rate_hz;
    w.method = method;
    return w;
}

TrainConfig PipelineConfig::train_config() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.learning_rate = learning_rate;
    t.seed = seed;
    return t;
}

DatasetConfig PipelineConfig::dataset_config() const {
    DatasetConfig d;
    d.sensors = sensor_specs();
    for (const auto& s : d.sensors) {
        d.informative.push_back(std::find(uninformative.begin(), uninformative.end(), s.name) ==
                                uninformative.end());
    }
    d.classes = classes;
    d.n_per_class = n_per_class;
    d.segment_s = segment_s;
    d.noise = noise;
    d.seed = seed;
    return d;
}

PipelineConfig load_config(const fs::path& path) {
    auto cfg = PipelineConfig::from_json(io::read_json(path));
    cfg.validate();
    return cfg;
}

// ---- data preparation -------------------------------------------------------

namespace {

std::optional<std::size_t> segment_of(const Recording& rec, std::int64_t start_ns, std::int64_t end_ns) {
    auto it = std::upper_bound(rec.segments.begin(), rec.segments.end(), start_ns,
                               [](std::int64_t t, const Segment& s) { return t < s.end_ns; });
    if (it == rec.segments.end() || start_ns < it->start_ns || end_ns > it->end_ns) return std::nullopt;
    return static_cast<std::size_t>(it - rec.segments.begin());
}

std::vector<std::string> sensor_names(const std::vector<SensorSpec>& specs) {
    std::vector<std::string> names;
    for (const auto& s : specs) names.push_back(s.name);
    return names;
}

}  // namespace

std::vector<bool> test_segments(const Recording& rec, double test_fraction, std::uint64_t seed) {
    std::vector<bool> test(rec.segments.size(), false);
    auto rng = substream(seed, "split");
    for (int c = 0; c < rec.classes; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < rec.segments.size(); ++i) {
            if (rec.segments[i].label == c) idx.push_back(i);
        }
        if (idx.size() < 2) continue;
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto k = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size()))), 1,
            idx.size() - 1);
        for (std::size_t i = 0; i < k; ++i) test[idx[i]] = true;
    }
    return test;
}

std::vector<SensorRange> sensor_ranges(const Recording& rec, const std::vector<bool>& selected) {
    std::vector<SensorRange> ranges;
    for (std::size_t s = 0; s < rec.sensors.size(); ++s) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& sample : rec.streams[s]) {
            auto it = std::upper_bound(rec.segments.begin(), rec.segments.end(), sample.t_ns,
                                       [](std::int64_t t, const Segment& seg) { return t < seg.end_ns; });
            if (it == rec.segments.end()) continue;
            if (!selected[static_cast<std::size_t>(it - rec.segments.begin())]) continue;
            for (double v : sample.values) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        if (!(hi > lo)) {
            throw ValidationError("sensor " + rec.sensors[s].name + " has no usable value range");
        }
        ranges.push_back({rec.sensors[s].name, lo, hi});
    }
    return ranges;
}

PreparedData prepare_data(const PipelineConfig& cfg, const Recording& rec) {
    PreparedData data;
    data.sensors = sensor_names(rec.sensors);
    const auto test = test_segments(rec, cfg.test_fraction, cfg.seed);
    std::vector<bool> train(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) train[i] = !test[i];
    data.ranges = sensor_ranges(rec, train);

    Session session = replay_session(rec);
    stream_frames(session, cfg.window(), rec.duration_ns(), [&](const TimedFrame& f) {
        const auto seg = segment_of(rec, f.start_ns, f.end_ns);
        if (!seg) return;
        Sample s{f.frame, rec.segments[*seg].label};
        (test[*seg] ? data.test : data.train).push_back(std::move(s));
    });
    if (data.train.empty() || data.test.empty()) {
        throw ValidationError("recording yields no labeled frames for one of the splits");
    }
    return data;
}

Frame model_input(const ModelSpec& spec, const std::vector<SensorRange>& ranges,
                  const std::vector<std::string>& sensors, const Frame& raw) {
    std::vector<Tensor> picked;
    picked.reserve(ranges.size());
    for (const auto& r : ranges) {
        const auto it = std::find(sensors.begin(), sensors.end(), r.sensor);
        if (it == sensors.end()) throw ValidationError("frame has no sensor '" + r.sensor + "'");
        picked.push_back(raw.branches.at(static_cast<std::size_t>(it - sensors.begin())));
    }
    Frame f = normalize_inputs(picked, ranges);
    return spec.fusion == FusionMode::kData ? fuse_channels(f) : f;
}

Dataset model_dataset(const ModelSpec& spec, const std::vector<SensorRange>& ranges,
                      const std::vector<std::string>& sensors, const Dataset& raw) {
    Dataset out;
    out.reserve(raw.size());
    for (const auto& s : raw) out.push_back({model_input(spec, ranges, sensors, s.frame), s.label});
    return out;
}

ModelSpec build_spec(const PipelineConfig& cfg, const std::vector<SensorSpec>& sensors) {
    const WindowConfig w = cfg.window();
    ModelSpec spec;
    spec.hidden = cfg.hidden;
    spec.classes = cfg.classes;
    spec.fusion = cfg.fusion;
    auto layers = [&cfg](bool two_d) {
        std::array<ConvLayerSpec, 3> l;
        for (auto& x : l) x = {cfg.filters, two_d ? cfg.kernel_2d : cfg.kernel, two_d ? cfg.pool_2d : cfg.pool};
        return l;
    };
    if (cfg.fusion == FusionMode::kData) {
        BranchSpec b;
        b.timesteps = w.rows(sensors.front().native_rate);
        b.channels = 0;
        for (const auto& s : sensors) {
            if (w.rows(s.native_rate) != b.timesteps) {
                throw ValidationError("data fusion needs equal rows for every sensor (use common-rate alignment)");
            }
            b.sensor += (b.sensor.empty() ? "" : "+") + s.name;
            b.channels += s.channels;
        }
        b.layers = layers(false);
        spec.branches.push_back(b);
    } else {
        for (const auto& s : sensors) {
            BranchSpec b;
            b.sensor = s.name;
            b.dim = s.conv_dim;
            b.timesteps = w.rows(s.native_rate);
            b.channels = s.channels;
            b.layers = layers(s.conv_dim == ConvDim::k2D);
            spec.branches.push_back(b);
        }
    }
    try {
        spec.validate();
        for (const auto& b : spec.branches) branch_geometry(b);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("model does not fit the window: ") + e.what());
    }
    return spec;
}

// ---- commands ------------------------------------------------------------------

namespace {

fs::path data_dir(const PipelineConfig& cfg) { return cfg.out / "data"; }

Recording load_recording(const PipelineConfig& cfg) {
    Recording rec = io::read_recording(data_dir(cfg));
    if (rec.sensors != cfg.sensor_specs()) {
        throw ValidationError("recording in " + data_dir(cfg).string() +
                              " was generated for a different sensor set");
    }
    return rec;
}

std::vector<Frame> calibration_frames(const PipelineConfig& cfg, const Dataset& train) {
    std::size_t n = train.size();
    if (cfg.calib_frames > 0) n = std::min(n, static_cast<std::size_t>(cfg.calib_frames));
    std::vector<Frame> frames;
    frames.reserve(n);
    for (std::size_t i = 0; i < n; ++i) frames.push_back(train[i].frame);
    return frames;
}

struct ModelData {
    io::ModelFile model;
    Dataset train;
    Dataset test;
};

ModelData load_model_data(const PipelineConfig& cfg) {
    ModelData md;
    md.model = io::load_model(cfg.out / cfg.model_file);
    const Recording rec = load_recording(cfg);
    const PreparedData data = prepare_data(cfg, rec);
    md.train = model_dataset(md.model.spec, md.model.ranges, data.sensors, data.train);
    md.test = model_dataset(md.model.spec, md.model.ranges, data.sensors, data.test);
    return md;
}

std::string fmt(double v) { return io::format_double(v); }

std::vector<SensorRange> ranges_for(const ModelSpec& spec, const std::vector<SensorRange>& all) {
    if (spec.fusion == FusionMode::kData) return all;
    std::vector<SensorRange> out;
    for (const auto& b : spec.branches) {
        const auto it = std::find_if(all.begin(), all.end(),
                                     [&b](const SensorRange& r) { return r.sensor == b.sensor; });
        if (it == all.end()) throw ValidationError("no value range for sensor '" + b.sensor + "'");
        out.push_back(*it);
    }
    return out;
}

}  // namespace

fs::path cmd_gen_data(const PipelineConfig& cfg) {
    cfg.validate();
    const Recording rec = gen_dataset(cfg.dataset_config());
    io::write_recording(data_dir(cfg), rec, cfg.to_json());
    return data_dir(cfg);
}

TrainSummary cmd_train(const PipelineConfig& cfg) {
    cfg.validate();
    const Recording rec = load_recording(cfg);
    const PreparedData data = prepare_data(cfg, rec);
    const ModelSpec spec = build_spec(cfg, rec.sensors);
    const auto ranges = ranges_for(spec, data.ranges);
    const Dataset train_set = model_dataset(spec, ranges, data.sensors, data.train);
    const Dataset test_set = model_dataset(spec, ranges, data.sensors, data.test);
    TrainResult res = train(spec, train_set, test_set, cfg.train_config());
    io::save_model(cfg.out / "model.json", {spec, res.params, ranges, res.history, cfg.to_json()});
    return {accuracy(spec, res.params, train_set), accuracy(spec, res.params, test_set), count_params(spec)};
}

SelectSummary cmd_select(const PipelineConfig& cfg) {
    cfg.validate();
    if (cfg.fusion != FusionMode::kFeature) throw ValidationError("modality selection needs feature fusion");
    const Recording rec = load_recording(cfg);
    if (cfg.keep > static_cast<int>(rec.sensors.size())) {
        throw ValidationError("keep exceeds the number of sensors");
    }
    const PreparedData data = prepare_data(cfg, rec);
    ModelSpec spec = build_spec(cfg, rec.sensors);
    spec.alpha_enabled = true;
    const auto ranges = ranges_for(spec, data.ranges);
    const Dataset train_set = model_dataset(spec, ranges, data.sensors, data.train);
    const Dataset test_set = model_dataset(spec, ranges, data.sensors, data.test);

    const ImportanceRun run = train_importance(spec, train_set, test_set, cfg.train_config());
    const auto keep = select_modalities(run.report, cfg.keep);
    const ModelSpec reduced = restrict_spec(spec, keep);
    const Dataset reduced_train = restrict_dataset(train_set, keep);
    const Dataset reduced_test = restrict_dataset(test_set, keep);
    const TrainResult retrained = train(reduced, reduced_train, reduced_test, cfg.train_config());

    SelectSummary sum;
    sum.report = run.report;
    for (auto i : keep) sum.kept.push_back(spec.branches[i].sensor);
    sum.full_accuracy = accuracy(spec, run.training.params, test_set);
    sum.selected_accuracy = accuracy(reduced, retrained.params, reduced_test);

    std::vector<SensorRange> reduced_ranges;
    for (auto i : keep) reduced_ranges.push_back(ranges[i]);
    io::save_model(cfg.out / "model_selected.json",
                   {reduced, retrained.params, reduced_ranges, retrained.history, cfg.to_json()});

    json j = io::envelope(io::kImportanceSchema);
    j["config"] = cfg.to_json();
    j["importance"] = io::to_json(run.report);
    j["kept"] = sum.kept;
    j["full_test_accuracy"] = sum.full_accuracy;
    j["selected_test_accuracy"] = sum.selected_accuracy;
    io::write_text_atomic(cfg.out / "importance.json", j.dump(2) + "\n");
    return sum;
}

QuantizedModel cmd_quantize(const PipelineConfig& cfg) {
    cfg.validate();
    const ModelData md = load_model_data(cfg);
    const auto calib = calibration_frames(cfg, md.train);
    QuantizedModel q = quantize_model(md.model.spec, md.model.params, calib, cfg.n_bits);
    io::save_qmodel(cfg.out / "qmodel.json", {q, md.model.ranges, cfg.to_json()});
    return q;
}

std::vector<SweepPoint> cmd_sweep(const PipelineConfig& cfg) {
    cfg.validate();
    const ModelData md = load_model_data(cfg);
    const auto calib = calibration_frames(cfg, md.train);
    const auto curve = sweep_bits(md.model.spec, md.model.params, calib, md.test, cfg.sweep_bits);
    std::string csv = io::config_comment(cfg.to_json());
    csv += "n_bits,stored_width,float_accuracy,quantized_accuracy,ratio\n";
    for (const auto& p : curve) {
        csv += std::to_string(p.n_bits) + "," + std::to_string(p.n_bits + 1) + "," +
               fmt(p.float_accuracy) + "," + fmt(p.quantized_accuracy) + "," + fmt(p.ratio) + "\n";
    }
    io::write_text_atomic(cfg.out / "sweep.csv", csv);
    return curve;
}

InferSummary cmd_infer(const PipelineConfig& cfg) {
    cfg.validate();
    const io::QModelFile qf = io::load_qmodel(cfg.out / "qmodel.json");
    const Recording rec = load_recording(cfg);
    const PreparedData data = prepare_data(cfg, rec);
    const Dataset test = model_dataset(qf.model.spec, qf.ranges, data.sensors, data.test);
    std::string csv = io::config_comment(cfg.to_json());
    csv += "frame,label,predicted\n";
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto r = qinfer(qf.model, quantize_frame(test[i].frame, qf.model.n_bits), cfg.schedule,
                              cfg.cost, cfg.clock_hz);
        if (r.cls == static_cast<std::size_t>(test[i].label)) ++hits;
        csv += std::to_string(i) + "," + std::to_string(test[i].label) + "," + std::to_string(r.cls) + "\n";
    }
    io::write_text_atomic(cfg.out / "predictions.csv", csv);
    return {test.size(), static_cast<double>(hits) / static_cast<double>(test.size())};
}

SimulateSummary cmd_simulate(const PipelineConfig& cfg) {
    cfg.validate();
    const io::QModelFile qf = io::load_qmodel(cfg.out / "qmodel.json");
    const Recording rec = load_recording(cfg);
    const auto names = sensor_names(rec.sensors);
    const CycleReport cycles = model_cycles(qf.model.spec, cfg.schedule, cfg.cost, cfg.clock_hz);
    const auto latency_ns = std::llround(cycles.latency_s * 1e9);

    std::string csv = io::config_comment(cfg.to_json());
    csv += "frame,window_start_ns,window_end_ns,label_ns,class,truth\n";
    SimulateSummary sum;
    sum.cycles = cycles;
    Session session = replay_session(rec);
    sum.stream = stream_frames(session, cfg.window(), rec.duration_ns(), [&](const TimedFrame& f) {
        const Frame input = model_input(qf.model.spec, qf.ranges, names, f.frame);
        const auto r = qinfer(qf.model, quantize_frame(input, qf.model.n_bits), cfg.schedule, cfg.cost,
                              cfg.clock_hz);
        csv += std::to_string(f.index) + "," + std::to_string(f.start_ns) + "," + std::to_string(f.end_ns) +
               "," + std::to_string(f.end_ns + latency_ns) + "," + std::to_string(r.cls) + "," +
               std::to_string(rec.label_for(f.start_ns, f.end_ns)) + "\n";
        ++sum.labels;
    });

    json sensors = json::array();
    for (std::size_t s = 0; s < rec.sensors.size(); ++s) {
        const auto& c = sum.stream.sensors[s];
        if (c.produced != c.consumed + c.occupancy + c.overflowed) {
            throw std::logic_error("sample conservation violated for sensor " + rec.sensors[s].name);
        }
        sensors.push_back({{"sensor", rec.sensors[s].name},
                           {"produced", c.produced},
                           {"consumed", c.consumed},
                           {"occupancy", c.occupancy},
                           {"overflowed", c.overflowed}});
    }
    std::size_t overflows = 0, underfills = 0;
    for (const auto& e : sum.stream.events) {
        (e.kind == StreamEvent::Kind::kOverflow ? overflows : underfills) += 1;
    }
    json j = io::envelope(io::kCyclesSchema);
    j["config"] = cfg.to_json();
    j["cycles"] = io::to_json(cycles);
    j["stream"] = {{"frames", sum.stream.frames},
                   {"sensors", sensors},
                   {"overflow_events", overflows},
                   {"underfill_events", underfills}};
    io::write_text_atomic(cfg.out / "labels.csv", csv);
    io::write_text_atomic(cfg.out / "cycles.json", j.dump(2) + "\n");
    return sum;
}

std::vector<json> cmd_report(const PipelineConfig& cfg) {
    cfg.validate();
    const ModelData md = load_model_data(cfg);
    const auto& spec = md.model.spec;
    const auto calib = calibration_frames(cfg, md.train);
    const RescaleSet rescale = rescale_set(calibrate(spec, md.model.params, calib));

    std::string csv = io::config_comment(cfg.to_json());
    csv += "n_bits,stored_width,schedule,total_cycles,latency_ms,throughput_hz,memory_bits,"
           "multiplier_units,accuracy_ratio\n";
    std::vector<json> rows;
    for (int n : cfg.report_bits) {
        const QuantizedModel q = quantize_weights(spec, md.model.params, rescale, n);
        const double ratio = quantized_accuracy_ratio(spec, md.model.params, q, md.test);
        for (Schedule s : {Schedule::kSerial, Schedule::kParallel}) {
            const CycleReport cyc = model_cycles(spec, s, cfg.cost, cfg.clock_hz);
            const ResourceReport res = estimate_resources(q, s, q.stored_width(), cfg.cost);
            csv += std::to_string(n) + "," + std::to_string(q.stored_width()) + "," + to_string(s) + "," +
                   std::to_string(cyc.total) + "," + fmt(cyc.latency_s * 1e3) + "," + fmt(cyc.throughput) +
                   "," + std::to_string(res.memory_bits) + "," + std::to_string(res.multiplier_units) + "," +
                   fmt(ratio) + "\n";
            rows.push_back({{"n_bits", n},
                            {"cycles", io::to_json(cyc)},
                            {"resources", io::to_json(res)},
                            {"accuracy_ratio", ratio}});
        }
    }
    json j = io::envelope(io::kReportSchema);
    j["config"] = cfg.to_json();
    j["rows"] = rows;
    io::write_text_atomic(cfg.out / "report.csv", csv);
    io::write_text_atomic(cfg.out / "report.json", j.dump(2) + "\n");
    return rows;
}

void run_pipeline(const PipelineConfig& cfg) {
    cmd_gen_data(cfg);
    cmd_train(cfg);
    cmd_select(cfg);
    cmd_quantize(cfg);
    cmd_sweep(cfg);
    cmd_infer(cfg);
    cmd_simulate(cfg);
    cmd_report(cfg);
}

}  // namespace harsim
