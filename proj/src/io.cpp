#include "harsim/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

namespace harsim::io {

json envelope(std::string_view schema, int version) {
    return json{{"schema", std::string(schema)}, {"version", version}};
}

void check_schema(const json& j, std::string_view schema, int version) {
    if (!j.is_object() || !j.contains("schema") || !j.contains("version")) {
        throw ValidationError("artifact has no schema header; expected " + std::string(schema) +
                              " version " + std::to_string(version));
    }
    const auto found = j.at("schema").get<std::string>();
    if (found != schema) {
        throw ValidationError("schema mismatch: expected " + std::string(schema) + ", found " + found);
    }
    const int found_version = j.at("version").get<int>();
    if (found_version != version) {
        throw ValidationError(std::string(schema) + " version mismatch: expected " +
                              std::to_string(version) + ", found " + std::to_string(found_version));
    }
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    if (res.ec != std::errc()) throw std::runtime_error("format_double failed");
    return {buf, res.ptr};
}

double parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ValidationError("not a number: '" + std::string(s) + "'");
    }
    return v;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " +
                                 ec.message());
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string config_comment(const json& config) { return "# config=" + config.dump() + "\n"; }

// ---- model description ----------------------------------------------------

namespace {

std::string dim_name(ConvDim d) { return d == ConvDim::k1D ? "1d" : "2d"; }

ConvDim parse_dim(const std::string& s) {
    if (s == "1d") return ConvDim::k1D;
    if (s == "2d") return ConvDim::k2D;
    throw ValidationError("conv dim must be 1d|2d, got '" + s + "'");
}

std::string fusion_name(FusionMode f) { return f == FusionMode::kFeature ? "feature" : "data"; }

FusionMode parse_fusion(const std::string& s) {
    if (s == "feature") return FusionMode::kFeature;
    if (s == "data") return FusionMode::kData;
    throw ValidationError("fusion must be feature|data, got '" + s + "'");
}

json requant_json(const Requant& r) { return {{"mult", r.mult}, {"shift", r.shift}}; }

Requant requant_from(const json& j) {
    return {j.at("mult").get<std::int64_t>(), j.at("shift").get<int>()};
}

// json type errors are validation failures of the artifact
template <typename F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ValidationError(std::string(what) + ": " + e.what());
    }
}

}  // namespace

json to_json(const ModelSpec& spec) {
    json branches = json::array();
    for (const auto& b : spec.branches) {
        json layers = json::array();
        for (const auto& l : b.layers) {
            layers.push_back({{"filters", l.filters}, {"kernel", l.kernel}, {"pool", l.pool}});
        }
        branches.push_back({{"sensor", b.sensor},
                            {"dim", dim_name(b.dim)},
                            {"timesteps", b.timesteps},
                            {"channels", b.channels},
                            {"layers", layers}});
    }
    return {{"branches", branches},
            {"hidden", spec.hidden},
            {"classes", spec.classes},
            {"fusion", fusion_name(spec.fusion)},
            {"alpha", spec.alpha_enabled}};
}

ModelSpec spec_from_json(const json& j) {
    return guarded("model spec", [&] {
        ModelSpec spec;
        for (const auto& jb : j.at("branches")) {
            BranchSpec b;
            b.sensor = jb.at("sensor").get<std::string>();
            b.dim = parse_dim(jb.at("dim").get<std::string>());
            b.timesteps = jb.at("timesteps").get<int>();
            b.channels = jb.at("channels").get<int>();
            const auto& jl = jb.at("layers");
            if (jl.size() != 3) throw ValidationError("a branch has exactly 3 conv layers");
            for (std::size_t i = 0; i < 3; ++i) {
                b.layers[i] = {jl[i].at("filters").get<int>(), jl[i].at("kernel").get<int>(),
                               jl[i].at("pool").get<bool>()};
            }
            spec.branches.push_back(b);
        }
        spec.hidden = j.at("hidden").get<int>();
        spec.classes = j.at("classes").get<int>();
        spec.fusion = parse_fusion(j.at("fusion").get<std::string>());
        spec.alpha_enabled = j.at("alpha").get<bool>();
        try {
            spec.validate();
        } catch (const std::invalid_argument& e) {
            throw ValidationError(std::string("model spec: ") + e.what());
        }
        return spec;
    });
}

json to_json(const ModelParams& p) {
    json conv = json::array();
    for (const auto& branch : p.conv) conv.push_back({branch[0], branch[1], branch[2]});
    return {{"conv", conv}, {"dense", {p.dense[0], p.dense[1]}}, {"alpha", p.alpha}};
}

ModelParams params_from_json(const json& j) {
    return guarded("model params", [&] {
        ModelParams p;
        for (const auto& jb : j.at("conv")) {
            if (jb.size() != 3) throw ValidationError("a branch has exactly 3 conv tensors");
            std::array<std::vector<double>, 3> layers;
            for (std::size_t i = 0; i < 3; ++i) layers[i] = jb[i].get<std::vector<double>>();
            p.conv.push_back(std::move(layers));
        }
        const auto& jd = j.at("dense");
        if (jd.size() != 2) throw ValidationError("expected 2 dense tensors");
        p.dense[0] = jd[0].get<std::vector<double>>();
        p.dense[1] = jd[1].get<std::vector<double>>();
        p.alpha = j.at("alpha").get<std::vector<double>>();
        return p;
    });
}

json to_json(const SensorSpec& s) {
    return {{"name", s.name},
            {"channels", s.channels},
            {"rate_hz", s.native_rate},
            {"dim", dim_name(s.conv_dim)},
            {"min", s.min_value},
            {"max", s.max_value}};
}

SensorSpec sensor_from_json(const json& j) {
    return guarded("sensor spec", [&] {
        SensorSpec s;
        s.name = j.at("name").get<std::string>();
        s.channels = j.at("channels").get<int>();
        s.native_rate = j.at("rate_hz").get<double>();
        s.conv_dim = parse_dim(j.value("dim", std::string("1d")));
        s.min_value = j.value("min", -1.0);
        s.max_value = j.value("max", 1.0);
        try {
            s.validate();
        } catch (const std::invalid_argument& e) {
            throw ValidationError(e.what());
        }
        return s;
    });
}

json to_json(const std::vector<SensorRange>& ranges) {
    json a = json::array();
    for (const auto& r : ranges) a.push_back({{"sensor", r.sensor}, {"min", r.min}, {"max", r.max}});
    return a;
}

std::vector<SensorRange> ranges_from_json(const json& j) {
    return guarded("sensor ranges", [&] {
        std::vector<SensorRange> out;
        for (const auto& r : j) {
            out.push_back({r.at("sensor").get<std::string>(), r.at("min").get<double>(),
                           r.at("max").get<double>()});
        }
        return out;
    });
}

json to_json(const History& history) {
    json a = json::array();
    for (const auto& e : history) {
        a.push_back({{"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"train_acc", e.train_acc},
                     {"val_loss", e.val_loss},
                     {"val_acc", e.val_acc}});
    }
    return a;
}

json to_json(const RescaleSet& r) {
    json conv = json::array();
    for (double v : r.conv) conv.push_back(format_double(v));
    json dense = json::array();
    for (double v : r.dense) dense.push_back(format_double(v));
    return {{"conv", conv}, {"dense", dense}};
}

RescaleSet rescale_from_json(const json& j) {
    return guarded("rescale set", [&] {
        RescaleSet r;
        const auto& conv = j.at("conv");
        const auto& dense = j.at("dense");
        if (conv.size() != 3 || dense.size() != 2) throw ValidationError("rescale set has wrong size");
        for (std::size_t i = 0; i < 3; ++i) r.conv[i] = parse_double(conv[i].get<std::string>());
        for (std::size_t i = 0; i < 2; ++i) r.dense[i] = parse_double(dense[i].get<std::string>());
        return r;
    });
}

json to_json(const QuantizedModel& q) {
    json branches = json::array();
    for (const auto& b : q.branches) {
        json layers = json::array();
        for (const auto& l : b) layers.push_back({{"weights", l.weights}, {"rq", requant_json(l.rq)}});
        branches.push_back(layers);
    }
    json dense = json::array();
    for (const auto& d : q.dense) {
        dense.push_back({{"in", d.in},
                         {"out", d.out},
                         {"weights", d.weights},
                         {"rq", requant_json(d.rq)},
                         {"relu", d.relu}});
    }
    return {{"spec", to_json(q.spec)},
            {"n_bits", q.n_bits},
            {"stored_width", q.stored_width()},
            {"acc_bits", q.acc_bits},
            {"rescale", to_json(q.rescale)},
            {"branches", branches},
            {"mix", q.mix},
            {"mix_rq", requant_json(q.mix_rq)},
            {"dense", dense}};
}

QuantizedModel qmodel_from_json(const json& j) {
    return guarded("quantized model", [&] {
        QuantizedModel q;
        q.spec = spec_from_json(j.at("spec"));
        q.n_bits = j.at("n_bits").get<int>();
        q.acc_bits = j.at("acc_bits").get<int>();
        q.rescale = rescale_from_json(j.at("rescale"));
        const auto& jb = j.at("branches");
        if (jb.size() != q.spec.branches.size()) throw ValidationError("branch count mismatch");
        for (std::size_t b = 0; b < jb.size(); ++b) {
            const auto geo = branch_geometry(q.spec.branches[b]);
            std::array<QConvLayer, 3> layers;
            for (std::size_t l = 0; l < 3; ++l) {
                layers[l].geo = geo[l];
                layers[l].weights = jb[b].at(l).at("weights").get<std::vector<std::int64_t>>();
                layers[l].rq = requant_from(jb[b][l].at("rq"));
                if (layers[l].weights.size() != geo[l].weight_count()) {
                    throw ValidationError("conv weight count mismatch");
                }
            }
            q.branches.push_back(std::move(layers));
        }
        q.mix = j.at("mix").get<std::vector<std::int64_t>>();
        q.mix_rq = requant_from(j.at("mix_rq"));
        const auto& jd = j.at("dense");
        if (jd.size() != 2) throw ValidationError("expected 2 dense layers");
        for (std::size_t d = 0; d < 2; ++d) {
            auto& layer = q.dense[d];
            layer.in = jd[d].at("in").get<std::size_t>();
            layer.out = jd[d].at("out").get<std::size_t>();
            layer.weights = jd[d].at("weights").get<std::vector<std::int64_t>>();
            layer.rq = requant_from(jd[d].at("rq"));
            layer.relu = jd[d].at("relu").get<bool>();
            if (layer.weights.size() != layer.in * layer.out) {
                throw ValidationError("dense weight count mismatch");
            }
        }
        return q;
    });
}

json to_json(const CycleReport& r) {
    return {{"schedule", to_string(r.schedule)},
            {"branch_layers", r.branch_layers},
            {"branch_totals", r.branch_totals},
            {"dense_layers", r.dense_layers},
            {"dense_total", r.dense_total},
            {"total_cycles", r.total},
            {"clock_hz", r.clock_hz},
            {"latency_s", r.latency_s},
            {"throughput_hz", r.throughput}};
}

json to_json(const ResourceReport& r) {
    return {{"schedule", to_string(r.schedule)},
            {"stored_width", r.stored_width},
            {"weight_words", r.weight_words},
            {"feature_words", r.feature_words},
            {"memory_bits", r.memory_bits},
            {"mac_lanes", r.mac_lanes},
            {"multipliers_per_lane", r.multipliers_per_lane},
            {"multiplier_units", r.multiplier_units}};
}

json to_json(const ImportanceReport& r) {
    json rows = json::array();
    for (std::size_t i = 0; i < r.sensors.size(); ++i) {
        rows.push_back({{"sensor", r.sensors[i]}, {"alpha", r.alpha[i]}, {"weight", r.weights[i]}});
    }
    json ranking = json::array();
    for (auto i : r.ranking) ranking.push_back(r.sensors[i]);
    return {{"branches", rows}, {"ranking", ranking}};
}

// ---- model files ------------------------------------------------------------

void save_model(const fs::path& path, const ModelFile& m) {
    json j = envelope(kModelSchema);
    j["config"] = m.config;
    j["spec"] = to_json(m.spec);
    j["ranges"] = to_json(m.ranges);
    j["history"] = to_json(m.history);
    j["params"] = to_json(m.params);
    write_text_atomic(path, j.dump() + "\n");
}

ModelFile load_model(const fs::path& path) {
    const json j = read_json(path);
    check_schema(j, kModelSchema);
    ModelFile m;
    m.spec = spec_from_json(j.at("spec"));
    m.params = params_from_json(j.at("params"));
    m.ranges = ranges_from_json(j.at("ranges"));
    m.config = j.value("config", json::object());
    for (const auto& e : j.at("history")) {
        m.history.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(),
                             e.at("train_acc").get<double>(), e.at("val_loss").get<double>(),
                             e.at("val_acc").get<double>()});
    }
    try {
        check_params(m.spec, m.params);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return m;
}

void save_qmodel(const fs::path& path, const QModelFile& m) {
    json j = envelope(kQModelSchema);
    j["config"] = m.config;
    j["ranges"] = to_json(m.ranges);
    j["model"] = to_json(m.model);
    write_text_atomic(path, j.dump() + "\n");
}

QModelFile load_qmodel(const fs::path& path) {
    const json j = read_json(path);
    check_schema(j, kQModelSchema);
    QModelFile m;
    m.model = qmodel_from_json(j.at("model"));
    m.ranges = ranges_from_json(j.at("ranges"));
    m.config = j.value("config", json::object());
    return m;
}

// ---- recordings ---------------------------------------------------------------

namespace {

std::string stream_csv(const SensorSpec& s, const std::vector<SensorSample>& samples,
                       const json& config) {
    std::string out = config_comment(config);
    out += "timestamp_ns";
    for (int c = 0; c < s.channels; ++c) out += ",ch" + std::to_string(c);
    out += '\n';
    char buf[64];
    for (const auto& sample : samples) {
        auto r = std::to_chars(buf, buf + sizeof buf, sample.t_ns);
        out.append(buf, r.ptr);
        for (double v : sample.values) {
            out += ',';
            r = std::to_chars(buf, buf + sizeof buf, v);
            out.append(buf, r.ptr);
        }
        out += '\n';
    }
    return out;
}

std::vector<SensorSample> parse_stream_csv(const std::string& text, const SensorSpec& s,
                                           const std::string& where) {
    std::vector<SensorSample> samples;
    std::size_t pos = 0;
    bool header = false;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        SensorSample sample;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        auto r = std::from_chars(p, end, sample.t_ns);
        if (r.ec != std::errc()) throw ValidationError(where + ":" + std::to_string(line_no) + ": bad timestamp");
        p = r.ptr;
        sample.values.reserve(static_cast<std::size_t>(s.channels));
        while (p < end) {
            if (*p != ',') throw ValidationError(where + ":" + std::to_string(line_no) + ": expected ','");
            ++p;
            double v = 0.0;
            r = std::from_chars(p, end, v);
            if (r.ec != std::errc()) throw ValidationError(where + ":" + std::to_string(line_no) + ": bad value");
            sample.values.push_back(v);
            p = r.ptr;
        }
        if (sample.values.size() != static_cast<std::size_t>(s.channels)) {
            throw ValidationError(where + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(s.channels) + " channels");
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

}  // namespace

void write_recording(const fs::path& dir, const Recording& rec, const json& config) {
    if (rec.streams.size() != rec.sensors.size()) {
        throw std::invalid_argument("recording has a stream count mismatch");
    }
    fs::path staging = dir;
    staging += ".partial";
    fs::remove_all(staging);
    fs::create_directories(staging);

    json manifest = envelope(kRecordingSchema);
    manifest["config"] = config;
    manifest["seed"] = rec.seed;
    manifest["classes"] = rec.classes;
    json sensors = json::array();
    json files = json::array();
    for (std::size_t i = 0; i < rec.sensors.size(); ++i) {
        const auto& s = rec.sensors[i];
        sensors.push_back(to_json(s));
        const std::string name = s.name + ".csv";
        const std::string text = stream_csv(s, rec.streams[i], config);
        write_text_atomic(staging / name, text);
        files.push_back({{"sensor", s.name},
                         {"file", name},
                         {"samples", rec.streams[i].size()},
                         {"fnv1a64", hex64(fnv1a64(text))}});
    }
    json segments = json::array();
    for (const auto& seg : rec.segments) {
        segments.push_back({{"label", seg.label}, {"start_ns", seg.start_ns}, {"end_ns", seg.end_ns}});
    }
    manifest["sensors"] = sensors;
    manifest["segments"] = segments;
    manifest["files"] = files;
    write_text_atomic(staging / "manifest.json", manifest.dump(2) + "\n");

    fs::remove_all(dir);
    if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
    fs::rename(staging, dir);
}

Recording read_recording(const fs::path& dir) {
    const json m = read_json(dir / "manifest.json");
    check_schema(m, kRecordingSchema);
    return guarded("recording manifest", [&] {
        Recording rec;
        rec.seed = m.at("seed").get<std::uint64_t>();
        rec.classes = m.at("classes").get<int>();
        for (const auto& js : m.at("sensors")) rec.sensors.push_back(sensor_from_json(js));
        for (const auto& seg : m.at("segments")) {
            rec.segments.push_back({seg.at("label").get<int>(), seg.at("start_ns").get<std::int64_t>(),
                                    seg.at("end_ns").get<std::int64_t>()});
        }
        const auto& files = m.at("files");
        if (files.size() != rec.sensors.size()) throw ValidationError("manifest file list mismatch");
        for (std::size_t i = 0; i < rec.sensors.size(); ++i) {
            const fs::path path = dir / files[i].at("file").get<std::string>();
            const std::string text = read_text(path);
            const std::string expected = files[i].at("fnv1a64").get<std::string>();
            if (hex64(fnv1a64(text)) != expected) {
                throw ValidationError(path.string() + ": content hash does not match the manifest");
            }
            rec.streams.push_back(parse_stream_csv(text, rec.sensors[i], path.string()));
        }
        return rec;
    });
}

}  // namespace harsim::io
