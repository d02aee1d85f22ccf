#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "harsim/io.hpp"
#include "harsim/pipeline.hpp"

using namespace harsim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("harsim_test_" + tag + "_" + std::to_string(std::random_device{}()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

PipelineConfig small_config(const fs::path& out) {
    PipelineConfig c;
    c.seed = 5;
    c.sensors = {"optical", "baro", "tof", "gas"};
    c.uninformative = {"gas"};
    c.classes = 4;
    c.n_per_class = 6;
    c.segment_s = 2.0;
    c.window_ms = 1000;
    c.step_ms = 500;
    c.epochs = 4;
    c.keep = 2;
    c.filters = 4;
    c.hidden = 8;
    c.sweep_bits = {4, 8};
    c.report_bits = {8, 10};
    c.out = out;
    return c;
}

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
    return out;
}

}  // namespace

TEST_CASE("decimal strings round-trip exactly") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int i = 0; i < 2000; ++i) {
        const double v = u(rng) * std::pow(10.0, i % 20 - 10);
        CHECK(io::parse_double(io::format_double(v)) == v);
    }
    CHECK(io::format_double(0.1) == "0.1");
    CHECK_THROWS_AS(io::parse_double("0.1x"), ValidationError);
    CHECK_THROWS_AS(io::parse_double(""), ValidationError);
}

TEST_CASE("schema checks name what was expected and found") {
    auto j = io::envelope(io::kQModelSchema);
    CHECK_NOTHROW(io::check_schema(j, io::kQModelSchema));
    j["version"] = 7;
    try {
        io::check_schema(j, io::kQModelSchema);
        FAIL("expected a version error");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("1") != std::string::npos);
        CHECK(msg.find("7") != std::string::npos);
    }
    CHECK_THROWS_AS(io::check_schema(io::envelope(io::kModelSchema), io::kQModelSchema), ValidationError);
}

TEST_CASE("model and quantized model files round-trip") {
    TempDir tmp("roundtrip");
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const auto spec = fixtures::random_spec(rng);
        const auto params = fixtures::random_params(spec, rng);
        std::vector<SensorRange> ranges;
        for (const auto& b : spec.branches) ranges.push_back({b.sensor, -0.3 * trial, 1.7 + trial});
        io::ModelFile mf{spec, params, ranges, {{1, 0.5, 0.25, 0.75, 0.125}}, {{"k", trial}}};
        io::save_model(tmp.path / "m.json", mf);
        const auto back = io::load_model(tmp.path / "m.json");
        CHECK(back.spec == spec);
        CHECK(back.params == params);
        CHECK(back.ranges == ranges);
        CHECK(back.history == mf.history);

        std::vector<Frame> calib{fixtures::random_frame(spec, rng)};
        const auto q = quantize_model(spec, params, calib, 3 + trial);
        io::save_qmodel(tmp.path / "q.json", {q, ranges, {}});
        const auto qb = io::load_qmodel(tmp.path / "q.json");
        CHECK(qb.model == q);
        CHECK(qb.model.rescale == q.rescale);
        for (std::size_t b = 0; b < q.branches.size(); ++b)
            for (std::size_t l = 0; l < 3; ++l) CHECK(qb.model.branches[b][l].geo.weight_count() == q.branches[b][l].geo.weight_count());
    }
    auto j = io::read_json(tmp.path / "q.json");
    j["version"] = 2;
    io::write_text_atomic(tmp.path / "q.json", j.dump());
    CHECK_THROWS_AS(io::load_qmodel(tmp.path / "q.json"), ValidationError);
    for (const auto& e : fs::directory_iterator(tmp.path))
        CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
}

TEST_CASE("recordings round-trip and detect tampering") {
    TempDir tmp("rec");
    DatasetConfig cfg;
    cfg.sensors = {find_sensor(modality_catalog(), "optical"), find_sensor(modality_catalog(), "gas")};
    cfg.classes = 3;
    cfg.n_per_class = 2;
    cfg.segment_s = 1.5;
    cfg.seed = 12;
    const auto rec = gen_dataset(cfg);
    io::write_recording(tmp.path / "data", rec, {{"seed", 12}});
    CHECK(io::read_recording(tmp.path / "data") == rec);
    CHECK_FALSE(fs::exists(tmp.path / "data.partial"));

    std::ofstream(tmp.path / "data" / "gas.csv", std::ios::app) << "1,2,3\n";
    CHECK_THROWS_AS(io::read_recording(tmp.path / "data"), ValidationError);
}

TEST_CASE("pipeline config") {
    PipelineConfig c = small_config("anywhere");
    const auto j = c.to_json();
    CHECK_FALSE(j.dump().find("anywhere") != std::string::npos);
    const auto back = PipelineConfig::from_json(j);
    CHECK(back.to_json() == j);

    auto bad = j;
    bad["model"]["filterz"] = 3;
    CHECK_THROWS_AS(PipelineConfig::from_json(bad), ValidationError);
    auto bad2 = j;
    bad2["window"]["step_ms"] = "fast";
    CHECK_THROWS_AS(PipelineConfig::from_json(bad2), ValidationError);

    PipelineConfig d;
    CHECK(d.sensor_specs().size() == 7);
    const auto dc = d.dataset_config();
    CHECK(dc.classes == 10);
    CHECK(dc.sensors.size() == 7);

    PipelineConfig empty = c;
    empty.n_per_class = 0;
    CHECK_THROWS_AS(empty.validate(), ValidationError);
    CHECK_THROWS_AS(cmd_gen_data(empty), ValidationError);
    PipelineConfig unknown = c;
    unknown.sensors.push_back("sonar");
    CHECK_THROWS_AS(unknown.validate(), ValidationError);
}

TEST_CASE("data fusion model is one branch over all channels") {
    PipelineConfig c = small_config("x");
    c.fusion = FusionMode::kData;
    const auto spec = build_spec(c, c.sensor_specs());
    REQUIRE(spec.branches.size() == 1);
    CHECK(spec.branches[0].channels == 10 + 1 + 1 + 2);
    c.alignment = Alignment::kNative;
    CHECK_THROWS_AS(build_spec(c, c.sensor_specs()), ValidationError);
}

TEST_CASE("commands run end to end on a small config") {
    TempDir tmp("pipe");
    const auto cfg = small_config(tmp.path);
    cmd_gen_data(cfg);
    const auto manifest = io::read_text(tmp.path / "data" / "manifest.json");
    {
        TempDir other("pipe2");
        auto c2 = cfg;
        c2.out = other.path;
        cmd_gen_data(c2);
        CHECK(io::read_text(other.path / "data" / "manifest.json") == manifest);
    }

    const auto tr = cmd_train(cfg);
    CHECK(tr.params > 0);
    const auto sel = cmd_select(cfg);
    CHECK(sel.kept.size() == 2);
    CHECK(sel.report.sensors.size() == 4);
    CHECK(io::read_json(tmp.path / "importance.json")["schema"] == "harsim.importance");

    const auto q = cmd_quantize(cfg);
    CHECK(q.n_bits == 10);
    const auto sweep = cmd_sweep(cfg);
    CHECK(sweep.size() == 2);
    const auto sweep_csv = lines(tmp.path / "sweep.csv");
    CHECK(sweep_csv[0].rfind("# config=", 0) == 0);
    CHECK(sweep_csv.size() == 4);

    const auto inf = cmd_infer(cfg);
    CHECK(inf.frames > 0);

    const auto sim = cmd_simulate(cfg);
    // T = 4 classes * 6 segments * 2 s, window 1 s, step 0.5 s
    CHECK(sim.labels == std::size_t((48.0 - 1.0) / 0.5) + 1);
    const auto labels = lines(tmp.path / "labels.csv");
    CHECK(labels.size() == sim.labels + 2);
    const auto cycles = io::read_json(tmp.path / "cycles.json");
    CHECK(cycles["schema"] == "harsim.cycles");
    for (const auto& s : cycles["stream"]["sensors"])
        CHECK(s["produced"].get<std::uint64_t>() ==
              s["consumed"].get<std::uint64_t>() + s["occupancy"].get<std::uint64_t>() +
                  s["overflowed"].get<std::uint64_t>());

    auto tumbling = cfg;
    tumbling.step_ms = 1000;
    CHECK(cmd_simulate(tumbling).labels == std::size_t((48.0 - 1.0) / 1.0) + 1);

    const auto rows = cmd_report(cfg);
    CHECK(rows.size() == 4);
    const auto rep = lines(tmp.path / "report.csv");
    REQUIRE(rep.size() == 6);
    const auto s9 = split(rep[2]), p9 = split(rep[3]), s11 = split(rep[4]), p11 = split(rep[5]);
    CHECK(s9[1] == "9");
    CHECK(s11[1] == "11");
    CHECK(std::stoll(s11[7]) == 2 * std::stoll(s9[7]));
    CHECK(std::stoll(p11[7]) == 2 * std::stoll(p9[7]));
    CHECK(std::stoll(s9[3]) > std::stoll(p9[3]));
}

TEST_CASE("commands refuse inputs of the wrong schema version") {
    TempDir tmp("schema");
    auto cfg = small_config(tmp.path);
    cfg.epochs = 1;
    cmd_gen_data(cfg);
    cmd_train(cfg);
    auto j = io::read_json(tmp.path / "model.json");
    j["version"] = 99;
    io::write_text_atomic(tmp.path / "model.json", j.dump());
    try {
        cmd_quantize(cfg);
        FAIL("expected a schema error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(tmp.path / "qmodel.json"));
}
