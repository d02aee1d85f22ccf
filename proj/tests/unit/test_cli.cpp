#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sys/wait.h>

#include "harsim/io.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(HARSIM_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct TempDir {
    fs::path path = fs::temp_directory_path() / ("harsim_cli_" + std::to_string(std::random_device{}()));
    TempDir() { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kSmall = R"({
  "seed": 3,
  "dataset": {"sensors": ["optical", "tof"], "classes": 3, "n_per_class": 3, "segment_s": 2},
  "train": {"epochs": 2}
})";

}  // namespace

TEST_CASE("usage errors exit with 1") {
    CHECK(run("") == 1);
    CHECK(run("train --bogus") == 1);
    CHECK(run("frobnicate") == 1);
    CHECK(run("train --config /no/such/file.json") == 1);
    CHECK(run("--help") == 0);
}

TEST_CASE("validation errors exit with 2") {
    TempDir tmp;
    write(tmp.path / "bad.json", R"({"model": {"filterz": 4}})");
    CHECK(run("gen-data --config " + (tmp.path / "bad.json").string() + " --out " + tmp.path.string()) == 2);
    write(tmp.path / "zero.json", R"({"dataset": {"n_per_class": 0}})");
    CHECK(run("gen-data --config " + (tmp.path / "zero.json").string() + " --out " + tmp.path.string()) == 2);
    CHECK(run("simulate --schedule fast --out " + tmp.path.string()) == 2);
    CHECK_FALSE(fs::exists(tmp.path / "data"));
}

TEST_CASE("runtime errors exit with 3") {
    TempDir tmp;
    CHECK(run("quantize --out " + tmp.path.string()) == 3);
    CHECK_FALSE(fs::exists(tmp.path / "qmodel.json"));
}

TEST_CASE("flags override the config file") {
    TempDir tmp;
    write(tmp.path / "small.json", kSmall);
    const auto cfg = (tmp.path / "small.json").string();
    REQUIRE(run("gen-data --config " + cfg + " --seed 11 --out " + tmp.path.string()) == 0);
    const auto manifest = harsim::io::read_json(tmp.path / "data" / "manifest.json");
    CHECK(manifest["seed"] == 11);
    REQUIRE(run("train --config " + cfg + " --seed 11 --out " + tmp.path.string()) == 0);
    REQUIRE(run("quantize --config " + cfg + " --bits 6 --out " + tmp.path.string()) == 0);
    CHECK(harsim::io::read_json(tmp.path / "qmodel.json")["model"]["n_bits"] == 6);
    REQUIRE(run("simulate --config " + cfg + " --step-ms 250 --schedule parallel --out " +
                tmp.path.string()) == 0);
    const auto cycles = harsim::io::read_json(tmp.path / "cycles.json");
    CHECK(cycles["config"]["window"]["step_ms"] == 250.0);
    CHECK(run("simulate --config " + cfg + " --window-ms 500 --out " + tmp.path.string()) == 2);
    CHECK(cycles["cycles"]["schedule"] == "parallel");
}
