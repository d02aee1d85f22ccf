// harsim: command-line driver for the acquisition, training, quantization and
// hardware-model pipeline. Exit codes: 0 ok, 1 usage, 2 validation, 3 runtime.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "harsim/pipeline.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::vector<int> bits;
    std::optional<std::string> schedule;
    std::optional<double> clock_hz;
    std::optional<double> window_ms;
    std::optional<double> step_ms;
    std::optional<int> keep;
};

harsim::PipelineConfig resolve(const Overrides& o) {
    harsim::PipelineConfig cfg;
    if (!o.config.empty()) cfg = harsim::PipelineConfig::from_json(harsim::io::read_json(o.config));
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.out = *o.out;
    if (!o.bits.empty()) {
        cfg.n_bits = o.bits.front();
        cfg.sweep_bits = o.bits;
        cfg.report_bits = o.bits;
    }
    if (o.schedule) cfg.schedule = harsim::parse_schedule(*o.schedule);
    if (o.clock_hz) cfg.clock_hz = *o.clock_hz;
    if (o.window_ms) cfg.window_ms = *o.window_ms;
    if (o.step_ms) cfg.step_ms = *o.step_ms;
    if (o.keep) cfg.keep = *o.keep;
    cfg.validate();
    return cfg;
}

void print_sweep(const std::vector<harsim::SweepPoint>& curve) {
    for (const auto& p : curve) {
        std::printf("n=%2d  width=%2d  float=%.4f  quant=%.4f  ratio=%.4f\n", p.n_bits, p.n_bits + 1,
                    p.float_accuracy, p.quantized_accuracy, p.ratio);
    }
}

int run(const std::string& cmd, const harsim::PipelineConfig& cfg) {
    using namespace harsim;
    if (cmd == "gen-data") {
        std::printf("recording written to %s\n", cmd_gen_data(cfg).string().c_str());
    } else if (cmd == "train") {
        const auto s = cmd_train(cfg);
        std::printf("params=%lld  train_acc=%.4f  test_acc=%.4f\n", static_cast<long long>(s.params),
                    s.train_accuracy, s.test_accuracy);
    } else if (cmd == "select") {
        const auto s = cmd_select(cfg);
        for (auto i : s.report.ranking) {
            std::printf("%-10s alpha=% .5f  weight=%.4f\n", s.report.sensors[i].c_str(), s.report.alpha[i],
                        s.report.weights[i]);
        }
        std::printf("full_acc=%.4f  selected_acc=%.4f\n", s.full_accuracy, s.selected_accuracy);
    } else if (cmd == "quantize") {
        const auto q = cmd_quantize(cfg);
        std::printf("quantized to n=%d (stored width %d, accumulator %d bits)\n", q.n_bits, q.stored_width(),
                    q.acc_bits);
    } else if (cmd == "sweep") {
        print_sweep(cmd_sweep(cfg));
    } else if (cmd == "infer") {
        const auto s = cmd_infer(cfg);
        std::printf("frames=%zu  accuracy=%.4f\n", s.frames, s.accuracy);
    } else if (cmd == "simulate") {
        const auto s = cmd_simulate(cfg);
        std::printf("labels=%zu  cycles=%llu  latency=%.6f ms  events=%zu\n", s.labels,
                    static_cast<unsigned long long>(s.cycles.total), s.cycles.latency_s * 1e3,
                    s.stream.events.size());
    } else if (cmd == "report") {
        for (const auto& row : cmd_report(cfg)) std::printf("%s\n", row.dump().c_str());
    } else if (cmd == "run") {
        run_pipeline(cfg);
        std::printf("pipeline complete in %s\n", cfg.out.string().c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"harsim: multi-sensor activity recognition pipeline and hardware model"};
    app.require_subcommand(1);
    Overrides o;
    auto add_common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON pipeline config")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "root seed");
        sub->add_option("--out", o.out, "artifact directory");
        sub->add_option("--bits", o.bits, "magnitude bits n (comma list)")->delimiter(',');
        sub->add_option("--schedule", o.schedule, "serial|parallel");
        sub->add_option("--clock-hz", o.clock_hz, "accelerator clock");
        sub->add_option("--window-ms", o.window_ms, "window duration");
        sub->add_option("--step-ms", o.step_ms, "window step");
        sub->add_option("--keep", o.keep, "modalities kept by select");
    };
    const std::vector<std::pair<std::string, std::string>> commands{
        {"gen-data", "generate a synthetic labeled recording"},
        {"train", "train the float model"},
        {"select", "rank modalities by importance and retrain on the top ones"},
        {"quantize", "post-training quantization of the float model"},
        {"sweep", "accuracy ratio across precisions"},
        {"infer", "integer inference over the test split"},
        {"simulate", "stream the recording through the integer engine"},
        {"report", "latency and resource table across precisions and schedules"},
        {"run", "every stage in order"},
    };
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        return run(cmd, resolve(o));
    } catch (const harsim::ValidationError& e) {
        std::cerr << "harsim " << cmd << ": validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "harsim " << cmd << ": invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "harsim " << cmd << ": error: " << e.what() << "\n";
        return 3;
    }
}
