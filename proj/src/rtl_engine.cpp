#include "harsim/rtl_engine.hpp"

#include <algorithm>
#include <deque>
#include <future>
#include <limits>
#include <stdexcept>
#include <string>

#include "harsim/errors.hpp"

namespace harsim {

using fxp::Accumulator;
using fxp::FxFormat;

std::string to_string(Schedule s) { return s == Schedule::kSerial ? "serial" : "parallel"; }

Schedule parse_schedule(const std::string& s) {
    if (s == "serial") return Schedule::kSerial;
    if (s == "parallel") return Schedule::kParallel;
    throw std::invalid_argument("unknown schedule '" + s + "' (expected serial|parallel)");
}

namespace {

void check_range(std::span<const std::int64_t> values, FxFormat fmt, const char* what) {
    for (auto v : values) {
        if (v < fmt.min() || v > fmt.max()) {
            throw std::invalid_argument(std::string(what) + ": value " + std::to_string(v) +
                                        " does not fit " + std::to_string(fmt.n_bits) +
                                        "-bit storage");
        }
    }
}

}  // namespace

ITensor qconv_layer(const ITensor& input, const QConvLayer& layer, FxFormat fmt, int acc_bits,
                    bool global_pool) {
    const auto& g = layer.geo;
    if (input.time() != g.in_t || input.space() != g.in_s || input.channels() != g.in_c) {
        throw ShapeError("qconv_layer: input shape does not match layer geometry");
    }
    if (layer.weights.size() != g.weight_count()) {
        throw ShapeError("qconv_layer: weight count does not match layer geometry");
    }
    check_range(input.values(), fmt, "qconv_layer input");

    const std::size_t row_len = g.in_s * g.in_c;
    const std::size_t f_count = g.filters;
    constexpr std::int64_t kNone = std::numeric_limits<std::int64_t>::min();

    ITensor out;
    if (global_pool) {
        out = ITensor(1, 1, f_count, kNone);
    } else if (g.pool) {
        out = ITensor(g.pooled_t, g.pooled_s, f_count);
    } else {
        out = ITensor(g.out_t, g.out_s, f_count);
    }
    // Kernel max-pool comparator registers for the row group in flight.
    std::vector<std::int64_t> pool_reg(g.pooled_s * f_count, kNone);
    std::size_t emitted_rows = 0;

    auto emit_row = [&](std::span<const std::int64_t> row, std::size_t width) {
        if (global_pool) {
            for (std::size_t s = 0; s < width; ++s) {
                for (std::size_t f = 0; f < f_count; ++f) {
                    auto& m = out.at(0, 0, f);
                    m = std::max(m, row[s * f_count + f]);
                }
            }
        } else {
            std::copy(row.begin(), row.end(), &out.at(emitted_rows, 0, 0));
        }
        ++emitted_rows;
    };

    std::deque<std::span<const std::int64_t>> shift;  // S: the last kt input rows
    std::vector<std::int64_t> out_row(g.out_s * f_count);
    const auto in = input.values();

    for (std::size_t t = 0; t < g.in_t; ++t) {
        shift.push_back(in.subspan(t * row_len, row_len));
        if (shift.size() > g.kt) shift.pop_front();
        if (shift.size() < g.kt) continue;  // C: window not yet full

        const std::size_t r = t + 1 - g.kt;
        if (g.pool && r >= g.pooled_t * g.pt) continue;  // remainder rows fall outside every pool window

        for (std::size_t s = 0; s < g.out_s; ++s) {
            for (std::size_t f = 0; f < f_count; ++f) {  // output-channel lanes
                Accumulator acc(acc_bits);
                for (std::size_t dt = 0; dt < g.kt; ++dt) {
                    const auto& xr = shift[dt];
                    for (std::size_t ds = 0; ds < g.ks; ++ds) {
                        const std::size_t woff = (dt * g.ks + ds) * g.in_c * f_count + f;
                        for (std::size_t c = 0; c < g.in_c; ++c) {
                            acc = fxp::mac(acc, xr[(s + ds) * g.in_c + c],
                                           layer.weights[woff + c * f_count]);
                        }
                    }
                }
                out_row[s * f_count + f] = fxp::requantize(acc, layer.rq.mult, layer.rq.shift, fmt, true);
            }
        }

        if (!g.pool) {
            emit_row(out_row, g.out_s);
            continue;
        }
        if (r % g.pt == 0) std::fill(pool_reg.begin(), pool_reg.end(), kNone);
        for (std::size_t s = 0; s < g.pooled_s * g.ps; ++s) {
            for (std::size_t f = 0; f < f_count; ++f) {
                auto& m = pool_reg[(s / g.ps) * f_count + f];
                m = std::max(m, out_row[s * f_count + f]);
            }
        }
        if (r % g.pt == g.pt - 1) emit_row(pool_reg, g.pooled_s);
    }
    return out;
}

std::vector<std::int64_t> qdense_layer(std::span<const std::int64_t> input, const QDenseLayer& layer,
                                       FxFormat fmt, int acc_bits, bool relu) {
    if (input.size() != layer.in || layer.weights.size() != layer.in * layer.out) {
        throw ShapeError("qdense_layer: input/weight size mismatch");
    }
    check_range(input, fmt, "qdense_layer input");
    std::vector<std::int64_t> out(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
        Accumulator acc(acc_bits);
        for (std::size_t i = 0; i < layer.in; ++i) acc = fxp::mac(acc, input[i], layer.weights[i * layer.out + o]);
        out[o] = fxp::requantize(acc, layer.rq.mult, layer.rq.shift, fmt, relu);
    }
    return out;
}

std::uint64_t conv_cycles(const ConvGeometry& geo, std::uint64_t kappa) {
    return geo.in_c * geo.output_positions() * geo.taps() + kappa;
}

std::uint64_t dense_cycles(std::size_t in, std::size_t out, std::uint64_t lanes, std::uint64_t kappa) {
    if (lanes == 0) throw std::invalid_argument("dense lanes must be >= 1");
    const std::uint64_t work = static_cast<std::uint64_t>(in) * out;
    return (work + lanes - 1) / lanes + kappa;
}

CycleReport schedule_latency(const std::vector<std::uint64_t>& branch_cycles,
                             std::uint64_t dense, Schedule mode, double clock_hz) {
    if (branch_cycles.empty()) throw std::invalid_argument("schedule_latency: no branches");
    if (!(clock_hz > 0.0)) throw std::invalid_argument("schedule_latency: clock must be > 0");
    CycleReport r;
    r.schedule = mode;
    r.branch_totals = branch_cycles;
    r.dense_total = dense;
    std::uint64_t branches = 0;
    if (mode == Schedule::kSerial) {
        for (auto c : branch_cycles) branches += c;
    } else {
        branches = *std::max_element(branch_cycles.begin(), branch_cycles.end());
    }
    r.total = branches + dense;
    r.clock_hz = clock_hz;
    r.latency_s = static_cast<double>(r.total) / clock_hz;
    r.throughput = r.total > 0 ? clock_hz / static_cast<double>(r.total) : 0.0;
    return r;
}

CycleReport model_cycles(const ModelSpec& spec, Schedule mode, const CostModel& cost,
                         double clock_hz) {
    std::vector<std::vector<std::uint64_t>> layers;
    std::vector<std::uint64_t> totals;
    for (const auto& b : spec.branches) {
        std::vector<std::uint64_t> per;
        std::uint64_t sum = 0;
        for (const auto& g : branch_geometry(b)) {
            per.push_back(conv_cycles(g, cost.kappa));
            sum += per.back();
        }
        layers.push_back(std::move(per));
        totals.push_back(sum);
    }
    std::vector<std::uint64_t> dense;
    if (spec.alpha_enabled) {
        dense.push_back(dense_cycles(spec.branches.size(),
                                     static_cast<std::size_t>(spec.dense_inputs()),
                                     cost.dense_lanes, cost.kappa));
    }
    dense.push_back(dense_cycles(static_cast<std::size_t>(spec.dense_inputs()),
                                 static_cast<std::size_t>(spec.hidden), cost.dense_lanes, cost.kappa));
    dense.push_back(dense_cycles(static_cast<std::size_t>(spec.hidden),
                                 static_cast<std::size_t>(spec.classes), cost.dense_lanes, cost.kappa));
    std::uint64_t dense_total = 0;
    for (auto c : dense) dense_total += c;

    CycleReport r = schedule_latency(totals, dense_total, mode, clock_hz);
    r.branch_layers = std::move(layers);
    r.dense_layers = std::move(dense);
    return r;
}

QFrame quantize_frame(const Frame& frame, int n_bits) {
    const auto fmt = FxFormat::with_width(n_bits + 1);
    const double scale = static_cast<double>(std::int64_t{1} << n_bits);
    QFrame q;
    for (const auto& t : frame.branches) {
        ITensor it(t.time(), t.space(), t.channels());
        for (std::size_t i = 0; i < t.size(); ++i) {
            it.storage()[i] = fxp::saturate(fxp::round_nearest(t.storage()[i] * scale), fmt);
        }
        q.branches.push_back(std::move(it));
    }
    return q;
}

namespace {

std::vector<std::int64_t> run_branch(const QuantizedModel& model, std::size_t b, const ITensor& in) {
    const auto& spec = model.spec.branches[b];
    const auto fmt = model.storage();
    const auto t = static_cast<std::size_t>(spec.timesteps);
    const auto c = static_cast<std::size_t>(spec.channels);
    if (in.time() != t || in.space() != 1 || in.channels() != c) {
        throw ShapeError("qinfer: branch '" + spec.sensor + "' input shape mismatch");
    }
    ITensor x = spec.dim == ConvDim::k2D ? in.reshaped(t, c, 1) : in;
    const auto& layers = model.branches[b];
    for (std::size_t l = 0; l < 3; ++l) {
        x = qconv_layer(x, layers[l], fmt, model.acc_bits, l == 2);
    }
    return x.storage();
}

}  // namespace

QInferResult qinfer(const QuantizedModel& model, const QFrame& frame, Schedule schedule,
                    const CostModel& cost, double clock_hz) {
    const std::size_t n = model.spec.branches.size();
    if (frame.branches.size() != n || model.branches.size() != n) {
        throw ShapeError("qinfer: frame has " + std::to_string(frame.branches.size()) +
                         " branches, model expects " + std::to_string(n));
    }
    const auto fmt = model.storage();

    QInferResult res;
    res.features.resize(n);
    if (schedule == Schedule::kParallel && n > 1) {
        std::vector<std::future<std::vector<std::int64_t>>> jobs;
        for (std::size_t b = 0; b < n; ++b) {
            jobs.push_back(std::async(std::launch::async, run_branch, std::cref(model), b,
                                      std::cref(frame.branches[b])));
        }
        for (std::size_t b = 0; b < n; ++b) res.features[b] = jobs[b].get();
    } else {
        for (std::size_t b = 0; b < n; ++b) res.features[b] = run_branch(model, b, frame.branches[b]);
    }

    std::vector<std::int64_t> h0;
    if (!model.mix.empty()) {
        const std::size_t f = res.features.front().size();
        h0.resize(f);
        for (std::size_t j = 0; j < f; ++j) {
            Accumulator acc(model.acc_bits);
            for (std::size_t b = 0; b < n; ++b) acc = fxp::mac(acc, model.mix[b], res.features[b][j]);
            h0[j] = fxp::requantize(acc, model.mix_rq.mult, model.mix_rq.shift, fmt, false);
        }
    } else {
        for (const auto& f : res.features) h0.insert(h0.end(), f.begin(), f.end());
    }
    const auto h1 = qdense_layer(h0, model.dense[0], fmt, model.acc_bits, model.dense[0].relu);
    res.logits = qdense_layer(h1, model.dense[1], fmt, model.acc_bits, model.dense[1].relu);
    res.cls = argmax(std::span<const std::int64_t>(res.logits));
    res.cycles = model_cycles(model.spec, schedule, cost, clock_hz);
    return res;
}

ResourceReport estimate_resources(const QuantizedModel& model, Schedule schedule, int stored_width,
                                  const CostModel& cost) {
    if (stored_width < 2) throw std::invalid_argument("stored width must be >= 2");
    ResourceReport r;
    r.schedule = schedule;
    r.stored_width = stored_width;

    std::uint64_t branch_buf_max = 0, branch_buf_sum = 0;
    std::uint64_t lanes_max = 0, lanes_sum = 0;
    for (const auto& layers : model.branches) {
        std::uint64_t buf = 0, lanes = 0;
        for (std::size_t l = 0; l < 3; ++l) {
            const auto& g = layers[l].geo;
            r.weight_words += layers[l].weights.size();
            const std::uint64_t in_words = g.in_t * g.in_s * g.in_c;
            const std::uint64_t out_words =
                l == 2 ? g.filters : (g.pool ? g.pooled_t * g.pooled_s : g.out_t * g.out_s) * g.filters;
            buf = std::max(buf, in_words + out_words);  // ping-pong feature RAM
            lanes = std::max<std::uint64_t>(lanes, g.filters);
        }
        branch_buf_max = std::max(branch_buf_max, buf);
        branch_buf_sum += buf;
        lanes_max = std::max(lanes_max, lanes);
        lanes_sum += lanes;
    }
    r.weight_words += model.mix.size();
    std::uint64_t dense_buf = 0;
    for (const auto& d : model.dense) {
        r.weight_words += d.weights.size();
        if (d.in > 0 || d.out > 0) dense_buf += (dense_buf == 0 ? d.in : 0) + d.out;
    }
    const bool serial = schedule == Schedule::kSerial;
    r.feature_words = (serial ? branch_buf_max : branch_buf_sum) + dense_buf;
    r.memory_bits = (r.weight_words + r.feature_words) * static_cast<std::uint64_t>(stored_width);
    const bool has_dense = model.dense[0].out > 0 || model.dense[1].out > 0;
    r.mac_lanes = (serial ? lanes_max : lanes_sum) + (has_dense ? cost.dense_lanes : 0);
    r.multipliers_per_lane = (static_cast<std::uint64_t>(stored_width) + 8) / 9;
    r.multiplier_units = r.mac_lanes * r.multipliers_per_lane;
    return r;
}

}  // namespace harsim
