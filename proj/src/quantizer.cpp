#include "harsim/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "harsim/errors.hpp"
#include "harsim/rtl_engine.hpp"

namespace harsim {

namespace {

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Scale used to carry activations forward during calibration; a dead layer
// propagates zeros either way.
double carry(double r) { return r > 0.0 ? r : 1.0; }

std::vector<double> dense_fp(std::span<const double> in, std::span<const double> w, std::size_t out,
                             bool relu) {
    std::vector<double> y(out, 0.0);
    for (std::size_t i = 0; i < in.size(); ++i) {
        for (std::size_t o = 0; o < out; ++o) y[o] += in[i] * w[i * out + o];
    }
    if (relu) {
        for (auto& v : y) v = std::max(v, 0.0);
    }
    return y;
}

}  // namespace

CalibStats calibrate(const ModelSpec& spec, const ModelParams& params,
                     std::span<const Frame> calib_set) {
    spec.validate();
    check_params(spec, params);
    if (calib_set.empty()) throw std::invalid_argument("calibrate: empty calibration set");

    const std::size_t nb = spec.branches.size();
    const std::size_t ns = calib_set.size();
    CalibStats stats;
    stats.samples = ns;
    for (auto& layer : stats.conv) layer.assign(nb, {});

    // acts[b][i]: input of the current depth for branch b, sample i
    std::vector<std::vector<Tensor>> acts(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        acts[b].reserve(ns);
        for (const auto& f : calib_set) {
            if (f.branches.size() != nb) throw ShapeError("calibrate: frame branch count mismatch");
            acts[b].push_back(branch_input(spec.branches[b], f.branches[b]));
        }
    }

    for (std::size_t l = 0; l < 3; ++l) {
        for (std::size_t b = 0; b < nb; ++b) {
            const auto g = branch_geometry(spec.branches[b])[l];
            auto& st = stats.conv[l][b];
            st.max_w = max_abs(params.conv[b][l]);
            std::optional<PoolWindow> pool;
            if (g.pool) pool = PoolWindow{g.pt, g.ps};
            for (auto& x : acts[b]) {
                x = conv_forward(x, params.conv[b][l], g.kt, g.ks, g.filters, true, pool);
                st.max_o = std::max(st.max_o, max_abs(x.storage()));
            }
        }
        double r = 0.0;
        for (const auto& st : stats.conv[l]) r = std::max({r, st.max_w, st.max_o});
        const double inv = 1.0 / carry(r);
        for (auto& branch : acts) {
            for (auto& x : branch) {
                for (auto& v : x.storage()) v *= inv;
            }
        }
    }

    const auto hidden = static_cast<std::size_t>(spec.hidden);
    const auto classes = static_cast<std::size_t>(spec.classes);
    stats.dense[0].max_w = max_abs(params.dense[0]);
    stats.dense[1].max_w = max_abs(params.dense[1]);
    std::vector<std::vector<double>> hidden_out;
    hidden_out.reserve(ns);
    for (std::size_t i = 0; i < ns; ++i) {
        std::vector<std::vector<double>> feats(nb);
        for (std::size_t b = 0; b < nb; ++b) feats[b] = global_max_pool(acts[b][i]).storage();
        std::vector<double> h0;
        if (spec.alpha_enabled) {
            h0 = mix_features(feats, params.alpha);
        } else {
            for (const auto& f : feats) h0.insert(h0.end(), f.begin(), f.end());
        }
        auto h1 = dense_fp(h0, params.dense[0], hidden, true);
        stats.dense[0].max_o = std::max(stats.dense[0].max_o, max_abs(h1));
        hidden_out.push_back(std::move(h1));
    }
    const double inv = 1.0 / carry(std::max(stats.dense[0].max_w, stats.dense[0].max_o));
    for (auto& h1 : hidden_out) {
        for (auto& v : h1) v *= inv;
        const auto logits = dense_fp(h1, params.dense[1], classes, false);
        stats.dense[1].max_o = std::max(stats.dense[1].max_o, max_abs(logits));
    }
    return stats;
}

double compute_rescale(const CalibStats& stats, int layer) {
    if (layer < 1 || layer > 3) throw std::out_of_range("conv layer index must be 1..3");
    const auto& entries = stats.conv[static_cast<std::size_t>(layer - 1)];
    if (entries.empty()) throw std::invalid_argument("compute_rescale: no branch statistics");
    double r = 0.0;
    for (const auto& st : entries) r = std::max({r, st.max_w, st.max_o});
    if (!(r > 0.0)) {
        throw std::domain_error("conv layer " + std::to_string(layer) +
                                " is dead (zero weights and outputs)");
    }
    return r;
}

double compute_dense_scale(const CalibStats& stats, int dense_layer) {
    if (dense_layer < 1 || dense_layer > 2) throw std::out_of_range("dense layer index must be 1..2");
    const auto& st = stats.dense[static_cast<std::size_t>(dense_layer - 1)];
    const double r = std::max(st.max_w, st.max_o);
    if (!(r > 0.0)) {
        throw std::domain_error("dense layer " + std::to_string(dense_layer) + " is dead");
    }
    return r;
}

RescaleSet rescale_set(const CalibStats& stats) {
    RescaleSet r;
    for (int l = 1; l <= 3; ++l) r.conv[static_cast<std::size_t>(l - 1)] = compute_rescale(stats, l);
    for (int d = 1; d <= 2; ++d) r.dense[static_cast<std::size_t>(d - 1)] = compute_dense_scale(stats, d);
    return r;
}

std::int64_t quantize_weight(double w, double r, int n_bits) {
    if (!(r > 0.0)) throw std::invalid_argument("rescale coefficient must be > 0");
    const auto fmt = fxp::FxFormat::with_width(n_bits + 1);
    return fxp::saturate(fxp::round_nearest(w / r * std::ldexp(1.0, n_bits)), fmt);
}

QuantizedModel quantize_weights(const ModelSpec& spec, const ModelParams& params,
                                const RescaleSet& rescale, int n_bits) {
    spec.validate();
    check_params(spec, params);
    if (n_bits < 2 || n_bits > 31) throw std::invalid_argument("n_bits must be in [2, 31]");

    QuantizedModel q;
    q.spec = spec;
    q.n_bits = n_bits;
    // 32-bit MAC registers up to 16-bit storage, 64-bit beyond.
    q.acc_bits = n_bits + 1 <= 16 ? 32 : 64;
    q.rescale = rescale;
    const Requant rq{1, n_bits};

    auto convert = [n_bits](std::span<const double> w, double r) {
        std::vector<std::int64_t> out(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) out[i] = quantize_weight(w[i], r, n_bits);
        return out;
    };

    q.branches.resize(spec.branches.size());
    for (std::size_t b = 0; b < spec.branches.size(); ++b) {
        const auto geo = branch_geometry(spec.branches[b]);
        for (std::size_t l = 0; l < 3; ++l) {
            q.branches[b][l] = QConvLayer{geo[l], convert(params.conv[b][l], rescale.conv[l]), rq};
        }
    }
    if (spec.alpha_enabled) {
        q.mix = convert(softmax(params.alpha), 1.0);
        q.mix_rq = rq;
    }
    const auto in = static_cast<std::size_t>(spec.dense_inputs());
    const auto hidden = static_cast<std::size_t>(spec.hidden);
    const auto classes = static_cast<std::size_t>(spec.classes);
    q.dense[0] = QDenseLayer{in, hidden, convert(params.dense[0], rescale.dense[0]), rq, true};
    q.dense[1] = QDenseLayer{hidden, classes, convert(params.dense[1], rescale.dense[1]), rq, false};
    return q;
}

QuantizedModel quantize_model(const ModelSpec& spec, const ModelParams& params,
                              std::span<const Frame> calib_set, int n_bits) {
    return quantize_weights(spec, params, rescale_set(calibrate(spec, params, calib_set)), n_bits);
}

namespace {

double int_accuracy(const QuantizedModel& qmodel, std::span<const Sample> test_set) {
    std::size_t hits = 0;
    for (const auto& s : test_set) {
        const auto res = qinfer(qmodel, quantize_frame(s.frame, qmodel.n_bits), Schedule::kSerial);
        if (res.cls == static_cast<std::size_t>(s.label)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test_set.size());
}

}  // namespace

double quantized_accuracy_ratio(const ModelSpec& spec, const ModelParams& params,
                                const QuantizedModel& qmodel, std::span<const Sample> test_set) {
    if (test_set.empty()) throw std::invalid_argument("quantized_accuracy_ratio: empty test set");
    const double fp = accuracy(spec, params, test_set);
    if (fp == 0.0) throw std::domain_error("float accuracy is 0; ratio undefined");
    return int_accuracy(qmodel, test_set) / fp;
}

std::vector<SweepPoint> sweep_bits(const ModelSpec& spec, const ModelParams& params,
                                   std::span<const Frame> calib_set,
                                   std::span<const Sample> test_set, std::span<const int> n_range) {
    if (n_range.empty()) throw std::invalid_argument("sweep_bits: empty precision list");
    if (test_set.empty()) throw std::invalid_argument("sweep_bits: empty test set");
    const RescaleSet rescale = rescale_set(calibrate(spec, params, calib_set));
    const double fp = accuracy(spec, params, test_set);
    if (fp == 0.0) throw std::domain_error("float accuracy is 0; ratio undefined");
    std::vector<SweepPoint> curve;
    for (int n : n_range) {
        const auto q = quantize_weights(spec, params, rescale, n);
        const double qa = int_accuracy(q, test_set);
        curve.push_back({n, fp, qa, qa / fp});
    }
    return curve;
}

}  // namespace harsim
