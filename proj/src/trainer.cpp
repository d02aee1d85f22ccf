#include "harsim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "harsim/errors.hpp"
#include "harsim/rng.hpp"

namespace harsim {

namespace {

struct ConvTrace {
    Tensor input;
    Tensor act;                          // post-ReLU, pre-pool
    std::vector<std::uint32_t> pool_at;  // flat index into act per pooled element
};

struct BranchTrace {
    std::array<ConvTrace, 3> layers;
    Tensor last;                         // output of layer 3 (pooled if enabled)
    std::vector<std::uint32_t> gmax_at;  // flat index into last per channel
    std::vector<double> features;
};

struct Trace {
    std::vector<BranchTrace> branches;
    std::vector<double> mix_w;
    std::vector<double> h0, h1, logits;
};

Tensor pool_traced(const Tensor& act, std::size_t pt, std::size_t ps,
                   std::vector<std::uint32_t>& at) {
    const std::size_t f = act.channels();
    Tensor out(act.time() / pt, act.space() / ps, f);
    at.assign(out.size(), 0);
    for (std::size_t t = 0; t < out.time(); ++t) {
        for (std::size_t s = 0; s < out.space(); ++s) {
            for (std::size_t c = 0; c < f; ++c) {
                double best = -std::numeric_limits<double>::infinity();
                std::uint32_t best_at = 0;
                for (std::size_t u = 0; u < pt; ++u) {
                    for (std::size_t v = 0; v < ps; ++v) {
                        const std::size_t idx = ((t * pt + u) * act.space() + s * ps + v) * f + c;
                        if (act.storage()[idx] > best) {
                            best = act.storage()[idx];
                            best_at = static_cast<std::uint32_t>(idx);
                        }
                    }
                }
                const std::size_t o = (t * out.space() + s) * f + c;
                out.storage()[o] = best;
                at[o] = best_at;
            }
        }
    }
    return out;
}

Trace trace_forward(const ModelSpec& spec, const ModelParams& params, const Frame& frame) {
    if (frame.branches.size() != spec.branches.size()) {
        throw ShapeError("frame branch count does not match model");
    }
    Trace tr;
    tr.branches.resize(spec.branches.size());
    for (std::size_t b = 0; b < spec.branches.size(); ++b) {
        const auto& bs = spec.branches[b];
        const auto geo = branch_geometry(bs);
        auto& bt = tr.branches[b];
        Tensor x = branch_input(bs, frame.branches[b]);
        for (std::size_t l = 0; l < 3; ++l) {
            const auto& g = geo[l];
            auto& lt = bt.layers[l];
            lt.input = std::move(x);
            lt.act = conv_forward(lt.input, params.conv[b][l], g.kt, g.ks, g.filters, true);
            if (g.pool) {
                x = pool_traced(lt.act, g.pt, g.ps, lt.pool_at);
            } else {
                x = lt.act;
            }
        }
        bt.last = std::move(x);
        const std::size_t f = bt.last.channels();
        bt.features.assign(f, -std::numeric_limits<double>::infinity());
        bt.gmax_at.assign(f, 0);
        const auto& v = bt.last.storage();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::size_t c = i % f;
            if (v[i] > bt.features[c]) {
                bt.features[c] = v[i];
                bt.gmax_at[c] = static_cast<std::uint32_t>(i);
            }
        }
    }

    if (spec.alpha_enabled) {
        tr.mix_w = softmax(params.alpha);
        tr.h0.assign(tr.branches.front().features.size(), 0.0);
        for (std::size_t b = 0; b < tr.branches.size(); ++b) {
            for (std::size_t j = 0; j < tr.h0.size(); ++j) {
                tr.h0[j] += tr.mix_w[b] * tr.branches[b].features[j];
            }
        }
    } else {
        for (const auto& bt : tr.branches) {
            tr.h0.insert(tr.h0.end(), bt.features.begin(), bt.features.end());
        }
    }

    const auto hidden = static_cast<std::size_t>(spec.hidden);
    const auto classes = static_cast<std::size_t>(spec.classes);
    tr.h1.assign(hidden, 0.0);
    for (std::size_t i = 0; i < tr.h0.size(); ++i) {
        for (std::size_t o = 0; o < hidden; ++o) tr.h1[o] += tr.h0[i] * params.dense[0][i * hidden + o];
    }
    for (auto& v : tr.h1) v = std::max(v, 0.0);
    tr.logits.assign(classes, 0.0);
    for (std::size_t i = 0; i < hidden; ++i) {
        for (std::size_t o = 0; o < classes; ++o) tr.logits[o] += tr.h1[i] * params.dense[1][i * classes + o];
    }
    return tr;
}

// Accumulates dW and (optionally) dx for z = conv(x, w).
void conv_backward(const Tensor& x, std::span<const double> w, const Tensor& dz, std::size_t kt,
                   std::size_t ks, std::span<double> dw, Tensor* dx) {
    const std::size_t cin = x.channels();
    const std::size_t f = dz.channels();
    const auto& xs = x.storage();
    const auto& gs = dz.storage();
    for (std::size_t t = 0; t < dz.time(); ++t) {
        for (std::size_t s = 0; s < dz.space(); ++s) {
            const double* g = &gs[(t * dz.space() + s) * f];
            if (std::all_of(g, g + f, [](double v) { return v == 0.0; })) continue;
            for (std::size_t dt = 0; dt < kt; ++dt) {
                for (std::size_t ds = 0; ds < ks; ++ds) {
                    const std::size_t xoff = ((t + dt) * x.space() + s + ds) * cin;
                    const std::size_t woff = (dt * ks + ds) * cin * f;
                    for (std::size_t c = 0; c < cin; ++c) {
                        const double xv = xs[xoff + c];
                        double* dwc = &dw[woff + c * f];
                        const double* wc = &w[woff + c * f];
                        double sum = 0.0;
                        for (std::size_t k = 0; k < f; ++k) {
                            dwc[k] += xv * g[k];
                            sum += wc[k] * g[k];
                        }
                        if (dx) dx->storage()[xoff + c] += sum;
                    }
                }
            }
        }
    }
}

void accumulate_sample(const ModelSpec& spec, const ModelParams& params, const Trace& tr,
                       int label, double scale, ModelParams& grad) {
    const auto hidden = static_cast<std::size_t>(spec.hidden);
    const auto classes = static_cast<std::size_t>(spec.classes);

    std::vector<double> dlogits = softmax(tr.logits);
    dlogits[static_cast<std::size_t>(label)] -= 1.0;
    for (auto& v : dlogits) v *= scale;

    std::vector<double> dh1(hidden, 0.0);
    for (std::size_t i = 0; i < hidden; ++i) {
        for (std::size_t o = 0; o < classes; ++o) {
            grad.dense[1][i * classes + o] += tr.h1[i] * dlogits[o];
            dh1[i] += params.dense[1][i * classes + o] * dlogits[o];
        }
        if (tr.h1[i] <= 0.0) dh1[i] = 0.0;
    }
    std::vector<double> dh0(tr.h0.size(), 0.0);
    for (std::size_t i = 0; i < tr.h0.size(); ++i) {
        for (std::size_t o = 0; o < hidden; ++o) {
            grad.dense[0][i * hidden + o] += tr.h0[i] * dh1[o];
            dh0[i] += params.dense[0][i * hidden + o] * dh1[o];
        }
    }

    std::vector<std::vector<double>> dfeat(tr.branches.size());
    if (spec.alpha_enabled) {
        const std::size_t n = tr.branches.size();
        std::vector<double> ds(n, 0.0);
        for (std::size_t b = 0; b < n; ++b) {
            const auto& fb = tr.branches[b].features;
            dfeat[b].resize(fb.size());
            for (std::size_t j = 0; j < fb.size(); ++j) {
                dfeat[b][j] = tr.mix_w[b] * dh0[j];
                ds[b] += fb[j] * dh0[j];
            }
        }
        double weighted = 0.0;
        for (std::size_t b = 0; b < n; ++b) weighted += tr.mix_w[b] * ds[b];
        for (std::size_t b = 0; b < n; ++b) grad.alpha[b] += tr.mix_w[b] * (ds[b] - weighted);
    } else {
        std::size_t off = 0;
        for (std::size_t b = 0; b < tr.branches.size(); ++b) {
            const std::size_t f = tr.branches[b].features.size();
            dfeat[b].assign(dh0.begin() + static_cast<std::ptrdiff_t>(off),
                            dh0.begin() + static_cast<std::ptrdiff_t>(off + f));
            off += f;
        }
    }

    for (std::size_t b = 0; b < tr.branches.size(); ++b) {
        const auto& bt = tr.branches[b];
        const auto geo = branch_geometry(spec.branches[b]);
        Tensor dout(bt.last.time(), bt.last.space(), bt.last.channels());
        for (std::size_t c = 0; c < dfeat[b].size(); ++c) dout.storage()[bt.gmax_at[c]] += dfeat[b][c];

        for (std::size_t li = 3; li-- > 0;) {
            const auto& g = geo[li];
            const auto& lt = bt.layers[li];
            Tensor dz(lt.act.time(), lt.act.space(), lt.act.channels());
            if (g.pool) {
                for (std::size_t i = 0; i < dout.size(); ++i) dz.storage()[lt.pool_at[i]] += dout.storage()[i];
            } else {
                dz = std::move(dout);
            }
            for (std::size_t i = 0; i < dz.size(); ++i) {
                if (lt.act.storage()[i] <= 0.0) dz.storage()[i] = 0.0;
            }
            Tensor dx;
            if (li > 0) dx = Tensor(lt.input.time(), lt.input.space(), lt.input.channels());
            conv_backward(lt.input, params.conv[b][li], dz, g.kt, g.ks, grad.conv[b][li],
                          li > 0 ? &dx : nullptr);
            dout = std::move(dx);
        }
    }
}

}  // namespace

double loss_ce(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw std::out_of_range("loss_ce: label " + std::to_string(label) + " outside [0, " +
                                std::to_string(logits.size()) + ")");
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - m);
    return std::log(sum) + m - logits[static_cast<std::size_t>(label)];
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    ModelParams p = ModelParams::zeros_like(spec);
    auto rng = substream(seed, "init");
    auto fill = [&rng](std::vector<double>& w, double fan_in, double fan_out) {
        const double s = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-s, s);
        for (auto& v : w) v = dist(rng);
    };
    for (std::size_t b = 0; b < spec.branches.size(); ++b) {
        const auto geo = branch_geometry(spec.branches[b]);
        for (std::size_t l = 0; l < 3; ++l) {
            const double taps = static_cast<double>(geo[l].taps());
            fill(p.conv[b][l], taps * static_cast<double>(geo[l].in_c),
                 taps * static_cast<double>(geo[l].filters));
        }
    }
    fill(p.dense[0], spec.dense_inputs(), spec.hidden);
    fill(p.dense[1], spec.hidden, spec.classes);
    return p;
}

namespace {

ModelParams backward_refs(const ModelSpec& spec, const ModelParams& params,
                          std::span<const Sample* const> batch, double* mean_loss_out) {
    if (batch.empty()) throw std::invalid_argument("backward: empty batch");
    check_params(spec, params);
    ModelParams grad = ModelParams::zeros_like(spec);
    const double scale = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const Sample* s : batch) {
        const Trace tr = trace_forward(spec, params, s->frame);
        total += loss_ce(tr.logits, s->label);
        accumulate_sample(spec, params, tr, s->label, scale, grad);
    }
    if (mean_loss_out) *mean_loss_out = total * scale;
    return grad;
}

}  // namespace

ModelParams backward(const ModelSpec& spec, const ModelParams& params,
                     std::span<const Sample> batch, double* mean_loss_out) {
    std::vector<const Sample*> refs;
    refs.reserve(batch.size());
    for (const auto& s : batch) refs.push_back(&s);
    return backward_refs(spec, params, refs, mean_loss_out);
}

double mean_loss(const ModelSpec& spec, const ModelParams& params, std::span<const Sample> data) {
    if (data.empty()) return 0.0;
    double total = 0.0;
    for (const auto& s : data) total += loss_ce(forward(spec, params, s.frame).logits, s.label);
    return total / static_cast<double>(data.size());
}

double accuracy(const ModelSpec& spec, const ModelParams& params, std::span<const Sample> data) {
    if (data.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& s : data) {
        if (forward(spec, params, s.frame).cls == static_cast<std::size_t>(s.label)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

std::vector<std::uint32_t> activation_signature(const ModelSpec& spec, const ModelParams& params,
                                                const Frame& frame) {
    const Trace tr = trace_forward(spec, params, frame);
    std::vector<std::uint32_t> sig;
    for (const auto& bt : tr.branches) {
        for (const auto& lt : bt.layers) {
            for (double v : lt.act.storage()) sig.push_back(v > 0.0 ? 1u : 0u);
            sig.insert(sig.end(), lt.pool_at.begin(), lt.pool_at.end());
        }
        sig.insert(sig.end(), bt.gmax_at.begin(), bt.gmax_at.end());
    }
    for (double v : tr.h1) sig.push_back(v > 0.0 ? 1u : 0u);
    return sig;
}

namespace {

struct Evaluation {
    double loss = 0.0;
    double acc = 0.0;
};

Evaluation evaluate(const ModelSpec& spec, const ModelParams& params, const Dataset& data) {
    Evaluation e;
    if (data.empty()) return e;
    std::size_t hits = 0;
    for (const auto& s : data) {
        const auto inf = forward(spec, params, s.frame);
        e.loss += loss_ce(inf.logits, s.label);
        if (inf.cls == static_cast<std::size_t>(s.label)) ++hits;
    }
    e.loss /= static_cast<double>(data.size());
    e.acc = static_cast<double>(hits) / static_cast<double>(data.size());
    return e;
}

}  // namespace

TrainResult train(const ModelSpec& spec, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg) {
    return train_from(spec, init_params(spec, cfg.seed), train_set, val_set, cfg);
}

TrainResult train_from(const ModelSpec& spec, ModelParams init, const Dataset& train_set,
                       const Dataset& val_set, const TrainConfig& cfg) {
    spec.validate();
    check_params(spec, init);
    if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    for (const auto* set : {&train_set, &val_set}) {
        for (const auto& s : *set) {
            if (s.label < 0 || s.label >= spec.classes) {
                throw std::invalid_argument("dataset label " + std::to_string(s.label) +
                                            " outside [0, " + std::to_string(spec.classes) + ")");
            }
        }
    }

    TrainResult result{std::move(init), {}};
    if (cfg.epochs > 0 && train_set.empty()) throw std::invalid_argument("empty training set");

    auto& params = result.params;
    ModelParams m = ModelParams::zeros_like(spec);
    ModelParams v = ModelParams::zeros_like(spec);
    auto rng = substream(cfg.seed, "batching");
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    std::int64_t step = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            std::vector<const Sample*> mb;
            mb.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) mb.push_back(&train_set[order[i]]);
            double loss = 0.0;
            const ModelParams g = backward_refs(spec, params, mb, &loss);
            if (!std::isfinite(loss)) {
                throw DivergenceError(epoch, "training diverged (non-finite loss) in epoch " +
                                                 std::to_string(epoch));
            }
            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            auto pt = params.tensors();
            auto mt = m.tensors();
            auto vt = v.tensors();
            const auto gt = g.tensors();
            for (std::size_t k = 0; k < pt.size(); ++k) {
                for (std::size_t i = 0; i < pt[k].size(); ++i) {
                    const double gi = gt[k][i];
                    mt[k][i] = cfg.beta1 * mt[k][i] + (1.0 - cfg.beta1) * gi;
                    vt[k][i] = cfg.beta2 * vt[k][i] + (1.0 - cfg.beta2) * gi * gi;
                    const double mh = mt[k][i] / bc1;
                    const double vh = vt[k][i] / bc2;
                    pt[k][i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
                }
            }
        }
        const auto tr = evaluate(spec, params, train_set);
        const auto va = evaluate(spec, params, val_set);
        if (!std::isfinite(tr.loss)) {
            throw DivergenceError(epoch, "training diverged (non-finite loss) in epoch " +
                                             std::to_string(epoch));
        }
        result.history.push_back({epoch, tr.loss, tr.acc, va.loss, va.acc});
    }
    return result;
}

ImportanceReport make_importance_report(std::vector<std::string> sensors,
                                        std::vector<double> alpha) {
    if (sensors.size() != alpha.size()) {
        throw std::invalid_argument("importance report: sensor/alpha length mismatch");
    }
    ImportanceReport r;
    r.sensors = std::move(sensors);
    r.alpha = std::move(alpha);
    r.weights = softmax(r.alpha);
    r.ranking.resize(r.alpha.size());
    std::iota(r.ranking.begin(), r.ranking.end(), 0);
    std::stable_sort(r.ranking.begin(), r.ranking.end(), [&r](std::size_t a, std::size_t b) {
        if (r.alpha[a] != r.alpha[b]) return r.alpha[a] > r.alpha[b];
        return r.sensors[a] < r.sensors[b];
    });
    return r;
}

ImportanceRun train_importance(const ModelSpec& spec, const Dataset& train_set,
                               const Dataset& val_set, const TrainConfig& cfg) {
    if (!spec.alpha_enabled) throw std::invalid_argument("train_importance needs alpha mixing enabled");
    ImportanceRun run;
    run.training = train(spec, train_set, val_set, cfg);
    std::vector<std::string> names;
    for (const auto& b : spec.branches) names.push_back(b.sensor);
    run.report = make_importance_report(std::move(names), run.training.params.alpha);
    return run;
}

std::vector<std::size_t> select_modalities(const ImportanceReport& report, int keep) {
    const auto n = static_cast<int>(report.ranking.size());
    if (keep < 1 || keep > n) {
        throw std::out_of_range("keep must be in [1, " + std::to_string(n) + "], got " +
                                std::to_string(keep));
    }
    std::vector<std::size_t> out(report.ranking.begin(),
                                 report.ranking.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(out.begin(), out.end());
    return out;
}

ModelSpec restrict_spec(const ModelSpec& spec, std::span<const std::size_t> keep) {
    ModelSpec out = spec;
    out.branches.clear();
    for (std::size_t i : keep) {
        if (i >= spec.branches.size()) throw std::out_of_range("restrict_spec: branch index");
        out.branches.push_back(spec.branches[i]);
    }
    out.alpha_enabled = false;
    out.validate();
    return out;
}

Dataset restrict_dataset(const Dataset& data, std::span<const std::size_t> keep) {
    Dataset out;
    out.reserve(data.size());
    for (const auto& s : data) {
        Sample r;
        r.label = s.label;
        for (std::size_t i : keep) r.frame.branches.push_back(s.frame.branches.at(i));
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace harsim
