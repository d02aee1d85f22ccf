#include "harsim/netgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "harsim/errors.hpp"

namespace harsim {

int ModelSpec::dense_inputs() const {
    if (branches.empty()) return 0;
    if (fusion == FusionMode::kData || alpha_enabled) return branches.front().features();
    int total = 0;
    for (const auto& b : branches) total += b.features();
    return total;
}

void ModelSpec::validate() const {
    if (branches.empty()) throw std::invalid_argument("model has no branches");
    if (classes < 2) throw std::invalid_argument("model needs at least 2 classes");
    if (hidden < 1) throw std::invalid_argument("dense hidden width must be >= 1");
    if (fusion == FusionMode::kData && branches.size() != 1) {
        throw std::invalid_argument("data-fusion model must have exactly one branch");
    }
    if (alpha_enabled && fusion != FusionMode::kFeature) {
        throw std::invalid_argument("importance mixing requires feature fusion");
    }
    for (const auto& b : branches) {
        if (alpha_enabled && b.features() != branches.front().features()) {
            throw std::invalid_argument("importance mixing requires equal feature width");
        }
        if (b.channels < 1 || b.timesteps < 1) {
            throw std::invalid_argument("branch '" + b.sensor + "' has an empty input");
        }
        for (const auto& l : b.layers) {
            if (l.filters < 1 || l.kernel < 1) {
                throw std::invalid_argument("branch '" + b.sensor + "' has an empty conv layer");
            }
        }
        branch_geometry(b);
    }
}

std::array<ConvGeometry, 3> branch_geometry(const BranchSpec& branch) {
    std::array<ConvGeometry, 3> geo{};
    const bool two_d = branch.dim == ConvDim::k2D;
    std::size_t t = static_cast<std::size_t>(branch.timesteps);
    std::size_t s = two_d ? static_cast<std::size_t>(branch.channels) : 1;
    std::size_t c = two_d ? 1 : static_cast<std::size_t>(branch.channels);
    for (std::size_t l = 0; l < 3; ++l) {
        const auto& ls = branch.layers[l];
        auto& g = geo[l];
        g.in_t = t;
        g.in_s = s;
        g.in_c = c;
        g.kt = static_cast<std::size_t>(ls.kernel);
        g.ks = two_d ? static_cast<std::size_t>(ls.kernel) : 1;
        g.filters = static_cast<std::size_t>(ls.filters);
        if (t < g.kt || s < g.ks) {
            throw std::invalid_argument("branch '" + branch.sensor + "' layer " +
                                        std::to_string(l + 1) + ": input " + std::to_string(t) +
                                        "x" + std::to_string(s) + " shorter than kernel");
        }
        g.out_t = t - g.kt + 1;
        g.out_s = s - g.ks + 1;
        g.pool = ls.pool;
        g.pt = ls.pool ? g.kt : 1;
        g.ps = ls.pool ? g.ks : 1;
        g.pooled_t = g.out_t / g.pt;
        g.pooled_s = g.out_s / g.ps;
        if (g.pooled_t == 0 || g.pooled_s == 0) {
            throw std::invalid_argument("branch '" + branch.sensor + "' layer " +
                                        std::to_string(l + 1) + ": pooling empties the output");
        }
        t = g.pooled_t;
        s = g.pooled_s;
        c = g.filters;
    }
    return geo;
}

ModelParams ModelParams::zeros_like(const ModelSpec& spec) {
    ModelParams p;
    p.conv.resize(spec.branches.size());
    for (std::size_t b = 0; b < spec.branches.size(); ++b) {
        const auto geo = branch_geometry(spec.branches[b]);
        for (std::size_t l = 0; l < 3; ++l) p.conv[b][l].assign(geo[l].weight_count(), 0.0);
    }
    const auto in = static_cast<std::size_t>(spec.dense_inputs());
    const auto h = static_cast<std::size_t>(spec.hidden);
    const auto c = static_cast<std::size_t>(spec.classes);
    p.dense[0].assign(in * h, 0.0);
    p.dense[1].assign(h * c, 0.0);
    if (spec.alpha_enabled) p.alpha.assign(spec.branches.size(), 0.0);
    return p;
}

std::vector<std::span<double>> ModelParams::tensors() {
    std::vector<std::span<double>> out;
    for (auto& branch : conv) {
        for (auto& w : branch) out.emplace_back(w);
    }
    out.emplace_back(dense[0]);
    out.emplace_back(dense[1]);
    if (!alpha.empty()) out.emplace_back(alpha);
    return out;
}

std::vector<std::span<const double>> ModelParams::tensors() const {
    std::vector<std::span<const double>> out;
    for (const auto& branch : conv) {
        for (const auto& w : branch) out.emplace_back(w);
    }
    out.emplace_back(dense[0]);
    out.emplace_back(dense[1]);
    if (!alpha.empty()) out.emplace_back(alpha);
    return out;
}

std::size_t ModelParams::count() const {
    std::size_t n = 0;
    for (const auto& t : tensors()) n += t.size();
    return n;
}

void check_params(const ModelSpec& spec, const ModelParams& params) {
    const ModelParams ref = ModelParams::zeros_like(spec);
    if (params.conv.size() != ref.conv.size()) {
        throw ShapeError("parameter branch count " + std::to_string(params.conv.size()) +
                         " does not match spec (" + std::to_string(ref.conv.size()) + ")");
    }
    for (std::size_t b = 0; b < ref.conv.size(); ++b) {
        for (std::size_t l = 0; l < 3; ++l) {
            if (params.conv[b][l].size() != ref.conv[b][l].size()) {
                throw ShapeError("conv weights of branch " + std::to_string(b) + " layer " +
                                 std::to_string(l + 1) + " have the wrong size");
            }
        }
    }
    for (std::size_t d = 0; d < 2; ++d) {
        if (params.dense[d].size() != ref.dense[d].size()) {
            throw ShapeError("dense layer " + std::to_string(d + 1) + " has the wrong size");
        }
    }
    if (params.alpha.size() != ref.alpha.size()) {
        throw ShapeError("importance vector length does not match branch count");
    }
}

Tensor conv_forward(const Tensor& input, std::span<const double> weights, std::size_t kt,
                    std::size_t ks, std::size_t filters, bool relu,
                    std::optional<PoolWindow> pool) {
    const std::size_t cin = input.channels();
    if (kt == 0 || ks == 0 || filters == 0) throw ShapeError("conv: empty kernel");
    if (input.time() < kt || input.space() < ks) {
        throw ShapeError("conv: input " + std::to_string(input.time()) + "x" +
                         std::to_string(input.space()) + " shorter than kernel");
    }
    if (weights.size() != kt * ks * cin * filters) {
        throw ShapeError("conv: weight count " + std::to_string(weights.size()) +
                         " does not match kernel " + std::to_string(kt * ks * cin * filters));
    }
    const std::size_t out_t = input.time() - kt + 1;
    const std::size_t out_s = input.space() - ks + 1;
    Tensor out(out_t, out_s, filters);
    const auto& x = input.storage();
    auto& y = out.storage();
    for (std::size_t t = 0; t < out_t; ++t) {
        for (std::size_t s = 0; s < out_s; ++s) {
            double* acc = &y[(t * out_s + s) * filters];
            for (std::size_t dt = 0; dt < kt; ++dt) {
                for (std::size_t ds = 0; ds < ks; ++ds) {
                    const double* xr = &x[((t + dt) * input.space() + s + ds) * cin];
                    const double* wr = &weights[(dt * ks + ds) * cin * filters];
                    for (std::size_t c = 0; c < cin; ++c) {
                        const double xv = xr[c];
                        const double* wc = wr + c * filters;
                        for (std::size_t f = 0; f < filters; ++f) acc[f] += xv * wc[f];
                    }
                }
            }
        }
    }
    if (relu) {
        for (auto& v : y) v = std::max(v, 0.0);
    }
    if (!pool) return out;

    const std::size_t pt = pool->t, ps = pool->s;
    if (pt == 0 || ps == 0 || out_t < pt || out_s < ps) throw ShapeError("conv: pool window too large");
    Tensor pooled(out_t / pt, out_s / ps, filters, -std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < pooled.time() * pt; ++t) {
        for (std::size_t s = 0; s < pooled.space() * ps; ++s) {
            for (std::size_t f = 0; f < filters; ++f) {
                double& m = pooled.at(t / pt, s / ps, f);
                m = std::max(m, out.at(t, s, f));
            }
        }
    }
    return pooled;
}

Tensor global_max_pool(const Tensor& input) {
    if (input.empty()) throw ShapeError("global max-pool of an empty tensor");
    Tensor out(1, 1, input.channels(), -std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < input.time(); ++t) {
        for (std::size_t s = 0; s < input.space(); ++s) {
            for (std::size_t c = 0; c < input.channels(); ++c) {
                out.at(0, 0, c) = std::max(out.at(0, 0, c), input.at(t, s, c));
            }
        }
    }
    return out;
}

std::vector<double> softmax(std::span<const double> values) {
    std::vector<double> out(values.begin(), values.end());
    if (out.empty()) return out;
    const double m = *std::max_element(out.begin(), out.end());
    double sum = 0.0;
    for (auto& v : out) {
        v = std::exp(v - m);
        sum += v;
    }
    for (auto& v : out) v /= sum;
    return out;
}

std::vector<double> mix_features(const std::vector<std::vector<double>>& features,
                                 std::span<const double> alpha) {
    if (features.empty() || features.size() != alpha.size()) {
        throw ShapeError("mix_features: " + std::to_string(features.size()) + " features vs " +
                         std::to_string(alpha.size()) + " importance weights");
    }
    const std::size_t f = features.front().size();
    const auto w = softmax(alpha);
    std::vector<double> out(f, 0.0);
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].size() != f) throw ShapeError("mix_features: feature widths differ");
        for (std::size_t j = 0; j < f; ++j) out[j] += w[i] * features[i][j];
    }
    return out;
}

Tensor branch_input(const BranchSpec& branch, const Tensor& frame_tensor) {
    const auto t = static_cast<std::size_t>(branch.timesteps);
    const auto c = static_cast<std::size_t>(branch.channels);
    if (frame_tensor.time() != t || frame_tensor.space() != 1 || frame_tensor.channels() != c) {
        throw ShapeError("branch '" + branch.sensor + "' expects " + std::to_string(t) + "x" +
                         std::to_string(c) + " input, got " +
                         std::to_string(frame_tensor.time()) + "x" +
                         std::to_string(frame_tensor.space()) + "x" +
                         std::to_string(frame_tensor.channels()));
    }
    if (branch.dim == ConvDim::k2D) return frame_tensor.reshaped(t, c, 1);
    return frame_tensor;
}

std::vector<double> branch_features(const BranchSpec& branch,
                                    const std::array<std::vector<double>, 3>& weights,
                                    const Tensor& frame_tensor) {
    const auto geo = branch_geometry(branch);
    Tensor x = branch_input(branch, frame_tensor);
    for (std::size_t l = 0; l < 3; ++l) {
        const auto& g = geo[l];
        std::optional<PoolWindow> pool;
        if (g.pool) pool = PoolWindow{g.pt, g.ps};
        x = conv_forward(x, weights[l], g.kt, g.ks, g.filters, true, pool);
    }
    return global_max_pool(x).storage();
}

namespace {

std::vector<double> dense(std::span<const double> in, std::span<const double> w, std::size_t out,
                          bool relu) {
    std::vector<double> y(out, 0.0);
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double xv = in[i];
        for (std::size_t o = 0; o < out; ++o) y[o] += xv * w[i * out + o];
    }
    if (relu) {
        for (auto& v : y) v = std::max(v, 0.0);
    }
    return y;
}

}  // namespace

Inference forward(const ModelSpec& spec, const ModelParams& params, const Frame& frame) {
    check_params(spec, params);
    if (frame.branches.size() != spec.branches.size()) {
        throw ShapeError("frame has " + std::to_string(frame.branches.size()) +
                         " branch tensors, model expects " + std::to_string(spec.branches.size()));
    }
    std::vector<std::vector<double>> feats;
    feats.reserve(spec.branches.size());
    for (std::size_t b = 0; b < spec.branches.size(); ++b) {
        feats.push_back(branch_features(spec.branches[b], params.conv[b], frame.branches[b]));
    }
    std::vector<double> h0;
    if (spec.alpha_enabled) {
        h0 = mix_features(feats, params.alpha);
    } else {
        for (const auto& f : feats) h0.insert(h0.end(), f.begin(), f.end());
    }
    const auto h1 = dense(h0, params.dense[0], static_cast<std::size_t>(spec.hidden), true);
    Inference inf;
    inf.logits = dense(h1, params.dense[1], static_cast<std::size_t>(spec.classes), false);
    inf.cls = argmax(std::span<const double>(inf.logits));
    return inf;
}

std::int64_t count_params(const ModelSpec& spec) {
    std::int64_t n = 0;
    for (const auto& b : spec.branches) {
        for (const auto& g : branch_geometry(b)) n += static_cast<std::int64_t>(g.weight_count());
    }
    n += static_cast<std::int64_t>(spec.dense_inputs()) * spec.hidden;
    n += static_cast<std::int64_t>(spec.hidden) * spec.classes;
    if (spec.alpha_enabled) n += static_cast<std::int64_t>(spec.branches.size());
    return n;
}

Frame normalize_inputs(const std::vector<Tensor>& raw, const std::vector<SensorRange>& stats) {
    if (raw.size() != stats.size()) {
        throw ShapeError("normalize_inputs: " + std::to_string(raw.size()) + " tensors vs " +
                         std::to_string(stats.size()) + " ranges");
    }
    Frame out;
    out.branches.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto& r = stats[i];
        if (!(r.max > r.min)) {
            throw ValidationError("degenerate normalization range for channel group '" + r.sensor +
                                  "' (min == max)");
        }
        Tensor t = raw[i];
        const double scale = 2.0 / (r.max - r.min);
        for (auto& v : t.storage()) v = std::clamp((v - r.min) * scale - 1.0, -1.0, 1.0);
        out.branches.push_back(std::move(t));
    }
    return out;
}

Frame fuse_channels(const Frame& frame) {
    if (frame.branches.empty()) throw ShapeError("fuse_channels: empty frame");
    const std::size_t t = frame.branches.front().time();
    std::size_t total = 0;
    for (const auto& b : frame.branches) {
        if (b.time() != t || b.space() != 1) {
            throw ShapeError("fuse_channels: branch windows must share one timestep count");
        }
        total += b.channels();
    }
    Tensor fused(t, 1, total);
    for (std::size_t k = 0; k < t; ++k) {
        std::size_t off = 0;
        for (const auto& b : frame.branches) {
            for (std::size_t c = 0; c < b.channels(); ++c) fused.at(k, 0, off + c) = b.at(k, 0, c);
            off += b.channels();
        }
    }
    Frame out;
    out.branches.push_back(std::move(fused));
    return out;
}

}  // namespace harsim
