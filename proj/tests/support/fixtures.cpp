#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fixtures {

using namespace harsim;

namespace {

int pick(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

bool coin(std::mt19937_64& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

// Time (and for 2D, channel) extent needed after three layers with these kernels.
int needed(const std::array<ConvLayerSpec, 3>& layers) {
    int len = 1;
    for (int l = 2; l >= 0; --l) {
        const int k = layers[l].kernel;
        if (layers[l].pool) len *= k;
        len += k - 1;
    }
    return len;
}

}  // namespace

ModelSpec random_spec(std::mt19937_64& rng, const TinyOptions& opt) {
    ModelSpec spec;
    spec.classes = pick(rng, 2, 4);
    spec.hidden = pick(rng, 2, 6);
    spec.alpha_enabled = opt.force_alpha || (opt.allow_alpha && coin(rng));
    const int nb = pick(rng, spec.alpha_enabled ? std::max(2, opt.min_branches) : opt.min_branches,
                        std::max(opt.max_branches, spec.alpha_enabled ? 2 : 1));
    const int shared_f = pick(rng, 1, 4);
    for (int b = 0; b < nb; ++b) {
        BranchSpec br;
        br.sensor = "s" + std::to_string(b);
        br.dim = opt.allow_2d && coin(rng, 0.25) ? ConvDim::k2D : ConvDim::k1D;
        for (int l = 0; l < 3; ++l) {
            br.layers[l].filters = pick(rng, 1, 4);
            br.layers[l].kernel = pick(rng, 1, 3);
            br.layers[l].pool = opt.allow_pool && br.layers[l].kernel > 1 && coin(rng, 0.25);
        }
        if (spec.alpha_enabled) br.layers[2].filters = shared_f;
        const int need = needed(br.layers);
        br.timesteps = need + pick(rng, 0, 5);
        br.channels = br.dim == ConvDim::k2D ? need + pick(rng, 0, 3) : pick(rng, 1, 3);
        spec.branches.push_back(br);
    }
    spec.validate();
    return spec;
}

ModelParams random_params(const ModelSpec& spec, std::mt19937_64& rng, double scale) {
    ModelParams p = ModelParams::zeros_like(spec);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto t : p.tensors())
        for (double& v : t) v = u(rng);
    return p;
}

Frame random_frame(const ModelSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Frame f;
    for (const auto& b : spec.branches) {
        Tensor t(b.timesteps, 1, b.channels);
        for (double& v : t.storage()) v = u(rng);
        f.branches.push_back(std::move(t));
    }
    return f;
}

Frame zero_frame(const ModelSpec& spec) {
    Frame f;
    for (const auto& b : spec.branches) f.branches.emplace_back(b.timesteps, 1, b.channels);
    return f;
}

Dataset random_batch(const ModelSpec& spec, std::mt19937_64& rng, std::size_t n) {
    Dataset d;
    for (std::size_t i = 0; i < n; ++i)
        d.push_back({random_frame(spec, rng), pick(rng, 0, spec.classes - 1)});
    return d;
}

GradCheck gradient_check(const ModelSpec& spec, const ModelParams& params, const Dataset& batch, double h,
                         double floor) {
    GradCheck out;
    const ModelParams grad = backward(spec, params, batch);
    auto signatures = [&](const ModelParams& p) {
        std::vector<std::vector<std::uint32_t>> s;
        for (const auto& smp : batch) s.push_back(activation_signature(spec, p, smp.frame));
        return s;
    };
    const auto base = signatures(params);
    ModelParams probe = params;
    auto pt = probe.tensors();
    auto gt = grad.tensors();
    for (std::size_t t = 0; t < pt.size(); ++t) {
        for (std::size_t i = 0; i < pt[t].size(); ++i) {
            const double keep = pt[t][i];
            pt[t][i] = keep + h;
            const double up = mean_loss(spec, probe, batch);
            const bool smooth_up = signatures(probe) == base;
            pt[t][i] = keep - h;
            const double down = mean_loss(spec, probe, batch);
            const bool smooth_down = signatures(probe) == base;
            pt[t][i] = keep;
            if (!smooth_up || !smooth_down) {
                ++out.skipped;
                continue;
            }
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = gt[t][i];
            const double rel =
                std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), floor});
            out.max_rel_error = std::max(out.max_rel_error, rel);
            ++out.checked;
        }
    }
    return out;
}

}  // namespace fixtures
