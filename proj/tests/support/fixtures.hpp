#pragma once

// Random tiny models and frames shared by the unit and acceptance tests.

#include <cstdint>
#include <random>
#include <vector>

#include "harsim/netgraph.hpp"
#include "harsim/trainer.hpp"

namespace fixtures {

struct TinyOptions {
    int min_branches = 1;
    int max_branches = 3;
    bool allow_2d = true;
    bool allow_pool = true;
    bool allow_alpha = true;
    bool force_alpha = false;
};

harsim::ModelSpec random_spec(std::mt19937_64& rng, const TinyOptions& opt = {});
harsim::ModelParams random_params(const harsim::ModelSpec& spec, std::mt19937_64& rng, double scale = 0.8);
/// Values uniform in [-1, 1] shaped (timesteps, 1, channels) per branch.
harsim::Frame random_frame(const harsim::ModelSpec& spec, std::mt19937_64& rng);
harsim::Frame zero_frame(const harsim::ModelSpec& spec);
harsim::Dataset random_batch(const harsim::ModelSpec& spec, std::mt19937_64& rng, std::size_t n);

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  ///< coordinates whose +-h probe crossed a kink
};

/// Central differences on every parameter against backward(); the relative
/// error is |a - n| / max(|a|, |n|, floor).
GradCheck gradient_check(const harsim::ModelSpec& spec, const harsim::ModelParams& params,
                         const harsim::Dataset& batch, double h = 1e-5, double floor = 1e-6);

}  // namespace fixtures
