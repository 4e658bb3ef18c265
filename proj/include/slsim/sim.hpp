#pragma once

#include <cstdint>
#include <span>

#include "slsim/matcher.hpp"
#include "slsim/params.hpp"
#include "slsim/render.hpp"
#include "slsim/scene.hpp"
#include "slsim/sensor.hpp"

namespace slsim {

struct SimOptions {
    PostprocessMode post = PostprocessMode::none;
    bool apply_noise = true;
    uint64_t noise_seed = 1;
    // Matching disparity range; entries < 0 fall back to the range implied by
    // the configured working depths.
    int d_min = -1;
    int d_max = -1;
    int threads = 1;
};

template <typename S>
struct SimResult {
    RenderResult<S> render;
    Image<S> capture;  // rendered IR image after sensor noise
    DisparityMap<S> match;
    Image<S> depth;    // final depth after the selected post-process
};

// Full forward pass: IR capture, sensor noise, block matching against the
// shifted reference stack, optional depth post-processing. Recording scalars
// carry derivatives end to end.
template <typename S>
SimResult<S> simulate(const SensorConfig& cfg, const Scene& scene, const SimParams<S>& par,
                      const SimOptions& opt);

// Disparity label range covering the depth extents of all scenes (scenes that
// miss every center ray contribute nothing), widened by margin labels and
// clamped to the configured working range. Resolved once per fit so the label
// set stays fixed across iterations.
std::pair<int, int> resolve_scene_disparity_range(const SensorConfig& cfg,
                                                  std::span<const Scene> scenes, int margin);

} // namespace slsim
