#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "slsim/adam.hpp"
#include "slsim/loss.hpp"
#include "slsim/params.hpp"
#include "slsim/scene.hpp"
#include "slsim/sensor.hpp"
#include "slsim/sim.hpp"

namespace slsim {

// One observed capture: the scene it was taken of, the measured depth map,
// and the noise stream that produced it. Fitting replays the same stream so
// noise realizations cancel at the true parameters.
struct FitScene {
    Scene scene;
    ImageD observed_depth;
    MaskImage observed_valid;
    uint64_t noise_seed = 1;
};

struct FitOptions {
    LossSpec loss;
    AdamConfig adam;
    int iterations = 100;
    std::vector<std::string> flags; // optimizable groups; see resolve_flags
    SimOptions sim;                 // post mode, threads, d range overrides
    // Projection bounds applied to flagged entries after each step (used by
    // pattern fitting); NaN disables a bound.
    double clamp_lo = std::numeric_limits<double>::quiet_NaN();
    double clamp_hi = std::numeric_limits<double>::quiet_NaN();
};

struct FitResult {
    ParamLayout layout;
    std::vector<double> params;      // final flat values
    std::vector<double> best_params; // lowest-loss iterate
    double best_loss = 0.0;
    std::vector<double> loss_trace;  // one entry per evaluated iteration
    bool diverged = false;           // stopped on non-finite loss/gradient
    std::string stop_reason;         // "iterations", "non_finite", ...
};

// Adjusts the flagged parameter groups to reproduce the observed depth maps.
// iterations == 0 evaluates the loss once and returns it as a length-1 trace.
FitResult fit_params(const SensorConfig& cfg, const std::vector<FitScene>& scenes,
                     const ImageD& pattern, const std::vector<double>& conv_weights,
                     const FitOptions& opt);

// Plane tilt recovery: starting from the scene's tilt angle, minimizes the L1
// distance between the simulated depth map and the noiseless ground-truth
// depth of the level plane (the pose being recovered), optimizing only the
// tilt. Stops early if the plane leaves the frame or folds past vertical.
struct PoseFitResult {
    std::vector<double> alpha_trace_deg; // value entering each iteration
    std::vector<double> loss_trace;
    double final_alpha_deg = 0.0;
    bool aborted = false;
    std::string stop_reason;
};

PoseFitResult fit_plane_tilt(const SensorConfig& cfg, const Scene& scene, const ImageD& pattern,
                             const AdamConfig& adam, int iterations, const SimOptions& sim);

// Self-supervised pattern refinement with projection onto [0, value_max].
// energy_trace records each channel's share of total pattern mass.
struct PatternFitResult {
    ImageD pattern;
    std::vector<std::array<double, 3>> energy_trace;
    std::vector<double> loss_trace;
    bool diverged = false;
};

PatternFitResult fit_pattern(const SensorConfig& cfg, const Scene& scene, const ImageD& pattern0,
                             const AdamConfig& adam, int iterations, double value_max,
                             const SimOptions& sim);

} // namespace slsim
