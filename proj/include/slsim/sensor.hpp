#pragma once

#include <string>
#include <utility>
#include <vector>

namespace slsim {

// Static description of one emitter+camera rig and the matching/noise
// settings tied to it. Angles and pixel coordinates follow the camera frame:
// x right, y down, z forward; the emitter sits at (+baseline_mm, 0, 0) with
// parallel axes and shares the camera intrinsics, so epipolar lines are
// horizontal and disparity = focal_px * baseline_mm / depth.
struct SensorConfig {
    int width = 640;
    int height = 480;
    double focal_px = 572.41;
    double baseline_mm = 75.0;
    double z_min_mm = 400.0;
    double z_max_mm = 4000.0;
    int block_size = 9;               // odd matching window side, px
    double emitter_intensity = 1.5e6; // eta_c in the 1/z^2 falloff
    double shadow_bias_mm = 5.0;      // xi, acne margin of the soft shadow test
    double shadow_steepness = 1.0;    // kappa, sigmoid slope per mm of depth gap
    double softargmax_beta = 15.0;    // temperature of the disparity softargmax
    int subpixel_levels = 2;          // n_sub shifted references per integer disparity
    double noise_mean = 0.0;          // mu_n, additive capture-noise offset
    double noise_std = 0.01;          // sigma_n, capture-noise scale
    int supersample = 2;              // s x s primary rays per pixel
};

// Throws config_error on any violated invariant, including the derived
// disparity range exceeding the image width.
void validate(const SensorConfig& cfg);

// Built-in rigs. Throws config_error for unknown names.
SensorConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Integer disparity search range [d_min, d_max] for depths in
// [z_lower, z_upper]; the endpoints are rounded to the nearest integer.
// The one-argument form uses the configured working range.
std::pair<int, int> disparity_range(const SensorConfig& cfg, double z_lower, double z_upper);
std::pair<int, int> disparity_range(const SensorConfig& cfg);

// key = value text form; reading starts from `base` so a file may override
// any subset of keys. Serialization round-trips every field bit-exactly.
SensorConfig read_config(const std::string& path, const SensorConfig& base = SensorConfig{});
void write_config(const SensorConfig& cfg, const std::string& path);

} // namespace slsim
