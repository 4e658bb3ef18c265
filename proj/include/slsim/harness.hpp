#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slsim/fit.hpp"
#include "slsim/loss.hpp"
#include "slsim/matcher.hpp"
#include "slsim/params.hpp"
#include "slsim/scene.hpp"
#include "slsim/sensor.hpp"
#include "slsim/sim.hpp"

namespace slsim {

// ---- analytic-vs-finite-difference gradient audit --------------------------

struct GradCheckEntry {
    size_t index = 0;
    std::string name;
    double value = 0.0;    // parameter value the derivative was taken at
    double analytic = 0.0; // reverse-mode derivative
    double fd = 0.0;       // central finite difference, full re-simulation
    double rel_err = 0.0;  // |analytic - fd| / max(1, |analytic|, |fd|)
};

struct GradCheckReport {
    std::vector<GradCheckEntry> rows;
    double max_rel_err = 0.0;
};

struct GradCheckProblem {
    SensorConfig cfg;
    Scene scene;
    ImageD pattern;
    std::vector<double> conv_weights; // consumed when sim.post == conv2
    ImageD ref_depth;                 // constant target for the depth loss
    MaskImage ref_valid;
    LossSpec loss;
    SimOptions sim;
    // Extra mean-capture term keeping a direct (non-normalized) path from
    // emission parameters into the objective.
    double capture_weight = 0.01;
};

// Scalar objective both sides differentiate: depth loss against the fixed
// reference plus capture_weight * mean hit-pixel intensity.
template <typename S>
S gradcheck_objective(const GradCheckProblem& prob, const ParamLayout& layout,
                      const SimParams<S>& par);

// Central-difference step size per parameter group.
double fd_step_for(const ParamLayout& layout, size_t index, double value);

// Compares reverse-mode derivatives against central differences of the full
// double-precision pipeline for the given flat indices.
GradCheckReport gradient_check(const GradCheckProblem& prob, const std::vector<size_t>& indices);

// ---- depth error statistics over plane sweeps -------------------------------

struct NoiseStudyCell {
    double z_mm = 0.0;
    double alpha_deg = 0.0;
    double std_err_mm = 0.0; // over all valid pixels of all samples
    long n_pixels = 0;
    std::vector<double> bin_std; // radial bins, image center origin
    std::vector<long> bin_count;
};

struct NoiseStudyResult {
    std::vector<NoiseStudyCell> cells;
    int n_bins = 0;
    double r_max_px = 0.0;
};

// Renders `samples` noisy captures of a fronto-parallel-or-tilted plane per
// (z, alpha) grid cell, matches them, and accumulates depth error spread
// totals plus a radial profile (bin = floor(r / r_max * n_bins)).
NoiseStudyResult noise_study(const SensorConfig& cfg, const std::vector<double>& z_mm,
                             const std::vector<double>& alpha_deg, int samples, int n_bins,
                             uint64_t seed, int threads);

// CSV rows: z_mm, alpha_deg, r_bin_px, std_err_mm, n_pixels. Bin rows carry
// the bin center radius; the whole-image row uses r_bin_px = -1. Empty bins
// leave std_err_mm blank.
void write_noise_study_csv(const NoiseStudyResult& res, const std::string& path);

// ---- plain two-image matching ----------------------------------------------

// Matches an externally supplied image pair (no sub-pixel reference stack):
// integer labels over [d_min, d_max] from the configured working range unless
// overridden.
DisparityMap<double> match_images(const ImageD& capture, const ImageD& reference,
                                  const SensorConfig& cfg, int d_min, int d_max, int threads);

} // namespace slsim
