#pragma once

#include <utility>
#include <vector>

#include "slsim/image.hpp"
#include "slsim/scalar_ops.hpp"
#include "slsim/sensor.hpp"

namespace slsim {

// Matching scores over the valid output rect [y0,y1) x [x0,x1), label
// innermost. Labels are disparities d_min + j/n_sub in ascending order
// (n_sub interlaced sub-pixel references).
template <typename S>
struct CostVolume {
    int width = 0, height = 0;
    int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
    int d_min = 0, d_max = 0, n_sub = 1;
    std::vector<double> labels;
    std::vector<S> scores;

    int n_labels() const { return static_cast<int>(labels.size()); }
    size_t at(int y, int x, int j) const {
        return (static_cast<size_t>(y - y0) * (x1 - x0) + (x - x0)) * labels.size() + j;
    }
};

// Disparity/depth fields recovered by the soft block matcher. Pixels outside
// the valid rect hold zeros with valid = 0.
template <typename S>
struct DisparityMap {
    Image<S> disparity;   // px
    Image<S> depth;       // focal_px * baseline_mm / disparity, mm
    MaskImage valid;
    ImageD confidence;    // best raw matching score per pixel
    int d_min = 0, d_max = 0, n_sub = 1;
};

// Zero-normalized cross-correlation over the stacked w x w x C block, one
// score per integer shift of the single reference; labels are the integers
// [d_range.first, d_range.second].
template <typename S>
CostVolume<S> cost_volume(const Image<S>& capture, const Image<S>& reference,
                          const SensorConfig& cfg, std::pair<int, int> d_range);

// Temperature-beta softargmax over the labels of each valid pixel, with
// max-subtraction for stability; converts disparity to depth.
template <typename S>
DisparityMap<S> soft_disparity(const CostVolume<S>& volume, const S& beta,
                               const SensorConfig& cfg);

// Full matcher: n_sub interlaced references (from render_reference_patterns),
// joint ZNCC scores, softargmax readout. Row-parallel; results are bitwise
// independent of the thread count.
template <typename S>
DisparityMap<S> block_match(const Image<S>& capture, const std::vector<Image<S>>& refs,
                            const SensorConfig& cfg, const S& beta, int d_min, int d_max,
                            int threads);

// Splits the output rows into m strips (each processed with w rows of shared
// context) and matches them independently; bitwise identical to m = 1 by
// construction. Strip height below 2 * block_size is a configuration error.
template <typename S>
DisparityMap<S> strip_split_match(const Image<S>& capture, const std::vector<Image<S>>& refs,
                                  const SensorConfig& cfg, const S& beta, int d_min, int d_max,
                                  int m, int threads);

inline double disparity_to_depth(const SensorConfig& cfg, double d) {
    return cfg.focal_px * cfg.baseline_mm / d;
}

// Matched pixels whose best raw score stayed below threshold — textureless or
// decorrelated blocks whose soft disparity is not trustworthy.
template <typename S>
MaskImage low_confidence_mask(const DisparityMap<S>& map, double threshold) {
    MaskImage out(map.valid.width, map.valid.height, 1);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (map.valid.data[i] && map.confidence.data[i] < threshold) ? 1 : 0;
    return out;
}

} // namespace slsim
