#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slsim/ad_eigen.hpp"
#include "slsim/errors.hpp"
#include "slsim/image.hpp"
#include "slsim/scene.hpp"
#include "slsim/sensor.hpp"

namespace slsim {

enum class PostprocessMode { none, gaussian, conv2 };

// Angles cross module boundaries in degrees, internals run in radians.
inline constexpr double kDegToRad = 0.017453292519943295;

// Residual depth refiner architecture: 3 input planes (matched depth, ground
// truth depth, shadow factor) -> 32 5x5 filters + ReLU -> 1x1 collapse,
// added to the matched depth.
inline constexpr int kConvIn = 3;
inline constexpr int kConvFilters = 32;
inline constexpr int kConvKernel = 5;
inline constexpr int conv_param_count() {
    return kConvFilters * kConvIn * kConvKernel * kConvKernel // layer-1 weights
           + kConvFilters                                     // layer-1 bias
           + kConvFilters                                     // 1x1 weights
           + 1;                                               // output bias
}

// Flat layout of every optimizable quantity. Each parameter appears exactly
// once; optimizers and the gradient check walk this vector.
struct ParamLayout {
    size_t off_eta = 0, off_xi = 1, off_kappa = 2, off_beta = 3, off_mu = 4, off_sigma = 5;
    bool has_plane = false;
    size_t off_plane = 0; // z_mm, alpha_rad
    bool has_pose = false;
    size_t off_pose = 0; // tx, ty, tz (mm), rx, ry, rz (rad)
    bool has_pattern = false;
    int pattern_w = 0, pattern_h = 0, pattern_c = 0;
    size_t off_pattern = 0;
    bool has_conv = false;
    size_t off_conv = 0;
    size_t total = 6;

    std::string name_of(size_t index) const;
};

ParamLayout make_layout(const Scene& scene, const ImageD& pattern, bool with_conv);

// Gathers the current values of cfg/scene/pattern/conv into the flat vector.
std::vector<double> pack_params(const ParamLayout& layout, const SensorConfig& cfg,
                                const Scene& scene, const ImageD& pattern,
                                const std::vector<double>& conv_weights);

// Writes fitted flat values back into the owning structures.
void apply_params(const ParamLayout& layout, const std::vector<double>& flat, SensorConfig& cfg,
                  Scene& scene, ImageD& pattern, std::vector<double>& conv_weights);

// Scalar-typed view of the flat vector consumed by the pipeline. For
// S = ad::Var every entry becomes one tape leaf (in flat order), so adjoints
// line up with the flat vector index for index.
template <typename S>
struct SimParams {
    S emitter_intensity{}, shadow_bias{}, shadow_steepness{}, softargmax_beta{};
    S noise_mean{}, noise_std{};
    bool has_plane = false;
    S plane_z{}, plane_alpha{}; // radians
    bool has_pose = false;
    Vec3<S> pose_t, pose_r;     // mm, radians
    Image<S> pattern;
    std::vector<S> conv;
};

template <typename S>
SimParams<S> unpack_params(const ParamLayout& layout, const std::vector<double>& flat,
                           ad::Tape* tape, std::vector<int32_t>* leaf_ids) {
    if (flat.size() != layout.total) throw contract_error("unpack_params: size mismatch");
    size_t at = 0;
    auto next = [&]() -> S {
        double v = flat[at++];
        if constexpr (std::is_same_v<S, ad::Var>) {
            ad::Var var = ad::make_var(*tape, v);
            if (leaf_ids) leaf_ids->push_back(var.id);
            return var;
        } else {
            return v;
        }
    };
    SimParams<S> p;
    p.emitter_intensity = next();
    p.shadow_bias = next();
    p.shadow_steepness = next();
    p.softargmax_beta = next();
    p.noise_mean = next();
    p.noise_std = next();
    if (layout.has_plane) {
        p.has_plane = true;
        p.plane_z = next();
        p.plane_alpha = next();
    }
    if (layout.has_pose) {
        p.has_pose = true;
        for (int i = 0; i < 3; ++i) p.pose_t[i] = next();
        for (int i = 0; i < 3; ++i) p.pose_r[i] = next();
    }
    if (layout.has_pattern) {
        p.pattern = Image<S>(layout.pattern_w, layout.pattern_h, layout.pattern_c);
        for (auto& px : p.pattern.data) px = next();
    }
    if (layout.has_conv) {
        p.conv.reserve(conv_param_count());
        for (int i = 0; i < conv_param_count(); ++i) p.conv.push_back(next());
    }
    return p;
}

// adjoints is the full tape gradient; leaf_ids maps flat index -> leaf node.
std::vector<double> extract_gradient(const std::vector<double>& adjoints,
                                     const std::vector<int32_t>& leaf_ids);

// Expands optimizable-group names ("noise_std", "plane_alpha", "pose",
// "pattern", "conv", ...) into sorted flat indices; unknown names or groups
// absent from the layout are configuration errors.
std::vector<size_t> resolve_flags(const ParamLayout& layout,
                                  const std::vector<std::string>& names);

} // namespace slsim
