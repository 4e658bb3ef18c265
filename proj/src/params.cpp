#include "slsim/params.hpp"

#include <algorithm>
#include <cmath>

namespace slsim {

std::string ParamLayout::name_of(size_t index) const {
    switch (index) {
        case 0: return "emitter_intensity";
        case 1: return "shadow_bias_mm";
        case 2: return "shadow_steepness";
        case 3: return "softargmax_beta";
        case 4: return "noise_mean";
        case 5: return "noise_std";
        default: break;
    }
    if (has_plane && index >= off_plane && index < off_plane + 2)
        return index == off_plane ? "plane_z_mm" : "plane_alpha_rad";
    if (has_pose && index >= off_pose && index < off_pose + 6) {
        static const char* names[6] = {"pose_tx_mm", "pose_ty_mm", "pose_tz_mm",
                                       "pose_rx_rad", "pose_ry_rad", "pose_rz_rad"};
        return names[index - off_pose];
    }
    if (has_pattern && index >= off_pattern &&
        index < off_pattern + static_cast<size_t>(pattern_w) * pattern_h * pattern_c) {
        size_t i = index - off_pattern;
        int c = static_cast<int>(i % pattern_c);
        int x = static_cast<int>((i / pattern_c) % pattern_w);
        int y = static_cast<int>(i / pattern_c / pattern_w);
        return "pattern[" + std::to_string(y) + "," + std::to_string(x) + "," +
               std::to_string(c) + "]";
    }
    if (has_conv && index >= off_conv && index < off_conv + conv_param_count()) {
        size_t i = index - off_conv;
        size_t w1 = static_cast<size_t>(kConvFilters) * kConvIn * kConvKernel * kConvKernel;
        if (i < w1) return "conv.w1[" + std::to_string(i) + "]";
        i -= w1;
        if (i < kConvFilters) return "conv.b1[" + std::to_string(i) + "]";
        i -= kConvFilters;
        if (i < kConvFilters) return "conv.w2[" + std::to_string(i) + "]";
        return "conv.b2";
    }
    return "param[" + std::to_string(index) + "]";
}

ParamLayout make_layout(const Scene& scene, const ImageD& pattern, bool with_conv) {
    ParamLayout layout;
    size_t at = 6;
    if (scene.plane) {
        layout.has_plane = true;
        layout.off_plane = at;
        at += 2;
    }
    if (scene.optimizable_object() >= 0) {
        layout.has_pose = true;
        layout.off_pose = at;
        at += 6;
    }
    if (!pattern.empty()) {
        layout.has_pattern = true;
        layout.pattern_w = pattern.width;
        layout.pattern_h = pattern.height;
        layout.pattern_c = pattern.channels;
        layout.off_pattern = at;
        at += pattern.size();
    }
    if (with_conv) {
        layout.has_conv = true;
        layout.off_conv = at;
        at += conv_param_count();
    }
    layout.total = at;
    return layout;
}

std::vector<double> pack_params(const ParamLayout& layout, const SensorConfig& cfg,
                                const Scene& scene, const ImageD& pattern,
                                const std::vector<double>& conv_weights) {
    std::vector<double> flat(layout.total, 0.0);
    flat[layout.off_eta] = cfg.emitter_intensity;
    flat[layout.off_xi] = cfg.shadow_bias_mm;
    flat[layout.off_kappa] = cfg.shadow_steepness;
    flat[layout.off_beta] = cfg.softargmax_beta;
    flat[layout.off_mu] = cfg.noise_mean;
    flat[layout.off_sigma] = cfg.noise_std;
    if (layout.has_plane) {
        flat[layout.off_plane] = scene.plane->z_mm;
        flat[layout.off_plane + 1] = scene.plane->alpha_deg * kDegToRad;
    }
    if (layout.has_pose) {
        const MeshObject& obj = scene.objects[scene.optimizable_object()];
        for (int i = 0; i < 3; ++i) flat[layout.off_pose + i] = obj.translation[i];
        for (int i = 0; i < 3; ++i) flat[layout.off_pose + 3 + i] = obj.rotation_deg[i] * kDegToRad;
    }
    if (layout.has_pattern) {
        if (pattern.size() != static_cast<size_t>(layout.pattern_w) * layout.pattern_h * layout.pattern_c)
            throw contract_error("pack_params: pattern shape changed");
        std::copy(pattern.data.begin(), pattern.data.end(), flat.begin() + layout.off_pattern);
    }
    if (layout.has_conv) {
        if (conv_weights.size() != static_cast<size_t>(conv_param_count()))
            throw contract_error("pack_params: conv weight count mismatch");
        std::copy(conv_weights.begin(), conv_weights.end(), flat.begin() + layout.off_conv);
    }
    return flat;
}

void apply_params(const ParamLayout& layout, const std::vector<double>& flat, SensorConfig& cfg,
                  Scene& scene, ImageD& pattern, std::vector<double>& conv_weights) {
    if (flat.size() != layout.total) throw contract_error("apply_params: size mismatch");
    cfg.emitter_intensity = flat[layout.off_eta];
    cfg.shadow_bias_mm = flat[layout.off_xi];
    cfg.shadow_steepness = flat[layout.off_kappa];
    cfg.softargmax_beta = flat[layout.off_beta];
    cfg.noise_mean = flat[layout.off_mu];
    cfg.noise_std = flat[layout.off_sigma];
    if (layout.has_plane) {
        scene.plane->z_mm = flat[layout.off_plane];
        scene.plane->alpha_deg = flat[layout.off_plane + 1] / kDegToRad;
    }
    if (layout.has_pose) {
        MeshObject& obj = scene.objects[scene.optimizable_object()];
        for (int i = 0; i < 3; ++i) obj.translation[i] = flat[layout.off_pose + i];
        for (int i = 0; i < 3; ++i) obj.rotation_deg[i] = flat[layout.off_pose + 3 + i] / kDegToRad;
    }
    if (layout.has_pattern)
        std::copy(flat.begin() + layout.off_pattern, flat.begin() + layout.off_pattern + pattern.size(),
                  pattern.data.begin());
    if (layout.has_conv) {
        conv_weights.assign(flat.begin() + layout.off_conv,
                            flat.begin() + layout.off_conv + conv_param_count());
    }
}

std::vector<double> extract_gradient(const std::vector<double>& adjoints,
                                     const std::vector<int32_t>& leaf_ids) {
    std::vector<double> g(leaf_ids.size());
    for (size_t i = 0; i < leaf_ids.size(); ++i) g[i] = adjoints[leaf_ids[i]];
    return g;
}

std::vector<size_t> resolve_flags(const ParamLayout& layout,
                                  const std::vector<std::string>& names) {
    std::vector<size_t> out;
    auto block = [&](size_t off, size_t count) {
        for (size_t i = 0; i < count; ++i) out.push_back(off + i);
    };
    for (const std::string& name : names) {
        if (name == "emitter_intensity") out.push_back(layout.off_eta);
        else if (name == "shadow_bias") out.push_back(layout.off_xi);
        else if (name == "shadow_steepness") out.push_back(layout.off_kappa);
        else if (name == "softargmax_beta") out.push_back(layout.off_beta);
        else if (name == "noise_mean") out.push_back(layout.off_mu);
        else if (name == "noise_std") out.push_back(layout.off_sigma);
        else if (name == "plane_z" || name == "plane_alpha") {
            if (!layout.has_plane) throw config_error("flag '" + name + "': scene has no plane");
            out.push_back(layout.off_plane + (name == "plane_alpha" ? 1 : 0));
        } else if (name == "pose") {
            if (!layout.has_pose)
                throw config_error("flag 'pose': scene has no optimizable object");
            block(layout.off_pose, 6);
        } else if (name == "pattern") {
            if (!layout.has_pattern) throw config_error("flag 'pattern': no pattern in layout");
            block(layout.off_pattern,
                  static_cast<size_t>(layout.pattern_w) * layout.pattern_h * layout.pattern_c);
        } else if (name == "conv") {
            if (!layout.has_conv) throw config_error("flag 'conv': refiner weights not in layout");
            block(layout.off_conv, conv_param_count());
        } else {
            throw config_error("unknown optimizable flag: " + name);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace slsim
