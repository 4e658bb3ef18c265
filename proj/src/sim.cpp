#include "slsim/sim.hpp"

#include <algorithm>

#include "slsim/capture_noise.hpp"
#include "slsim/errors.hpp"
#include "slsim/postprocess.hpp"
#include "slsim/rng.hpp"

namespace slsim {

template <typename S>
SimResult<S> simulate(const SensorConfig& cfg, const Scene& scene, const SimParams<S>& par,
                      const SimOptions& opt) {
    SimResult<S> out;
    out.render = render_capture(cfg, scene, par, opt.threads);
    out.capture = out.render.capture;
    if (opt.apply_noise)
        apply_capture_noise(out.capture, par.noise_std, par.noise_mean,
                            derive_seed(opt.noise_seed, 0));

    auto refs = render_reference_patterns(cfg, par.pattern, opt.threads);

    int d_min = opt.d_min, d_max = opt.d_max;
    if (d_min < 0 || d_max < 0) {
        auto r = disparity_range(cfg);
        if (d_min < 0)
            d_min = r.first;
        if (d_max < 0)
            d_max = r.second;
    }
    out.match = block_match(out.capture, refs, cfg, par.softargmax_beta, d_min, d_max, opt.threads);

    switch (opt.post) {
    case PostprocessMode::none:
        out.depth = out.match.depth;
        break;
    case PostprocessMode::gaussian:
        out.depth = out.match.depth;
        apply_capture_noise_masked(out.depth, out.match.valid, par.noise_std, par.noise_mean,
                                   derive_seed(opt.noise_seed, 1));
        break;
    case PostprocessMode::conv2:
        out.depth = conv_refine(out.match.depth, out.render.gt_depth, out.render.shadow,
                                par.conv);
        break;
    }
    return out;
}

std::pair<int, int> resolve_scene_disparity_range(const SensorConfig& cfg,
                                                  std::span<const Scene> scenes, int margin) {
    if (margin < 0)
        throw contract_error("resolve_scene_disparity_range: negative margin");
    double z_lo = cfg.z_max_mm, z_hi = cfg.z_min_mm;
    bool any = false;
    for (const Scene& s : scenes) {
        auto [lo, hi] = scene_depth_bounds(cfg, s);
        if (lo <= 0.0)
            continue; // nothing visible
        z_lo = std::min(z_lo, lo);
        z_hi = std::max(z_hi, hi);
        any = true;
    }
    auto full = disparity_range(cfg);
    if (!any)
        return full;
    z_lo = std::clamp(z_lo, cfg.z_min_mm, cfg.z_max_mm);
    z_hi = std::clamp(z_hi, cfg.z_min_mm, cfg.z_max_mm);
    auto r = disparity_range(cfg, z_lo, z_hi);
    return {std::max(full.first, r.first - margin), std::min(full.second, r.second + margin)};
}

template SimResult<double> simulate(const SensorConfig&, const Scene&, const SimParams<double>&,
                                    const SimOptions&);
template SimResult<ad::Var> simulate(const SensorConfig&, const Scene&,
                                     const SimParams<ad::Var>&, const SimOptions&);

} // namespace slsim
