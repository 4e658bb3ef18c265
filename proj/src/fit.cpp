#include "slsim/fit.hpp"

#include <algorithm>
#include <cmath>

#include "slsim/errors.hpp"
#include "slsim/pattern.hpp"
#include "slsim/scalar_ops.hpp"

namespace slsim {

namespace {

void fill_full_range(const SensorConfig& cfg, SimOptions& so) {
    if (so.d_min >= 0 && so.d_max >= 0)
        return;
    auto full = disparity_range(cfg);
    if (so.d_min < 0)
        so.d_min = full.first;
    if (so.d_max < 0)
        so.d_max = full.second;
}

void clamp_active(std::vector<double>& flat, const std::vector<size_t>& active, double lo,
                  double hi) {
    for (size_t i : active) {
        if (!std::isnan(lo))
            flat[i] = std::max(flat[i], lo);
        if (!std::isnan(hi))
            flat[i] = std::min(flat[i], hi);
    }
}

} // namespace

FitResult fit_params(const SensorConfig& cfg, const std::vector<FitScene>& scenes,
                     const ImageD& pattern, const std::vector<double>& conv_weights,
                     const FitOptions& opt) {
    if (scenes.empty())
        throw config_error("fit_params: no scenes");
    validate_pattern(pattern);
    for (const FitScene& fs : scenes) {
        validate(fs.scene);
        if (fs.observed_depth.width != cfg.width || fs.observed_depth.height != cfg.height ||
            fs.observed_depth.channels != 1)
            throw config_error("fit_params: observed depth shape does not match the sensor");
        if (!fs.observed_valid.same_shape(fs.observed_depth))
            throw config_error("fit_params: observed mask shape mismatch");
    }
    if (scenes.size() > 1)
        for (const std::string& f : opt.flags)
            if (f == "plane_z" || f == "plane_alpha" || f == "pose")
                throw config_error("fit_params: geometry flags need a single scene");
    if (opt.iterations < 0)
        throw config_error("fit_params: negative iteration count");

    const bool with_conv = opt.sim.post == PostprocessMode::conv2;
    ParamLayout layout = make_layout(scenes[0].scene, pattern, with_conv);
    std::vector<double> flat = pack_params(layout, cfg, scenes[0].scene, pattern, conv_weights);
    std::vector<size_t> active = resolve_flags(layout, opt.flags);
    if (active.empty())
        throw config_error("fit_params: no optimizable flags given");

    SimOptions so = opt.sim;
    fill_full_range(cfg, so);

    FitResult res;
    res.layout = layout;
    res.best_loss = std::numeric_limits<double>::infinity();
    res.best_params = flat;
    res.stop_reason = "iterations";

    // grad == nullptr evaluates on plain doubles; otherwise records one tape
    // and returns the flat gradient (empty if it failed to propagate).
    auto eval = [&](const std::vector<double>& p, std::vector<double>* grad) -> double {
        auto run = [&]<typename S>(const SimParams<S>& par, auto&& per_scene) {
            for (const FitScene& fs : scenes) {
                SimOptions s2 = so;
                s2.noise_seed = fs.noise_seed;
                auto sim = simulate<S>(cfg, fs.scene, par, s2);
                MaskImage joint = mask_and(sim.match.valid, fs.observed_valid);
                per_scene(masked_loss(sim.depth, fs.observed_depth, joint, opt.loss));
            }
        };
        if (!grad) {
            auto par = unpack_params<double>(layout, p, nullptr, nullptr);
            double acc = 0.0;
            run(par, [&](double l) { acc += l; });
            return acc / double(scenes.size());
        }
        ad::Tape tape;
        std::vector<int32_t> ids;
        auto par = unpack_params<ad::Var>(layout, p, &tape, &ids);
        std::vector<ad::Var> parts;
        run(par, [&](ad::Var l) { parts.push_back(l); });
        ad::Var total =
            vsum(std::span<const ad::Var>(parts.data(), parts.size())) * (1.0 / double(scenes.size()));
        double v = tape.val(total.id);
        grad->clear();
        if (std::isfinite(v)) {
            try {
                auto adjoints = tape.gradient(total.id);
                *grad = extract_gradient(adjoints, ids);
            } catch (const numeric_error&) {
                grad->clear();
            }
        }
        return v;
    };

    if (opt.iterations == 0) {
        double v = eval(flat, nullptr);
        res.loss_trace.push_back(v);
        res.best_loss = v;
        res.params = flat;
        return res;
    }

    AdamState st;
    for (int it = 0; it < opt.iterations; ++it) {
        std::vector<double> grad;
        double v;
        try {
            v = eval(flat, &grad);
        } catch (const numeric_error&) {
            v = std::numeric_limits<double>::quiet_NaN();
        }
        res.loss_trace.push_back(v);
        if (!std::isfinite(v) || grad.empty()) {
            res.diverged = true;
            res.stop_reason = "non_finite";
            break;
        }
        if (v < res.best_loss) {
            res.best_loss = v;
            res.best_params = flat;
        }
        std::vector<double> masked(grad.size(), 0.0);
        for (size_t i : active)
            masked[i] = grad[i];
        adam_step(flat, masked, st, opt.adam);
        clamp_active(flat, active, opt.clamp_lo, opt.clamp_hi);
    }
    res.params = flat;
    return res;
}

PoseFitResult fit_plane_tilt(const SensorConfig& cfg, const Scene& scene, const ImageD& pattern,
                             const AdamConfig& adam, int iterations, const SimOptions& sim) {
    if (!scene.plane)
        throw config_error("fit_plane_tilt: scene has no plane");
    validate(scene);
    validate_pattern(pattern);

    ParamLayout layout = make_layout(scene, pattern, false);
    std::vector<double> flat = pack_params(layout, cfg, scene, pattern, {});
    const size_t i_alpha = layout.off_plane + 1;
    const size_t i_z = layout.off_plane;

    SimOptions so = sim;
    fill_full_range(cfg, so);

    // The tilt axis is horizontal, so coverage only depends on the top and
    // bottom frame rows: both edge rays must still hit in front of the camera.
    auto plane_covers_frame = [&](double z_mm, double alpha_rad) {
        if (std::fabs(alpha_rad) >= 89.0 * kDegToRad)
            return false;
        const double sa = std::sin(alpha_rad), ca = std::cos(alpha_rad);
        for (double py : {0.5, cfg.height - 0.5}) {
            double dy = (py - 0.5 * cfg.height) / cfg.focal_px;
            double denom = ca - sa * dy;
            if (denom <= 1e-9 || z_mm * ca / denom <= 0.0)
                return false;
        }
        return true;
    };

    // The optimization target is fixed: the noiseless ground-truth depth of
    // the same scene with the plane level, which is the pose this fit is
    // defined to recover. Comparing against the moving hypothesis's own
    // ground truth instead would only measure matcher quantization error,
    // whose landscape in alpha is a shallow ripple rather than a bowl.
    ImageD target_depth;
    MaskImage target_hit;
    {
        std::vector<double> level = flat;
        level[i_alpha] = 0.0;
        auto tpar = unpack_params<double>(layout, level, nullptr, nullptr);
        auto tres = simulate<double>(cfg, scene, tpar, so);
        target_depth = tres.render.gt_depth;
        target_hit = tres.render.hit;
    }

    PoseFitResult out;
    AdamState st;
    for (int it = 0; it < iterations; ++it) {
        out.alpha_trace_deg.push_back(flat[i_alpha] / kDegToRad);
        if (!plane_covers_frame(flat[i_z], flat[i_alpha])) {
            out.aborted = true;
            out.stop_reason = "plane_left_frame";
            break;
        }
        ad::Tape tape;
        std::vector<int32_t> ids;
        auto par = unpack_params<ad::Var>(layout, flat, &tape, &ids);
        auto res = simulate<ad::Var>(cfg, scene, par, so);
        MaskImage joint = mask_and(mask_and(res.match.valid, res.render.hit), target_hit);
        LossSpec spec;
        spec.w_l1 = 1.0;
        spec.w_huber = 0.0;
        ad::Var loss = masked_loss(res.match.depth, target_depth, joint, spec);
        double v = tape.val(loss.id);
        out.loss_trace.push_back(v);
        if (!std::isfinite(v)) {
            out.aborted = true;
            out.stop_reason = "non_finite";
            break;
        }
        std::vector<double> grad;
        try {
            grad = extract_gradient(tape.gradient(loss.id), ids);
        } catch (const numeric_error&) {
            out.aborted = true;
            out.stop_reason = "non_finite";
            break;
        }
        std::vector<double> masked(grad.size(), 0.0);
        masked[i_alpha] = grad[i_alpha];
        adam_step(flat, masked, st, adam);
    }
    out.final_alpha_deg = flat[i_alpha] / kDegToRad;
    if (out.stop_reason.empty())
        out.stop_reason = "iterations";
    return out;
}

PatternFitResult fit_pattern(const SensorConfig& cfg, const Scene& scene, const ImageD& pattern0,
                             const AdamConfig& adam, int iterations, double value_max,
                             const SimOptions& sim) {
    validate(scene);
    validate_pattern(pattern0);
    if (!(value_max > 0.0))
        throw config_error("fit_pattern: value_max must be positive");

    ParamLayout layout = make_layout(scene, pattern0, false);
    std::vector<double> flat = pack_params(layout, cfg, scene, pattern0, {});
    std::vector<size_t> active = resolve_flags(layout, {"pattern"});

    SimOptions so = sim;
    fill_full_range(cfg, so);

    const size_t n_px = size_t(layout.pattern_w) * layout.pattern_h;
    const int pc = layout.pattern_c;
    auto energy_shares = [&]() {
        std::array<double, 3> e{0.0, 0.0, 0.0};
        for (size_t i = 0; i < n_px; ++i)
            for (int c = 0; c < pc; ++c)
                e[size_t(std::min(c, 2))] += flat[layout.off_pattern + i * pc + c];
        double den = e[0] + e[1] + e[2];
        if (den > 0.0)
            for (double& v : e)
                v /= den;
        return e;
    };

    PatternFitResult out;
    AdamState st;
    for (int it = 0; it < iterations; ++it) {
        out.energy_trace.push_back(energy_shares());
        ad::Tape tape;
        std::vector<int32_t> ids;
        auto par = unpack_params<ad::Var>(layout, flat, &tape, &ids);
        auto res = simulate<ad::Var>(cfg, scene, par, so);
        MaskImage joint = mask_and(res.match.valid, res.render.hit);
        LossSpec spec;
        spec.w_l1 = 1.0;
        spec.w_huber = 0.0;
        ad::Var loss = masked_loss(res.match.depth, res.render.gt_depth, joint, spec);
        double v = tape.val(loss.id);
        out.loss_trace.push_back(v);
        if (!std::isfinite(v)) {
            out.diverged = true;
            break;
        }
        std::vector<double> grad;
        try {
            grad = extract_gradient(tape.gradient(loss.id), ids);
        } catch (const numeric_error&) {
            out.diverged = true;
            break;
        }
        std::vector<double> masked(grad.size(), 0.0);
        for (size_t i : active)
            masked[i] = grad[i];
        adam_step(flat, masked, st, adam);
        clamp_active(flat, active, 0.0, value_max);
    }

    out.pattern = ImageD(layout.pattern_w, layout.pattern_h, layout.pattern_c);
    std::copy(flat.begin() + ptrdiff_t(layout.off_pattern),
              flat.begin() + ptrdiff_t(layout.off_pattern) + ptrdiff_t(out.pattern.size()),
              out.pattern.data.begin());
    return out;
}

} // namespace slsim
