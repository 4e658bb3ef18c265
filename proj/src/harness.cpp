#include "slsim/harness.hpp"

#include <algorithm>
#include <cmath>

#include "slsim/errors.hpp"
#include "slsim/image_io.hpp"
#include "slsim/pattern.hpp"
#include "slsim/rng.hpp"
#include "slsim/scalar_ops.hpp"

namespace slsim {

template <typename S>
S gradcheck_objective(const GradCheckProblem& prob, const ParamLayout& layout,
                      const SimParams<S>& par) {
    (void)layout;
    auto sim = simulate<S>(prob.cfg, prob.scene, par, prob.sim);
    MaskImage joint = mask_and(sim.match.valid, prob.ref_valid);
    S total = masked_loss(sim.depth, prob.ref_depth, joint, prob.loss);
    if (prob.capture_weight != 0.0) {
        std::vector<S> vals;
        const Image<S>& cap = sim.capture;
        for (int y = 0; y < cap.height; ++y)
            for (int x = 0; x < cap.width; ++x)
                if (sim.render.hit(y, x))
                    for (int c = 0; c < cap.channels; ++c)
                        vals.push_back(cap(y, x, c));
        if (!vals.empty()) {
            S mean = vsum(std::span<const S>(vals.data(), vals.size())) * (1.0 / double(vals.size()));
            total = total + mean * prob.capture_weight;
        }
    }
    return total;
}

template double gradcheck_objective(const GradCheckProblem&, const ParamLayout&,
                                    const SimParams<double>&);
template ad::Var gradcheck_objective(const GradCheckProblem&, const ParamLayout&,
                                     const SimParams<ad::Var>&);

double fd_step_for(const ParamLayout& layout, size_t index, double value) {
    auto rel = [&](double floor_h) { return std::max(floor_h, std::fabs(value) * 1e-4); };
    if (index == layout.off_eta)
        return rel(1e-2);
    if (index < 6)
        return rel(1e-6);
    if (layout.has_plane && index == layout.off_plane)
        return rel(1e-3); // depth in mm
    if (layout.has_plane && index == layout.off_plane + 1)
        return 1e-5; // radians
    if (layout.has_pose && index >= layout.off_pose && index < layout.off_pose + 3)
        return rel(1e-3);
    if (layout.has_pose && index >= layout.off_pose + 3 && index < layout.off_pose + 6)
        return 1e-5;
    if (layout.has_conv && index >= layout.off_conv)
        return 1e-5;
    return 1e-4; // pattern values
}

GradCheckReport gradient_check(const GradCheckProblem& prob, const std::vector<size_t>& indices) {
    validate_pattern(prob.pattern);
    validate(prob.scene);
    if (!prob.ref_depth.same_shape(prob.ref_valid) || prob.ref_depth.channels != 1)
        throw contract_error("gradient_check: reference depth/mask shape mismatch");

    GradCheckProblem p = prob;
    // The label range must not shift when a parameter is nudged.
    if (p.sim.d_min < 0 || p.sim.d_max < 0) {
        auto full = disparity_range(p.cfg);
        if (p.sim.d_min < 0)
            p.sim.d_min = full.first;
        if (p.sim.d_max < 0)
            p.sim.d_max = full.second;
    }

    const bool with_conv = p.sim.post == PostprocessMode::conv2;
    ParamLayout layout = make_layout(p.scene, p.pattern, with_conv);
    std::vector<double> flat = pack_params(layout, p.cfg, p.scene, p.pattern, p.conv_weights);
    for (size_t i : indices)
        if (i >= layout.total)
            throw contract_error("gradient_check: parameter index out of range");

    // One reverse-mode sweep gives every analytic derivative at once.
    ad::Tape tape;
    std::vector<int32_t> ids;
    auto par = unpack_params<ad::Var>(layout, flat, &tape, &ids);
    ad::Var total = gradcheck_objective(p, layout, par);
    std::vector<double> analytic = extract_gradient(tape.gradient(total.id), ids);

    auto eval_at = [&](const std::vector<double>& values) {
        auto pd = unpack_params<double>(layout, values, nullptr, nullptr);
        return gradcheck_objective(p, layout, pd);
    };

    GradCheckReport report;
    for (size_t i : indices) {
        double h = fd_step_for(layout, i, flat[i]);
        std::vector<double> probe = flat;
        probe[i] = flat[i] + h;
        double f_plus = eval_at(probe);
        probe[i] = flat[i] - h;
        double f_minus = eval_at(probe);
        double fd = (f_plus - f_minus) / (2.0 * h);
        if (!std::isfinite(fd))
            throw numeric_error("gradient_check: non-finite finite difference");
        GradCheckEntry e;
        e.index = i;
        e.name = layout.name_of(i);
        e.value = flat[i];
        e.analytic = analytic[i];
        e.fd = fd;
        e.rel_err = std::fabs(e.analytic - fd) /
                    std::max({1.0, std::fabs(e.analytic), std::fabs(fd)});
        report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
        report.rows.push_back(std::move(e));
    }
    return report;
}

NoiseStudyResult noise_study(const SensorConfig& cfg, const std::vector<double>& z_mm,
                             const std::vector<double>& alpha_deg, int samples, int n_bins,
                             uint64_t seed, int threads) {
    if (z_mm.empty() || alpha_deg.empty())
        throw config_error("noise_study: empty sweep grid");
    if (samples < 1 || n_bins < 1)
        throw config_error("noise_study: samples and bins must be positive");

    NoiseStudyResult out;
    out.n_bins = n_bins;
    out.r_max_px = 0.5 * std::hypot(double(cfg.width), double(cfg.height));

    constexpr double kStudyDotDensity = 0.15;
    ImageD pattern =
        make_dot_pattern(cfg.width, cfg.height, 1, kStudyDotDensity, derive_seed(seed, 9001));

    SimOptions so;
    so.threads = threads;
    auto full = disparity_range(cfg);
    so.d_min = full.first;
    so.d_max = full.second;

    const double cx = 0.5 * cfg.width, cy = 0.5 * cfg.height;
    uint64_t cell_id = 0;
    for (double z : z_mm) {
        for (double a : alpha_deg) {
            NoiseStudyCell cell;
            cell.z_mm = z;
            cell.alpha_deg = a;
            cell.bin_std.assign(size_t(n_bins), 0.0);
            cell.bin_count.assign(size_t(n_bins), 0);
            std::vector<double> bin_sum(size_t(n_bins), 0.0), bin_sum2(size_t(n_bins), 0.0);
            double tot_sum = 0.0, tot_sum2 = 0.0;
            long tot_n = 0;

            Scene scene = make_plane_scene(z, a);
            ParamLayout layout = make_layout(scene, pattern, false);
            std::vector<double> flat = pack_params(layout, cfg, scene, pattern, {});

            for (int s = 0; s < samples; ++s) {
                SimOptions so_s = so;
                so_s.noise_seed = derive_seed(seed, cell_id * 10007 + uint64_t(s));
                auto par = unpack_params<double>(layout, flat, nullptr, nullptr);
                auto sim = simulate<double>(cfg, scene, par, so_s);
                for (int y = 0; y < cfg.height; ++y) {
                    for (int x = 0; x < cfg.width; ++x) {
                        if (!sim.match.valid(y, x) || !sim.render.hit(y, x))
                            continue;
                        double err = sim.depth(y, x) - sim.render.gt_depth(y, x);
                        double r = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
                        int b = std::min(n_bins - 1, int(r / out.r_max_px * n_bins));
                        bin_sum[size_t(b)] += err;
                        bin_sum2[size_t(b)] += err * err;
                        cell.bin_count[size_t(b)] += 1;
                        tot_sum += err;
                        tot_sum2 += err * err;
                        tot_n += 1;
                    }
                }
            }
            for (int b = 0; b < n_bins; ++b) {
                long n = cell.bin_count[size_t(b)];
                if (n > 0) {
                    double m = bin_sum[size_t(b)] / double(n);
                    cell.bin_std[size_t(b)] =
                        std::sqrt(std::max(0.0, bin_sum2[size_t(b)] / double(n) - m * m));
                }
            }
            cell.n_pixels = tot_n;
            if (tot_n > 0) {
                double m = tot_sum / double(tot_n);
                cell.std_err_mm = std::sqrt(std::max(0.0, tot_sum2 / double(tot_n) - m * m));
            }
            out.cells.push_back(std::move(cell));
            ++cell_id;
        }
    }
    return out;
}

void write_noise_study_csv(const NoiseStudyResult& res, const std::string& path) {
    CsvWriter csv(path);
    csv.row({"z_mm", "alpha_deg", "r_bin_px", "std_err_mm", "n_pixels"});
    for (const NoiseStudyCell& c : res.cells) {
        for (int b = 0; b < res.n_bins; ++b) {
            double r_center = (b + 0.5) * res.r_max_px / res.n_bins;
            CsvWriter::Cell std_cell =
                c.bin_count[size_t(b)] > 0 ? CsvWriter::Cell(c.bin_std[size_t(b)])
                                           : CsvWriter::Cell();
            csv.row({c.z_mm, c.alpha_deg, r_center, std_cell, c.bin_count[size_t(b)]});
        }
        CsvWriter::Cell tot =
            c.n_pixels > 0 ? CsvWriter::Cell(c.std_err_mm) : CsvWriter::Cell();
        csv.row({c.z_mm, c.alpha_deg, -1.0, tot, c.n_pixels});
    }
}

DisparityMap<double> match_images(const ImageD& capture, const ImageD& reference,
                                  const SensorConfig& cfg, int d_min, int d_max, int threads) {
    if (!capture.same_shape(reference))
        throw config_error("match_images: image shapes differ");
    SensorConfig c2 = cfg;
    c2.width = capture.width;
    c2.height = capture.height;
    c2.subpixel_levels = 1;
    if (d_min < 0 || d_max < 0) {
        auto full = disparity_range(c2);
        if (d_min < 0)
            d_min = full.first;
        if (d_max < 0)
            d_max = full.second;
    }
    std::vector<ImageD> refs{reference};
    return block_match(capture, refs, c2, c2.softargmax_beta, d_min, d_max, threads);
}

} // namespace slsim
