#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <vector>

#include "slsim/errors.hpp"
#include "slsim/fit.hpp"
#include "slsim/loss.hpp"
#include "slsim/pattern.hpp"
#include "slsim/postprocess.hpp"
#include "slsim/rng.hpp"
#include "slsim/scalar_ops.hpp"
#include "slsim/sim.hpp"
#include "slsim/tape.hpp"
#include "test_util.hpp"

using namespace slsim;
using testutil::sim_params;
using testutil::small_rig;

namespace {

ImageD random_image(int w, int h, uint64_t seed, double lo, double hi) {
    ImageD img(w, h, 1);
    for (size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = lo + (hi - lo) * keyed_uniform(seed, i);
    return img;
}

MaskImage full_mask(int w, int h) { return MaskImage(w, h, 1, 1); }

} // namespace

TEST_CASE("pixel loss oracles on two-pixel images") {
    ImageD sim(2, 1, 1), ref(2, 1, 1, 1.0);
    sim(0, 0, 0) = 1.5; // e = 0.5, inside the quadratic zone for tau = 1
    sim(0, 1, 0) = 3.0; // e = 2.0, linear zone
    MaskImage m = full_mask(2, 1);

    LossSpec huber{0.0, 1.0, 0.0, 1.0};
    CHECK(masked_loss(sim, ref, m, huber) ==
          doctest::Approx(0.5 * (0.125 + 1.5)).epsilon(1e-15));

    LossSpec l1{1.0, 0.0, 0.0, 1.0};
    CHECK(masked_loss(sim, ref, m, l1) == doctest::Approx(0.5 * (0.5 + 2.0)).epsilon(1e-15));

    LossSpec both{2.0, 3.0, 0.0, 1.0};
    CHECK(masked_loss(sim, ref, m, both) ==
          doctest::Approx(2.0 * 1.25 + 3.0 * 0.8125).epsilon(1e-15));

    // masking the linear-zone pixel leaves only the quadratic term
    m(0, 1, 0) = 0;
    CHECK(masked_loss(sim, ref, m, huber) == doctest::Approx(0.125).epsilon(1e-15));
}

TEST_CASE("sobel loss sees a constant slope mismatch of 8") {
    // sim is a unit ramp in x, ref is flat: Gx = 8 at every interior pixel.
    ImageD sim(6, 5, 1), ref(6, 5, 1, 2.0);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x) sim(y, x, 0) = double(x);
    LossSpec spec{0.0, 0.0, 1.0, 1.0};
    CHECK(masked_loss(sim, ref, full_mask(6, 5), spec) == doctest::Approx(8.0).epsilon(1e-15));
}

TEST_CASE("losses agree with a direct masked reduction on random data") {
    ImageD sim = random_image(9, 7, 3, -5.0, 5.0);
    ImageD ref = random_image(9, 7, 4, -5.0, 5.0);
    MaskImage m(9, 7, 1);
    for (size_t i = 0; i < m.data.size(); ++i) m.data[i] = keyed_uniform(9, i) < 0.88;
    LossSpec spec{0.7, 1.3, 0.4, 2.5};

    double l1 = 0, hu = 0, so = 0;
    int n_pix = 0, n_sob = 0;
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x) {
            if (!m(y, x, 0)) continue;
            double e = sim(y, x, 0) - ref(y, x, 0);
            l1 += std::fabs(e);
            hu += std::fabs(e) <= 2.5 ? 0.5 * e * e : 2.5 * std::fabs(e) - 0.5 * 2.5 * 2.5;
            ++n_pix;
        }
    auto gx = [](const ImageD& im, int y, int x) {
        return im(y - 1, x + 1) + 2 * im(y, x + 1) + im(y + 1, x + 1) - im(y - 1, x - 1) -
               2 * im(y, x - 1) - im(y + 1, x - 1);
    };
    auto gy = [](const ImageD& im, int y, int x) {
        return im(y + 1, x - 1) + 2 * im(y + 1, x) + im(y + 1, x + 1) - im(y - 1, x - 1) -
               2 * im(y - 1, x) - im(y - 1, x + 1);
    };
    for (int y = 1; y < 6; ++y)
        for (int x = 1; x < 8; ++x) {
            bool ok = true;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) ok &= m(y + dy, x + dx, 0) != 0;
            if (!ok) continue;
            so += std::fabs(gx(sim, y, x) - gx(ref, y, x)) +
                  std::fabs(gy(sim, y, x) - gy(ref, y, x));
            ++n_sob;
        }
    REQUIRE(n_pix > 10);
    REQUIRE(n_sob > 3);
    double want = 0.7 * l1 / n_pix + 1.3 * hu / n_pix + 0.4 * so / n_sob;
    CHECK(masked_loss(sim, ref, m, spec) == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("loss contracts and configuration errors") {
    ImageD sim(4, 4, 1, 1.0), ref(4, 4, 1, 0.0);
    MaskImage m = full_mask(4, 4);
    CHECK_THROWS_AS(masked_loss(sim, ref, MaskImage(4, 4, 1, 0), LossSpec{}), contract_error);
    CHECK_THROWS_AS(masked_loss(sim, ImageD(5, 4, 1), m, LossSpec{}), contract_error);
    CHECK_THROWS_AS(masked_loss(sim, ref, m, LossSpec{0, 0, 0, 1}), config_error);
    CHECK_THROWS_AS(masked_loss(sim, ref, m, LossSpec{-1, 1, 0, 1}), config_error);
    CHECK_THROWS_AS(masked_loss(sim, ref, m, LossSpec{0, 1, 0, 0}), config_error);
    // sobel-only loss on a mask with no fully-valid 3x3 block
    MaskImage sparse(4, 4, 1, 0);
    sparse(1, 1, 0) = 1;
    sparse(2, 2, 0) = 1;
    CHECK_THROWS_AS(masked_loss(sim, ref, sparse, LossSpec{0, 0, 1, 1}), contract_error);
}

TEST_CASE("loss gradients match central differences away from the kinks") {
    ImageD sim_d = random_image(8, 6, 12, -4.0, 4.0);
    ImageD ref = random_image(8, 6, 13, -4.0, 4.0);
    MaskImage m = full_mask(8, 6);
    LossSpec spec{0.5, 1.0, 0.3, 2.0};

    ad::Tape tape;
    Image<ad::Var> sim(8, 6, 1);
    std::vector<int32_t> ids(sim_d.data.size());
    for (size_t i = 0; i < sim_d.data.size(); ++i) {
        sim.data[i] = ad::make_var(tape, sim_d.data[i]);
        ids[i] = sim.data[i].id;
    }
    ad::Var loss = masked_loss(sim, ref, m, spec);
    CHECK(loss.value() == doctest::Approx(masked_loss(sim_d, ref, m, spec)).epsilon(1e-15));
    auto adj = tape.gradient(loss.id);

    for (size_t idx : {size_t(9), size_t(21), size_t(30)}) {
        double h = 1e-6;
        ImageD bump = sim_d;
        bump.data[idx] = sim_d.data[idx] + h;
        double up = masked_loss(bump, ref, m, spec);
        bump.data[idx] = sim_d.data[idx] - h;
        double dn = masked_loss(bump, ref, m, spec);
        double fd = (up - dn) / (2 * h);
        CHECK(std::fabs(adj[ids[idx]] - fd) / std::max(1.0, std::fabs(fd)) < 1e-7);
    }
}

TEST_CASE("zero conv weights leave the depth untouched bit for bit") {
    ImageD d = random_image(10, 8, 21, 400.0, 1500.0);
    ImageD g = random_image(10, 8, 22, 400.0, 1500.0);
    ImageD s = random_image(10, 8, 23, 0.0, 1.0);
    auto out = conv_refine(d, g, s, zero_conv_weights());
    CHECK(out.data == d.data);
}

TEST_CASE("conv weight contracts") {
    ImageD d(6, 6, 1, 1.0), g(6, 6, 1, 1.0), s(6, 6, 1, 1.0);
    CHECK_THROWS_AS(conv_refine(d, g, s, std::vector<double>(7, 0.0)), contract_error);
    CHECK_THROWS_AS(conv_refine(d, g, ImageD(5, 6, 1), zero_conv_weights()), contract_error);
    CHECK_THROWS_AS(conv_refine(d, ImageD(6, 6, 3), s, zero_conv_weights()), contract_error);
}

TEST_CASE("conv weights round-trip through the binary file") {
    auto w = random_conv_weights(5, 0.1);
    REQUIRE(w.size() == size_t(conv_param_count()));
    std::string path = "conv_weights_test.bin";
    write_conv_weights(w, path);
    auto r = read_conv_weights(path);
    CHECK(r == w);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_conv_weights("does_not_exist.bin"), io_error);
}

TEST_CASE("conv refinement gradients match central differences") {
    ImageD d = random_image(8, 6, 31, 900.0, 1100.0);
    ImageD g = random_image(8, 6, 32, 900.0, 1100.0);
    ImageD s = random_image(8, 6, 33, 0.2, 1.0);
    auto w0 = random_conv_weights(77, 0.05);

    auto eval = [&](const std::vector<double>& w) {
        auto out = conv_refine(d, g, s, w);
        double t = 0;
        for (double v : out.data) t += v;
        return t / double(out.data.size());
    };

    ad::Tape tape;
    std::vector<ad::Var> wv;
    std::vector<int32_t> ids;
    for (double v : w0) {
        wv.push_back(ad::make_var(tape, v));
        ids.push_back(wv.back().id);
    }
    Image<ad::Var> dv(8, 6, 1), gv(8, 6, 1), sv(8, 6, 1);
    for (size_t i = 0; i < d.data.size(); ++i) {
        dv.data[i] = ad::make_var(tape, d.data[i]);
        gv.data[i] = ad::make_var(tape, g.data[i]);
        sv.data[i] = ad::make_var(tape, s.data[i]);
    }
    auto out = conv_refine(dv, gv, sv, wv);
    ad::Var loss = vsum(std::span<const ad::Var>(out.data)) * (1.0 / double(out.data.size()));
    CHECK(loss.value() == doctest::Approx(eval(w0)).epsilon(1e-14));
    auto adj = tape.gradient(loss.id);

    const size_t off_b1 = size_t(kConvFilters) * kConvIn * kConvKernel * kConvKernel;
    const size_t probes[] = {0, 301, off_b1 - 1, off_b1 + 4, off_b1 + 32 + 7,
                             size_t(conv_param_count()) - 1};
    for (size_t idx : probes) {
        double h = 1e-6;
        std::vector<double> w = w0;
        w[idx] = w0[idx] + h;
        double up = eval(w);
        w[idx] = w0[idx] - h;
        double dn = eval(w);
        double fd = (up - dn) / (2 * h);
        INFO("weight index ", idx);
        CHECK(std::fabs(adj[ids[idx]] - fd) / std::max(1.0, std::fabs(fd)) < 1e-6);
    }
}

TEST_CASE("zero-iteration fits evaluate once and change nothing") {
    SensorConfig cfg = small_rig(32, 24);
    cfg.block_size = 5;
    Scene scene = make_plane_scene(1000.0, 0.0);
    ImageD pattern = make_dot_pattern(32, 24, 1, 0.35, 51);
    auto par = sim_params(cfg, scene, pattern);

    SimOptions so;
    so.apply_noise = false;
    auto obs = simulate(cfg, scene, par, so);

    FitOptions fo;
    fo.iterations = 0;
    fo.flags = {"plane_z"};
    fo.sim = so;
    FitScene fs{scene, obs.depth, obs.match.valid, 1};
    auto res = fit_params(cfg, {fs}, pattern, {}, fo);

    CHECK(res.loss_trace.size() == 1);
    CHECK_FALSE(res.diverged);
    CHECK(res.params == pack_params(res.layout, cfg, scene, pattern, {}));
    CHECK(res.best_params == res.params);
    // the observation came from these exact parameters: the loss is zero
    CHECK(res.best_loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("a misjudged plane depth is pulled back to the observation") {
    SensorConfig cfg = small_rig(32, 24);
    cfg.block_size = 5;
    ImageD pattern = make_dot_pattern(32, 24, 1, 0.35, 52);

    Scene truth = make_plane_scene(1000.0, 0.0);
    auto par = sim_params(cfg, truth, pattern);
    SimOptions so;
    so.apply_noise = false;
    auto obs = simulate(cfg, truth, par, so);

    Scene guess = make_plane_scene(950.0, 0.0);
    FitOptions fo;
    fo.iterations = 80;
    fo.flags = {"plane_z"};
    fo.sim = so;
    fo.adam.lr = 2.0;
    FitScene fs{guess, obs.depth, obs.match.valid, 1};
    auto res = fit_params(cfg, {fs}, pattern, {}, fo);

    REQUIRE_FALSE(res.diverged);
    REQUIRE(res.loss_trace.size() == 80); // one pre-step loss per iteration
    CHECK(res.best_loss < res.loss_trace.front() * 0.05);
    CHECK(res.best_params[res.layout.off_plane] == doctest::Approx(1000.0).epsilon(0.005));

    // every unflagged parameter is bitwise frozen
    auto flat0 = pack_params(res.layout, cfg, guess, pattern, {});
    for (size_t i = 0; i < flat0.size(); ++i)
        if (i != res.layout.off_plane) CHECK(res.params[i] == flat0[i]);
}

TEST_CASE("fit configuration errors surface immediately") {
    SensorConfig cfg = small_rig(32, 24);
    cfg.block_size = 5;
    ImageD pattern = make_dot_pattern(32, 24, 1, 0.35, 53);
    Scene scene = make_plane_scene(1000.0, 0.0);
    auto par = sim_params(cfg, scene, pattern);
    SimOptions so;
    so.apply_noise = false;
    auto obs = simulate(cfg, scene, par, so);
    FitScene fs{scene, obs.depth, obs.match.valid, 1};

    FitOptions fo;
    fo.iterations = 1;
    fo.flags = {"no_such_knob"};
    CHECK_THROWS_AS(fit_params(cfg, {fs}, pattern, {}, fo), config_error);

    fo.flags = {"plane_z"};
    CHECK_THROWS_AS(fit_params(cfg, {fs, fs}, pattern, {}, fo), config_error);

    fo.flags = {"noise_mean"};
    fo.loss = LossSpec{0, 0, 0, 1};
    CHECK_THROWS_AS(fit_params(cfg, {fs}, pattern, {}, fo), config_error);

    CHECK_THROWS_AS(fit_params(cfg, {}, pattern, {}, FitOptions{}), config_error);
}

TEST_CASE("tilt recovery reduces a small misalignment and aborts a degenerate one") {
    SensorConfig cfg = small_rig(32, 24);
    cfg.block_size = 5;
    ImageD pattern = make_dot_pattern(32, 24, 1, 0.35, 54);
    SimOptions so;
    so.apply_noise = false;

    AdamConfig adam;
    adam.lr = 0.01;
    auto res = fit_plane_tilt(cfg, make_plane_scene(1000.0, 6.0), pattern, adam, 30, so);
    REQUIRE_FALSE(res.aborted);
    CHECK(std::fabs(res.final_alpha_deg) < 3.0);
    CHECK(res.alpha_trace_deg.front() == doctest::Approx(6.0));

    auto bad = fit_plane_tilt(cfg, make_plane_scene(1000.0, 85.0), pattern, adam, 5, so);
    CHECK(bad.aborted);
    CHECK(bad.stop_reason == "plane_left_frame");
}
