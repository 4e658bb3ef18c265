#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "slsim/errors.hpp"

namespace slsim {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment buffers; sized on first step.
struct AdamState {
    int64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
};

// One bias-corrected update in place. Entries with identically zero gradient
// whose moments are still zero stay bitwise unchanged, so freezing a
// parameter is the same as excluding it.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamState& state, const AdamConfig& cfg) {
    if (grads.size() != params.size())
        throw contract_error("adam_step: gradient size mismatch");
    if (cfg.lr <= 0.0 || cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 ||
        cfg.beta2 >= 1.0 || cfg.eps <= 0.0)
        throw config_error("adam_step: invalid optimizer settings");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size())
        throw contract_error("adam_step: state size mismatch");
    for (double g : grads)
        if (!std::isfinite(g))
            throw numeric_error("adam_step: non-finite gradient");

    state.step += 1;
    const double c1 = 1.0 - std::pow(cfg.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, double(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        double mh = state.m[i] / c1;
        double vh = state.v[i] / c2;
        params[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
}

} // namespace slsim
