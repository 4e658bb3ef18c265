#pragma once

#include <cstdint>

#include "slsim/image.hpp"
#include "slsim/rng.hpp"
#include "slsim/scalar_ops.hpp"

namespace slsim {

// Additive reparameterized Gaussian noise: x <- x + sigma * eps + mu with
// eps ~ N(0,1) drawn per flat pixel index from a counter-based stream. The
// eps field is a constant on the tape, so d/d sigma = eps and d/d mu = 1,
// and the realization is identical for any thread count or traversal order.
template <typename S>
void apply_capture_noise(Image<S>& img, const S& sigma, const S& mu, uint64_t seed) {
    for (size_t i = 0; i < img.data.size(); ++i) {
        double eps = keyed_normal(seed, i);
        img.data[i] = img.data[i] + sigma * eps + mu;
    }
}

// Masked variant used by the Gaussian depth post-processor: pixels with
// mask == 0 keep their value (and draw no eps).
template <typename S>
void apply_capture_noise_masked(Image<S>& img, const MaskImage& mask, const S& sigma, const S& mu,
                                uint64_t seed) {
    for (size_t i = 0; i < img.data.size(); ++i) {
        if (!mask.data[i]) continue;
        double eps = keyed_normal(seed, i);
        img.data[i] = img.data[i] + sigma * eps + mu;
    }
}

} // namespace slsim
