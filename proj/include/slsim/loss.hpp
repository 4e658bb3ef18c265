#pragma once

#include "slsim/ad_eigen.hpp"
#include "slsim/image.hpp"

namespace slsim {

// Weighted sum of pixel losses between a simulated and a reference depth
// image, mean-reduced over the jointly valid pixels. Components with zero
// weight are skipped entirely.
struct LossSpec {
    double w_l1 = 0.0;
    double w_huber = 1.0;
    double w_sobel = 0.0;
    double huber_tau = 10.0; // mm; quadratic inside, linear outside
};

// sim and ref may independently be double or recorded scalars.
template <typename S, typename R>
scalar_promote_t<S, R> masked_loss(const Image<S>& sim, const Image<R>& ref,
                                   const MaskImage& valid, const LossSpec& spec);

} // namespace slsim
