#pragma once

#include <cmath>
#include <string>

#include "slsim/errors.hpp"

namespace slsim {

// Central-difference check for one scalar parameter: evaluates f at p +/- h
// and compares against the analytic gradient. Returns the relative error
// |g_ad - g_fd| / max(1, |g_fd|).
template <typename F>
double finite_diff_check(F&& f, double analytic_grad, double p, double h) {
    double lo = f(p - h);
    double hi = f(p + h);
    if (!std::isfinite(lo) || !std::isfinite(hi))
        throw numeric_error("finite_diff_check: non-finite evaluation at p=" + std::to_string(p) +
                            " h=" + std::to_string(h));
    double fd = (hi - lo) / (2.0 * h);
    if (!std::isfinite(analytic_grad))
        throw numeric_error("finite_diff_check: non-finite analytic gradient");
    return std::fabs(analytic_grad - fd) / std::max(1.0, std::fabs(fd));
}

} // namespace slsim
