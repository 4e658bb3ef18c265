#pragma once

#include <cmath>
#include <cstdint>
#include <type_traits>

#include "slsim/errors.hpp"
#include "slsim/image.hpp"
#include "slsim/rng.hpp"
#include "slsim/scalar_ops.hpp"

namespace slsim {

// Result scalar of mixing pattern values of type P with coordinates of type
// C: Var wins whenever either side is on a tape.
template <typename P, typename C>
using promote_t =
    std::conditional_t<std::is_same_v<P, ad::Var> || std::is_same_v<C, ad::Var>, ad::Var, double>;

// Emitter pattern: non-negative intensities, 1 (mono) or 3 (RGB) channels.
void validate_pattern(const ImageD& pattern);

// Pseudo-random dot pattern: Bernoulli(density) dots of value 1 on a zero
// background, replicated across channels. Keyed per pixel, so the result is
// independent of generation order.
inline ImageD make_dot_pattern(int width, int height, int channels, double density,
                               uint64_t seed) {
    if (width < 1 || height < 1 || (channels != 1 && channels != 3))
        throw config_error("make_dot_pattern: bad dimensions");
    if (!(density > 0.0) || !(density < 1.0))
        throw config_error("make_dot_pattern: density must be in (0, 1)");
    ImageD img(width, height, channels);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double dot = keyed_uniform(seed, static_cast<uint64_t>(y) * width + x) < density
                             ? 1.0
                             : 0.0;
            for (int c = 0; c < channels; ++c) img(y, x, c) = dot;
        }
    return img;
}

template <typename P, typename C>
promote_t<P, C> bilinear_zero(const Image<P>& img, C u) {
    using R = promote_t<P, C>;
    if constexpr (std::is_same_v<R, double>) {
        (void)img;
        (void)u;
        return 0.0;
    } else if constexpr (std::is_same_v<P, ad::Var>) {
        (void)u;
        return zero_like(img.data[0]);
    } else {
        return zero_like(u);
    }
}

// Bilinear lookup at continuous coords (u, v) where texel (i, j) is centered
// at (i + 0.5, j + 0.5); outside the image the pattern is zero. The footprint
// choice is made on plain values, the blend weights keep derivatives.
template <typename P, typename C>
promote_t<P, C> sample_bilinear(const Image<P>& img, C u, C v, int channel) {
    double gu = value_of(u) - 0.5, gv = value_of(v) - 0.5;
    int ix = static_cast<int>(std::floor(gu));
    int iy = static_cast<int>(std::floor(gv));
    if (ix < -1 || ix >= img.width || iy < -1 || iy >= img.height)
        return bilinear_zero(img, u);
    C fx = u - (0.5 + ix);
    C fy = v - (0.5 + iy);
    promote_t<P, C> out = bilinear_zero(img, u);
    auto corner = [&](int dx, int dy, auto weight) {
        int cx = ix + dx, cy = iy + dy;
        if (cx < 0 || cx >= img.width || cy < 0 || cy >= img.height) return;
        out += weight * img(cy, cx, channel);
    };
    corner(0, 0, (1.0 - fx) * (1.0 - fy));
    corner(1, 0, fx * (1.0 - fy));
    corner(0, 1, (1.0 - fx) * fy);
    corner(1, 1, fx * fy);
    return out;
}

} // namespace slsim
