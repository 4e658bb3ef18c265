#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

#include "slsim/errors.hpp"

namespace slsim {

// Dense row-major H x W x C raster. T is double for plain evaluation or
// ad::Var when the image participates in gradient recording.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c = 1, T fill = T{})
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    size_t index(int y, int x, int c = 0) const {
        assert(x >= 0 && x < width && y >= 0 && y < height && c >= 0 && c < channels);
        return (static_cast<size_t>(y) * width + x) * channels + c;
    }

    T& operator()(int y, int x, int c = 0) { return data[index(y, x, c)]; }
    const T& operator()(int y, int x, int c = 0) const { return data[index(y, x, c)]; }

    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    template <typename U>
    bool same_shape(const Image<U>& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

using ImageD = Image<double>;
using MaskImage = Image<uint8_t>;

inline MaskImage mask_and(const MaskImage& a, const MaskImage& b) {
    if (!a.same_shape(b))
        throw contract_error("mask_and: shapes differ");
    MaskImage out(a.width, a.height, 1);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (a.data[i] && b.data[i]) ? 1 : 0;
    return out;
}

inline size_t mask_count(const MaskImage& m) {
    size_t n = 0;
    for (uint8_t v : m.data)
        n += v ? 1 : 0;
    return n;
}

} // namespace slsim
