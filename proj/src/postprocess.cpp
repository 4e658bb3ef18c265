#include "slsim/postprocess.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "slsim/errors.hpp"
#include "slsim/rng.hpp"
#include "slsim/scalar_ops.hpp"

static_assert(std::endian::native == std::endian::little,
              "weight files are little-endian; byte swapping is not implemented");

namespace slsim {

template <typename S>
Image<S> conv_refine(const Image<S>& matched_depth, const Image<S>& gt_depth,
                     const Image<S>& shadow, const std::vector<S>& weights) {
    if (weights.size() != static_cast<size_t>(conv_param_count()))
        throw contract_error("conv_refine: expected " + std::to_string(conv_param_count()) +
                             " weights, got " + std::to_string(weights.size()));
    const int W = matched_depth.width, H = matched_depth.height;
    if (!matched_depth.same_shape(gt_depth) || !matched_depth.same_shape(shadow) ||
        matched_depth.channels != 1)
        throw contract_error("conv_refine: input planes must share a single-channel shape");
    const Image<S>* planes[kConvIn] = {&matched_depth, &gt_depth, &shadow};
    const int K = kConvKernel, R = K / 2, F = kConvFilters;
    const size_t off_b1 = static_cast<size_t>(F) * kConvIn * K * K;
    const size_t off_w2 = off_b1 + F;
    const size_t off_b2 = off_w2 + F;

    Image<S> out(W, H, 1);
    std::vector<S> taps, wsel, act(F);
    taps.reserve(static_cast<size_t>(kConvIn) * K * K);
    wsel.reserve(taps.capacity());
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            for (int f = 0; f < F; ++f) {
                taps.clear();
                wsel.clear();
                // gather in-image taps; zero padding contributes nothing
                for (int c = 0; c < kConvIn; ++c)
                    for (int ky = 0; ky < K; ++ky) {
                        int yy = y + ky - R;
                        if (yy < 0 || yy >= H) continue;
                        for (int kx = 0; kx < K; ++kx) {
                            int xx = x + kx - R;
                            if (xx < 0 || xx >= W) continue;
                            taps.push_back((*planes[c])(yy, xx));
                            wsel.push_back(weights[((static_cast<size_t>(f) * kConvIn + c) * K +
                                                    ky) * K + kx]);
                        }
                    }
                S pre = vdot(std::span<const S>(wsel.data(), wsel.size()),
                             std::span<const S>(taps.data(), taps.size())) +
                        weights[off_b1 + f];
                act[f] = max0(pre);
            }
            S corr = vdot(std::span<const S>(weights.data() + off_w2, F),
                          std::span<const S>(act.data(), F)) +
                     weights[off_b2];
            out(y, x) = matched_depth(y, x) + corr;
        }
    return out;
}

std::vector<double> zero_conv_weights() {
    return std::vector<double>(conv_param_count(), 0.0);
}

std::vector<double> random_conv_weights(uint64_t seed, double scale) {
    std::vector<double> w(conv_param_count());
    for (size_t i = 0; i < w.size(); ++i) w[i] = scale * keyed_normal(seed, i);
    return w;
}

namespace {
constexpr char kMagic[4] = {'D', 'R', 'W', '1'}; // depth refiner weights, v1
}

void write_conv_weights(const std::vector<double>& weights, const std::string& path) {
    if (weights.size() != static_cast<size_t>(conv_param_count()))
        throw contract_error("write_conv_weights: wrong weight count");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write weights file '" + path + "'");
    out.write(kMagic, 4);
    int32_t dims[3] = {kConvIn, kConvFilters, kConvKernel};
    uint64_t count = weights.size();
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(weights.data()),
              static_cast<std::streamsize>(weights.size() * sizeof(double)));
    if (!out) throw io_error("error while writing '" + path + "'");
}

std::vector<double> read_conv_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open weights file '" + path + "'");
    char magic[4];
    int32_t dims[3];
    uint64_t count = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw io_error("'" + path + "' is not a depth-refiner weights file");
    if (dims[0] != kConvIn || dims[1] != kConvFilters || dims[2] != kConvKernel ||
        count != static_cast<uint64_t>(conv_param_count()))
        throw io_error("'" + path + "' was written for a different refiner architecture");
    std::vector<double> w(count);
    in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw io_error("truncated weights file '" + path + "'");
    return w;
}

template Image<double> conv_refine<double>(const Image<double>&, const Image<double>&,
                                           const Image<double>&, const std::vector<double>&);
template Image<ad::Var> conv_refine<ad::Var>(const Image<ad::Var>&, const Image<ad::Var>&,
                                             const Image<ad::Var>&, const std::vector<ad::Var>&);

} // namespace slsim
