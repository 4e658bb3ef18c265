#pragma once

#include <string>
#include <vector>

#include "slsim/image.hpp"
#include "slsim/params.hpp"

namespace slsim {

// Residual depth refiner: depth + [1x1 conv over ReLU(5x5 conv over the
// stacked (matched depth, ground-truth depth, shadow factor) planes)].
// Zero padding at the borders; zero weights make it the identity.
template <typename S>
Image<S> conv_refine(const Image<S>& matched_depth, const Image<S>& gt_depth,
                     const Image<S>& shadow, const std::vector<S>& weights);

// Weight vector layout: [w1: F x Cin x K x K][b1: F][w2: F][b2], see
// conv_param_count().
std::vector<double> zero_conv_weights();
std::vector<double> random_conv_weights(uint64_t seed, double scale);

// Flat little-endian binary persistence with a small self-describing header.
void write_conv_weights(const std::vector<double>& weights, const std::string& path);
std::vector<double> read_conv_weights(const std::string& path);

} // namespace slsim
