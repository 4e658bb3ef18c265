#pragma once

#include <cmath>
#include <cstdint>

namespace slsim {

// splitmix64 finalizer; the basis of all randomness in the simulator.
inline uint64_t mix_u64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// idx-th draw of the stream keyed by `seed`. Counter-based, so any pixel's
// draw is computable independently of evaluation order or thread count.
inline uint64_t keyed_u64(uint64_t seed, uint64_t idx) {
    return mix_u64(seed + idx * 0x9e3779b97f4a7c15ULL);
}

inline double u64_to_unit(uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53; // [0, 1)
}

inline double keyed_uniform(uint64_t seed, uint64_t idx) {
    return u64_to_unit(keyed_u64(seed, idx));
}

// Standard normal via Box-Muller on two keyed uniforms.
inline double keyed_normal(uint64_t seed, uint64_t idx) {
    double u1 = 1.0 - u64_to_unit(keyed_u64(seed, 2 * idx));     // (0, 1]
    double u2 = u64_to_unit(keyed_u64(seed, 2 * idx + 1));       // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Derives an independent stream key from a base seed and a stream label, so
// e.g. pattern generation and capture noise never share draws.
inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
    return mix_u64(mix_u64(seed) ^ (0xd1342543de82ef95ULL * (stream + 1)));
}

} // namespace slsim
