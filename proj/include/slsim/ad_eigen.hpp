#pragma once

#include <Eigen/Core>

#include "slsim/scalar_ops.hpp"
#include "slsim/tape.hpp"

// Teach Eigen about ad::Var so fixed-size vectors/matrices can be templated
// on the recording scalar, with double/Var mixing in coefficient-wise ops.
namespace Eigen {

template <>
struct NumTraits<slsim::ad::Var> : NumTraits<double> {
    typedef slsim::ad::Var Real;
    typedef slsim::ad::Var NonInteger;
    typedef slsim::ad::Var Nested;
    enum {
        IsComplex = 0,
        IsInteger = 0,
        IsSigned = 1,
        RequireInitialization = 1,
        ReadCost = 1,
        AddCost = 3,
        MulCost = 3,
    };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<slsim::ad::Var, double, BinaryOp> {
    typedef slsim::ad::Var ReturnType;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, slsim::ad::Var, BinaryOp> {
    typedef slsim::ad::Var ReturnType;
};

} // namespace Eigen

namespace slsim {

template <typename S>
using Vec3 = Eigen::Matrix<S, 3, 1>;

template <typename A, typename B>
using scalar_promote_t =
    std::conditional_t<std::is_same_v<A, ad::Var> || std::is_same_v<B, ad::Var>, ad::Var, double>;

// Hand-rolled 3-vector reductions with a fixed evaluation order, so double
// and Var modes (and any strip partition) sum identically.
template <typename A, typename B>
scalar_promote_t<A, B> dot3(const Vec3<A>& a, const Vec3<B>& b) {
    return a.x() * b.x() + a.y() * b.y() + a.z() * b.z();
}

template <typename A, typename B>
Vec3<scalar_promote_t<A, B>> cross3(const Vec3<A>& a, const Vec3<B>& b) {
    Vec3<scalar_promote_t<A, B>> r;
    r.x() = a.y() * b.z() - a.z() * b.y();
    r.y() = a.z() * b.x() - a.x() * b.z();
    r.z() = a.x() * b.y() - a.y() * b.x();
    return r;
}

template <typename S>
S norm3(const Vec3<S>& a) {
    return sqrt(dot3(a, a));
}

template <typename S>
Vec3<S> normalize3(const Vec3<S>& a) {
    S inv = 1.0 / norm3(a);
    Vec3<S> r;
    r.x() = a.x() * inv;
    r.y() = a.y() * inv;
    r.z() = a.z() * inv;
    return r;
}

inline Eigen::Vector3d values_of(const Vec3<double>& v) { return v; }
inline Eigen::Vector3d values_of(const Vec3<ad::Var>& v) {
    return {v.x().value(), v.y().value(), v.z().value()};
}

template <typename S>
Vec3<S> vec_cast(const Eigen::Vector3d& v, const S& carrier) {
    Vec3<S> r;
    r.x() = constant_like(carrier, v.x());
    r.y() = constant_like(carrier, v.y());
    r.z() = constant_like(carrier, v.z());
    return r;
}

} // namespace slsim
