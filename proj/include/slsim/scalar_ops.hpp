#pragma once

#include <cassert>
#include <cmath>
#include <span>

#include "slsim/tape.hpp"

// Uniform scalar interface so pipeline code templated on S compiles for both
// plain double (fast forward evaluation) and ad::Var (gradient recording).
// Generic code calls these unqualified from namespace slsim; the Var
// overloads are found via ADL in slsim::ad.

namespace slsim {

using std::abs;
using std::cos;
using std::exp;
using std::log;
using std::sin;
using std::sqrt;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double max0(double x) { return x > 0 ? x : 0.0; }
inline double sqr(double x) { return x * x; }

inline double value_of(double x) { return x; }
inline double value_of(ad::Var x) { return x.value(); }

// Constant with the same tape affinity as ref: plain 0/c for double, a fresh
// non-parameter leaf for Var.
inline double zero_like(double) { return 0.0; }
inline ad::Var zero_like(ad::Var ref) { return ad::make_var(*ref.tape, 0.0); }
inline double constant_like(double, double c) { return c; }
inline ad::Var constant_like(ad::Var ref, double c) { return ad::make_var(*ref.tape, c); }

// Order-fixed reductions. The Var forms record one n-ary node, and the double
// forms accumulate in the identical left-to-right order, which keeps the two
// evaluation modes numerically interchangeable.
inline double vsum(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
}

inline double vdot(std::span<const double> xs, std::span<const double> ys) {
    assert(xs.size() == ys.size());
    double s = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) s += xs[i] * ys[i];
    return s;
}

namespace ad {

inline Var vsum(std::span<const Var> xs) {
    assert(!xs.empty());
    Tape* tape = xs.front().tape;
    thread_local std::vector<int32_t> ids;
    ids.clear();
    double s = 0.0;
    for (const Var& x : xs) {
        ids.push_back(x.id);
        s += x.value();
    }
    return Var(tape, tape->rec_sum(ids.data(), static_cast<int>(ids.size()), s));
}

inline Var vdot(std::span<const Var> xs, std::span<const Var> ys) {
    assert(!xs.empty() && xs.size() == ys.size());
    Tape* tape = xs.front().tape;
    thread_local std::vector<int32_t> xid, yid;
    xid.clear();
    yid.clear();
    double s = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        xid.push_back(xs[i].id);
        yid.push_back(ys[i].id);
        s += xs[i].value() * ys[i].value();
    }
    return Var(tape, tape->rec_dot(xid.data(), yid.data(), static_cast<int>(xid.size()), s));
}

} // namespace ad

using ad::vdot;
using ad::vsum;

} // namespace slsim
