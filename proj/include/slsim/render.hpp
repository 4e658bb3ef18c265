#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "slsim/ad_eigen.hpp"
#include "slsim/bvh.hpp"
#include "slsim/image.hpp"
#include "slsim/params.hpp"
#include "slsim/pattern.hpp"
#include "slsim/scene.hpp"
#include "slsim/sensor.hpp"

namespace slsim {

// Primitive ids used by ray queries: triangles are >= 0.
inline constexpr int kPrimNone = -2;
inline constexpr int kPrimPlane = -1;

// Ray-tracing view of a scene. Traversal runs on plain double values; the
// S-typed copies are what hit recomputation differentiates through. Only the
// analytic plane and the pose-optimizable object carry live S geometry —
// static triangles are constants by construction.
template <typename S>
struct TriRT {
    Eigen::Vector3d v0, v1, v2; // traversal values (pose already applied)
    Eigen::Vector3d geom_n;     // unnormalized (v1-v0) x (v2-v0), values
    int object = 0;
    bool dynamic = false;
    Vec3<S> s0, s1, s2;         // meaningful only when dynamic
};

template <typename S>
struct PlaneRT {
    S z{}, alpha{}, sin_a{}, cos_a{};
    double z_d = 0, sin_d = 0, cos_d = 1;
    Eigen::Vector3d albedo{1, 1, 1};
};

template <typename S>
struct SceneRT {
    std::optional<PlaneRT<S>> plane;
    std::vector<TriRT<S>> tris;
    std::vector<Eigen::Vector3d> object_albedo;
    Bvh bvh;
    Eigen::Vector3d emitter{0, 0, 0}; // (baseline, 0, 0)
};

template <typename S>
SceneRT<S> build_scene_rt(const SensorConfig& cfg, const Scene& scene, const SimParams<S>& par);

struct HitD {
    int prim = kPrimNone;
    double t = 0.0;
};

// Nearest surface along o + t*d for t in (eps, t_max); `exclude` skips one
// primitive (a convex primitive cannot occlude its own points).
template <typename S>
HitD trace_nearest(const SceneRT<S>& rt, const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                   double t_max, int exclude);

template <typename S>
struct EmitterSample {
    S x{}, y{}, z{};
    bool valid = false; // false: point at or behind the emitter plane
};

// Pinhole projection into the emitter image; shares the camera intrinsics
// with principal point at the image center, emitter offset (baseline, 0, 0).
template <typename S>
EmitterSample<S> project_to_emitter(const Vec3<S>& V, const SensorConfig& cfg);

template <typename S>
struct LiftedHit {
    Vec3<S> V;
    Vec3<S> n;     // unit, oriented toward the ray origin
    int object = -1; // -1 = analytic plane
    Eigen::Vector3d albedo;
};

// Recomputes the selected hit with S arithmetic so derivatives flow through
// plane pose / object pose; static-geometry hits become constants.
template <typename S>
LiftedHit<S> lift_primary(const SceneRT<S>& rt, const Eigen::Vector3d& d, const HitD& hit,
                          const SimParams<S>& par);

// Soft shadow term of the emitter visibility: 1 - sigmoid(kappa * (delta - xi))
// where delta = z_e - zhat_e is the gap between the point's emitter depth and
// the first surface the emitter actually sees along the same ray (exact ray
// cast, so delta = 0 when unoccluded).
template <typename S>
S shadow_factor(const SceneRT<S>& rt, const Vec3<S>& V, int self_prim, const SimParams<S>& par);

template <typename S>
struct RenderResult {
    Image<S> capture;  // W x H x C, C follows the pattern; linear intensity, pre-noise
    Image<S> gt_depth; // center-ray z-buffer depth, 0 on miss
    Image<S> shadow;   // center-ray shadow factor, 0 on miss
    MaskImage hit;     // 1 where the center ray hit a surface
};

// Full capture render: supersampled primary rays, emitter projection,
// pattern lookup, 1/z^2 falloff, soft shadow and Lambert cosine.
template <typename S>
RenderResult<S> render_capture(const SensorConfig& cfg, const Scene& scene,
                               const SimParams<S>& par, int threads);

// n_sub reference images: reference i is the pattern rasterized at a global
// horizontal shift of +i/n_sub px (same supersampling box as the capture).
template <typename S>
std::vector<Image<S>> render_reference_patterns(const SensorConfig& cfg, const Image<S>& pattern,
                                                int threads);

// Min/max center-ray depth over hit pixels (plain values); no-hit scenes
// return {0, 0}.
std::pair<double, double> scene_depth_bounds(const SensorConfig& cfg, const Scene& scene);

} // namespace slsim
