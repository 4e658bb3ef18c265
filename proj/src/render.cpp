#include "slsim/render.hpp"

#include <Eigen/Geometry>
#include <array>

#include "slsim/parallel.hpp"

namespace slsim {

namespace {

constexpr double kTMin = 1e-6;            // reject hits closer than 1 nm
constexpr double kShadowTMax = 1.0 - 1e-6; // shadow rays are parametrized on [0, 1]

// XYZ Euler rotation, applied as Rz * Ry * Rx.
template <typename T>
Vec3<T> rotate_xyz(const Vec3<T>& v, const T& rx, const T& ry, const T& rz) {
    T cx = cos(rx), sx = sin(rx);
    Vec3<T> a;
    a.x() = v.x();
    a.y() = cx * v.y() - sx * v.z();
    a.z() = sx * v.y() + cx * v.z();
    T cy = cos(ry), sy = sin(ry);
    Vec3<T> b;
    b.x() = cy * a.x() + sy * a.z();
    b.y() = a.y();
    b.z() = cy * a.z() - sy * a.x();
    T cz = cos(rz), sz = sin(rz);
    Vec3<T> c;
    c.x() = cz * b.x() - sz * b.y();
    c.y() = sz * b.x() + cz * b.y();
    c.z() = b.z();
    return c;
}

bool hit_tri(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& v0,
             const Eigen::Vector3d& v1, const Eigen::Vector3d& v2, double t_min, double t_max,
             double& t_out) {
    Eigen::Vector3d e1 = v1 - v0, e2 = v2 - v0;
    Eigen::Vector3d p = d.cross(e2);
    double det = e1.dot(p);
    if (std::fabs(det) < 1e-14) return false;
    double inv = 1.0 / det;
    Eigen::Vector3d s = o - v0;
    double u = s.dot(p) * inv;
    // small slack so seams between coplanar triangles cannot open cracks
    if (u < -1e-10 || u > 1.0 + 1e-10) return false;
    Eigen::Vector3d q = s.cross(e1);
    double v = d.dot(q) * inv;
    if (v < -1e-10 || u + v > 1.0 + 1e-10) return false;
    double t = e2.dot(q) * inv;
    if (t <= t_min || t >= t_max) return false;
    t_out = t;
    return true;
}

template <typename S>
Vec3<S> ray_at(const Eigen::Vector3d& d, const S& t) { // origin 0
    Vec3<S> r;
    r.x() = t * d.x();
    r.y() = t * d.y();
    r.z() = t * d.z();
    return r;
}

template <typename S>
Vec3<S> sub3(const Vec3<S>& a, const Vec3<S>& b) {
    Vec3<S> r;
    r.x() = a.x() - b.x();
    r.y() = a.y() - b.y();
    r.z() = a.z() - b.z();
    return r;
}

template <typename S>
Vec3<S> sub_const(const Vec3<S>& a, const Eigen::Vector3d& b) {
    Vec3<S> r;
    r.x() = a.x() - b.x();
    r.y() = a.y() - b.y();
    r.z() = a.z() - b.z();
    return r;
}

template <typename S>
Vec3<S> rsub_const(const Eigen::Vector3d& a, const Vec3<S>& b) {
    Vec3<S> r;
    r.x() = a.x() - b.x();
    r.y() = a.y() - b.y();
    r.z() = a.z() - b.z();
    return r;
}

} // namespace

template <typename S>
SceneRT<S> build_scene_rt(const SensorConfig& cfg, const Scene& scene, const SimParams<S>& par) {
    SceneRT<S> rt;
    rt.emitter = {cfg.baseline_mm, 0.0, 0.0};
    if (scene.plane) {
        if (!par.has_plane) throw contract_error("build_scene_rt: plane parameters missing");
        PlaneRT<S> p;
        p.z = par.plane_z;
        p.alpha = par.plane_alpha;
        p.sin_a = sin(p.alpha);
        p.cos_a = cos(p.alpha);
        p.z_d = value_of(p.z);
        p.sin_d = value_of(p.sin_a);
        p.cos_d = value_of(p.cos_a);
        p.albedo = scene.plane->albedo;
        rt.plane = std::move(p);
    }
    int opt = scene.optimizable_object();
    for (size_t oi = 0; oi < scene.objects.size(); ++oi) {
        const MeshObject& obj = scene.objects[oi];
        rt.object_albedo.push_back(obj.albedo);
        bool dyn = static_cast<int>(oi) == opt;
        if (dyn && !par.has_pose) throw contract_error("build_scene_rt: pose parameters missing");
        std::vector<Vec3<S>> verts_s;
        std::vector<Eigen::Vector3d> verts_d;
        if (dyn) {
            verts_s.reserve(obj.vertices.size());
            for (const auto& v : obj.vertices) {
                Vec3<S> vs = rotate_xyz(vec_cast<S>(v, par.pose_t.x()), par.pose_r.x(),
                                        par.pose_r.y(), par.pose_r.z());
                vs.x() = vs.x() + par.pose_t.x();
                vs.y() = vs.y() + par.pose_t.y();
                vs.z() = vs.z() + par.pose_t.z();
                verts_s.push_back(vs);
                verts_d.push_back(values_of(vs));
            }
        } else {
            Vec3<double> r = obj.rotation_deg * kDegToRad;
            verts_d.reserve(obj.vertices.size());
            for (const auto& v : obj.vertices)
                verts_d.push_back(values_of(rotate_xyz<double>(v, r.x(), r.y(), r.z())) +
                                  obj.translation);
        }
        for (const auto& f : obj.faces) {
            TriRT<S> tri;
            tri.v0 = verts_d[f[0]];
            tri.v1 = verts_d[f[1]];
            tri.v2 = verts_d[f[2]];
            tri.geom_n = (tri.v1 - tri.v0).cross(tri.v2 - tri.v0);
            tri.object = static_cast<int>(oi);
            tri.dynamic = dyn;
            if (dyn) {
                tri.s0 = verts_s[f[0]];
                tri.s1 = verts_s[f[1]];
                tri.s2 = verts_s[f[2]];
            }
            rt.tris.push_back(std::move(tri));
        }
    }
    std::vector<Aabb> boxes(rt.tris.size());
    for (size_t i = 0; i < rt.tris.size(); ++i) {
        boxes[i].grow(rt.tris[i].v0);
        boxes[i].grow(rt.tris[i].v1);
        boxes[i].grow(rt.tris[i].v2);
    }
    rt.bvh = Bvh::build(boxes);
    return rt;
}

template <typename S>
HitD trace_nearest(const SceneRT<S>& rt, const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                   double t_max, int exclude) {
    HitD best;
    double t_best = t_max;
    if (rt.plane && exclude != kPrimPlane) {
        const PlaneRT<S>& p = *rt.plane;
        double denom = p.cos_d * d.z() - p.sin_d * d.y();
        if (std::fabs(denom) > 1e-12) {
            double num = p.z_d * p.cos_d - (p.cos_d * o.z() - p.sin_d * o.y());
            double t = num / denom;
            if (t > kTMin && t < t_best) {
                t_best = t;
                best = {kPrimPlane, t};
            }
        }
    }
    rt.bvh.traverse(o, d, t_best, [&](int i, double& tm) {
        if (i == exclude) return;
        const TriRT<S>& tri = rt.tris[i];
        double t;
        if (hit_tri(o, d, tri.v0, tri.v1, tri.v2, kTMin, tm, t)) {
            best = {i, t};
            tm = t;
        }
    });
    return best;
}

template <typename S>
EmitterSample<S> project_to_emitter(const Vec3<S>& V, const SensorConfig& cfg) {
    EmitterSample<S> e;
    if (!(value_of(V.z()) > 1e-9)) return e; // at or behind the emitter plane
    S inv_z = 1.0 / V.z();
    e.x = (V.x() - cfg.baseline_mm) * inv_z * cfg.focal_px + 0.5 * cfg.width;
    e.y = V.y() * inv_z * cfg.focal_px + 0.5 * cfg.height;
    e.z = V.z();
    e.valid = true;
    return e;
}

template <typename S>
LiftedHit<S> lift_primary(const SceneRT<S>& rt, const Eigen::Vector3d& d, const HitD& hit,
                          const SimParams<S>& par) {
    LiftedHit<S> out;
    if (hit.prim == kPrimPlane) {
        const PlaneRT<S>& p = *rt.plane;
        S denom = p.cos_a * d.z() - p.sin_a * d.y(); // n . d with n = (0,-sin,cos)
        S t = p.z * p.cos_a / denom;
        out.V = ray_at(d, t);
        double facing = p.cos_d * d.z() - p.sin_d * d.y();
        out.n.x() = zero_like(p.z);
        if (facing > 0) { // flip the normal toward the camera
            out.n.y() = p.sin_a;
            out.n.z() = -p.cos_a;
        } else {
            out.n.y() = -p.sin_a;
            out.n.z() = p.cos_a;
        }
        out.object = -1;
        out.albedo = p.albedo;
        return out;
    }
    const TriRT<S>& tri = rt.tris[hit.prim];
    out.object = tri.object;
    out.albedo = rt.object_albedo[tri.object];
    if (!tri.dynamic) {
        // static geometry and a fixed camera ray: the hit is a constant
        Eigen::Vector3d V = hit.t * d;
        Eigen::Vector3d n = tri.geom_n.normalized();
        if (n.dot(d) > 0) n = -n;
        out.V = vec_cast<S>(V, par.emitter_intensity);
        out.n = vec_cast<S>(n, par.emitter_intensity);
        return out;
    }
    Vec3<S> e1 = sub3(tri.s1, tri.s0), e2 = sub3(tri.s2, tri.s0);
    Vec3<S> ng = cross3(e1, e2);
    S t = dot3(ng, tri.s0) / dot3(ng, d); // camera rays originate at 0
    out.V = ray_at(d, t);
    Vec3<S> n = normalize3(ng);
    if (tri.geom_n.dot(d) > 0) {
        n.x() = -n.x();
        n.y() = -n.y();
        n.z() = -n.z();
    }
    out.n = n;
    return out;
}

template <typename S>
S shadow_factor(const SceneRT<S>& rt, const Vec3<S>& V, int self_prim, const SimParams<S>& par) {
    Eigen::Vector3d dir_d = values_of(V) - rt.emitter;
    HitD occ = trace_nearest(rt, rt.emitter, dir_d, kShadowTMax, self_prim);
    S delta = zero_like(par.shadow_bias); // unoccluded: exact zero depth gap
    if (occ.prim != kPrimNone) {
        Vec3<S> dir_s = sub_const(V, rt.emitter);
        S t{};
        if (occ.prim == kPrimPlane) {
            const PlaneRT<S>& p = *rt.plane;
            // n . emitter = 0 because n.x = 0 and the emitter sits on the x-axis
            t = p.z * p.cos_a / (p.cos_a * dir_s.z() - p.sin_a * dir_s.y());
        } else {
            const TriRT<S>& tri = rt.tris[occ.prim];
            if (tri.dynamic) {
                Vec3<S> e1 = sub3(tri.s1, tri.s0), e2 = sub3(tri.s2, tri.s0);
                Vec3<S> ng = cross3(e1, e2);
                t = dot3(ng, sub_const(tri.s0, rt.emitter)) / dot3(ng, dir_s);
            } else {
                double num = tri.geom_n.dot(tri.v0 - rt.emitter); // constant plane offset
                t = num / dot3(tri.geom_n, dir_s);
            }
        }
        S zhat = t * dir_s.z(); // emitter depth of the occluder (emitter z = 0)
        delta = V.z() - zhat;
    }
    return 1.0 - sigmoid(par.shadow_steepness * (delta - par.shadow_bias));
}

template <typename S>
RenderResult<S> render_capture(const SensorConfig& cfg, const Scene& scene,
                               const SimParams<S>& par, int threads) {
    validate(cfg);
    validate(scene);
    if (par.pattern.empty()) throw contract_error("render_capture: parameter set has no pattern");
    SceneRT<S> rt = build_scene_rt(cfg, scene, par);
    const int W = cfg.width, H = cfg.height, C = par.pattern.channels;
    RenderResult<S> out;
    out.capture = Image<S>(W, H, C);
    out.gt_depth = Image<S>(W, H, 1);
    out.shadow = Image<S>(W, H, 1);
    out.hit = MaskImage(W, H, 1, 0);
    if constexpr (std::is_same_v<S, ad::Var>) threads = 1; // tape recording is sequential
    const int ss = cfg.supersample;
    const double cx = 0.5 * W, cy = 0.5 * H, inv_f = 1.0 / cfg.focal_px;
    const double scale_u = par.pattern.width == W ? 1.0 : double(par.pattern.width) / W;
    const double scale_v = par.pattern.height == H ? 1.0 : double(par.pattern.height) / H;

    // Shades one surviving hit and accumulates the per-channel contribution.
    auto shade_into = [&](const Eigen::Vector3d& d, const HitD& h, std::array<S, 3>& accum,
                          S* shadow_out, S* depth_out) {
        LiftedHit<S> lift = lift_primary(rt, d, h, par);
        S sh = shadow_factor(rt, lift.V, h.prim, par);
        if (shadow_out) *shadow_out = sh;
        if (depth_out) *depth_out = lift.V.z();
        EmitterSample<S> e = project_to_emitter(lift.V, cfg);
        if (!e.valid) return;
        S falloff = par.emitter_intensity / sqr(e.z);
        Vec3<S> omega = normalize3(rsub_const(rt.emitter, lift.V));
        S cosg = max0(dot3(lift.n, omega));
        S common = falloff * sh * cosg;
        S u = scale_u == 1.0 ? e.x : e.x * scale_u;
        S v = scale_v == 1.0 ? e.y : e.y * scale_v;
        for (int c = 0; c < C; ++c) {
            S gamma = sample_bilinear(par.pattern, u, v, c);
            accum[c] += (gamma * common) * lift.albedo[c];
        }
    };

    parallel_rows(0, H, threads, threads, [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < W; ++x) {
                std::array<S, 3> accum{};
                for (int c = 0; c < C; ++c) accum[c] = zero_like(par.emitter_intensity);
                Eigen::Vector3d dc((x + 0.5 - cx) * inv_f, (y + 0.5 - cy) * inv_f, 1.0);
                HitD hc = trace_nearest(rt, Eigen::Vector3d::Zero(), dc, 1e30, kPrimNone);
                S gt = zero_like(par.emitter_intensity);
                S shadow = zero_like(par.emitter_intensity);
                if (hc.prim != kPrimNone) {
                    out.hit(y, x) = 1;
                    if (ss == 1) {
                        shade_into(dc, hc, accum, &shadow, &gt);
                    } else {
                        LiftedHit<S> lift = lift_primary(rt, dc, hc, par);
                        gt = lift.V.z();
                        shadow = shadow_factor(rt, lift.V, hc.prim, par);
                    }
                }
                if (ss > 1) {
                    for (int sy = 0; sy < ss; ++sy)
                        for (int sx = 0; sx < ss; ++sx) {
                            double ox = (sx + 0.5) / ss - 0.5, oy = (sy + 0.5) / ss - 0.5;
                            Eigen::Vector3d d((x + 0.5 + ox - cx) * inv_f,
                                              (y + 0.5 + oy - cy) * inv_f, 1.0);
                            HitD h = trace_nearest(rt, Eigen::Vector3d::Zero(), d, 1e30, kPrimNone);
                            if (h.prim != kPrimNone) shade_into(d, h, accum, nullptr, nullptr);
                        }
                }
                double inv_n = 1.0 / (ss * ss);
                for (int c = 0; c < C; ++c)
                    out.capture(y, x, c) = ss == 1 ? accum[c] : accum[c] * inv_n;
                out.gt_depth(y, x) = gt;
                out.shadow(y, x) = shadow;
            }
        }
    });
    return out;
}

template <typename S>
std::vector<Image<S>> render_reference_patterns(const SensorConfig& cfg, const Image<S>& pattern,
                                                int threads) {
    validate(cfg);
    if (pattern.empty())
        throw contract_error("render_reference_patterns: empty pattern");
    const int W = cfg.width, H = cfg.height, C = pattern.channels;
    const int n = cfg.subpixel_levels, ss = cfg.supersample;
    if constexpr (std::is_same_v<S, ad::Var>) threads = 1;
    const double scale_u = pattern.width == W ? 1.0 : double(pattern.width) / W;
    const double scale_v = pattern.height == H ? 1.0 : double(pattern.height) / H;
    std::vector<Image<S>> refs;
    refs.reserve(n);
    for (int i = 0; i < n; ++i) refs.emplace_back(W, H, C);
    for (int i = 0; i < n; ++i) {
        double shift = double(i) / n;
        parallel_rows(0, H, threads, threads, [&](int y0, int y1) {
            for (int y = y0; y < y1; ++y)
                for (int x = 0; x < W; ++x)
                    for (int c = 0; c < C; ++c) {
                        if (ss == 1) {
                            double u = (x + 0.5 - shift) * scale_u, v = (y + 0.5) * scale_v;
                            refs[i](y, x, c) = sample_bilinear(pattern, u, v, c);
                            continue;
                        }
                        S acc = zero_like(pattern.data[0]);
                        for (int sy = 0; sy < ss; ++sy)
                            for (int sx = 0; sx < ss; ++sx) {
                                double ox = (sx + 0.5) / ss - 0.5, oy = (sy + 0.5) / ss - 0.5;
                                double u = (x + 0.5 + ox - shift) * scale_u;
                                double v = (y + 0.5 + oy) * scale_v;
                                acc += sample_bilinear(pattern, u, v, c);
                            }
                        refs[i](y, x, c) = acc * (1.0 / (ss * ss));
                    }
        });
    }
    return refs;
}

std::pair<double, double> scene_depth_bounds(const SensorConfig& cfg, const Scene& scene) {
    validate(cfg);
    validate(scene);
    ImageD dummy;
    ParamLayout layout = make_layout(scene, dummy, false);
    std::vector<double> flat = pack_params(layout, cfg, scene, dummy, {});
    SimParams<double> par = unpack_params<double>(layout, flat, nullptr, nullptr);
    SceneRT<double> rt = build_scene_rt(cfg, scene, par);
    const double cx = 0.5 * cfg.width, cy = 0.5 * cfg.height, inv_f = 1.0 / cfg.focal_px;
    double z_lo = 1e300, z_hi = -1e300;
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
            Eigen::Vector3d d((x + 0.5 - cx) * inv_f, (y + 0.5 - cy) * inv_f, 1.0);
            HitD h = trace_nearest(rt, Eigen::Vector3d::Zero(), d, 1e30, kPrimNone);
            if (h.prim == kPrimNone) continue;
            double z = h.t * d.z();
            z_lo = std::min(z_lo, z);
            z_hi = std::max(z_hi, z);
        }
    if (z_hi < z_lo) return {0.0, 0.0};
    return {z_lo, z_hi};
}

template SceneRT<double> build_scene_rt<double>(const SensorConfig&, const Scene&,
                                                const SimParams<double>&);
template SceneRT<ad::Var> build_scene_rt<ad::Var>(const SensorConfig&, const Scene&,
                                                  const SimParams<ad::Var>&);
template HitD trace_nearest<double>(const SceneRT<double>&, const Eigen::Vector3d&,
                                    const Eigen::Vector3d&, double, int);
template HitD trace_nearest<ad::Var>(const SceneRT<ad::Var>&, const Eigen::Vector3d&,
                                     const Eigen::Vector3d&, double, int);
template EmitterSample<double> project_to_emitter<double>(const Vec3<double>&,
                                                          const SensorConfig&);
template EmitterSample<ad::Var> project_to_emitter<ad::Var>(const Vec3<ad::Var>&,
                                                            const SensorConfig&);
template LiftedHit<double> lift_primary<double>(const SceneRT<double>&, const Eigen::Vector3d&,
                                                const HitD&, const SimParams<double>&);
template LiftedHit<ad::Var> lift_primary<ad::Var>(const SceneRT<ad::Var>&, const Eigen::Vector3d&,
                                                  const HitD&, const SimParams<ad::Var>&);
template double shadow_factor<double>(const SceneRT<double>&, const Vec3<double>&, int,
                                      const SimParams<double>&);
template ad::Var shadow_factor<ad::Var>(const SceneRT<ad::Var>&, const Vec3<ad::Var>&, int,
                                        const SimParams<ad::Var>&);
template RenderResult<double> render_capture<double>(const SensorConfig&, const Scene&,
                                                     const SimParams<double>&, int);
template RenderResult<ad::Var> render_capture<ad::Var>(const SensorConfig&, const Scene&,
                                                       const SimParams<ad::Var>&, int);
template std::vector<Image<double>> render_reference_patterns<double>(const SensorConfig&,
                                                                      const Image<double>&, int);
template std::vector<Image<ad::Var>> render_reference_patterns<ad::Var>(const SensorConfig&,
                                                                        const Image<ad::Var>&, int);

} // namespace slsim
