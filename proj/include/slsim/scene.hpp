#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <string>
#include <vector>

namespace slsim {

// Analytic plane through (0, 0, z_mm), tilted about the camera x-axis:
// in-plane axes u = (1,0,0) and v = (0,cos a,sin a), unit normal
// (0,-sin a,cos a). alpha = 0 is the frontal plane; geometry stays
// non-degenerate for |alpha| < 90 degrees.
struct AnalyticPlane {
    double z_mm = 1000.0;
    double alpha_deg = 0.0;
    Eigen::Vector3d albedo{1.0, 1.0, 1.0};
};

struct MeshObject {
    std::string name;
    std::vector<Eigen::Vector3d> vertices;       // object space, mm
    std::vector<std::array<int, 3>> faces;       // indices into vertices
    Eigen::Vector3d albedo{0.8, 0.8, 0.8};
    Eigen::Vector3d translation{0.0, 0.0, 0.0};  // mm
    Eigen::Vector3d rotation_deg{0.0, 0.0, 0.0}; // XYZ Euler, applied as Rz*Ry*Rx
    bool optimizable = false;                    // designated pose-optimization target
};

struct Scene {
    std::optional<AnalyticPlane> plane;
    std::vector<MeshObject> objects;

    // Index of the single pose-optimizable object, or -1.
    int optimizable_object() const;
};

// Throws config_error on out-of-range face indices, degenerate meshes or
// more than one pose-optimizable object.
void validate(const Scene& scene);

// Line-oriented text format ('#' comments):
//   plane <z_mm> <alpha_deg>
//   plane_albedo <r> <g> <b>
//   object <name>
//   albedo <r> <g> <b>            (current object)
//   translate <tx> <ty> <tz>
//   rotate <rx> <ry> <rz>         (degrees)
//   optimizable
//   v <x> <y> <z>
//   f <i> <j> <k>                 (1-based, within the current object)
Scene read_scene(const std::string& path);
void write_scene(const Scene& scene, const std::string& path);

// Convenience builders used by tests and the studies harness.
Scene make_plane_scene(double z_mm, double alpha_deg);
MeshObject make_quad(const std::string& name, const Eigen::Vector3d& v0,
                     const Eigen::Vector3d& v1, const Eigen::Vector3d& v2,
                     const Eigen::Vector3d& v3);

} // namespace slsim
