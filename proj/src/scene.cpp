#include "slsim/scene.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "slsim/errors.hpp"
#include "slsim/textfmt.hpp"

namespace slsim {

int Scene::optimizable_object() const {
    for (size_t i = 0; i < objects.size(); ++i)
        if (objects[i].optimizable) return static_cast<int>(i);
    return -1;
}

void validate(const Scene& scene) {
    int n_opt = 0;
    for (const auto& obj : scene.objects) {
        if (obj.vertices.empty() || obj.faces.empty())
            throw config_error("object '" + obj.name + "' has no geometry");
        int nv = static_cast<int>(obj.vertices.size());
        for (const auto& f : obj.faces)
            for (int idx : f)
                if (idx < 0 || idx >= nv)
                    throw config_error("object '" + obj.name + "' has out-of-range face index");
        if (obj.optimizable) ++n_opt;
    }
    if (n_opt > 1) throw config_error("at most one object may be pose-optimizable");
    if (!scene.plane && scene.objects.empty()) throw config_error("scene is empty");
    if (scene.plane && std::fabs(scene.plane->alpha_deg) >= 90.0)
        throw config_error("plane tilt must satisfy |alpha| < 90 degrees");
}

namespace {

std::vector<std::string> split_ws(std::string_view sv) {
    std::vector<std::string> out;
    std::istringstream ss{std::string(sv)};
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

} // namespace

Scene read_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open scene file '" + path + "'");
    Scene scene;
    MeshObject* cur = nullptr;
    std::string line;
    int lineno = 0;
    auto ctx = [&](const std::string& msg) {
        return config_error(path + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        auto tok = split_ws(sv);
        const std::string& kw = tok[0];
        auto need = [&](size_t n) {
            if (tok.size() != n + 1) throw ctx("'" + kw + "' expects " + std::to_string(n) + " values");
        };
        auto num = [&](size_t i) { return parse_double(tok[i], kw); };
        if (kw == "plane") {
            need(2);
            AnalyticPlane p;
            p.z_mm = num(1);
            p.alpha_deg = num(2);
            if (scene.plane) p.albedo = scene.plane->albedo;
            scene.plane = p;
        } else if (kw == "plane_albedo") {
            need(3);
            if (!scene.plane) throw ctx("plane_albedo before plane");
            scene.plane->albedo = {num(1), num(2), num(3)};
        } else if (kw == "object") {
            need(1);
            scene.objects.emplace_back();
            cur = &scene.objects.back();
            cur->name = tok[1];
        } else if (kw == "albedo") {
            need(3);
            if (!cur) throw ctx("albedo outside object");
            cur->albedo = {num(1), num(2), num(3)};
        } else if (kw == "translate") {
            need(3);
            if (!cur) throw ctx("translate outside object");
            cur->translation = {num(1), num(2), num(3)};
        } else if (kw == "rotate") {
            need(3);
            if (!cur) throw ctx("rotate outside object");
            cur->rotation_deg = {num(1), num(2), num(3)};
        } else if (kw == "optimizable") {
            need(0);
            if (!cur) throw ctx("optimizable outside object");
            cur->optimizable = true;
        } else if (kw == "v") {
            need(3);
            if (!cur) throw ctx("vertex outside object");
            cur->vertices.emplace_back(num(1), num(2), num(3));
        } else if (kw == "f") {
            need(3);
            if (!cur) throw ctx("face outside object");
            auto idx = [&](size_t i) {
                long long v = parse_int(tok[i], "face index");
                return static_cast<int>(v) - 1; // 1-based on disk
            };
            cur->faces.push_back({idx(1), idx(2), idx(3)});
        } else {
            throw ctx("unknown keyword '" + kw + "'");
        }
    }
    validate(scene);
    return scene;
}

void write_scene(const Scene& scene, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write scene file '" + path + "'");
    auto v3 = [](const Eigen::Vector3d& v) {
        return format_double(v.x()) + " " + format_double(v.y()) + " " + format_double(v.z());
    };
    if (scene.plane) {
        out << "plane " << format_double(scene.plane->z_mm) << " "
            << format_double(scene.plane->alpha_deg) << "\n";
        out << "plane_albedo " << v3(scene.plane->albedo) << "\n";
    }
    for (const auto& obj : scene.objects) {
        out << "object " << obj.name << "\n";
        out << "albedo " << v3(obj.albedo) << "\n";
        out << "translate " << v3(obj.translation) << "\n";
        out << "rotate " << v3(obj.rotation_deg) << "\n";
        if (obj.optimizable) out << "optimizable\n";
        for (const auto& v : obj.vertices) out << "v " << v3(v) << "\n";
        for (const auto& f : obj.faces)
            out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
    }
    if (!out) throw io_error("error while writing '" + path + "'");
}

Scene make_plane_scene(double z_mm, double alpha_deg) {
    Scene scene;
    scene.plane = AnalyticPlane{z_mm, alpha_deg, {1.0, 1.0, 1.0}};
    return scene;
}

MeshObject make_quad(const std::string& name, const Eigen::Vector3d& v0,
                     const Eigen::Vector3d& v1, const Eigen::Vector3d& v2,
                     const Eigen::Vector3d& v3) {
    MeshObject obj;
    obj.name = name;
    obj.vertices = {v0, v1, v2, v3};
    obj.faces = {{0, 1, 2}, {0, 2, 3}};
    return obj;
}

} // namespace slsim
