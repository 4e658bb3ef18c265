#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

namespace slsim {

struct Aabb {
    Eigen::Vector3d lo{1e300, 1e300, 1e300};
    Eigen::Vector3d hi{-1e300, -1e300, -1e300};
    void grow(const Eigen::Vector3d& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void grow(const Aabb& b) {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
};

// Median-split bounding volume hierarchy over plain double boxes. Build and
// traversal order are fully deterministic (ties break on primitive index).
struct Bvh {
    struct Node {
        Aabb box;
        int left = -1, right = -1; // internal children
        int first = 0, count = 0;  // leaf primitive slice into `order`
    };
    std::vector<Node> nodes;
    std::vector<int> order;

    static Bvh build(const std::vector<Aabb>& boxes);

    // Visits every primitive whose box intersects the ray segment (0, t_max];
    // `visit(prim, t_max)` may shrink t_max to prune the remaining traversal.
    template <typename Visit>
    void traverse(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double& t_max,
                  Visit&& visit) const {
        if (nodes.empty()) return;
        int stack[64];
        int sp = 0;
        stack[sp++] = 0;
        while (sp > 0) {
            const Node& n = nodes[stack[--sp]];
            if (!slab_hit(n.box, o, d, t_max)) continue;
            if (n.count > 0) {
                for (int i = n.first; i < n.first + n.count; ++i) visit(order[i], t_max);
            } else {
                stack[sp++] = n.right;
                stack[sp++] = n.left; // left explored first
            }
        }
    }

    static bool slab_hit(const Aabb& box, const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                         double t_max) {
        double t0 = 0.0, t1 = t_max;
        for (int a = 0; a < 3; ++a) {
            if (std::fabs(d[a]) < 1e-300) {
                if (o[a] < box.lo[a] || o[a] > box.hi[a]) return false;
                continue;
            }
            double inv = 1.0 / d[a];
            double ta = (box.lo[a] - o[a]) * inv;
            double tb = (box.hi[a] - o[a]) * inv;
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1) return false;
        }
        return true;
    }
};

} // namespace slsim
