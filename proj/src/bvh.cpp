#include "slsim/bvh.hpp"

#include <algorithm>
#include <numeric>

namespace slsim {

namespace {

struct Builder {
    const std::vector<Aabb>& boxes;
    std::vector<Eigen::Vector3d> centroids;
    Bvh bvh;

    int build(int first, int count) {
        Bvh::Node node;
        for (int i = first; i < first + count; ++i) node.box.grow(boxes[bvh.order[i]]);
        int idx = static_cast<int>(bvh.nodes.size());
        bvh.nodes.push_back(node);
        if (count <= 4) {
            bvh.nodes[idx].first = first;
            bvh.nodes[idx].count = count;
            return idx;
        }
        Aabb cbox;
        for (int i = first; i < first + count; ++i) cbox.grow(centroids[bvh.order[i]]);
        Eigen::Vector3d extent = cbox.hi - cbox.lo;
        int axis = 0;
        if (extent.y() > extent.x()) axis = 1;
        if (extent.z() > extent[axis]) axis = 2;
        int mid = first + count / 2;
        std::nth_element(bvh.order.begin() + first, bvh.order.begin() + mid,
                         bvh.order.begin() + first + count, [&](int a, int b) {
                             double ca = centroids[a][axis], cb = centroids[b][axis];
                             return ca < cb || (ca == cb && a < b);
                         });
        int left = build(first, mid - first);
        int right = build(mid, first + count - mid);
        bvh.nodes[idx].left = left;
        bvh.nodes[idx].right = right;
        return idx;
    }
};

} // namespace

Bvh Bvh::build(const std::vector<Aabb>& boxes) {
    Builder b{boxes, {}, {}};
    if (boxes.empty()) return std::move(b.bvh);
    b.centroids.reserve(boxes.size());
    for (const auto& box : boxes) b.centroids.push_back(0.5 * (box.lo + box.hi));
    b.bvh.order.resize(boxes.size());
    std::iota(b.bvh.order.begin(), b.bvh.order.end(), 0);
    b.build(0, static_cast<int>(boxes.size()));
    return std::move(b.bvh);
}

} // namespace slsim
