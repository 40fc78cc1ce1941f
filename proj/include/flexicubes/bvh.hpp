#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "flexicubes/vec3.hpp"

namespace flexi {

// Closest point on a triangle, with the region the projection landed in so
// differentiable callers can re-express the same branch symbolically.
// region: 0,1,2 = vertex a/b/c; 3,4,5 = edge ab/bc/ca; 6 = interior.
struct TriClosest {
    Vec3 point;
    double dist2 = 0;
    int region = 6;
};
TriClosest closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Axis-aligned BVH over a triangle soup. Deterministic construction (median
// split on the largest axis).
class TriBvh {
public:
    TriBvh() = default;
    TriBvh(std::span<const Vec3> vertices, std::span<const std::array<int32_t, 3>> tris);

    bool empty() const { return tris_.empty(); }

    struct Hit {
        int32_t tri = -1;
        Vec3 point;
        double dist2 = 1e300;
        int region = 6;
    };
    Hit closest(const Vec3& p) const;

    // Number of triangle crossings of the ray p + t*d, t > 0. Rays are used
    // for parity-based inside tests; callers vote over several directions to
    // dodge edge/vertex grazing.
    int count_crossings(const Vec3& p, const Vec3& d) const;

    // Candidate pairs of triangles with overlapping boxes (i < j).
    std::vector<std::pair<int32_t, int32_t>> overlap_pairs() const;

    // All triangles whose box overlaps the query box.
    void collect_overlaps(const Aabb& box, std::vector<int32_t>& out) const;

    const std::vector<std::array<int32_t, 3>>& tris() const { return tris_; }
    std::span<const Vec3> vertices() const { return verts_; }

private:
    struct Node {
        Aabb box;
        int32_t left = -1, right = -1;  // children, or leaf range when left < 0
        int32_t begin = 0, end = 0;
    };
    int32_t build(int32_t begin, int32_t end, std::vector<Vec3>& centroids);
    void closest_rec(int32_t node, const Vec3& p, Hit& best) const;

    std::vector<Vec3> verts_;
    std::vector<std::array<int32_t, 3>> tris_;
    std::vector<int32_t> order_;
    std::vector<Node> nodes_;
    int32_t root_ = -1;
};

// kd-tree over points for nearest-neighbour queries (metrics).
class PointKd {
public:
    PointKd() = default;
    explicit PointKd(std::vector<Vec3> pts);

    struct Nn {
        int32_t idx = -1;
        double dist2 = 1e300;
    };
    Nn nearest(const Vec3& q) const;
    void k_nearest(const Vec3& q, int k, std::vector<int32_t>& out) const;
    size_t size() const { return pts_.size(); }
    const Vec3& point(int32_t i) const { return pts_[i]; }

private:
    struct Node {
        int32_t axis = 0;
        int32_t index = -1;
        int32_t left = -1, right = -1;
    };
    int32_t build(int32_t begin, int32_t end, int depth);
    void nearest_rec(int32_t n, const Vec3& q, Nn& best) const;

    std::vector<Vec3> pts_;
    std::vector<int32_t> order_;
    std::vector<Node> nodes_;
    int32_t root_ = -1;
};

}  // namespace flexi
