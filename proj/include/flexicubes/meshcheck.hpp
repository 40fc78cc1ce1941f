#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flexicubes/surface.hpp"
#include "flexicubes/vec3.hpp"

namespace flexi {

struct TopoReport {
    int64_t num_vertices = 0;
    int64_t num_edges = 0;
    int64_t num_faces = 0;
    int64_t boundary_edges = 0;
    int64_t non_manifold_edges = 0;
    int64_t non_manifold_vertices = 0;
    int64_t connected_components = 0;
    int64_t euler_characteristic = 0;
    bool consistent_orientation = true;
    // -1 when the intersection scan was not requested
    int64_t self_intersecting_pairs = -1;
    int64_t self_intersecting_tris = -1;

    bool manifold() const { return non_manifold_edges == 0 && non_manifold_vertices == 0; }
    bool watertight() const { return boundary_edges == 0; }
    std::string to_json() const;
};

// Exact combinatorial counts; self-intersections via the exact predicate test
// with BVH pruning when requested (triangle meshes only).
TopoReport check_topology(const TriMesh& m, bool with_self_intersections = false);
TopoReport check_topology(const QuadMesh& m);

// Intersecting triangle pairs, excluding pairs that share a vertex index.
std::vector<std::pair<int32_t, int32_t>> self_intersections(const TriMesh& m);

struct HullTest {
    bool inside = false;
    double margin = 0;  // signed distance to the nearest supporting plane, positive inside
};

// Point-in-convex-hull test for the 8 corners of a (possibly deformed) cell.
// Enumerates supporting planes over corner triples; robust to the coplanar
// faces of a box. Throws on a degenerate (flat) corner set.
HullTest point_in_hull(const Vec3& p, std::span<const Vec3> corners, double tol = 1e-9);

// Divergence-theorem volume; positive for outward-oriented closed meshes.
double signed_volume(const TriMesh& m);

}  // namespace flexi
