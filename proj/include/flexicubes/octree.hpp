#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "flexicubes/surface.hpp"
#include "flexicubes/tables.hpp"
#include "flexicubes/tape.hpp"
#include "flexicubes/vec3.hpp"

namespace flexi {

// Adaptively refined grid over [-1,1]^3. The tree starts as a uniform grid of
// 2^base_depth cells per axis and refines down to base_depth + extra_depth
// levels. Vertices are identified by integer coordinates at the finest scale;
// vertex and cell registries are append-only so parameter ids stay stable
// across refinement.
class Octree {
public:
    Octree(int base_res, int extra_depth);

    int base_depth() const { return base_depth_; }
    int max_depth() const { return max_depth_; }
    int finest_res() const { return 1 << max_depth_; }
    double finest_h() const { return 2.0 / finest_res(); }

    struct Cell {
        int depth;
        IVec3 coord;  // at its own depth
    };

    // ---- registries ----
    int32_t vertex_id(const IVec3& finest_coord);        // creates on demand
    int32_t find_vertex(const IVec3& finest_coord) const;  // -1 if absent
    int32_t cell_id(const Cell& c);
    int32_t find_cell(const Cell& c) const;

    size_t num_vertex_slots() const { return vpos_.size(); }
    size_t num_cell_slots() const { return cells_.size(); }
    const IVec3& vertex_coord(int32_t vid) const { return vpos_[vid]; }
    const Cell& cell(int32_t cid) const { return cells_[cid]; }

    Vec3 lattice_position(int32_t vid) const {
        const IVec3& c = vpos_[vid];
        double h = finest_h();
        return {-1.0 + h * c.x, -1.0 + h * c.y, -1.0 + h * c.z};
    }

    // live leaves, ascending cell id (deterministic)
    const std::vector<int32_t>& leaves() const { return leaf_list_; }
    bool is_leaf(int32_t cid) const { return leaf_set_.count(cid) > 0; }

    // 8 corner vertex ids of a cell, in the canonical corner order; the
    // non-const form registers missing vertices
    std::array<int32_t, 8> cell_corners(int32_t cid);
    std::array<int32_t, 8> cell_corners_const(int32_t cid) const;
    // cell size in finest units
    int cell_span(int32_t cid) const { return 1 << (max_depth_ - cells_[cid].depth); }

    // Splits a leaf into 8 children. New vertices are appended; returns the
    // child cell ids. No-op (returns empty) at max depth.
    std::vector<int32_t> refine_cell(int32_t cid);

    // ---- hanging-node constraints ----
    struct Constraint {
        int32_t vertex;             // constrained fine vertex
        std::array<int32_t, 4> corners;  // coarse face corner vertex ids
        std::array<double, 4> weights;   // bilinear weights
        int coarse_depth;                // depth of the constraining leaf
    };

    // Re-identifies hanging-node constraints from the current leaf set; call
    // after any topology change. Constraints are ordered coarsest-first so a
    // single sequential pass projects chains across multiple levels.
    void identify_constraints();
    const std::vector<Constraint>& constraints() const { return constraints_; }
    bool is_constrained(int32_t vid) const {
        return vid < (int32_t)constrained_.size() && constrained_[vid];
    }

    // Projects constrained sdf entries in place (generic over double/Var).
    template <class T>
    void project_sdf(std::span<T> sdf) const {
        for (const Constraint& c : constraints_) {
            T v = c.weights[0] * sdf[c.corners[0]];
            for (int k = 1; k < 4; ++k) v = v + c.weights[k] * sdf[c.corners[k]];
            sdf[c.vertex] = v;
        }
    }

    // leaf containing the given finest-scale point region (coordinates may be
    // half-integers encoded as 2x values; see extract implementation)
    int32_t locate_leaf_2x(const IVec3& coord_2x) const;

private:
    uint64_t vkey(const IVec3& c) const;
    uint64_t ckey(const Cell& c) const;

    int base_depth_, max_depth_;
    std::map<uint64_t, int32_t> vindex_;
    std::vector<IVec3> vpos_;
    std::map<uint64_t, int32_t> cindex_;
    std::vector<Cell> cells_;
    std::set<int32_t> leaf_set_;
    std::vector<int32_t> leaf_list_;
    std::vector<Constraint> constraints_;
    std::vector<uint8_t> constrained_;
};

template <class T>
struct OctreeField {
    const Octree* tree = nullptr;
    std::span<const T> sdf;          // per vertex id, already projected
    std::span<const Vec3T<T>> pos;   // per vertex id
    std::span<const T> alpha_raw;    // 8 per cell id
    std::span<const T> beta_raw;     // 12 per cell id
    std::span<const T> gamma_raw;    // 1 per cell id
};

// Dual extraction over the octree: one dual vertex per loop per leaf, one
// polygon per sign-change minimal edge. Faces degenerate to triangles where a
// coarse cell spans two quadrants of the edge.
template <class T>
QuadMeshT<T> extract_octree_quads(const OctreeField<T>& field, const DmcTables& tables);

// Sign-change minimal edges as vertex-id pairs (for the sign loss).
std::vector<std::pair<int32_t, int32_t>> octree_edges(const Octree& tree);

}  // namespace flexi
