#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flexicubes/grid.hpp"
#include "flexicubes/tables.hpp"
#include "flexicubes/tape.hpp"
#include "flexicubes/vec3.hpp"

namespace flexi {

// Per-cell interpolation and splitting weights, stored in raw unconstrained
// form. The activated values tanh(raw)+1 live in (0,2); weights are never
// shared between adjacent cells.
struct FlexParams {
    std::vector<double> alpha_raw;  // 8 per cell
    std::vector<double> beta_raw;   // 12 per cell
    std::vector<double> gamma_raw;  // 1 per cell

    static FlexParams zeros(size_t ncells) {
        FlexParams p;
        p.alpha_raw.assign(8 * ncells, 0.0);
        p.beta_raw.assign(12 * ncells, 0.0);
        p.gamma_raw.assign(ncells, 0.0);
        return p;
    }
    size_t num_cells() const { return gamma_raw.size(); }
};

template <class T>
inline T activated(const T& raw) {
    using std::tanh;
    return tanh(raw) + 1.0;
}

// Everything extraction reads, generic over the scalar type (double for plain
// evaluation, Var when recording on a tape).
template <class T>
struct CellField {
    IVec3 res;
    std::span<const T> sdf;          // per lattice vertex
    std::span<const Vec3T<T>> pos;   // deformed vertex positions
    std::span<const T> alpha_raw;    // 8 per cell
    std::span<const T> beta_raw;     // 12 per cell
    std::span<const T> gamma_raw;    // 1 per cell

    size_t vidx(int i, int j, int k) const {
        return size_t(i) + size_t(res.x + 1) * (size_t(j) + size_t(res.y + 1) * k);
    }
    size_t cidx(int i, int j, int k) const {
        return size_t(i) + size_t(res.x) * (size_t(j) + size_t(res.y) * k);
    }
};

CellField<double> make_field(const ScalarGrid& g, const FlexParams& p,
                             std::span<const Vec3> pos);

// Eq. 5 crossing: convex in (x_i, x_j), so it stays strictly on the segment
// whenever the signs differ and the weights are positive.
template <class T>
inline Vec3T<T> edge_crossing(const Vec3T<T>& xi, const Vec3T<T>& xj, const T& si, const T& sj,
                              const T& ai, const T& aj) {
    T wi = si * ai;
    T wj = sj * aj;
    T den = wi - wj;
    return (wi * xj - wj * xi) / den;
}

// Eq. 6 dual vertex: beta-weighted convex combination of the loop crossings.
template <class T>
inline Vec3T<T> dual_vertex(std::span<const Vec3T<T>> crossings, std::span<const T> betas) {
    T bsum = betas[0];
    Vec3T<T> acc = betas[0] * crossings[0];
    for (size_t k = 1; k < crossings.size(); ++k) {
        acc += betas[k] * crossings[k];
        bsum = bsum + betas[k];
    }
    return acc / bsum;
}

// One extracted dual vertex with its provenance: emitting cell, loop index,
// and the loop's crossing points (kept for the deviation regularizer and for
// gradient routing).
template <class T>
struct DualVertexT {
    Vec3T<T> pos;
    int32_t cell = -1;
    int16_t loop = -1;
    std::vector<Vec3T<T>> crossings;
};

// Dual mesh. Faces are quads on uniform grids; on octrees a face may
// degenerate to a triangle, marked by index[3] == -1.
template <class T>
struct QuadMeshT {
    std::vector<DualVertexT<T>> vertices;
    std::vector<std::array<int32_t, 4>> faces;
    std::vector<std::array<T, 4>> face_gamma;      // activated gamma of each corner's cell
    std::vector<std::array<int32_t, 4>> face_cell; // emitting cell of each corner

    size_t num_vertices() const { return vertices.size(); }
    size_t num_faces() const { return faces.size(); }
    bool empty() const { return vertices.empty(); }
};

template <class T>
struct TriMeshT {
    std::vector<Vec3T<T>> vertices;
    std::vector<std::array<int32_t, 3>> tris;
    std::vector<uint8_t> midpoint_flag;  // nonzero for inserted quad midpoints
    std::vector<int32_t> vertex_cell;    // emitting cell, -1 when not applicable

    size_t num_vertices() const { return vertices.size(); }
    size_t num_tris() const { return tris.size(); }
    bool empty() const { return tris.empty(); }
};

using QuadMesh = QuadMeshT<double>;
using TriMesh = TriMeshT<double>;

QuadMesh to_numeric(const QuadMeshT<Var>& m);
TriMesh to_numeric(const TriMeshT<Var>& m);

// Per-cell sign configuration and the case actually used after the
// ambiguous-face patch (null for empty/full cells). Shared by the surface and
// tetrahedral extraction so both agree on loop assignments.
void effective_cases(const IVec3& res, std::span<const double> sdf_values,
                     const DmcTables& tables, std::vector<uint8_t>& mask_out,
                     std::vector<const CubeCase*>& case_out);

// Dual Marching Cubes extraction with flexible crossings and dual vertices.
// One dual vertex per primal-face loop per cell; one quad per interior
// sign-change grid edge. Cells are processed in index order and faces are
// emitted edge-major, so the output ordering is deterministic.
template <class T>
QuadMeshT<T> extract_quads(const CellField<T>& field, const DmcTables& tables);

// Training-time split: each quad gains a midpoint vertex placed by the
// gamma-weighted combination of the two diagonal midpoints (Eq. 7) and is
// replaced by four triangles.
template <class T>
TriMeshT<T> split_training(const QuadMeshT<T>& q);

// Final split: two triangles along the diagonal with the larger product of
// gamma values; exact ties take diagonal (1,3).
template <class T>
TriMeshT<T> split_final(const QuadMeshT<T>& q);

// Classic Marching Cubes on the (possibly deformed) grid, Eq. 1 crossings.
// Benchmark baseline; ignores the flexible weights.
template <class T>
TriMeshT<T> extract_mc_baseline(const CellField<T>& field, const DmcTables& tables);

// Wavefront OBJ export, 1-based indices, positions with 9 significant digits.
void save_obj(const TriMesh& m, const std::string& path);
void save_obj(const QuadMesh& m, const std::string& path);
TriMesh load_obj(const std::string& path);

}  // namespace flexi
