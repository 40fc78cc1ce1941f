#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "flexicubes/surface.hpp"
#include "flexicubes/tables.hpp"
#include "flexicubes/tape.hpp"

namespace flexi {

template <class T>
struct TetMeshT {
    std::vector<Vec3T<T>> vertices;
    std::vector<std::array<int32_t, 4>> tets;
    std::vector<double> volumes;  // numeric signed volumes after orientation, > 0
    int64_t degenerate_dropped = 0;

    size_t num_vertices() const { return vertices.size(); }
    size_t num_tets() const { return tets.size(); }
    bool empty() const { return tets.empty(); }
};

using TetMesh = TetMeshT<double>;

TetMesh to_numeric(const TetMeshT<Var>& m);

// Tetrahedralizes the inside volume conforming to the extracted surface.
// Interior grid edges with both endpoints inside emit four tets through the
// vertices of consecutive adjacent cells (fewer at the domain boundary, one
// per existing consecutive pair); sign-change edges emit the inside pyramid
// over the surface quad, split along the same gamma diagonal as the final
// surface split. Cells without a surface vertex contribute their midpoint.
template <class T>
TetMeshT<T> extract_tets(const CellField<T>& field, const DmcTables& tables,
                         const QuadMeshT<T>& surface);

// Drops tets below the volume threshold (default tuned for shapes normalized
// to (-0.45, 0.45): 2e-7).
template <class T>
TetMeshT<T> filter_thin_tets(const TetMeshT<T>& m, double vol_threshold);

// ASCII export: header "tet <nv> <nt>", lines "v x y z" and "t i j k l"
// (0-based indices).
void save_tet(const TetMesh& m, const std::string& path);

std::vector<std::array<int32_t, 3>> boundary_faces(const TetMesh& m);

// Conformity of the tet boundary against the final surface split, as
// position sets. Unmatched boundary faces are grouped into connected defect
// pockets (the C18-family incompleteness shows up here).
struct TetConformity {
    int64_t matched = 0;
    int64_t missing_surface = 0;  // surface triangles absent from the tet boundary
    int64_t extra_boundary = 0;   // tet boundary faces not on the surface
    int64_t defect_pockets = 0;
};
TetConformity tet_conformity(const TetMesh& m, const TriMesh& surface_final, double tol = 1e-9);

double total_volume(const TetMesh& m);

}  // namespace flexi
