#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flexicubes/tape.hpp"
#include "flexicubes/vec3.hpp"

namespace flexi {

// Scalar field sampled on a regular lattice, with the bounded deformation
// field. `sdf` and `deform_raw` are stored per lattice vertex; negative sdf is
// inside, an exact zero counts as outside.
struct ScalarGrid {
    IVec3 resolution;  // cells per axis, each >= 1
    Vec3 origin{-1, -1, -1};
    double spacing = 1.0;  // h, world units per cell edge
    std::vector<double> sdf;
    std::vector<Vec3> deform_raw;

    IVec3 vdim() const { return {resolution.x + 1, resolution.y + 1, resolution.z + 1}; }
    size_t num_vertices() const {
        return size_t(resolution.x + 1) * (resolution.y + 1) * (resolution.z + 1);
    }
    size_t num_cells() const { return size_t(resolution.x) * resolution.y * resolution.z; }

    size_t vidx(int i, int j, int k) const {
        return size_t(i) + size_t(resolution.x + 1) * (size_t(j) + size_t(resolution.y + 1) * k);
    }
    size_t cidx(int i, int j, int k) const {
        return size_t(i) + size_t(resolution.x) * (size_t(j) + size_t(resolution.y) * k);
    }
    IVec3 vertex_coord(size_t idx) const {
        int nx = resolution.x + 1, ny = resolution.y + 1;
        return {int(idx % nx), int((idx / nx) % ny), int(idx / (size_t(nx) * ny))};
    }
    IVec3 cell_coord(size_t idx) const {
        int nx = resolution.x, ny = resolution.y;
        return {int(idx % nx), int((idx / nx) % ny), int(idx / (size_t(nx) * ny))};
    }
    bool vertex_in_bounds(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i <= resolution.x && j <= resolution.y &&
               k <= resolution.z;
    }
    bool cell_in_bounds(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < resolution.x && j < resolution.y &&
               k < resolution.z;
    }

    Vec3 lattice_position(int i, int j, int k) const {
        return {origin.x + spacing * i, origin.y + spacing * j, origin.z + spacing * k};
    }

    // Throws std::runtime_error when an invariant is broken.
    void validate() const;

    // Uniform grid covering [-1,1]^3, sdf and deformation zero.
    static ScalarGrid make_domain(int res);
    static ScalarGrid make(IVec3 res, Vec3 origin, double h);
};

// Vertex positions after the bounded deformation: lattice + 0.5*h*tanh(raw)
// per axis. Displacements approach half the spacing but never reach it, so
// cells cannot invert.
template <class T>
inline Vec3T<T> deformed_position(const Vec3& lattice, double h, const Vec3T<T>& raw) {
    using std::tanh;
    return {lattice.x + 0.5 * h * tanh(raw.x), lattice.y + 0.5 * h * tanh(raw.y),
            lattice.z + 0.5 * h * tanh(raw.z)};
}

std::vector<Vec3> deformed_positions(const ScalarGrid& g);

// Snapshot IO. JSON holds the fields in the documented order (resolution,
// origin, spacing, sdf, deform_raw); the binary form is bit-exact and is the
// one used inside checkpoints.
void save_grid_json(const ScalarGrid& g, const std::string& path);
ScalarGrid load_grid_json(const std::string& path);
void save_grid_binary(const ScalarGrid& g, std::ostream& os);
ScalarGrid load_grid_binary(std::istream& is);

// Fills sdf from a callable sampled at (undeformed) lattice positions.
template <class F>
void fill_sdf(ScalarGrid& g, F&& f) {
    for (int k = 0; k <= g.resolution.z; ++k)
        for (int j = 0; j <= g.resolution.y; ++j)
            for (int i = 0; i <= g.resolution.x; ++i)
                g.sdf[g.vidx(i, j, k)] = f(g.lattice_position(i, j, k));
}

}  // namespace flexi
