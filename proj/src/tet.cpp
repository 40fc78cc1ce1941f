#include "flexicubes/tet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace flexi {

using namespace cube;

namespace {

inline bool is_inside(double s) { return s < 0.0; }

// quadrant offsets in the two transverse axes, counter-clockwise around the
// positive edge axis (matches the surface quad builder)
constexpr int kQuad[4][2] = {{-1, -1}, {0, -1}, {0, 0}, {-1, 0}};

inline int local_edge_id(int axis, int t_lo, int t_hi) { return 4 * axis + t_lo + 2 * t_hi; }

struct EdgeRef {
    int axis;
    IVec3 base;  // lower vertex
    bool operator<(const EdgeRef& o) const {
        if (axis != o.axis) return axis < o.axis;
        if (base.z != o.base.z) return base.z < o.base.z;
        if (base.y != o.base.y) return base.y < o.base.y;
        return base.x < o.base.x;
    }
};

template <class T>
class TetBuilder {
public:
    TetBuilder(const CellField<T>& f, const DmcTables& tb, const QuadMeshT<T>& surf)
        : f_(f), tb_(tb), surf_(surf) {}

    TetMeshT<T> run() {
        std::vector<double> values(f_.sdf.size());
        for (size_t i = 0; i < values.size(); ++i) values[i] = value(f_.sdf[i]);
        values_ = std::move(values);
        effective_cases(f_.res, values_, tb_, mask_, eff_);

        // dual vertices first, preserving the surface ordering
        out_.vertices.reserve(surf_.vertices.size());
        for (const auto& dv : surf_.vertices) out_.vertices.push_back(dv.pos);
        vd_index_.assign(ncells(), -1);
        for (size_t i = 0; i < surf_.vertices.size(); ++i) {
            const auto& dv = surf_.vertices[i];
            if (dv.loop == 0) vd_index_[dv.cell] = (int32_t)i;
        }
        grid_vid_.assign(f_.sdf.size(), -1);
        mid_vid_.assign(ncells(), -1);

        for (int axis = 0; axis < 3; ++axis) {
            IVec3 lim{f_.res.x + 1, f_.res.y + 1, f_.res.z + 1};
            lim[axis] = f_.res[axis];
            for (int k = 0; k < lim.z; ++k)
                for (int j = 0; j < lim.y; ++j)
                    for (int i = 0; i < lim.x; ++i) handle_edge(axis, {i, j, k});
        }

        finalize();
        return std::move(out_);
    }

private:
    size_t ncells() const { return size_t(f_.res.x) * f_.res.y * f_.res.z; }

    int32_t grid_vertex(const IVec3& v) {
        size_t idx = f_.vidx(v.x, v.y, v.z);
        if (grid_vid_[idx] < 0) {
            grid_vid_[idx] = (int32_t)out_.vertices.size();
            out_.vertices.push_back(f_.pos[idx]);
        }
        return grid_vid_[idx];
    }

    int32_t cell_midpoint(int32_t cell) {
        if (mid_vid_[cell] < 0) {
            IVec3 cc{int(cell % f_.res.x), int((cell / f_.res.x) % f_.res.y),
                     int(cell / (size_t(f_.res.x) * f_.res.y))};
            Vec3T<T> acc = f_.pos[f_.vidx(cc.x, cc.y, cc.z)];
            for (int c = 1; c < 8; ++c)
                acc += f_.pos[f_.vidx(cc.x + kCorner[c][0], cc.y + kCorner[c][1],
                                      cc.z + kCorner[c][2])];
            mid_vid_[cell] = (int32_t)out_.vertices.size();
            out_.vertices.push_back(acc * 0.125);
        }
        return mid_vid_[cell];
    }

    // surface vertex of (cell, loop)
    int32_t dual_vertex_id(int32_t cell, int loop) const {
        // vertices of one cell are contiguous starting at loop 0
        return vd_index_[cell] + loop;
    }

    // global key of a cell edge, for the deterministic tie-break shared by the
    // two cells selecting a vertex across a face
    EdgeRef global_edge(const IVec3& cc, int local_edge) const {
        int axis = kEdgeAxis[local_edge];
        const int* base = kCorner[kEdgeCorner[local_edge][0]];
        return {axis, {cc.x + base[0], cc.y + base[1], cc.z + base[2]}};
    }

    // Supplement rule: pick the mesh vertex of the loop through a sign-change
    // edge of the face shared by the two cells.
    int32_t select_vertex(int32_t cell, int shared_face) {
        uint8_t m = mask_[cell];
        if (m == 0xFF) return cell_midpoint(cell);
        if (m == 0) throw std::runtime_error("tet: outside cell on an inside edge");
        IVec3 cc{int(cell % f_.res.x), int((cell / f_.res.x) % f_.res.y),
                 int(cell / (size_t(f_.res.x) * f_.res.y))};
        const CubeCase* cs = eff_[cell];
        int best_loop = -1;
        bool have = false;
        EdgeRef best_key{};
        for (int k = 0; k < 4; ++k) {
            int e = kFaceEdge[shared_face][k];
            if (cs->edge_loop[e] < 0) continue;
            EdgeRef key = global_edge(cc, e);
            if (!have || key < best_key) {
                have = true;
                best_key = key;
                best_loop = cs->edge_loop[e];
            }
        }
        if (!have) best_loop = 0;  // face fully inside; rare C18-family territory
        return dual_vertex_id(cell, best_loop);
    }

    void handle_edge(int axis, const IVec3& v0) {
        IVec3 v1 = v0;
        v1[axis] += 1;
        double s0 = values_[f_.vidx(v0.x, v0.y, v0.z)];
        double s1 = values_[f_.vidx(v1.x, v1.y, v1.z)];
        bool in0 = is_inside(s0), in1 = is_inside(s1);
        if (!in0 && !in1) return;

        int b = (axis + 1) % 3, c = (axis + 2) % 3;
        int32_t cells[4];
        bool present[4];
        for (int q = 0; q < 4; ++q) {
            IVec3 cc = v0;
            cc[b] += kQuad[q][0];
            cc[c] += kQuad[q][1];
            present[q] = cc.x >= 0 && cc.y >= 0 && cc.z >= 0 && cc.x < f_.res.x &&
                         cc.y < f_.res.y && cc.z < f_.res.z;
            cells[q] = present[q] ? (int32_t)f_.cidx(cc.x, cc.y, cc.z) : -1;
        }

        if (in0 && in1) {
            // four tets through consecutive adjacent cells; fewer at the
            // domain boundary
            int32_t a = grid_vertex(v0);
            int32_t d = grid_vertex(v1);
            for (int q = 0; q < 4; ++q) {
                int qn = (q + 1) % 4;
                if (!present[q] || !present[qn]) continue;
                int shared_axis = kQuad[q][0] != kQuad[qn][0] ? b : c;
                int fq, fqn;
                shared_faces(q, qn, b, c, shared_axis, fq, fqn);
                int32_t va = select_vertex(cells[q], fq);
                int32_t vb = select_vertex(cells[qn], fqn);
                push_tet(a, d, va, vb);
            }
            return;
        }

        // sign-change edge: the inside pyramid over the surface quad, split
        // along the same diagonal as the final surface split
        if (!(present[0] && present[1] && present[2] && present[3])) return;
        int32_t q4[4];
        double gam[4];
        for (int q = 0; q < 4; ++q) {
            IVec3 cc = v0;
            cc[b] += kQuad[q][0];
            cc[c] += kQuad[q][1];
            int t_lo, t_hi;
            int lo_axis = axis == 0 ? 1 : 0;
            int hi_axis = axis == 2 ? 1 : 2;
            t_lo = v0[lo_axis] - cc[lo_axis];
            t_hi = v0[hi_axis] - cc[hi_axis];
            int le = local_edge_id(axis, t_lo, t_hi);
            int loop = eff_[cells[q]]->edge_loop[le];
            if (loop < 0) throw std::runtime_error("tet: cut edge missing from loops");
            q4[q] = dual_vertex_id(cells[q], loop);
            gam[q] = std::tanh(value(f_.gamma_raw[cells[q]])) + 1.0;
        }
        if (!in0) {
            std::swap(q4[1], q4[3]);
            std::swap(gam[1], gam[3]);
        }
        int32_t apex = grid_vertex(in0 ? v0 : v1);
        double g13 = gam[0] * gam[2], g24 = gam[1] * gam[3];
        if (g13 >= g24) {
            push_tet(apex, q4[0], q4[1], q4[2]);
            push_tet(apex, q4[0], q4[2], q4[3]);
        } else {
            push_tet(apex, q4[1], q4[2], q4[3]);
            push_tet(apex, q4[1], q4[3], q4[0]);
        }
    }

    // face ids of the two cells toward each other, given quadrant indices
    static void shared_faces(int q, int qn, int b, int c, int shared_axis, int& fq, int& fqn) {
        // offsets of the two quadrants along the differing axis
        int off_q = shared_axis == b ? kQuad[q][0] : kQuad[q][1];
        int off_qn = shared_axis == b ? kQuad[qn][0] : kQuad[qn][1];
        // the cell with the smaller offset faces +axis, the other -axis
        if (off_q < off_qn) {
            fq = 2 * shared_axis + 1;
            fqn = 2 * shared_axis + 0;
        } else {
            fq = 2 * shared_axis + 0;
            fqn = 2 * shared_axis + 1;
        }
    }

    void push_tet(int32_t a, int32_t b, int32_t c, int32_t d) {
        out_.tets.push_back({a, b, c, d});
    }

    void finalize() {
        out_.volumes.reserve(out_.tets.size());
        std::vector<std::array<int32_t, 4>> kept;
        std::vector<double> vols;
        for (auto& t : out_.tets) {
            Vec3 a = value(out_.vertices[t[0]]);
            Vec3 b = value(out_.vertices[t[1]]);
            Vec3 c = value(out_.vertices[t[2]]);
            Vec3 d = value(out_.vertices[t[3]]);
            double vol = dot(b - a, cross(c - a, d - a)) / 6.0;
            if (vol < 0) {
                std::swap(t[2], t[3]);
                vol = -vol;
            }
            if (vol <= 0) {
                ++out_.degenerate_dropped;
                continue;
            }
            kept.push_back(t);
            vols.push_back(vol);
        }
        out_.tets = std::move(kept);
        out_.volumes = std::move(vols);
    }

    const CellField<T>& f_;
    const DmcTables& tb_;
    const QuadMeshT<T>& surf_;
    std::vector<double> values_;
    std::vector<uint8_t> mask_;
    std::vector<const CubeCase*> eff_;
    std::vector<int32_t> vd_index_;  // first dual vertex per cell
    std::vector<int32_t> grid_vid_;
    std::vector<int32_t> mid_vid_;
    TetMeshT<T> out_;
};

}  // namespace

template <class T>
TetMeshT<T> extract_tets(const CellField<T>& field, const DmcTables& tables,
                         const QuadMeshT<T>& surface) {
    return TetBuilder<T>(field, tables, surface).run();
}

template <class T>
TetMeshT<T> filter_thin_tets(const TetMeshT<T>& m, double vol_threshold) {
    TetMeshT<T> out;
    out.vertices = m.vertices;
    out.degenerate_dropped = m.degenerate_dropped;
    for (size_t i = 0; i < m.tets.size(); ++i) {
        if (m.volumes[i] < vol_threshold) continue;
        out.tets.push_back(m.tets[i]);
        out.volumes.push_back(m.volumes[i]);
    }
    return out;
}

TetMesh to_numeric(const TetMeshT<Var>& m) {
    TetMesh out;
    out.vertices.reserve(m.vertices.size());
    for (const auto& v : m.vertices) out.vertices.push_back(value(v));
    out.tets = m.tets;
    out.volumes = m.volumes;
    out.degenerate_dropped = m.degenerate_dropped;
    return out;
}

void save_tet(const TetMesh& m, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("tet: cannot write " + path);
    std::fprintf(f, "tet %zu %zu\n", m.vertices.size(), m.tets.size());
    for (const Vec3& v : m.vertices) std::fprintf(f, "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
    for (const auto& t : m.tets) std::fprintf(f, "t %d %d %d %d\n", t[0], t[1], t[2], t[3]);
    std::fclose(f);
}

std::vector<std::array<int32_t, 3>> boundary_faces(const TetMesh& m) {
    std::map<std::array<int32_t, 3>, std::pair<int, std::array<int32_t, 3>>> counts;
    static const int kFaces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
    for (const auto& t : m.tets)
        for (const auto& fc : kFaces) {
            std::array<int32_t, 3> face{t[fc[0]], t[fc[1]], t[fc[2]]};
            std::array<int32_t, 3> key = face;
            std::sort(key.begin(), key.end());
            auto& entry = counts[key];
            entry.first++;
            entry.second = face;
        }
    std::vector<std::array<int32_t, 3>> out;
    for (auto& [key, entry] : counts)
        if (entry.first == 1) out.push_back(entry.second);
    return out;
}

double total_volume(const TetMesh& m) {
    double v = 0;
    for (double x : m.volumes) v += x;
    return v;
}

namespace {
int64_t quantize(double x, double tol) { return (int64_t)std::llround(x / tol); }
struct QuantKey {
    int64_t x, y, z;
    bool operator<(const QuantKey& o) const {
        if (x != o.x) return x < o.x;
        if (y != o.y) return y < o.y;
        return z < o.z;
    }
};
}  // namespace

TetConformity tet_conformity(const TetMesh& m, const TriMesh& surface_final, double tol) {
    TetConformity r;
    std::map<QuantKey, int32_t> pid;
    auto point_id = [&](const Vec3& p) {
        QuantKey k{quantize(p.x, tol), quantize(p.y, tol), quantize(p.z, tol)};
        auto [it, inserted] = pid.emplace(k, (int32_t)pid.size());
        return it->second;
    };
    auto face_key = [&](const Vec3& a, const Vec3& b, const Vec3& c) {
        std::array<int32_t, 3> k{point_id(a), point_id(b), point_id(c)};
        std::sort(k.begin(), k.end());
        return k;
    };

    std::map<std::array<int32_t, 3>, int> surf_keys;
    for (const auto& t : surface_final.tris)
        surf_keys[face_key(surface_final.vertices[t[0]], surface_final.vertices[t[1]],
                           surface_final.vertices[t[2]])]++;

    auto bnd = boundary_faces(m);
    std::vector<std::array<int32_t, 3>> extra;
    for (const auto& f : bnd) {
        auto key = face_key(m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]);
        auto it = surf_keys.find(key);
        if (it != surf_keys.end() && it->second > 0) {
            it->second--;
            r.matched++;
        } else {
            extra.push_back(key);
        }
    }
    for (auto& [k, c] : surf_keys) r.missing_surface += c;
    r.extra_boundary = (int64_t)extra.size();

    // group unmatched boundary faces into pockets by shared edges
    std::map<std::pair<int32_t, int32_t>, std::vector<int32_t>> edge_faces;
    for (size_t i = 0; i < extra.size(); ++i) {
        const auto& k = extra[i];
        edge_faces[{k[0], k[1]}].push_back((int32_t)i);
        edge_faces[{k[0], k[2]}].push_back((int32_t)i);
        edge_faces[{k[1], k[2]}].push_back((int32_t)i);
    }
    std::vector<int32_t> parent(extra.size());
    for (size_t i = 0; i < extra.size(); ++i) parent[i] = (int32_t)i;
    std::function<int32_t(int32_t)> find = [&](int32_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (auto& [e, fl] : edge_faces)
        for (size_t i = 1; i < fl.size(); ++i) parent[find(fl[0])] = find(fl[i]);
    std::vector<int32_t> roots;
    for (size_t i = 0; i < extra.size(); ++i) roots.push_back(find((int32_t)i));
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
    r.defect_pockets = (int64_t)roots.size();
    return r;
}

template TetMeshT<double> extract_tets<double>(const CellField<double>&, const DmcTables&,
                                               const QuadMeshT<double>&);
template TetMeshT<Var> extract_tets<Var>(const CellField<Var>&, const DmcTables&,
                                         const QuadMeshT<Var>&);
template TetMeshT<double> filter_thin_tets<double>(const TetMeshT<double>&, double);
template TetMeshT<Var> filter_thin_tets<Var>(const TetMeshT<Var>&, double);

}  // namespace flexi
