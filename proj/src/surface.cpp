#include "flexicubes/surface.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace flexi {

using namespace cube;

CellField<double> make_field(const ScalarGrid& g, const FlexParams& p,
                             std::span<const Vec3> pos) {
    if (p.num_cells() != g.num_cells()) throw std::runtime_error("field: param count mismatch");
    CellField<double> f;
    f.res = g.resolution;
    f.sdf = g.sdf;
    f.pos = pos;
    f.alpha_raw = p.alpha_raw;
    f.beta_raw = p.beta_raw;
    f.gamma_raw = p.gamma_raw;
    return f;
}

namespace {

inline bool is_inside(double s) { return s < 0.0; }

// local edge id within a cell from the edge axis and the local coordinates of
// its base vertex (the two transverse coordinates, lower axis first)
inline int local_edge_id(int axis, int t_lo, int t_hi) { return 4 * axis + t_lo + 2 * t_hi; }

template <class T>
class UniformExtractor {
public:
    UniformExtractor(const CellField<T>& f, const DmcTables& tb) : f_(f), tb_(tb) {}

    QuadMeshT<T> run() {
        std::vector<double> values(f_.sdf.size());
        for (size_t i = 0; i < values.size(); ++i) values[i] = value(f_.sdf[i]);
        effective_cases(f_.res, values, tb_, mask_, eff_);
        build_vertices();
        build_faces();
        return std::move(out_);
    }

private:
    size_t ncells() const { return size_t(f_.res.x) * f_.res.y * f_.res.z; }

    void build_vertices() {
        vd_base_.assign(ncells(), -1);
        for (size_t c = 0; c < ncells(); ++c) {
            if (!eff_[c] || eff_[c]->loops.empty()) continue;
            IVec3 cc{int(c % f_.res.x), int((c / f_.res.x) % f_.res.y),
                     int(c / (size_t(f_.res.x) * f_.res.y))};
            vd_base_[c] = (int32_t)out_.vertices.size();

            // activated corner weights and crossing points, memoized per cell
            std::array<T, 8> alpha;
            std::array<bool, 8> alpha_done{};
            std::array<Vec3T<T>, 12> ux;
            std::array<bool, 12> ux_done{};
            auto corner_alpha = [&](int corner) -> const T& {
                if (!alpha_done[corner]) {
                    alpha[corner] = activated(f_.alpha_raw[8 * c + corner]);
                    alpha_done[corner] = true;
                }
                return alpha[corner];
            };
            auto crossing = [&](int e) -> const Vec3T<T>& {
                if (!ux_done[e]) {
                    int ca = kEdgeCorner[e][0], cb = kEdgeCorner[e][1];
                    size_t va = f_.vidx(cc.x + kCorner[ca][0], cc.y + kCorner[ca][1],
                                        cc.z + kCorner[ca][2]);
                    size_t vb = f_.vidx(cc.x + kCorner[cb][0], cc.y + kCorner[cb][1],
                                        cc.z + kCorner[cb][2]);
                    ux[e] = edge_crossing(f_.pos[va], f_.pos[vb], f_.sdf[va], f_.sdf[vb],
                                          corner_alpha(ca), corner_alpha(cb));
                    ux_done[e] = true;
                }
                return ux[e];
            };

            for (size_t li = 0; li < eff_[c]->loops.size(); ++li) {
                const auto& loop = eff_[c]->loops[li];
                std::vector<Vec3T<T>> cr;
                std::vector<T> betas;
                cr.reserve(loop.size());
                betas.reserve(loop.size());
                for (int e : loop) {
                    cr.push_back(crossing(e));
                    betas.push_back(activated(f_.beta_raw[12 * c + e]));
                }
                DualVertexT<T> dv;
                dv.pos = dual_vertex<T>(cr, betas);
                dv.cell = (int32_t)c;
                dv.loop = (int16_t)li;
                dv.crossings = std::move(cr);
                out_.vertices.push_back(std::move(dv));
            }
        }
    }

    void build_faces() {
        gamma_act_.assign(ncells(), T{});
        gamma_done_.assign(ncells(), 0);

        // quadrant offsets in the two transverse axes, counter-clockwise
        // around the positive edge axis
        static constexpr int kQuad[4][2] = {{-1, -1}, {0, -1}, {0, 0}, {-1, 0}};

        for (int axis = 0; axis < 3; ++axis) {
            int b = (axis + 1) % 3, cdir = (axis + 2) % 3;
            IVec3 lim = f_.res;
            // edge base vertex range: along the axis [0,res), transverse [1,res-1]
            for (int k = (axis == 2 ? 0 : 1); k <= (axis == 2 ? lim.z - 1 : lim.z - 1); ++k)
                for (int j = (axis == 1 ? 0 : 1); j <= (axis == 1 ? lim.y - 1 : lim.y - 1); ++j)
                    for (int i = (axis == 0 ? 0 : 1); i <= (axis == 0 ? lim.x - 1 : lim.x - 1);
                         ++i) {
                        IVec3 v0{i, j, k};
                        IVec3 v1 = v0;
                        v1[axis] += 1;
                        double s0 = value(f_.sdf[f_.vidx(v0.x, v0.y, v0.z)]);
                        double s1 = value(f_.sdf[f_.vidx(v1.x, v1.y, v1.z)]);
                        if (is_inside(s0) == is_inside(s1)) continue;

                        std::array<int32_t, 4> vids;
                        std::array<int32_t, 4> cells;
                        for (int q = 0; q < 4; ++q) {
                            IVec3 cc = v0;
                            cc[b] += kQuad[q][0];
                            cc[cdir] += kQuad[q][1];
                            size_t cid = f_.cidx(cc.x, cc.y, cc.z);
                            int t_lo, t_hi;
                            transverse_local(axis, v0, cc, t_lo, t_hi);
                            int le = local_edge_id(axis, t_lo, t_hi);
                            int loop = eff_[cid]->edge_loop[le];
                            if (loop < 0)
                                throw std::runtime_error("extract: cut edge missing from loops");
                            vids[q] = vd_base_[cid] + loop;
                            cells[q] = (int32_t)cid;
                        }
                        if (!is_inside(s0)) {
                            // flip winding, keeping corner 0 in place so the
                            // diagonal pairing (1,3)/(2,4) is stable
                            std::swap(vids[1], vids[3]);
                            std::swap(cells[1], cells[3]);
                        }
                        std::array<T, 4> gam;
                        for (int q = 0; q < 4; ++q) gam[q] = cell_gamma(cells[q]);
                        out_.faces.push_back(vids);
                        out_.face_cell.push_back(cells);
                        out_.face_gamma.push_back(gam);
                    }
        }
    }

    // local coordinates of the edge base vertex within cell cc, split into the
    // lower and higher transverse axes
    static void transverse_local(int axis, const IVec3& v0, const IVec3& cc, int& t_lo,
                                 int& t_hi) {
        int lo_axis = axis == 0 ? 1 : 0;
        int hi_axis = axis == 2 ? 1 : 2;
        t_lo = v0[lo_axis] - cc[lo_axis];
        t_hi = v0[hi_axis] - cc[hi_axis];
    }

    const T& cell_gamma(int32_t c) {
        if (!gamma_done_[c]) {
            gamma_act_[c] = activated(f_.gamma_raw[c]);
            gamma_done_[c] = 1;
        }
        return gamma_act_[c];
    }

    const CellField<T>& f_;
    const DmcTables& tb_;
    std::vector<uint8_t> mask_;
    std::vector<const CubeCase*> eff_;
    std::vector<int32_t> vd_base_;
    std::vector<T> gamma_act_;
    std::vector<uint8_t> gamma_done_;
    QuadMeshT<T> out_;
};

}  // namespace

void effective_cases(const IVec3& res, std::span<const double> sdf_values,
                     const DmcTables& tables, std::vector<uint8_t>& mask_out,
                     std::vector<const CubeCase*>& case_out) {
    size_t ncells = size_t(res.x) * res.y * res.z;
    auto vidx = [&](int i, int j, int k) {
        return size_t(i) + size_t(res.x + 1) * (size_t(j) + size_t(res.y + 1) * k);
    };
    auto cidx = [&](int i, int j, int k) {
        return size_t(i) + size_t(res.x) * (size_t(j) + size_t(res.y) * k);
    };
    mask_out.assign(ncells, 0);
    case_out.assign(ncells, nullptr);
    for (int ck = 0; ck < res.z; ++ck)
        for (int cj = 0; cj < res.y; ++cj)
            for (int ci = 0; ci < res.x; ++ci) {
                uint8_t m = 0;
                for (int c = 0; c < 8; ++c) {
                    size_t v = vidx(ci + kCorner[c][0], cj + kCorner[c][1], ck + kCorner[c][2]);
                    if (is_inside(sdf_values[v])) m |= uint8_t(1) << c;
                }
                mask_out[cidx(ci, cj, ck)] = m;
            }

    // Ambiguous-face patch: when the configurations on both sides of a shared
    // ambiguous face tunnel through it, each side switches to the variant
    // traced with the opposite pairing on that face, which keeps the stitched
    // mesh 2-manifold.
    for (int ck = 0; ck < res.z; ++ck)
        for (int cj = 0; cj < res.y; ++cj)
            for (int ci = 0; ci < res.x; ++ci) {
                size_t c = cidx(ci, cj, ck);
                uint8_t m = mask_out[c];
                if (m == 0 || m == 255) continue;
                uint8_t tun = tables.tunnel_faces[m];
                uint8_t flips = 0;
                for (int fdir = 0; fdir < 6 && tun; ++fdir) {
                    if (!((tun >> fdir) & 1)) continue;
                    int d[3] = {0, 0, 0};
                    d[face_axis(fdir)] = face_side(fdir) ? 1 : -1;
                    int ni = ci + d[0], nj = cj + d[1], nk = ck + d[2];
                    if (ni < 0 || nj < 0 || nk < 0 || ni >= res.x || nj >= res.y || nk >= res.z)
                        continue;
                    if (tables.tunnel_faces[mask_out[cidx(ni, nj, nk)]])
                        flips |= uint8_t(1) << fdir;
                }
                case_out[c] = &tables.lookup_variant(m, flips);
            }
}

template <class T>
QuadMeshT<T> extract_quads(const CellField<T>& field, const DmcTables& tables) {
    return UniformExtractor<T>(field, tables).run();
}

template <class T>
TriMeshT<T> split_training(const QuadMeshT<T>& q) {
    TriMeshT<T> m;
    m.vertices.reserve(q.vertices.size() + q.faces.size());
    for (const auto& dv : q.vertices) {
        m.vertices.push_back(dv.pos);
        m.midpoint_flag.push_back(0);
        m.vertex_cell.push_back(dv.cell);
    }
    for (size_t fi = 0; fi < q.faces.size(); ++fi) {
        const auto& f = q.faces[fi];
        if (f[3] < 0) {
            m.tris.push_back({f[0], f[1], f[2]});
            continue;
        }
        const auto& g = q.face_gamma[fi];
        T g13 = g[0] * g[2];
        T g24 = g[1] * g[3];
        Vec3T<T> mid = (g13 * ((q.vertices[f[0]].pos + q.vertices[f[2]].pos) * 0.5) +
                        g24 * ((q.vertices[f[1]].pos + q.vertices[f[3]].pos) * 0.5)) /
                       (g13 + g24);
        int32_t mv = (int32_t)m.vertices.size();
        m.vertices.push_back(mid);
        m.midpoint_flag.push_back(1);
        m.vertex_cell.push_back(q.face_cell[fi][0]);
        m.tris.push_back({f[0], f[1], mv});
        m.tris.push_back({f[1], f[2], mv});
        m.tris.push_back({f[2], f[3], mv});
        m.tris.push_back({f[3], f[0], mv});
    }
    return m;
}

template <class T>
TriMeshT<T> split_final(const QuadMeshT<T>& q) {
    TriMeshT<T> m;
    m.vertices.reserve(q.vertices.size());
    for (const auto& dv : q.vertices) {
        m.vertices.push_back(dv.pos);
        m.midpoint_flag.push_back(0);
        m.vertex_cell.push_back(dv.cell);
    }
    for (size_t fi = 0; fi < q.faces.size(); ++fi) {
        const auto& f = q.faces[fi];
        if (f[3] < 0) {
            m.tris.push_back({f[0], f[1], f[2]});
            continue;
        }
        const auto& g = q.face_gamma[fi];
        double g13 = value(g[0]) * value(g[2]);
        double g24 = value(g[1]) * value(g[3]);
        if (g13 >= g24) {
            m.tris.push_back({f[0], f[1], f[2]});
            m.tris.push_back({f[0], f[2], f[3]});
        } else {
            m.tris.push_back({f[1], f[2], f[3]});
            m.tris.push_back({f[1], f[3], f[0]});
        }
    }
    return m;
}

template <class T>
TriMeshT<T> extract_mc_baseline(const CellField<T>& field, const DmcTables& tables) {
    TriMeshT<T> m;
    IVec3 res = field.res;
    IVec3 vd{res.x + 1, res.y + 1, res.z + 1};

    // one crossing vertex per cut grid edge, shared across cells
    std::array<std::vector<int32_t>, 3> edge_vertex;
    for (int axis = 0; axis < 3; ++axis) {
        IVec3 ed = vd;
        ed[axis] = res[axis];
        edge_vertex[axis].assign(size_t(ed.x) * ed.y * ed.z, -1);
    }
    auto edge_index = [&](int axis, int i, int j, int k) -> int32_t& {
        IVec3 ed = vd;
        ed[axis] = res[axis];
        return edge_vertex[axis][size_t(i) + size_t(ed.x) * (size_t(j) + size_t(ed.y) * k)];
    };

    for (int axis = 0; axis < 3; ++axis) {
        IVec3 lim = vd;
        lim[axis] = res[axis];
        for (int k = 0; k < lim.z; ++k)
            for (int j = 0; j < lim.y; ++j)
                for (int i = 0; i < lim.x; ++i) {
                    IVec3 v0{i, j, k};
                    IVec3 v1 = v0;
                    v1[axis] += 1;
                    size_t a = field.vidx(v0.x, v0.y, v0.z), b = field.vidx(v1.x, v1.y, v1.z);
                    if (is_inside(value(field.sdf[a])) == is_inside(value(field.sdf[b])))
                        continue;
                    // Eq. 1 is Eq. 5 with unit weights; reuse the closed form
                    // without allocating weight nodes
                    T wi = field.sdf[a];
                    T wj = field.sdf[b];
                    Vec3T<T> u = (wi * field.pos[b] - wj * field.pos[a]) / (wi - wj);
                    edge_index(axis, i, j, k) = (int32_t)m.vertices.size();
                    m.vertices.push_back(u);
                    m.midpoint_flag.push_back(0);
                    m.vertex_cell.push_back(-1);
                }
    }

    for (int ck = 0; ck < res.z; ++ck)
        for (int cj = 0; cj < res.y; ++cj)
            for (int ci = 0; ci < res.x; ++ci) {
                uint8_t mask = 0;
                for (int c = 0; c < 8; ++c) {
                    size_t v = field.vidx(ci + kCorner[c][0], cj + kCorner[c][1],
                                          ck + kCorner[c][2]);
                    if (is_inside(value(field.sdf[v]))) mask |= uint8_t(1) << c;
                }
                if (mask == 0 || mask == 255) continue;
                for (const auto& loop : tables.lookup(mask).loops) {
                    std::vector<int32_t> poly;
                    poly.reserve(loop.size());
                    for (int e : loop) {
                        int axis = kEdgeAxis[e];
                        const int* base = kCorner[kEdgeCorner[e][0]];
                        int32_t vi = edge_index(axis, ci + base[0], cj + base[1], ck + base[2]);
                        if (vi < 0) throw std::runtime_error("mc: missing crossing vertex");
                        poly.push_back(vi);
                    }
                    for (size_t t = 1; t + 1 < poly.size(); ++t)
                        m.tris.push_back({poly[0], poly[t], poly[t + 1]});
                }
            }
    return m;
}

QuadMesh to_numeric(const QuadMeshT<Var>& q) {
    QuadMesh out;
    out.vertices.reserve(q.vertices.size());
    for (const auto& dv : q.vertices) {
        DualVertexT<double> d;
        d.pos = value(dv.pos);
        d.cell = dv.cell;
        d.loop = dv.loop;
        d.crossings.reserve(dv.crossings.size());
        for (const auto& c : dv.crossings) d.crossings.push_back(value(c));
        out.vertices.push_back(std::move(d));
    }
    out.faces = q.faces;
    out.face_cell = q.face_cell;
    for (const auto& g : q.face_gamma)
        out.face_gamma.push_back({value(g[0]), value(g[1]), value(g[2]), value(g[3])});
    return out;
}

TriMesh to_numeric(const TriMeshT<Var>& m) {
    TriMesh out;
    out.vertices.reserve(m.vertices.size());
    for (const auto& v : m.vertices) out.vertices.push_back(value(v));
    out.tris = m.tris;
    out.midpoint_flag = m.midpoint_flag;
    out.vertex_cell = m.vertex_cell;
    return out;
}

namespace {
void write_vertices(std::FILE* f, const std::vector<Vec3>& vs) {
    for (const Vec3& v : vs) std::fprintf(f, "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
}
}  // namespace

void save_obj(const TriMesh& m, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("obj: cannot write " + path);
    write_vertices(f, m.vertices);
    for (const auto& t : m.tris) std::fprintf(f, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    std::fclose(f);
}

void save_obj(const QuadMesh& m, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("obj: cannot write " + path);
    std::vector<Vec3> vs;
    vs.reserve(m.vertices.size());
    for (const auto& dv : m.vertices) vs.push_back(dv.pos);
    write_vertices(f, vs);
    for (const auto& q : m.faces) {
        if (q[3] < 0)
            std::fprintf(f, "f %d %d %d\n", q[0] + 1, q[1] + 1, q[2] + 1);
        else
            std::fprintf(f, "f %d %d %d %d\n", q[0] + 1, q[1] + 1, q[2] + 1, q[3] + 1);
    }
    std::fclose(f);
}

TriMesh load_obj(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("obj: cannot read " + path);
    TriMesh m;
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("v ", 0) == 0) {
            Vec3 v;
            if (std::sscanf(line.c_str(), "v %lf %lf %lf", &v.x, &v.y, &v.z) != 3)
                throw std::runtime_error("obj: malformed vertex line");
            m.vertices.push_back(v);
            m.midpoint_flag.push_back(0);
            m.vertex_cell.push_back(-1);
        } else if (line.rfind("f ", 0) == 0) {
            std::istringstream ls(line.substr(2));
            std::vector<int32_t> idx;
            std::string tok;
            while (ls >> tok) {
                // accept v, v/vt, v//vn, v/vt/vn references
                idx.push_back((int32_t)std::stol(tok.substr(0, tok.find('/'))) - 1);
            }
            if (idx.size() < 3) throw std::runtime_error("obj: face with fewer than 3 vertices");
            for (size_t t = 1; t + 1 < idx.size(); ++t)
                m.tris.push_back({idx[0], idx[t], idx[t + 1]});
        }
    }
    for (const auto& t : m.tris)
        for (int32_t v : t)
            if (v < 0 || v >= (int32_t)m.vertices.size())
                throw std::runtime_error("obj: face index out of range");
    return m;
}

template QuadMeshT<double> extract_quads<double>(const CellField<double>&, const DmcTables&);
template QuadMeshT<Var> extract_quads<Var>(const CellField<Var>&, const DmcTables&);
template TriMeshT<double> split_training<double>(const QuadMeshT<double>&);
template TriMeshT<Var> split_training<Var>(const QuadMeshT<Var>&);
template TriMeshT<double> split_final<double>(const QuadMeshT<double>&);
template TriMeshT<Var> split_final<Var>(const QuadMeshT<Var>&);
template TriMeshT<double> extract_mc_baseline<double>(const CellField<double>&, const DmcTables&);
template TriMeshT<Var> extract_mc_baseline<Var>(const CellField<Var>&, const DmcTables&);

}  // namespace flexi
