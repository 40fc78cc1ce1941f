#include "flexicubes/octree.hpp"

#include <algorithm>
#include <stdexcept>

namespace flexi {

using namespace cube;

Octree::Octree(int base_res, int extra_depth) {
    int d = 0;
    while ((1 << d) < base_res) ++d;
    if ((1 << d) != base_res)
        throw std::runtime_error("octree: base resolution must be a power of two");
    base_depth_ = d;
    max_depth_ = d + extra_depth;
    for (int k = 0; k < base_res; ++k)
        for (int j = 0; j < base_res; ++j)
            for (int i = 0; i < base_res; ++i) {
                int32_t cid = cell_id({base_depth_, {i, j, k}});
                leaf_set_.insert(cid);
            }
    leaf_list_.assign(leaf_set_.begin(), leaf_set_.end());
    // register all base-grid vertices
    for (int32_t cid : leaf_list_) cell_corners(cid);
}

uint64_t Octree::vkey(const IVec3& c) const {
    uint64_t n = uint64_t(finest_res()) + 1;
    return (uint64_t(c.z) * n + c.y) * n + c.x;
}

uint64_t Octree::ckey(const Cell& c) const {
    return (uint64_t(c.depth) << 54) | (uint64_t(c.coord.z) << 36) |
           (uint64_t(c.coord.y) << 18) | uint64_t(c.coord.x);
}

int32_t Octree::vertex_id(const IVec3& c) {
    auto [it, inserted] = vindex_.emplace(vkey(c), (int32_t)vpos_.size());
    if (inserted) vpos_.push_back(c);
    return it->second;
}

int32_t Octree::find_vertex(const IVec3& c) const {
    auto it = vindex_.find(vkey(c));
    return it == vindex_.end() ? -1 : it->second;
}

int32_t Octree::cell_id(const Cell& c) {
    auto [it, inserted] = cindex_.emplace(ckey(c), (int32_t)cells_.size());
    if (inserted) cells_.push_back(c);
    return it->second;
}

int32_t Octree::find_cell(const Cell& c) const {
    auto it = cindex_.find(ckey(c));
    return it == cindex_.end() ? -1 : it->second;
}

std::array<int32_t, 8> Octree::cell_corners(int32_t cid) {
    const Cell& c = cells_[cid];
    int span = cell_span(cid);
    std::array<int32_t, 8> out;
    for (int k = 0; k < 8; ++k)
        out[k] = vertex_id({c.coord.x * span + kCorner[k][0] * span,
                            c.coord.y * span + kCorner[k][1] * span,
                            c.coord.z * span + kCorner[k][2] * span});
    return out;
}

std::array<int32_t, 8> Octree::cell_corners_const(int32_t cid) const {
    const Cell& c = cells_[cid];
    int span = cell_span(cid);
    std::array<int32_t, 8> out;
    for (int k = 0; k < 8; ++k) {
        out[k] = find_vertex({c.coord.x * span + kCorner[k][0] * span,
                              c.coord.y * span + kCorner[k][1] * span,
                              c.coord.z * span + kCorner[k][2] * span});
        if (out[k] < 0) throw std::runtime_error("octree: unregistered cell corner");
    }
    return out;
}

std::vector<int32_t> Octree::refine_cell(int32_t cid) {
    if (!leaf_set_.count(cid)) throw std::runtime_error("octree: refining a non-leaf");
    const Cell c = cells_[cid];
    if (c.depth >= max_depth_) return {};
    leaf_set_.erase(cid);
    std::vector<int32_t> children;
    for (int k = 0; k < 8; ++k) {
        Cell ch{c.depth + 1,
                {2 * c.coord.x + kCorner[k][0], 2 * c.coord.y + kCorner[k][1],
                 2 * c.coord.z + kCorner[k][2]}};
        int32_t ch_id = cell_id(ch);
        cell_corners(ch_id);  // registers new vertices
        leaf_set_.insert(ch_id);
        children.push_back(ch_id);
    }
    leaf_list_.assign(leaf_set_.begin(), leaf_set_.end());
    return children;
}

int32_t Octree::locate_leaf_2x(const IVec3& c2) const {
    for (int d = base_depth_; d <= max_depth_; ++d) {
        int shift = max_depth_ - d + 1;
        Cell cand{d, {c2.x >> shift, c2.y >> shift, c2.z >> shift}};
        int32_t cid = find_cell(cand);
        if (cid >= 0 && leaf_set_.count(cid)) return cid;
    }
    return -1;
}

void Octree::identify_constraints() {
    constraints_.clear();
    constrained_.assign(vpos_.size(), 0);
    std::vector<int8_t> seen(vpos_.size(), 0);

    for (int32_t cid : leaf_list_) {
        const Cell& L = cells_[cid];
        int span = cell_span(cid);
        for (int f = 0; f < 6; ++f) {
            int axis = face_axis(f), side = face_side(f);
            IVec3 ncoord = L.coord;
            ncoord[axis] += side ? 1 : -1;
            if (ncoord[axis] < 0 || ncoord[axis] >= (1 << L.depth)) continue;
            // same-size neighbor?
            int32_t n = find_cell({L.depth, ncoord});
            if (n >= 0 && leaf_set_.count(n)) continue;
            // coarser ancestor leaf?
            int32_t coarse = -1;
            int cdepth = -1;
            IVec3 cc = ncoord;
            for (int d = L.depth - 1; d >= base_depth_; --d) {
                cc = {cc.x >> 1, cc.y >> 1, cc.z >> 1};
                int32_t cand = find_cell({d, cc});
                if (cand >= 0 && leaf_set_.count(cand)) {
                    coarse = cand;
                    cdepth = d;
                    break;
                }
            }
            if (coarse < 0) continue;  // finer neighbors; handled from their side

            // constraining face of the coarse leaf, facing back at us
            int cspan = cell_span(coarse);
            const Cell& C = cells_[coarse];
            int ua = (axis + 1) % 3, va = (axis + 2) % 3;
            if (ua > va) std::swap(ua, va);
            // face plane coordinate (shared by both cells)
            int plane = L.coord[axis] * span + (side ? span : 0);
            IVec3 base;
            base[axis] = plane;
            base[ua] = C.coord[ua] * cspan;
            base[va] = C.coord[va] * cspan;
            std::array<int32_t, 4> fc;  // coarse face corners: (0,0),(1,0),(0,1),(1,1)
            for (int q = 0; q < 4; ++q) {
                IVec3 p = base;
                p[ua] += (q & 1) * cspan;
                p[va] += ((q >> 1) & 1) * cspan;
                int32_t vid = find_vertex(p);
                if (vid < 0) throw std::runtime_error("octree: missing coarse face corner");
                fc[q] = vid;
            }
            // every corner of our face that is not a coarse corner is constrained
            for (int q = 0; q < 4; ++q) {
                IVec3 p;
                p[axis] = plane;
                p[ua] = L.coord[ua] * span + (q & 1) * span;
                p[va] = L.coord[va] * span + ((q >> 1) & 1) * span;
                double u = double(p[ua] - base[ua]) / cspan;
                double v = double(p[va] - base[va]) / cspan;
                bool at_corner = (u == 0.0 || u == 1.0) && (v == 0.0 || v == 1.0);
                if (at_corner) continue;
                int32_t vid = find_vertex(p);
                if (vid < 0) throw std::runtime_error("octree: missing fine face vertex");
                if (seen[vid]) continue;
                seen[vid] = 1;
                Constraint con;
                con.vertex = vid;
                con.corners = fc;
                con.weights = {(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v};
                con.coarse_depth = cdepth;
                constraints_.push_back(con);
            }
        }
    }
    std::sort(constraints_.begin(), constraints_.end(), [](const Constraint& a,
                                                           const Constraint& b) {
        if (a.coarse_depth != b.coarse_depth) return a.coarse_depth < b.coarse_depth;
        return a.vertex < b.vertex;
    });
    for (const Constraint& c : constraints_) constrained_[c.vertex] = 1;
}

// ---- extraction ----

namespace {

inline bool is_inside(double s) { return s < 0.0; }

constexpr int kQuadOff[4][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};  // 2x-scale offsets, CCW

struct MinimalEdge {
    int axis;
    IVec3 base;  // finest coords of the lower endpoint
    int len;     // finest units
};

std::vector<MinimalEdge> minimal_edges(const Octree& tree) {
    // group candidate edges per line, then keep those containing no shorter edge
    struct Seg {
        int start, len;
        bool operator<(const Seg& o) const {
            return start != o.start ? start < o.start : len < o.len;
        }
        bool operator==(const Seg& o) const { return start == o.start && len == o.len; }
    };
    std::map<std::tuple<int, int, int>, std::vector<Seg>> lines[3];
    for (int32_t cid : tree.leaves()) {
        const auto& c = tree.cell(cid);
        int span = tree.cell_span(cid);
        IVec3 o{c.coord.x * span, c.coord.y * span, c.coord.z * span};
        for (int e = 0; e < 12; ++e) {
            int axis = kEdgeAxis[e];
            const int* a = kCorner[kEdgeCorner[e][0]];
            IVec3 p{o.x + a[0] * span, o.y + a[1] * span, o.z + a[2] * span};
            int ua = axis == 0 ? 1 : 0, va = axis == 2 ? 1 : 2;
            lines[axis][{p[ua], p[va], 0}].push_back({p[axis], span});
        }
    }
    std::vector<MinimalEdge> out;
    for (int axis = 0; axis < 3; ++axis) {
        int ua = axis == 0 ? 1 : 0, va = axis == 2 ? 1 : 2;
        for (auto& [line, segs] : lines[axis]) {
            std::sort(segs.begin(), segs.end());
            segs.erase(std::unique(segs.begin(), segs.end()), segs.end());
            for (const Seg& s : segs) {
                bool has_shorter_inside = false;
                for (const Seg& t : segs) {
                    if (t.len < s.len && t.start >= s.start && t.start + t.len <= s.start + s.len) {
                        has_shorter_inside = true;
                        break;
                    }
                }
                if (has_shorter_inside) continue;
                MinimalEdge e;
                e.axis = axis;
                e.base[axis] = s.start;
                e.base[ua] = std::get<0>(line);
                e.base[va] = std::get<1>(line);
                e.len = s.len;
                out.push_back(e);
            }
        }
    }
    return out;
}

// pairing segments of a coarse face, as (loop id, representative midpoint in
// face parameters); used to attach face-interior fine edges to coarse loops
struct FaceSegment {
    int loop;
    double u0, v0, u1, v1;
};

}  // namespace

std::vector<std::pair<int32_t, int32_t>> octree_edges(const Octree& tree) {
    std::vector<std::pair<int32_t, int32_t>> out;
    for (const MinimalEdge& e : minimal_edges(tree)) {
        IVec3 b2 = e.base;
        IVec3 e2 = e.base;
        e2[e.axis] += e.len;
        int32_t va = tree.find_vertex(b2), vb = tree.find_vertex(e2);
        if (va >= 0 && vb >= 0) out.emplace_back(va, vb);
    }
    return out;
}

template <class T>
QuadMeshT<T> extract_octree_quads(const OctreeField<T>& field, const DmcTables& tables) {
    const Octree& tree = *field.tree;
    QuadMeshT<T> out;

    // per-leaf case resolution (masks first, then the tunnel patch between
    // same-size neighbors; mixed-size tunnel pairs are left unpatched)
    std::map<int32_t, uint8_t> mask;
    for (int32_t cid : tree.leaves()) {
        auto corners = tree.cell_corners_const(cid);
        uint8_t m = 0;
        for (int k = 0; k < 8; ++k)
            if (is_inside(value(field.sdf[corners[k]]))) m |= uint8_t(1) << k;
        mask[cid] = m;
    }
    std::map<int32_t, const CubeCase*> eff;
    for (int32_t cid : tree.leaves()) {
        uint8_t m = mask[cid];
        if (m == 0 || m == 255) continue;
        uint8_t tun = tables.tunnel_faces[m];
        uint8_t flips = 0;
        if (tun) {
            const auto& c = tree.cell(cid);
            for (int f = 0; f < 6; ++f) {
                if (!((tun >> f) & 1)) continue;
                IVec3 nc = c.coord;
                nc[face_axis(f)] += face_side(f) ? 1 : -1;
                if (nc[face_axis(f)] < 0 || nc[face_axis(f)] >= (1 << c.depth)) continue;
                int32_t n = tree.find_cell({c.depth, nc});
                if (n >= 0 && tree.is_leaf(n) && tables.tunnel_faces[mask[n]])
                    flips |= uint8_t(1) << f;
            }
        }
        eff[cid] = &tables.lookup_variant(m, flips);
    }

    // dual vertices per (leaf, loop)
    std::map<int32_t, int32_t> vd_base;
    for (auto& [cid, cs] : eff) {
        if (cs->loops.empty()) continue;
        auto corners = tree.cell_corners_const(cid);
        vd_base[cid] = (int32_t)out.vertices.size();
        for (size_t li = 0; li < cs->loops.size(); ++li) {
            const auto& loop = cs->loops[li];
            std::vector<Vec3T<T>> cr;
            std::vector<T> betas;
            for (int e : loop) {
                int ca = kEdgeCorner[e][0], cb = kEdgeCorner[e][1];
                cr.push_back(edge_crossing(field.pos[corners[ca]], field.pos[corners[cb]],
                                           field.sdf[corners[ca]], field.sdf[corners[cb]],
                                           activated(field.alpha_raw[8 * cid + ca]),
                                           activated(field.alpha_raw[8 * cid + cb])));
                betas.push_back(activated(field.beta_raw[12 * cid + e]));
            }
            DualVertexT<T> dv;
            dv.pos = dual_vertex<T>(cr, betas);
            dv.cell = cid;
            dv.loop = (int16_t)li;
            dv.crossings = std::move(cr);
            out.vertices.push_back(std::move(dv));
        }
    }

    // coarse-face contour segments for face-interior stitching
    auto face_segments = [&](int32_t cid, int face) -> std::vector<FaceSegment> {
        std::vector<FaceSegment> segs;
        const CubeCase* cs = eff.count(cid) ? eff.at(cid) : nullptr;
        if (!cs) return segs;
        auto corners = tree.cell_corners_const(cid);
        int axis = face_axis(face);
        int ua = (axis + 1) % 3, va = (axis + 2) % 3;
        if (ua > va) std::swap(ua, va);
        // crossing parameter of each cut face edge in (u,v) coordinates
        auto crossing_uv = [&](int e, double& u, double& v) {
            int a = kEdgeCorner[e][0], b = kEdgeCorner[e][1];
            double sa = value(field.sdf[corners[a]]);
            double sb = value(field.sdf[corners[b]]);
            double t = sa / (sa - sb);
            u = kCorner[a][ua] + t * (kCorner[b][ua] - kCorner[a][ua]);
            v = kCorner[a][va] + t * (kCorner[b][va] - kCorner[a][va]);
        };
        // cut edges of this face grouped by loop partner (a loop enters and
        // leaves a face through consecutive edges in its cycle)
        for (size_t li = 0; li < cs->loops.size(); ++li) {
            const auto& loop = cs->loops[li];
            size_t n = loop.size();
            for (size_t i = 0; i < n; ++i) {
                int e0 = loop[i], e1 = loop[(i + 1) % n];
                bool on0 = kEdgeFace[e0][0] == face || kEdgeFace[e0][1] == face;
                bool on1 = kEdgeFace[e1][0] == face || kEdgeFace[e1][1] == face;
                if (!on0 || !on1) continue;
                FaceSegment s;
                s.loop = (int)li;
                crossing_uv(e0, s.u0, s.v0);
                crossing_uv(e1, s.u1, s.v1);
                segs.push_back(s);
            }
        }
        return segs;
    };

    // resolve which dual vertex of leaf `cid` a minimal cut edge attaches to
    auto resolve = [&](int32_t cid, const MinimalEdge& me) -> int32_t {
        const auto& c = tree.cell(cid);
        int span = tree.cell_span(cid);
        IVec3 o{c.coord.x * span, c.coord.y * span, c.coord.z * span};
        const CubeCase* cs = eff.count(cid) ? eff.at(cid) : nullptr;
        if (!cs || cs->loops.empty()) return -1;
        int ua = me.axis == 0 ? 1 : 0, va = me.axis == 2 ? 1 : 2;
        int tu = me.base[ua] - o[ua], tv = me.base[va] - o[va];
        bool on_u = tu == 0 || tu == span;
        bool on_v = tv == 0 || tv == span;
        if (on_u && on_v) {
            // on one of the cell's own edge lines
            int le = 4 * me.axis + (tu == span ? 1 : 0) + 2 * (tv == span ? 1 : 0);
            int loop = cs->edge_loop[le];
            if (loop < 0) return -1;
            return vd_base.at(cid) + loop;
        }
        // interior to one of the cell's faces: the face whose plane contains
        // the edge line
        int fx;
        if (on_u)
            fx = 2 * ua + (tu == span ? 1 : 0);
        else if (on_v)
            fx = 2 * va + (tv == span ? 1 : 0);
        else
            throw std::runtime_error("octree: minimal edge interior to a leaf");
        auto segs = face_segments(cid, fx);
        if (segs.empty()) return -1;
        // midpoint of the fine edge in the coarse cell's face parameters
        int pa = (face_axis(fx) + 1) % 3, pb = (face_axis(fx) + 2) % 3;
        if (pa > pb) std::swap(pa, pb);
        double mu = (me.base[pa] + (pa == me.axis ? 0.5 * me.len : 0.0) - o[pa]) / span;
        double mv = (me.base[pb] + (pb == me.axis ? 0.5 * me.len : 0.0) - o[pb]) / span;
        double best = 1e300;
        int best_loop = -1;
        for (const auto& s : segs) {
            // point-segment distance in face parameters
            double ex = s.u1 - s.u0, ey = s.v1 - s.v0;
            double px = mu - s.u0, py = mv - s.v0;
            double t = (ex * ex + ey * ey) > 0 ? (px * ex + py * ey) / (ex * ex + ey * ey) : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            double dx = px - t * ex, dy = py - t * ey;
            double d = dx * dx + dy * dy;
            if (d < best) {
                best = d;
                best_loop = s.loop;
            }
        }
        return best_loop < 0 ? -1 : vd_base.at(cid) + best_loop;
    };

    for (const MinimalEdge& me : minimal_edges(tree)) {
        IVec3 p0 = me.base, p1 = me.base;
        p1[me.axis] += me.len;
        int32_t va = tree.find_vertex(p0), vb = tree.find_vertex(p1);
        if (va < 0 || vb < 0) continue;
        double s0 = value(field.sdf[va]), s1 = value(field.sdf[vb]);
        if (is_inside(s0) == is_inside(s1)) continue;

        // quadrant leaves around the edge midpoint, counter-clockwise around
        // the positive edge axis
        int ax_b = (me.axis + 1) % 3, ax_c = (me.axis + 2) % 3;
        IVec3 mid2{2 * me.base.x, 2 * me.base.y, 2 * me.base.z};
        mid2[me.axis] += me.len;
        int32_t cells4[4];
        for (int q = 0; q < 4; ++q) {
            IVec3 s = mid2;
            s[ax_b] += kQuadOff[q][0];
            s[ax_c] += kQuadOff[q][1];
            if (s[ax_b] < 0 || s[ax_c] < 0 || s[ax_b] > 2 * tree.finest_res() ||
                s[ax_c] > 2 * tree.finest_res()) {
                cells4[q] = -1;
                continue;
            }
            cells4[q] = tree.locate_leaf_2x(s);
        }
        if (cells4[0] < 0 || cells4[1] < 0 || cells4[2] < 0 || cells4[3] < 0)
            continue;  // domain boundary

        // collapse repeated leaves (a coarse leaf can cover two quadrants)
        std::vector<int32_t> ring;
        for (int q = 0; q < 4; ++q) {
            if (ring.empty() || ring.back() != cells4[q]) ring.push_back(cells4[q]);
        }
        while (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
        if (ring.size() < 3) continue;

        std::vector<int32_t> poly;
        std::vector<int32_t> pcell;
        bool ok = true;
        for (int32_t cid : ring) {
            int32_t vd = resolve(cid, me);
            if (vd < 0) {
                ok = false;
                break;
            }
            poly.push_back(vd);
            pcell.push_back(cid);
        }
        if (!ok) continue;

        if (!is_inside(s0)) {
            std::reverse(poly.begin() + 1, poly.end());
            std::reverse(pcell.begin() + 1, pcell.end());
        }
        std::array<int32_t, 4> face{-1, -1, -1, -1};
        std::array<int32_t, 4> fcell{-1, -1, -1, -1};
        std::array<T, 4> gam;
        for (size_t i = 0; i < poly.size(); ++i) {
            face[i] = poly[i];
            fcell[i] = pcell[i];
            gam[i] = activated(field.gamma_raw[pcell[i]]);
        }
        if (poly.size() == 3) gam[3] = gam[0];
        out.faces.push_back(face);
        out.face_cell.push_back(fcell);
        out.face_gamma.push_back(gam);
    }
    return out;
}

template QuadMeshT<double> extract_octree_quads<double>(const OctreeField<double>&,
                                                        const DmcTables&);
template QuadMeshT<Var> extract_octree_quads<Var>(const OctreeField<Var>&, const DmcTables&);

}  // namespace flexi
