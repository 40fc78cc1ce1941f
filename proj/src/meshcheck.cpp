#include "flexicubes/meshcheck.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "flexicubes/bvh.hpp"
#include "flexicubes/predicates.hpp"
#include "json.hpp"

namespace flexi {

namespace {

uint64_t edge_key(int32_t a, int32_t b) {
    if (a > b) std::swap(a, b);
    return (uint64_t(uint32_t(a)) << 32) | uint32_t(b);
}

struct EdgeInfo {
    int32_t count = 0;
    int32_t forward = 0;   // traversed (a<b) direction
    int32_t backward = 0;
};

struct UnionFind {
    std::vector<int32_t> parent;
    explicit UnionFind(size_t n) : parent(n) {
        for (size_t i = 0; i < n; ++i) parent[i] = (int32_t)i;
    }
    int32_t find(int32_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int32_t a, int32_t b) { parent[find(a)] = find(b); }
};

TopoReport check_faces(size_t nverts, const std::vector<std::vector<int32_t>>& faces) {
    TopoReport r;
    r.num_vertices = (int64_t)nverts;
    r.num_faces = (int64_t)faces.size();

    std::unordered_map<uint64_t, EdgeInfo> edges;
    edges.reserve(faces.size() * 4);
    for (const auto& f : faces) {
        for (size_t k = 0; k < f.size(); ++k) {
            int32_t a = f[k], b = f[(k + 1) % f.size()];
            if (a < 0 || b < 0 || a >= (int32_t)nverts || b >= (int32_t)nverts)
                throw std::runtime_error("meshcheck: face index out of range");
            if (a == b) throw std::runtime_error("meshcheck: degenerate face edge");
            EdgeInfo& e = edges[edge_key(a, b)];
            e.count++;
            if (a < b)
                e.forward++;
            else
                e.backward++;
        }
    }
    r.num_edges = (int64_t)edges.size();
    for (auto& [k, e] : edges) {
        if (e.count == 1) r.boundary_edges++;
        if (e.count > 2) r.non_manifold_edges++;
        if (e.count == 2 && !(e.forward == 1 && e.backward == 1)) r.consistent_orientation = false;
    }
    r.euler_characteristic = r.num_vertices - r.num_edges + r.num_faces;

    // connected components over referenced vertices
    UnionFind uf(nverts);
    std::vector<uint8_t> referenced(nverts, 0);
    for (const auto& f : faces)
        for (size_t k = 0; k < f.size(); ++k) {
            referenced[f[k]] = 1;
            uf.unite(f[k], f[(k + 1) % f.size()]);
        }
    std::unordered_set<int32_t> roots;
    for (size_t v = 0; v < nverts; ++v)
        if (referenced[v]) roots.insert(uf.find((int32_t)v));
    r.connected_components = (int64_t)roots.size();

    // vertex manifoldness: the faces around a vertex must form a single fan
    std::vector<std::vector<int32_t>> vertex_faces(nverts);
    for (size_t fi = 0; fi < faces.size(); ++fi)
        for (int32_t v : faces[fi]) vertex_faces[v].push_back((int32_t)fi);

    for (size_t v = 0; v < nverts; ++v) {
        if (!referenced[v]) continue;
        const auto& vf = vertex_faces[v];
        // edges incident to v with their face counts
        std::unordered_map<uint64_t, std::vector<int32_t>> local;
        for (int32_t fi : vf) {
            const auto& f = faces[fi];
            size_t n = f.size();
            for (size_t k = 0; k < n; ++k) {
                if (f[k] != (int32_t)v) continue;
                int32_t prev = f[(k + n - 1) % n], next = f[(k + 1) % n];
                local[edge_key((int32_t)v, prev)].push_back(fi);
                local[edge_key((int32_t)v, next)].push_back(fi);
            }
        }
        bool bad = false;
        int64_t boundary_here = 0;
        for (auto& [k, fl] : local) {
            if (fl.size() > 2) bad = true;
            if (fl.size() == 1) boundary_here++;
        }
        // connectivity of the star through manifold edges
        std::unordered_map<int32_t, int32_t> fidx;
        for (int32_t fi : vf) fidx.emplace(fi, (int32_t)fidx.size());
        UnionFind star((int32_t)vf.size());
        for (auto& [k, fl] : local)
            if (fl.size() == 2) star.unite(fidx[fl[0]], fidx[fl[1]]);
        std::unordered_set<int32_t> comp;
        for (size_t i = 0; i < vf.size(); ++i) comp.insert(star.find((int32_t)i));
        if (comp.size() > 1) bad = true;
        // a disk has either no boundary edges at v or exactly two
        if (!(boundary_here == 0 || boundary_here == 2)) bad = true;
        if (bad) r.non_manifold_vertices++;
    }
    return r;
}

}  // namespace

TopoReport check_topology(const TriMesh& m, bool with_self_intersections) {
    std::vector<std::vector<int32_t>> faces;
    faces.reserve(m.tris.size());
    for (const auto& t : m.tris) faces.push_back({t[0], t[1], t[2]});
    TopoReport r = check_faces(m.vertices.size(), faces);
    if (with_self_intersections) {
        auto pairs = self_intersections(m);
        r.self_intersecting_pairs = (int64_t)pairs.size();
        std::unordered_set<int32_t> tris;
        for (auto& [a, b] : pairs) {
            tris.insert(a);
            tris.insert(b);
        }
        r.self_intersecting_tris = (int64_t)tris.size();
    }
    return r;
}

TopoReport check_topology(const QuadMesh& m) {
    std::vector<std::vector<int32_t>> faces;
    faces.reserve(m.faces.size());
    for (const auto& q : m.faces) {
        if (q[3] < 0)
            faces.push_back({q[0], q[1], q[2]});
        else
            faces.push_back({q[0], q[1], q[2], q[3]});
    }
    return check_faces(m.vertices.size(), faces);
}

std::vector<std::pair<int32_t, int32_t>> self_intersections(const TriMesh& m) {
    std::vector<std::pair<int32_t, int32_t>> out;
    if (m.tris.empty()) return out;
    TriBvh bvh(m.vertices, m.tris);
    for (auto& [a, b] : bvh.overlap_pairs()) {
        const auto& ta = m.tris[a];
        const auto& tb = m.tris[b];
        bool share = false;
        for (int i = 0; i < 3 && !share; ++i)
            for (int j = 0; j < 3; ++j)
                if (ta[i] == tb[j]) {
                    share = true;
                    break;
                }
        if (share) continue;
        if (tri_tri_intersect(m.vertices[ta[0]], m.vertices[ta[1]], m.vertices[ta[2]],
                              m.vertices[tb[0]], m.vertices[tb[1]], m.vertices[tb[2]]))
            out.emplace_back(a, b);
    }
    return out;
}

HullTest point_in_hull(const Vec3& p, std::span<const Vec3> corners, double tol) {
    size_t n = corners.size();
    if (n < 4) throw std::runtime_error("hull: needs at least 4 corners");
    double scale = 0;
    for (const Vec3& c : corners) scale = std::max(scale, norm(c - corners[0]));
    if (scale <= 0) throw std::runtime_error("hull: degenerate corner set");
    double plane_eps = 1e-12 * scale;

    double margin = 1e300;
    int supporting = 0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            for (size_t k = j + 1; k < n; ++k) {
                Vec3 nrm = cross(corners[j] - corners[i], corners[k] - corners[i]);
                double len = norm(nrm);
                if (len < 1e-14 * scale * scale) continue;
                nrm = nrm / len;
                double lo = 1e300, hi = -1e300;
                for (const Vec3& c : corners) {
                    double d = dot(nrm, c - corners[i]);
                    lo = std::min(lo, d);
                    hi = std::max(hi, d);
                }
                // supporting plane: all corners on one side
                Vec3 inward;
                if (hi <= plane_eps)
                    inward = -1.0 * nrm;
                else if (lo >= -plane_eps)
                    inward = nrm;
                else
                    continue;
                ++supporting;
                margin = std::min(margin, dot(inward, p - corners[i]));
            }
    if (supporting == 0) throw std::runtime_error("hull: degenerate corner set");
    return {margin >= -tol, margin};
}

double signed_volume(const TriMesh& m) {
    double v = 0;
    for (const auto& t : m.tris)
        v += dot(m.vertices[t[0]], cross(m.vertices[t[1]], m.vertices[t[2]]));
    return v / 6.0;
}

std::string TopoReport::to_json() const {
    nlohmann::ordered_json j;
    j["num_vertices"] = num_vertices;
    j["num_edges"] = num_edges;
    j["num_faces"] = num_faces;
    j["boundary_edges"] = boundary_edges;
    j["non_manifold_edges"] = non_manifold_edges;
    j["non_manifold_vertices"] = non_manifold_vertices;
    j["connected_components"] = connected_components;
    j["euler_characteristic"] = euler_characteristic;
    j["consistent_orientation"] = consistent_orientation;
    if (self_intersecting_pairs >= 0) {
        j["self_intersecting_pairs"] = self_intersecting_pairs;
        j["self_intersecting_tris"] = self_intersecting_tris;
    }
    return j.dump(2);
}

}  // namespace flexi
