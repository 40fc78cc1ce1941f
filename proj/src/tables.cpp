#include "flexicubes/tables.hpp"

#include <algorithm>
#include <stdexcept>

#include "flexicubes/vec3.hpp"
#include "json.hpp"

namespace flexi {

using namespace cube;

namespace {

bool corner_inside(uint8_t mask, int c) { return (mask >> c) & 1; }

bool edge_cut(uint8_t mask, int e) {
    return corner_inside(mask, kEdgeCorner[e][0]) != corner_inside(mask, kEdgeCorner[e][1]);
}

// On an ambiguous face the negative corners sit on one diagonal. The default
// pairing isolates them (each contour segment cuts off one negative corner),
// matching the classic MC table resolution; `flip` isolates the positive
// diagonal instead. Both cells sharing a face see the same corner signs, so
// the choice is consistent across the grid.
std::array<int, 2> isolated_diagonal(uint8_t mask, int f, bool flip) {
    std::array<int, 2> d{-1, -1};
    int n = 0;
    for (int k = 0; k < 4; ++k) {
        int c = kFaceCorner[f][k];
        if (corner_inside(mask, c) != flip) d[n++] = c;
    }
    if (n != 2) throw std::runtime_error("tables: face is not ambiguous");
    return d;
}

// Cut edges of face f paired into contour segments.
std::vector<std::array<int, 2>> face_pairs(uint8_t mask, int f, bool flip) {
    std::vector<int> cut;
    for (int k = 0; k < 4; ++k)
        if (edge_cut(mask, kFaceEdge[f][k])) cut.push_back(kFaceEdge[f][k]);
    if (cut.empty()) return {};
    if (cut.size() == 2) return {{cut[0], cut[1]}};
    if (cut.size() != 4) throw std::runtime_error("tables: face with odd cut-edge count");
    auto diag = isolated_diagonal(mask, f, flip);
    std::vector<std::array<int, 2>> pairs;
    for (int corner : diag) {
        std::array<int, 2> pair{-1, -1};
        int n = 0;
        for (int e : cut)
            if (kEdgeCorner[e][0] == corner || kEdgeCorner[e][1] == corner) pair[n++] = e;
        if (n != 2) throw std::runtime_error("tables: ambiguous face pairing failed");
        pairs.push_back(pair);
    }
    return pairs;
}

bool face_ambiguous(uint8_t mask, int f) {
    int cut = 0;
    for (int k = 0; k < 4; ++k) cut += edge_cut(mask, kFaceEdge[f][k]);
    return cut == 4;
}

// Traces the cut-edge cycles of a configuration. Every cut edge has exactly
// one partner on each of its two faces, so the partner graph is 2-regular and
// decomposes into simple cycles.
std::vector<std::vector<int>> trace_loops(uint8_t mask, uint8_t flip_mask) {
    // partner[f][e]
    int partner[6][12];
    for (auto& row : partner) std::fill(std::begin(row), std::end(row), -1);
    for (int f = 0; f < 6; ++f) {
        bool flip = (flip_mask >> f) & 1;
        for (auto& p : face_pairs(mask, f, flip)) {
            partner[f][p[0]] = p[1];
            partner[f][p[1]] = p[0];
        }
    }

    std::vector<std::vector<int>> loops;
    bool visited[12] = {};
    for (int start = 0; start < 12; ++start) {
        if (!edge_cut(mask, start) || visited[start]) continue;
        std::vector<int> loop;
        int e = start;
        int via = kEdgeFace[e][0];
        do {
            loop.push_back(e);
            visited[e] = true;
            int nxt = partner[via][e];
            if (nxt < 0) throw std::runtime_error("tables: broken partner chain");
            // leave the next edge through its other face
            via = (kEdgeFace[nxt][0] == via) ? kEdgeFace[nxt][1] : kEdgeFace[nxt][0];
            e = nxt;
        } while (e != start);
        loops.push_back(std::move(loop));
    }
    return loops;
}

Vec3 edge_midpoint(int e) {
    const int* a = kCorner[kEdgeCorner[e][0]];
    const int* b = kCorner[kEdgeCorner[e][1]];
    return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])};
}

// Orients a loop so its winding faces the positive (outside) region.
void orient_loop(uint8_t mask, std::vector<int>& loop) {
    Vec3 n{0, 0, 0};
    for (size_t i = 0; i < loop.size(); ++i) {
        Vec3 a = edge_midpoint(loop[i]);
        Vec3 b = edge_midpoint(loop[(i + 1) % loop.size()]);
        n += cross(a, b);
    }
    Vec3 d{0, 0, 0};
    for (int e : loop) {
        int ca = kEdgeCorner[e][0], cb = kEdgeCorner[e][1];
        if (corner_inside(mask, ca)) std::swap(ca, cb);  // ca outside, cb inside
        Vec3 out{(double)kCorner[ca][0], (double)kCorner[ca][1], (double)kCorner[ca][2]};
        Vec3 in{(double)kCorner[cb][0], (double)kCorner[cb][1], (double)kCorner[cb][2]};
        d += out - in;
    }
    double s = dot(normalized(n), normalized(d));
    if (std::fabs(s) < 1e-9) throw std::runtime_error("tables: degenerate loop orientation");
    if (s < 0) std::reverse(loop.begin(), loop.end());
}

CubeCase make_case(uint8_t mask, uint8_t flip_mask) {
    CubeCase c;
    c.loops = trace_loops(mask, flip_mask);
    for (auto& loop : c.loops) orient_loop(mask, loop);
    // deterministic loop order: by smallest contained edge id
    std::sort(c.loops.begin(), c.loops.end(), [](const auto& a, const auto& b) {
        return *std::min_element(a.begin(), a.end()) < *std::min_element(b.begin(), b.end());
    });
    c.edge_loop.fill(-1);
    for (size_t li = 0; li < c.loops.size(); ++li)
        for (int e : c.loops[li]) c.edge_loop[e] = (int8_t)li;
    return c;
}

uint8_t tunnel_mask(uint8_t mask, const CubeCase& c) {
    uint8_t t = 0;
    for (int f = 0; f < 6; ++f) {
        if (!face_ambiguous(mask, f)) continue;
        int8_t l0 = c.edge_loop[kFaceEdge[f][0]];
        bool same = true;
        for (int k = 1; k < 4; ++k) same = same && c.edge_loop[kFaceEdge[f][k]] == l0;
        if (same) t |= uint8_t(1) << f;
    }
    return t;
}

// canonical form of a cyclic sequence: rotation starting at the minimum element
std::vector<int> canonical_cycle(std::vector<int> v) {
    auto it = std::min_element(v.begin(), v.end());
    std::rotate(v.begin(), it, v.end());
    return v;
}

void check_case(uint8_t mask, const CubeCase& c) {
    int cut_total = 0;
    for (int e = 0; e < 12; ++e) cut_total += edge_cut(mask, e);
    int in_loops = 0;
    std::array<int, 12> seen{};
    for (auto& loop : c.loops) {
        if (loop.size() < 3 || loop.size() > 7)
            throw std::runtime_error("tables: loop length out of range");
        for (int e : loop) {
            ++seen[e];
            ++in_loops;
        }
    }
    if (in_loops != cut_total) throw std::runtime_error("tables: loop coverage mismatch");
    for (int e = 0; e < 12; ++e)
        if (seen[e] != (edge_cut(mask, e) ? 1 : 0))
            throw std::runtime_error("tables: edge multiplicity violated");
    if (c.loops.size() > 4) throw std::runtime_error("tables: more than four loops");
}

}  // namespace

const CubeCase& DmcTables::lookup_variant(uint8_t mask, uint8_t flip_mask) const {
    if (flip_mask == 0) return base[mask];
    for (auto& [fm, cc] : variants[mask])
        if (fm == flip_mask) return cc;
    throw std::runtime_error("tables: unknown variant requested");
}

DmcTables build_tables() {
    DmcTables t;
    for (int m = 0; m < 256; ++m) {
        t.base[m] = make_case((uint8_t)m, 0);
        check_case((uint8_t)m, t.base[m]);
        uint8_t amb = 0;
        for (int f = 0; f < 6; ++f)
            if (face_ambiguous((uint8_t)m, f)) amb |= uint8_t(1) << f;
        t.ambiguous_faces[m] = amb;
        t.tunnel_faces[m] = tunnel_mask((uint8_t)m, t.base[m]);

        // variants for every non-empty subset of tunnel faces
        uint8_t tm = t.tunnel_faces[m];
        for (uint8_t sub = tm; sub; sub = (uint8_t)((sub - 1) & tm)) {
            CubeCase v = make_case((uint8_t)m, sub);
            check_case((uint8_t)m, v);
            // the flipped pairing must remove the tunnel on every flipped face
            uint8_t vt = tunnel_mask((uint8_t)m, v);
            if (vt & sub) throw std::runtime_error("tables: variant retains tunnel");
            t.variants[m].emplace_back(sub, std::move(v));
        }
    }

    // sanity on the trivial configurations
    if (!t.base[0x00].loops.empty() || !t.base[0xFF].loops.empty())
        throw std::runtime_error("tables: empty configs must have no loops");
    for (int c = 0; c < 8; ++c) {
        uint8_t m = uint8_t(1) << c;
        if (t.base[m].loops.size() != 1 || t.base[m].loops[0].size() != 3)
            throw std::runtime_error("tables: corner config must yield one triangle");
    }

    // Complement symmetry, up to the ambiguous-face resolution: complementing
    // the signs swaps which diagonal the pairing rule isolates, so the
    // complement's loops equal this configuration re-traced with every
    // ambiguous face flipped, with reversed orientation. Configurations
    // without ambiguous faces are exactly symmetric.
    for (int m = 0; m < 256; ++m) {
        const CubeCase& b = t.base[0xFF ^ m];
        CubeCase a = t.ambiguous_faces[m] ? make_case((uint8_t)m, t.ambiguous_faces[m]) : t.base[m];
        if (a.loops.size() != b.loops.size())
            throw std::runtime_error("tables: complement loop count mismatch");
        for (auto& la : a.loops) {
            std::vector<int> rev(la.rbegin(), la.rend());
            auto want = canonical_cycle(rev);
            bool found = false;
            for (auto& lb : b.loops) found = found || canonical_cycle(lb) == want;
            if (!found) throw std::runtime_error("tables: complement symmetry violated");
        }
    }
    return t;
}

const DmcTables& dmc_tables() {
    static const DmcTables t = build_tables();
    return t;
}

std::string DmcTables::dump_json() const {
    nlohmann::json j;
    j["format"] = "flexicubes-dmc-tables";
    j["version"] = 1;
    auto cases = nlohmann::json::array();
    for (int m = 0; m < 256; ++m) {
        nlohmann::json e;
        e["config"] = m;
        e["loops"] = base[m].loops;
        e["ambiguous_faces"] = ambiguous_faces[m];
        e["tunnel_faces"] = tunnel_faces[m];
        cases.push_back(std::move(e));
    }
    j["cases"] = std::move(cases);
    return j.dump(2);
}

}  // namespace flexi
