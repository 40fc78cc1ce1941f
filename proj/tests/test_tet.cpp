#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <set>

#include "flexicubes/diff.hpp"
#include "flexicubes/grid.hpp"
#include "flexicubes/meshcheck.hpp"
#include "flexicubes/rng.hpp"
#include "flexicubes/surface.hpp"
#include "flexicubes/tables.hpp"
#include "flexicubes/tet.hpp"

using namespace flexi;

namespace {

struct Extracted {
    QuadMesh quads;
    TetMesh tets;
    TriMesh surface_final;
};

Extracted extract_all(const ScalarGrid& g, const FlexParams& p) {
    auto pos = deformed_positions(g);
    auto field = make_field(g, p, pos);
    Extracted e;
    e.quads = extract_quads(field, dmc_tables());
    e.tets = extract_tets(field, dmc_tables(), e.quads);
    e.surface_final = split_final(e.quads);
    return e;
}

// independent re-implementation of the two tetrahedra rules for the
// fully-inside grid: per edge, one tet per existing consecutive cell pair
int64_t brute_count_full_inside(IVec3 res) {
    int64_t count = 0;
    for (int axis = 0; axis < 3; ++axis) {
        IVec3 lim{res.x + 1, res.y + 1, res.z + 1};
        lim[axis] = res[axis];
        int b = (axis + 1) % 3, c = (axis + 2) % 3;
        for (int k = 0; k < lim.z; ++k)
            for (int j = 0; j < lim.y; ++j)
                for (int i = 0; i < lim.x; ++i) {
                    IVec3 v{i, j, k};
                    bool present[4];
                    static const int off[4][2] = {{-1, -1}, {0, -1}, {0, 0}, {-1, 0}};
                    for (int q = 0; q < 4; ++q) {
                        IVec3 cc = v;
                        cc[b] += off[q][0];
                        cc[c] += off[q][1];
                        present[q] = cc.x >= 0 && cc.y >= 0 && cc.z >= 0 && cc.x < res.x &&
                                     cc.y < res.y && cc.z < res.z;
                    }
                    for (int q = 0; q < 4; ++q)
                        if (present[q] && present[(q + 1) % 4]) ++count;
                }
    }
    return count;
}

}  // namespace

TEST_CASE("fully inside grid: tet count matches the brute-force rule count") {
    ScalarGrid g = ScalarGrid::make({3, 3, 3}, {0, 0, 0}, 1.0);
    fill_sdf(g, [](Vec3) { return -1.0; });
    Extracted e = extract_all(g, FlexParams::zeros(g.num_cells()));
    CHECK(e.quads.empty());
    CHECK((int64_t)e.tets.num_tets() == brute_count_full_inside({3, 3, 3}));
    for (double v : e.tets.volumes) CHECK(v > 0);
}

TEST_CASE("all-positive grid yields no tets") {
    ScalarGrid g = ScalarGrid::make_domain(4);
    fill_sdf(g, [](Vec3) { return 1.0; });
    Extracted e = extract_all(g, FlexParams::zeros(g.num_cells()));
    CHECK(e.tets.empty());
}

TEST_CASE("sphere tets conform to the final surface split") {
    ScalarGrid g = ScalarGrid::make_domain(16);
    fill_sdf(g, [](Vec3 p) { return norm(p) - 0.5; });
    Extracted e = extract_all(g, FlexParams::zeros(g.num_cells()));
    REQUIRE(!e.tets.empty());

    TetConformity c = tet_conformity(e.tets, e.surface_final, 1e-9);
    CHECK(c.missing_surface == 0);
    CHECK(c.extra_boundary == 0);
    CHECK(c.defect_pockets == 0);
    CHECK(c.matched == (int64_t)e.surface_final.num_tris());

    for (double v : e.tets.volumes) CHECK(v > 0);
    double vol = total_volume(e.tets);
    double exact = 4.0 / 3.0 * M_PI * 0.125;
    CHECK(std::fabs(vol - exact) / exact < 0.05);
}

TEST_CASE("conformity holds with random flexible parameters") {
    Rng rng(5);
    ScalarGrid g = ScalarGrid::make_domain(10);
    fill_sdf(g, [](Vec3 p) { return norm(p) - 0.55; });
    FlexParams p = FlexParams::zeros(g.num_cells());
    for (auto& a : p.alpha_raw) a = rng.uniform(-1, 1);
    for (auto& b : p.beta_raw) b = rng.uniform(-1, 1);
    for (auto& c : p.gamma_raw) c = rng.uniform(-1, 1);
    Extracted e = extract_all(g, p);
    TetConformity c = tet_conformity(e.tets, e.surface_final, 1e-9);
    CHECK(c.missing_surface == 0);
    CHECK(c.extra_boundary == 0);
}

TEST_CASE("thin-tet filtering") {
    ScalarGrid g = ScalarGrid::make_domain(8);
    fill_sdf(g, [](Vec3 p) { return norm(p) - 0.5; });
    Extracted e = extract_all(g, FlexParams::zeros(g.num_cells()));
    SUBCASE("zero threshold is the identity") {
        TetMesh f = filter_thin_tets(e.tets, 0.0);
        CHECK(f.num_tets() == e.tets.num_tets());
    }
    SUBCASE("infinite threshold empties the mesh") {
        TetMesh f = filter_thin_tets(e.tets, 1e300);
        CHECK(f.num_tets() == 0);
    }
    SUBCASE("threshold removes exactly the small tets") {
        // count below the documented default threshold
        double thr = 2e-7;
        int64_t below = 0;
        for (double v : e.tets.volumes) below += v < thr ? 1 : 0;
        TetMesh f = filter_thin_tets(e.tets, thr);
        CHECK((int64_t)f.num_tets() == (int64_t)e.tets.num_tets() - below);
    }
    SUBCASE("constructed flat tet below threshold is dropped") {
        TetMesh m;
        m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.3, 0.3, 6e-9},
                      {0, 0, 1}, {2, 0, 0}, {0, 2, 0}, {0.5, 0.5, 1.0}};
        m.tets = {{0, 1, 2, 3}, {4, 5, 6, 7}};
        for (auto& t : m.tets) {
            Vec3 a = m.vertices[t[0]], b = m.vertices[t[1]], c = m.vertices[t[2]],
                 d = m.vertices[t[3]];
            m.volumes.push_back(std::fabs(dot(b - a, cross(c - a, d - a))) / 6.0);
        }
        TetMesh f = filter_thin_tets(m, 2e-7);
        CHECK(f.num_tets() == m.num_tets() - 1);
    }
}

TEST_CASE("tet export format") {
    ScalarGrid g = ScalarGrid::make_domain(6);
    fill_sdf(g, [](Vec3 p) { return norm(p) - 0.5; });
    Extracted e = extract_all(g, FlexParams::zeros(g.num_cells()));
    save_tet(e.tets, "/tmp/flexi_test.tet");
    std::ifstream is("/tmp/flexi_test.tet");
    std::string word;
    is >> word;
    CHECK(word == "tet");
    size_t nv, nt;
    is >> nv >> nt;
    CHECK(nv == e.tets.num_vertices());
    CHECK(nt == e.tets.num_tets());
    is >> word;
    CHECK(word == "v");
}

TEST_CASE("tet vertices carry gradients back to the parameters") {
    ScalarGrid g = ScalarGrid::make_domain(5);
    fill_sdf(g, [](Vec3 p) { return norm(p) - 0.5; });
    FlexParams p = FlexParams::zeros(g.num_cells());

    auto forward = [&](const ScalarGrid& grid, const FlexParams& params) {
        // deterministic scalar probe over all tet vertex coordinates
        auto pos = deformed_positions(grid);
        auto field = make_field(grid, params, pos);
        auto quads = extract_quads(field, dmc_tables());
        auto tets = extract_tets(field, dmc_tables(), quads);
        double acc = 0;
        int k = 0;
        for (const auto& v : tets.vertices) {
            acc += std::sin(0.1 * ++k) * (v.x + 0.5 * v.y - 0.25 * v.z);
        }
        return acc;
    };

    Tape tape;
    SceneRec rec = record_scene(tape, g, p);
    auto field = rec.field(g.resolution);
    auto quads = extract_quads(field, dmc_tables());
    auto tets = extract_tets(field, dmc_tables(), quads);
    Var acc = tape.constant(0.0);
    int k = 0;
    for (const auto& v : tets.vertices)
        acc = acc + std::sin(0.1 * ++k) * (v.x + 0.5 * v.y - 0.25 * v.z);
    tape.backward(acc);

    // spot-check gradients by central differences
    Rng rng(5);
    double h = 1e-6;
    for (int probe = 0; probe < 12; ++probe) {
        size_t i = rng.uniform_index(g.sdf.size());
        if (std::fabs(g.sdf[i]) < 10 * h) continue;
        ScalarGrid gp = g;
        gp.sdf[i] += h;
        double fp = forward(gp, p);
        gp.sdf[i] -= 2 * h;
        double fm = forward(gp, p);
        double fd = (fp - fm) / (2 * h);
        double an = tape.grad(rec.sdf_base + (int32_t)i);
        CHECK(std::fabs(an - fd) < 1e-4 * std::max(1.0, std::fabs(fd)));
    }
    for (int probe = 0; probe < 8; ++probe) {
        size_t i = rng.uniform_index(p.gamma_raw.size());
        FlexParams pp = p;
        pp.gamma_raw[i] += h;
        double fp = forward(g, pp);
        pp.gamma_raw[i] -= 2 * h;
        double fm = forward(g, pp);
        double fd = (fp - fm) / (2 * h);
        double an = tape.grad(rec.gamma_base + (int32_t)i);
        CHECK(std::fabs(an - fd) < 1e-4 * std::max(1.0, std::fabs(fd)));
    }
}
