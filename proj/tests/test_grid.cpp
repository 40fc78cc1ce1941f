#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flexicubes/grid.hpp"
#include "flexicubes/meshcheck.hpp"
#include "flexicubes/rng.hpp"

using namespace flexi;

TEST_CASE("zero deformation reproduces the lattice") {
    ScalarGrid g = ScalarGrid::make_domain(4);
    auto pos = deformed_positions(g);
    for (int k = 0; k <= 4; ++k)
        for (int j = 0; j <= 4; ++j)
            for (int i = 0; i <= 4; ++i) {
                Vec3 p = pos[g.vidx(i, j, k)];
                Vec3 l = g.lattice_position(i, j, k);
                CHECK(p.x == l.x);
                CHECK(p.y == l.y);
                CHECK(p.z == l.z);
            }
}

TEST_CASE("displacement saturates strictly below half the spacing") {
    ScalarGrid g = ScalarGrid::make({1, 1, 1}, {0, 0, 0}, 1.0);
    g.deform_raw[0] = {1e9, -1e9, 50.0};
    auto pos = deformed_positions(g);
    CHECK(pos[0].x < 0.5);
    CHECK(pos[0].x > 0.5 - 1e-9);
    CHECK(pos[0].y > -0.5);
    CHECK(pos[0].z < 0.5);
}

TEST_CASE("direct evaluation of the clamp mapping") {
    ScalarGrid g = ScalarGrid::make({1, 1, 1}, {0, 0, 0}, 1.0);
    g.deform_raw[0] = {1.0, 0.0, 0.0};
    auto pos = deformed_positions(g);
    CHECK(pos[0].x == doctest::Approx(0.5 * std::tanh(1.0)).epsilon(1e-12));
    CHECK(std::fabs(pos[0].x - 0.3808) < 1e-4);
}

TEST_CASE("deformation bound holds for arbitrary raw values") {
    Rng rng(3);
    ScalarGrid g = ScalarGrid::make_domain(3);
    for (int trial = 0; trial < 200; ++trial) {
        for (auto& d : g.deform_raw)
            d = {rng.uniform(-40, 40), rng.uniform(-40, 40), rng.uniform(-40, 40)};
        auto pos = deformed_positions(g);
        for (size_t v = 0; v < g.num_vertices(); ++v) {
            IVec3 c = g.vertex_coord(v);
            Vec3 l = g.lattice_position(c.x, c.y, c.z);
            for (int ax = 0; ax < 3; ++ax)
                CHECK(std::fabs(pos[v][ax] - l[ax]) < 0.5 * g.spacing - 1e-12);
        }
    }
}

TEST_CASE("deformed cells keep positive scaled jacobian at corners") {
    // half-spacing bound consequence, tested directly on random draws
    Rng rng(17);
    ScalarGrid g = ScalarGrid::make({1, 1, 1}, {0, 0, 0}, 1.0);
    int bad = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        for (auto& d : g.deform_raw)
            d = {rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)};
        auto pos = deformed_positions(g);
        // corners of the single cell in canonical order
        Vec3 c[8];
        for (int i = 0; i < 8; ++i) c[i] = pos[g.vidx(i & 1, (i >> 1) & 1, (i >> 2) & 1)];
        static const int ex[8] = {1, 0, 3, 2, 5, 4, 7, 6};
        static const int ey[8] = {2, 3, 0, 1, 6, 7, 4, 5};
        static const int ez[8] = {4, 5, 6, 7, 0, 1, 2, 3};
        for (int i = 0; i < 8; ++i) {
            Vec3 u = c[ex[i]] - c[i];
            Vec3 v = c[ey[i]] - c[i];
            Vec3 w = c[ez[i]] - c[i];
            double sign = ((i & 1) ? -1 : 1) * (((i >> 1) & 1) ? -1 : 1) *
                          (((i >> 2) & 1) ? -1 : 1);
            double jac = sign * dot(u, cross(v, w));
            if (jac <= 0) ++bad;
        }
    }
    CHECK(bad == 0);
}

TEST_CASE("json snapshot round-trips with documented field order") {
    ScalarGrid g = ScalarGrid::make_domain(2);
    Rng rng(5);
    for (auto& s : g.sdf) s = rng.uniform(-1, 1);
    for (auto& d : g.deform_raw) d = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    save_grid_json(g, "/tmp/flexi_grid.json");
    ScalarGrid h = load_grid_json("/tmp/flexi_grid.json");
    CHECK(h.resolution == g.resolution);
    CHECK(h.spacing == g.spacing);
    for (size_t i = 0; i < g.sdf.size(); ++i) CHECK(h.sdf[i] == g.sdf[i]);
    for (size_t i = 0; i < g.deform_raw.size(); ++i) CHECK(h.deform_raw[i].x == g.deform_raw[i].x);

    std::ifstream is("/tmp/flexi_grid.json");
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    size_t p_res = text.find("resolution");
    size_t p_origin = text.find("origin");
    size_t p_spacing = text.find("spacing");
    size_t p_sdf = text.find("\"sdf\"");
    size_t p_def = text.find("deform_raw");
    CHECK(p_res < p_origin);
    CHECK(p_origin < p_spacing);
    CHECK(p_spacing < p_sdf);
    CHECK(p_sdf < p_def);
}

TEST_CASE("binary snapshot is bit-exact") {
    ScalarGrid g = ScalarGrid::make_domain(3);
    Rng rng(6);
    for (auto& s : g.sdf) s = rng.normal();
    for (auto& d : g.deform_raw) d = {rng.normal(), rng.normal(), rng.normal()};
    std::stringstream ss;
    save_grid_binary(g, ss);
    ScalarGrid h = load_grid_binary(ss);
    for (size_t i = 0; i < g.sdf.size(); ++i) CHECK(h.sdf[i] == g.sdf[i]);
    for (size_t i = 0; i < g.deform_raw.size(); ++i) {
        CHECK(h.deform_raw[i].x == g.deform_raw[i].x);
        CHECK(h.deform_raw[i].y == g.deform_raw[i].y);
        CHECK(h.deform_raw[i].z == g.deform_raw[i].z);
    }
}

TEST_CASE("validation rejects broken grids") {
    ScalarGrid g = ScalarGrid::make_domain(2);
    g.sdf[0] = std::nan("");
    CHECK_THROWS(g.validate());
    ScalarGrid h = ScalarGrid::make_domain(2);
    h.sdf.pop_back();
    CHECK_THROWS(h.validate());
    ScalarGrid k = ScalarGrid::make_domain(2);
    k.spacing = 0;
    CHECK_THROWS(k.validate());
}
