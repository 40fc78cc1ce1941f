#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "flexicubes/grid.hpp"
#include "flexicubes/surface.hpp"
#include "flexicubes/tables.hpp"
#include "flexicubes/targets.hpp"

using namespace flexi;

namespace {

TriMesh sphere_mesh(int res, double r) {
    ScalarGrid g = ScalarGrid::make_domain(res);
    fill_sdf(g, [&](Vec3 p) { return norm(p) - r; });
    FlexParams fp = FlexParams::zeros(g.num_cells());
    auto pos = deformed_positions(g);
    return split_final(extract_quads(make_field(g, fp, pos), dmc_tables()));
}

void write_unit_cube_obj(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    // unit cube [0,1]^3, 12 triangles, outward
    const char* obj =
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nv 0 0 1\nv 1 0 1\nv 0 1 1\nv 1 1 1\n"
        "f 1 3 2\nf 2 3 4\n"
        "f 5 6 7\nf 6 8 7\n"
        "f 1 2 5\nf 2 6 5\n"
        "f 3 7 4\nf 4 7 8\n"
        "f 1 5 3\nf 3 5 7\n"
        "f 2 4 6\nf 4 8 6\n";
    std::fputs(obj, f);
    std::fclose(f);
}

}  // namespace

TEST_CASE("builtin sphere after normalization has bbox 1.8 and exact sdf") {
    auto s = make_builtin_target("sphere");
    Aabb b = s->bounds();
    CHECK(b.extent().x == doctest::Approx(1.8).epsilon(1e-12));
    CHECK(s->sdf({0, 0, 0}) == doctest::Approx(-0.9).epsilon(1e-12));
    CHECK(s->sdf({0.9, 0, 0}) == doctest::Approx(0.0).epsilon(1e-12));
    Vec3 cp = s->closest_point({2, 0, 0});
    CHECK(cp.x == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("every builtin target is constructible and self-consistent") {
    for (const char* name : {"sphere", "box", "torus", "boxminussphere", "wedges"}) {
        auto t = make_builtin_target(name);
        Aabb b = t->bounds();
        Vec3 e = b.extent();
        double longest = std::max(e.x, std::max(e.y, e.z));
        CHECK(longest == doctest::Approx(1.8).epsilon(1e-9));
        Rng rng(7);
        std::vector<Vec3> pts, nrm;
        t->sample_surface(rng, 200, pts, nrm);
        REQUIRE(pts.size() == 200);
        for (const Vec3& p : pts) {
            CHECK(std::fabs(t->sdf(p)) < 5e-2);  // composite sdfs are approximate near seams
            CHECK(p.x > -1.0);
            CHECK(p.x < 1.0);
        }
        // closest-point pull-back lands on the surface
        Vec3 q = t->closest_point({0.8, 0.77, -0.5});
        CHECK(std::fabs(t->sdf(q)) < 1e-6);
    }
}

TEST_CASE("rotation is applied before normalization") {
    auto plain = make_builtin_target("box");
    auto rot = make_builtin_target("box", {22.5, 22.5, 0});
    // rotated cube normalized back to a 1.8 bounding box
    Aabb b = rot->bounds();
    Vec3 e = b.extent();
    CHECK(std::max(e.x, std::max(e.y, e.z)) == doctest::Approx(1.8).epsilon(1e-9));
    // but the shapes differ
    int differs = 0;
    Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        Vec3 p = rng.uniform_in_box({-0.9, -0.9, -0.9}, {0.9, 0.9, 0.9});
        if ((plain->sdf(p) < 0) != (rot->sdf(p) < 0)) ++differs;
    }
    CHECK(differs > 0);
}

TEST_CASE("unit cube obj normalizes to 1.8 on all sides") {
    write_unit_cube_obj("/tmp/flexi_cube.obj");
    auto t = load_target_mesh("/tmp/flexi_cube.obj");
    Aabb b = t->bounds();
    CHECK(b.extent().x == doctest::Approx(1.8).epsilon(1e-12));
    CHECK(b.extent().y == doctest::Approx(1.8).epsilon(1e-12));
    CHECK(b.extent().z == doctest::Approx(1.8).epsilon(1e-12));
    CHECK(b.center().x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(t->watertight());
    CHECK(t->sdf({0, 0, 0}) < 0);
    CHECK(t->sdf({1.5, 0, 0}) > 0);
}

TEST_CASE("already-normalized mesh is unchanged by normalization") {
    TriMesh m = sphere_mesh(12, 0.5);
    // normalize once
    auto t1 = make_mesh_target(m, true);
    Aabb b1 = t1->bounds();
    // scale the raw mesh to the normalized frame and normalize again
    Vec3 e = b1.extent();
    double longest = std::max(e.x, std::max(e.y, e.z));
    CHECK(longest == doctest::Approx(1.8).epsilon(1e-9));
    // feeding an exactly normalized mesh back in changes nothing
    TriMesh m2 = m;
    {
        Aabb raw;
        for (const Vec3& v : m.vertices) raw.expand(v);
        Vec3 c = raw.center();
        double s = 1.8 / std::max(raw.extent().x,
                                  std::max(raw.extent().y, raw.extent().z));
        for (Vec3& v : m2.vertices) v = (v - c) * s;
    }
    auto t2 = make_mesh_target(m2, true);
    Rng rng(12);
    for (int i = 0; i < 50; ++i) {
        Vec3 p = rng.uniform_in_box({-1, -1, -1}, {1, 1, 1});
        CHECK(t1->sdf(p) == doctest::Approx(t2->sdf(p)).epsilon(1e-9));
    }
}

TEST_CASE("mesh target signs agree with ray parity on random points") {
    TriMesh m = sphere_mesh(16, 0.5);
    auto t = make_mesh_target(m, false);
    TriBvh bvh(m.vertices, m.tris);
    CHECK(sign_parity_mismatches(*t, bvh, 1000, 77) == 0);
}

TEST_CASE("target loading failure modes") {
    CHECK_THROWS(load_target_mesh("/nonexistent/file.obj"));
    CHECK_THROWS(make_builtin_target("noshape"));
    CHECK_THROWS(resolve_target("/nonexistent/file.obj"));
}

TEST_CASE("resolve_target dispatches builtin prefix") {
    auto t = resolve_target("builtin:torus");
    CHECK(t->describe().find("torus") != std::string::npos);
}
