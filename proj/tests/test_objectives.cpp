#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "flexicubes/grid.hpp"
#include "flexicubes/objectives.hpp"
#include "flexicubes/rng.hpp"
#include "flexicubes/surface.hpp"
#include "flexicubes/tables.hpp"

using namespace flexi;

namespace {

QuadMesh single_vertex_mesh(Vec3 v, std::vector<Vec3> crossings) {
    QuadMesh q;
    DualVertexT<double> dv;
    dv.pos = v;
    dv.cell = 0;
    dv.crossings = std::move(crossings);
    q.vertices.push_back(dv);
    return q;
}

TriMesh plane_mesh(double z, double size) {
    TriMesh m;
    m.vertices = {{-size, -size, z}, {size, -size, z}, {size, size, z}, {-size, size, z}};
    m.midpoint_flag.assign(4, 0);
    m.vertex_cell.assign(4, -1);
    m.tris = {{0, 1, 2}, {0, 2, 3}};
    return m;
}

}  // namespace

TEST_CASE("deviation loss: constant distances vanish, {1,3} gives MAD 1") {
    QuadMesh regular = single_vertex_mesh({0, 0, 0}, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    CHECK(loss_dev(regular) == doctest::Approx(0.0).epsilon(1e-12));

    QuadMesh uneven = single_vertex_mesh({0, 0, 0}, {{1, 0, 0}, {3, 0, 0}});
    CHECK(loss_dev(uneven) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("deviation loss is homogeneous of degree one") {
    Rng rng(3);
    std::vector<Vec3> cr;
    for (int i = 0; i < 5; ++i)
        cr.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    QuadMesh a = single_vertex_mesh({0.1, -0.2, 0.05}, cr);
    double base = loss_dev(a);
    double c = 3.7;
    for (auto& u : a.vertices[0].crossings) u = c * u;
    a.vertices[0].pos = c * a.vertices[0].pos;
    CHECK(loss_dev(a) == doctest::Approx(c * base).epsilon(1e-9));
}

TEST_CASE("sign loss on grid edges") {
    SUBCASE("uniform sign contributes nothing") {
        ScalarGrid g = ScalarGrid::make_domain(3);
        fill_sdf(g, [](Vec3) { return 0.7; });
        CHECK(loss_sign<double>(g.sdf, g.resolution) == 0.0);
    }
    SUBCASE("zero-against-positive edge gives ln 2 in one orientation") {
        ScalarGrid g = ScalarGrid::make({1, 1, 1}, {0, 0, 0}, 1.0);
        fill_sdf(g, [](Vec3) { return 2.0; });
        g.sdf[g.vidx(0, 0, 0)] = 0.0;
        // the edge (0,0,0)-(1,0,0) plus two more edges incident to the zero
        // vertex change sign(0) vs sign(+)
        // orientation a->b: H(sigmoid(0), 1) = ln 2; b->a: softplus(2)
        double expected_edge = std::log(2.0) + softplus(2.0);
        CHECK(loss_sign<double>(g.sdf, g.resolution) ==
              doctest::Approx(3 * expected_edge).epsilon(1e-12));
    }
    SUBCASE("loss decreases as the negative side deepens") {
        ScalarGrid g = ScalarGrid::make({1, 1, 1}, {0, 0, 0}, 1.0);
        double prev = 1e300;
        for (double mag : {0.1, 0.5, 1.0, 2.0, 4.0}) {
            fill_sdf(g, [&](Vec3 p) { return p.x < 0.5 ? -mag : mag; });
            double l = loss_sign<double>(g.sdf, g.resolution);
            CHECK(l < prev);
            prev = l;
        }
    }
}

TEST_CASE("surface-point loss on unit-offset planes") {
    TriMesh pred = plane_mesh(1.0, 40.0);
    TriMesh gt_mesh = plane_mesh(0.0, 40.0);
    auto target = make_mesh_target(gt_mesh, /*normalize=*/false);
    ObjectiveConfig cfg;
    cfg.n_surface_samples = 400;
    cfg.n_sdf_samples = 1;
    ObjectiveCtx ctx = build_objective_ctx(pred, *target, cfg, 0);
    double l = loss_surface_points(ctx, pred, *target, cfg.empty_mesh_sentinel);
    CHECK(l == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("surface-point loss vanishes for identical meshes") {
    ScalarGrid g = ScalarGrid::make_domain(12);
    fill_sdf(g, [](Vec3 p) { return norm(p) - 0.5; });
    FlexParams fp = FlexParams::zeros(g.num_cells());
    auto pos = deformed_positions(g);
    TriMesh mesh = split_final(extract_quads(make_field(g, fp, pos), dmc_tables()));
    auto target = make_mesh_target(mesh, false);
    ObjectiveConfig cfg;
    cfg.n_surface_samples = 200;
    cfg.n_sdf_samples = 1;
    ObjectiveCtx ctx = build_objective_ctx(mesh, *target, cfg, 0);
    double l = loss_surface_points(ctx, mesh, *target, cfg.empty_mesh_sentinel);
    CHECK(l < 1e-10);  // sampling noise floor
}

TEST_CASE("sdf loss against a shifted sphere") {
    // extracted stand-in: sphere of radius 0.4 as a mesh; target radius 0.5
    ScalarGrid g = ScalarGrid::make_domain(24);
    fill_sdf(g, [](Vec3 p) { return norm(p) - 0.4; });
    FlexParams fp = FlexParams::zeros(g.num_cells());
    auto pos = deformed_positions(g);
    TriMesh mesh = split_final(extract_quads(make_field(g, fp, pos), dmc_tables()));
    auto target = make_builtin_target("sphere");  // radius 0.5 after normalization

    ObjectiveConfig cfg;
    cfg.n_sdf_samples = 400;
    cfg.n_surface_samples = 1;
    ObjectiveCtx ctx = build_objective_ctx(mesh, *target, cfg, 0);
    // keep only samples on the outer shell where both sdfs are smooth
    ObjectiveCtx shell;
    shell.empty_mesh = false;
    for (auto& s : ctx.sdf_samples)
        if (norm(s.point) > 0.6 && norm(s.point) < 0.95) shell.sdf_samples.push_back(s);
    REQUIRE(shell.sdf_samples.size() > 20);
    double l = loss_sdf(shell, mesh, cfg.empty_mesh_sentinel);
    // each point is 0.1 closer to the smaller sphere: squared error 0.01
    CHECK(l == doctest::Approx(0.01).epsilon(0.05));
}

TEST_CASE("sdf loss sampling is deterministic under a fixed seed") {
    TriMesh mesh = plane_mesh(0.25, 2.0);
    auto target = make_builtin_target("sphere");
    ObjectiveConfig cfg;
    cfg.seed = 42;
    cfg.n_sdf_samples = 64;
    cfg.n_surface_samples = 64;
    ObjectiveCtx a = build_objective_ctx(mesh, *target, cfg, 7);
    ObjectiveCtx b = build_objective_ctx(mesh, *target, cfg, 7);
    REQUIRE(a.sdf_samples.size() == b.sdf_samples.size());
    for (size_t i = 0; i < a.sdf_samples.size(); ++i) {
        CHECK(a.sdf_samples[i].point.x == b.sdf_samples[i].point.x);
        CHECK(a.sdf_samples[i].sign == b.sdf_samples[i].sign);
    }
    ObjectiveCtx c = build_objective_ctx(mesh, *target, cfg, 8);
    bool all_equal = a.sdf_samples.size() == c.sdf_samples.size();
    if (all_equal)
        for (size_t i = 0; i < a.sdf_samples.size(); ++i)
            all_equal = all_equal && a.sdf_samples[i].point.x == c.sdf_samples[i].point.x;
    CHECK(!all_equal);  // different iterations draw different samples
}

TEST_CASE("equilateral-edge regularizer") {
    SUBCASE("all edges equal vanishes") {
        TriMesh m;
        m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3) / 2, 0}};
        m.midpoint_flag.assign(3, 0);
        m.vertex_cell.assign(3, -1);
        m.tris = {{0, 1, 2}};
        CHECK(reg_edge(m) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("edge lengths {1,1,4} give 6 in the formula core") {
        std::array<double, 3> t{1, 1, 4};
        std::array<double, 3> uniq{1, 1, 4};
        CHECK(reg_edge_lengths(std::span<const std::array<double, 3>>(&t, 1), uniq) ==
              doctest::Approx(6.0).epsilon(1e-12));
    }
    SUBCASE("geometric 3-4-5 triangle gives 2") {
        TriMesh m;
        m.vertices = {{0, 0, 0}, {3, 0, 0}, {3, 4, 0}};
        m.midpoint_flag.assign(3, 0);
        m.vertex_cell.assign(3, -1);
        m.tris = {{0, 1, 2}};
        CHECK(reg_edge(m) == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("scales quadratically") {
        TriMesh m;
        m.vertices = {{0, 0, 0}, {3, 0, 0}, {3, 4, 0}};
        m.midpoint_flag.assign(3, 0);
        m.vertex_cell.assign(3, -1);
        m.tris = {{0, 1, 2}};
        double base = reg_edge(m);
        for (auto& v : m.vertices) v = 2.5 * v;
        CHECK(reg_edge(m) == doctest::Approx(2.5 * 2.5 * base).epsilon(1e-12));
    }
}

TEST_CASE("developability energy") {
    SUBCASE("planar patch vanishes") {
        ScalarGrid g = ScalarGrid::make_domain(8);
        fill_sdf(g, [](Vec3 p) { return p.x - 0.1; });
        FlexParams fp = FlexParams::zeros(g.num_cells());
        auto pos = deformed_positions(g);
        TriMesh m = split_final(extract_quads(make_field(g, fp, pos), dmc_tables()));
        REQUIRE(!m.empty());
        CHECK(reg_developable(m) < 1e-20);
    }
    SUBCASE("cylinder is nearly developable, sphere is not") {
        ScalarGrid g = ScalarGrid::make_domain(24);
        fill_sdf(g, [](Vec3 p) {
            return std::sqrt(p.x * p.x + p.y * p.y) - 0.6;  // open cylinder
        });
        FlexParams fp = FlexParams::zeros(g.num_cells());
        auto pos = deformed_positions(g);
        TriMesh cyl = split_final(extract_quads(make_field(g, fp, pos), dmc_tables()));
        REQUIRE(!cyl.empty());
        size_t interior = 0;
        double cyl_energy = reg_developable(cyl);

        fill_sdf(g, [](Vec3 p) { return norm(p) - 0.6; });
        auto pos2 = deformed_positions(g);
        TriMesh sph = split_final(extract_quads(make_field(g, fp, pos2), dmc_tables()));
        double sph_energy = reg_developable(sph);
        (void)interior;
        // per-vertex scale: the sphere energy dwarfs the cylinder energy
        CHECK(cyl_energy / cyl.num_vertices() < 1e-6);
        CHECK(sph_energy / sph.num_vertices() > 1e-5);
        CHECK(sph_energy > 100 * cyl_energy);
    }
}

TEST_CASE("smallest eigenvalue of symmetric 3x3") {
    SUBCASE("diagonal") {
        CHECK(smallest_eig_sym3({3.0, 1.0, 2.0, 0.0, 0.0, 0.0}) == doctest::Approx(1.0));
    }
    SUBCASE("known spectrum") {
        // A = Q diag(1,2,4) Q^T for a Householder-ish Q; eigenvalues invariant
        // checked against the trace/det identities
        std::array<double, 6> a{2.0, 3.0, 2.0, 1.0, 0.5, 0.25};
        double l = smallest_eig_sym3(a);
        // residual of det(A - l I) should vanish
        double a00 = a[0] - l, a11 = a[1] - l, a22 = a[2] - l;
        double det = a00 * (a11 * a22 - a[5] * a[5]) - a[3] * (a[3] * a22 - a[5] * a[4]) +
                     a[4] * (a[3] * a[5] - a11 * a[4]);
        CHECK(std::fabs(det) < 1e-10);
    }
    SUBCASE("var overload carries the eigenvector outer product") {
        Tape t;
        std::array<double, 6> base{2.0, 3.0, 2.0, 1.0, 0.5, 0.25};
        std::vector<double> vals(base.begin(), base.end());
        int32_t b = t.alloc_params(vals);
        std::array<Var, 6> c;
        for (int i = 0; i < 6; ++i) c[i] = Var{&t, b + i};
        Var l = smallest_eig_sym3(c);
        t.backward(l);
        // finite differences on each entry
        for (int i = 0; i < 6; ++i) {
            auto pert = base;
            double h = 1e-7;
            pert[i] = base[i] + h;
            double lp = smallest_eig_sym3(pert);
            pert[i] = base[i] - h;
            double lm = smallest_eig_sym3(pert);
            CHECK(t.grad(b + i) == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
        }
    }
}

TEST_CASE("metrics on identical meshes") {
    ScalarGrid g = ScalarGrid::make_domain(12);
    fill_sdf(g, [](Vec3 p) { return norm(p) - 0.5; });
    FlexParams fp = FlexParams::zeros(g.num_cells());
    auto pos = deformed_positions(g);
    TriMesh mesh = split_final(extract_quads(make_field(g, fp, pos), dmc_tables()));
    auto target = make_mesh_target(mesh, false);
    MetricsConfig mc;
    mc.n_samples = 4000;
    MetricReport r = metrics(mesh, *target, mc);
    CHECK(r.cd < 5e-3);
    CHECK(r.f1 > 0.999);
    CHECK(r.in5 < 2.0);
    CHECK(r.si_pct == 0.0);
    CHECK(r.nv_pct == 0.0);
    CHECK(r.ne_pct == 0.0);
    std::string j = r.to_json();
    for (const char* key : {"\"cd\"", "\"f1\"", "\"ecd\"", "\"ef1\"", "\"in5\"",
                            "\"ar_gt4_pct\"", "\"rr_gt4_pct\"", "\"min_angle_lt10_pct\"",
                            "\"si_pct\"", "\"nv_pct\"", "\"ne_pct\""})
        CHECK(j.find(key) != std::string::npos);
}

TEST_CASE("triangle quality metrics on an equilateral triangulation") {
    TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3) / 2, 0}};
    m.midpoint_flag.assign(3, 0);
    m.vertex_cell.assign(3, -1);
    m.tris = {{0, 1, 2}};
    auto target = make_mesh_target(m, false);
    MetricsConfig mc;
    mc.n_samples = 500;
    mc.with_self_intersections = false;
    MetricReport r = metrics(m, *target, mc);
    CHECK(r.ar_gt4_pct == 0.0);
    CHECK(r.rr_gt4_pct == 0.0);
    CHECK(r.min_angle_lt10_pct == 0.0);
    CHECK(r.mean_min_angle == doctest::Approx(60.0).epsilon(1e-9));
    CHECK(r.mean_max_angle == doctest::Approx(60.0).epsilon(1e-9));
}

TEST_CASE("interpenetrating triangles count in si_pct") {
    TriMesh m;
    m.vertices = {{0, 0, 0},   {1, 0, 0},   {0, 1, 0},
                  {0.2, 0.2, -0.5}, {0.2, 0.3, 0.5}, {0.4, 0.2, 0.5}};
    m.midpoint_flag.assign(6, 0);
    m.vertex_cell.assign(6, -1);
    m.tris = {{0, 1, 2}, {3, 4, 5}};
    auto target = make_mesh_target(m, false);
    MetricsConfig mc;
    mc.n_samples = 200;
    MetricReport r = metrics(m, *target, mc);
    CHECK(r.si_pct == 100.0);  // both triangles participate
}

TEST_CASE("chamfer distance is symmetric in its inputs") {
    ScalarGrid g = ScalarGrid::make_domain(10);
    fill_sdf(g, [](Vec3 p) { return norm(p) - 0.5; });
    FlexParams fp = FlexParams::zeros(g.num_cells());
    auto pos = deformed_positions(g);
    TriMesh a = split_final(extract_quads(make_field(g, fp, pos), dmc_tables()));
    fill_sdf(g, [](Vec3 p) { return norm(p - Vec3{0.05, 0, 0}) - 0.45; });
    auto pos2 = deformed_positions(g);
    TriMesh b = split_final(extract_quads(make_field(g, fp, pos2), dmc_tables()));
    auto ta = make_mesh_target(a, false);
    auto tb = make_mesh_target(b, false);
    MetricsConfig mc;
    mc.n_samples = 4000;
    mc.with_self_intersections = false;
    double ab = metrics(a, *tb, mc).cd;
    double ba = metrics(b, *ta, mc).cd;
    CHECK(ab == doctest::Approx(ba).epsilon(0.15));
}
