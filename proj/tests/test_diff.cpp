#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "flexicubes/diff.hpp"
#include "flexicubes/rng.hpp"
#include "flexicubes/tables.hpp"

using namespace flexi;

namespace {

ScalarGrid random_grid(Rng& rng, int res, double lo = -0.8, double hi = 0.8) {
    ScalarGrid g = ScalarGrid::make_domain(res);
    for (auto& s : g.sdf) s = rng.uniform(lo, hi);
    for (auto& d : g.deform_raw)
        d = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return g;
}

FlexParams random_params(Rng& rng, size_t ncells) {
    FlexParams p = FlexParams::zeros(ncells);
    for (auto& a : p.alpha_raw) a = rng.uniform(-0.5, 0.5);
    for (auto& b : p.beta_raw) b = rng.uniform(-0.5, 0.5);
    for (auto& c : p.gamma_raw) c = rng.uniform(-0.5, 0.5);
    return p;
}

}  // namespace

TEST_CASE("loss over a single sdf value is one-hot") {
    ScalarGrid g = ScalarGrid::make_domain(3);
    FlexParams p = FlexParams::zeros(g.num_cells());
    Tape tape;
    SceneRec rec = record_scene(tape, g, p);
    Var loss = rec.sdf[7];
    tape.backward(loss);
    SceneGrads grads = collect_grads(tape, rec, g.num_vertices(), g.num_cells());
    for (size_t i = 0; i < grads.sdf.size(); ++i) CHECK(grads.sdf[i] == (i == 7 ? 1.0 : 0.0));
    for (double v : grads.deform) CHECK(v == 0.0);
}

TEST_CASE("crossing derivative matches the closed form of the weighted interpolation") {
    // u(s_i) = (s_i a_i x_j - s_j a_j x_i) / (s_i a_i - s_j a_j), differentiate
    // the x component in s_i by hand:
    //   u_x = W x_j / (W - V)  with W = s_i a_i, V = s_j a_j, x_i = 0, x_j = 1
    //   du/ds_i = a_i * (-V) / (W - V)^2
    double si = -0.7, sj = 1.3, ai_raw = 0.2, aj_raw = -0.4;
    Tape tape;
    std::vector<double> params{si, sj, ai_raw, aj_raw};
    int32_t base = tape.alloc_params(params);
    Var vsi{&tape, base}, vsj{&tape, base + 1};
    Var vai = activated(Var{&tape, base + 2});
    Var vaj = activated(Var{&tape, base + 3});
    VarVec3 xi = make_varvec(tape, {0, 0, 0});
    VarVec3 xj = make_varvec(tape, {1, 0, 0});
    VarVec3 u = edge_crossing(xi, xj, vsi, vsj, vai, vaj);
    tape.backward(u.x);

    double ai = std::tanh(ai_raw) + 1, aj = std::tanh(aj_raw) + 1;
    double W = si * ai, V = sj * aj;
    double closed_dsi = ai * (-V) / ((W - V) * (W - V));
    double closed_dsj = aj * W / ((W - V) * (W - V));
    CHECK(tape.grad(base) == doctest::Approx(closed_dsi).epsilon(1e-12));
    CHECK(tape.grad(base + 1) == doctest::Approx(closed_dsj).epsilon(1e-12));
}

TEST_CASE("grad_check on individual terms") {
    Rng rng(41);
    auto tgt = make_builtin_target("sphere");
    GradCheckConfig gcc;
    gcc.seed = 77;
    gcc.per_group = 15;

    auto run_term = [&](ObjectiveTerm term, uint64_t seed) {
        Rng trng(seed);
        ScalarGrid g = random_grid(trng, 5);
        FlexParams p = random_params(trng, g.num_cells());
        ObjectiveSpec spec;
        spec.term = term;
        spec.cfg.n_sdf_samples = 120;
        spec.cfg.n_surface_samples = 120;
        spec.cfg.seed = seed;
        GradReport rep = grad_check(g, p, tgt.get(), spec, gcc);
        return rep;
    };

    CHECK(run_term(ObjectiveTerm::Dev, 1).max_rel_err < 1e-4);
    CHECK(run_term(ObjectiveTerm::Sign, 2).max_rel_err < 1e-4);
    CHECK(run_term(ObjectiveTerm::Sdf, 3).max_rel_err < 1e-4);
    CHECK(run_term(ObjectiveTerm::SurfacePoints, 4).max_rel_err < 1e-4);
    CHECK(run_term(ObjectiveTerm::Edge, 5).max_rel_err < 1e-4);
    CHECK(run_term(ObjectiveTerm::Developable, 6).max_rel_err < 2e-4);
}

TEST_CASE("grad_check on the full objective over random scenes") {
    auto tgt = make_builtin_target("sphere");
    GradCheckConfig gcc;
    gcc.per_group = 10;
    double worst = 0;
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng(100 + trial);
        ScalarGrid g = random_grid(rng, 5);
        FlexParams p = random_params(rng, g.num_cells());
        ObjectiveSpec spec;
        spec.cfg.n_sdf_samples = 100;
        spec.cfg.n_surface_samples = 100;
        spec.cfg.seed = 100 + trial;
        gcc.seed = 500 + trial;
        GradReport rep = grad_check(g, p, tgt.get(), spec, gcc);
        worst = std::max(worst, rep.max_rel_err);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("constant loss has zero gradients everywhere") {
    // an all-positive field contributes no sign-change edges and no mesh
    ScalarGrid g = ScalarGrid::make_domain(4);
    fill_sdf(g, [](Vec3) { return 0.5; });
    FlexParams p = FlexParams::zeros(g.num_cells());
    ObjectiveSpec spec;
    spec.term = ObjectiveTerm::Sign;
    GradCheckConfig gcc;
    GradReport rep = grad_check(g, p, nullptr, spec, gcc);
    CHECK(rep.max_rel_err == 0.0);
    for (const auto& grp : rep.groups) CHECK(grp.grad_norm == 0.0);
}

TEST_CASE("parameters far from the isosurface receive zero gradient") {
    ScalarGrid g = ScalarGrid::make_domain(8);
    fill_sdf(g, [](Vec3 p) { return norm(p) - 0.4; });
    FlexParams p = FlexParams::zeros(g.num_cells());
    auto tgt = make_builtin_target("sphere");

    Tape tape;
    SceneRec rec = record_scene(tape, g, p);
    ObjectiveSpec spec;
    spec.cfg.n_sdf_samples = 50;
    spec.cfg.n_surface_samples = 50;

    auto pos = deformed_positions(g);
    auto base_field = make_field(g, p, pos);
    TriMesh base = split_training(extract_quads(base_field, dmc_tables()));
    ObjectiveCtx ctx = build_objective_ctx(base, *tgt, spec.cfg, 0);
    auto loss = objective_forward<Var>(rec.field(g.resolution), ctx, tgt.get(), spec,
                                       base.tris.size());
    REQUIRE(loss.has_value());
    tape.backward(*loss);
    SceneGrads grads = collect_grads(tape, rec, g.num_vertices(), g.num_cells());

    // the corner cell of the domain carries no surface
    size_t corner_cell = g.cidx(0, 0, 0);
    for (int k = 0; k < 8; ++k) CHECK(grads.alpha[8 * corner_cell + k] == 0.0);
    for (int k = 0; k < 12; ++k) CHECK(grads.beta[12 * corner_cell + k] == 0.0);
    CHECK(grads.gamma[corner_cell] == 0.0);
}

TEST_CASE("small perturbations leave the recorded structure unchanged") {
    Rng rng(55);
    ScalarGrid g = random_grid(rng, 5);
    FlexParams p = random_params(rng, g.num_cells());
    auto pos = deformed_positions(g);
    QuadMesh base = extract_quads(make_field(g, p, pos), dmc_tables());

    // margin to the nearest sign flip
    double margin = 1e9;
    for (double s : g.sdf) margin = std::min(margin, std::fabs(s));
    double eps = margin * 0.5;
    for (auto& s : g.sdf) s += (s > 0 ? eps : -eps) * 0.5;
    auto pos2 = deformed_positions(g);
    QuadMesh moved = extract_quads(make_field(g, p, pos2), dmc_tables());
    REQUIRE(moved.num_vertices() == base.num_vertices());
    REQUIRE(moved.num_faces() == base.num_faces());
    for (size_t i = 0; i < base.faces.size(); ++i) CHECK(moved.faces[i] == base.faces[i]);
}

TEST_CASE("gradient report serializes to json") {
    Rng rng(66);
    ScalarGrid g = random_grid(rng, 4);
    FlexParams p = random_params(rng, g.num_cells());
    auto tgt = make_builtin_target("sphere");
    ObjectiveSpec spec;
    spec.cfg.n_sdf_samples = 40;
    spec.cfg.n_surface_samples = 40;
    GradCheckConfig gcc;
    gcc.per_group = 4;
    GradReport rep = grad_check(g, p, tgt.get(), spec, gcc);
    std::string j = rep.to_json();
    CHECK(j.find("max_rel_err") != std::string::npos);
    CHECK(j.find("\"group\": \"sdf\"") != std::string::npos);
    CHECK(j.find("gamma") != std::string::npos);
}
