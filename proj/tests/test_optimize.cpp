#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flexicubes/meshcheck.hpp"
#include "flexicubes/optimize.hpp"
#include "flexicubes/tables.hpp"

using namespace flexi;

namespace {

FitConfig small_config(int res, int iters, uint64_t seed) {
    FitConfig cfg;
    cfg.resolution = res;
    cfg.iterations = iters;
    cfg.seed = seed;
    cfg.objective.seed = seed;
    cfg.objective.n_sdf_samples = 250;
    cfg.objective.n_surface_samples = 250;
    return cfg;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream is(path);
    std::vector<std::string> lines;
    std::string l;
    while (std::getline(is, l)) lines.push_back(l);
    return lines;
}

double csv_field(const std::string& line, int idx) {
    std::stringstream ss(line);
    std::string tok;
    for (int i = 0; i <= idx; ++i) std::getline(ss, tok, ',');
    return std::stod(tok);
}

}  // namespace

TEST_CASE("sign weight schedule is linear from start to end") {
    LossWeights w;
    CHECK(w.w_sign_at(0, 100) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(w.w_sign_at(99, 100) == doctest::Approx(0.01).epsilon(1e-12));
    double mid = w.w_sign_at(50, 101);
    CHECK(mid == doctest::Approx(0.5 * (0.2 + 0.01)).epsilon(1e-12));
    // linearity: second differences vanish
    double a = w.w_sign_at(10, 100), b = w.w_sign_at(11, 100), c = w.w_sign_at(12, 100);
    CHECK(std::fabs((c - b) - (b - a)) < 1e-15);
}

TEST_CASE("fitting the initialization sphere improves or holds chamfer distance") {
    FitConfig cfg = small_config(12, 60, 11);
    auto target = make_builtin_target("sphere");

    // initial mesh
    FitState init = make_initial_state(cfg);
    auto pos = deformed_positions(init.grid);
    TriMesh mesh0 = split_final(
        extract_quads(make_field(init.grid, init.params, pos), dmc_tables()));
    MetricsConfig mc;
    mc.n_samples = 4000;
    mc.with_self_intersections = false;
    double cd0 = metrics(mesh0, *target, mc).cd;

    FitResult res = fit(cfg, target.get());
    REQUIRE(res.exit_code == 0);
    double cd1 = metrics(res.mesh_final, *target, mc).cd;
    CHECK(cd1 < cd0);

    // trailing average of the loss history is monotone enough: compare the
    // first and last thirds
    const auto& h = res.state.loss_history;
    REQUIRE(h.size() == 60);
    double first = 0, last = 0;
    for (int i = 0; i < 20; ++i) first += h[i];
    for (int i = 40; i < 60; ++i) last += h[i];
    CHECK(last < first);
}

TEST_CASE("identical seeds give bit-identical loss histories") {
    FitConfig cfg = small_config(8, 12, 21);
    auto target = make_builtin_target("sphere");
    FitResult a = fit(cfg, target.get());
    FitResult b = fit(cfg, target.get());
    REQUIRE(a.state.loss_history.size() == b.state.loss_history.size());
    for (size_t i = 0; i < a.state.loss_history.size(); ++i)
        CHECK(a.state.loss_history[i] == b.state.loss_history[i]);
    // and bit-identical final parameters
    for (size_t i = 0; i < a.state.grid.sdf.size(); ++i)
        CHECK(a.state.grid.sdf[i] == b.state.grid.sdf[i]);
}

TEST_CASE("parameter bounds hold at every iterate") {
    FitConfig cfg = small_config(8, 25, 31);
    auto target = make_builtin_target("torus");
    FitResult res = fit(cfg, target.get());
    REQUIRE(res.exit_code == 0);
    auto pos = deformed_positions(res.state.grid);
    for (size_t v = 0; v < res.state.grid.num_vertices(); ++v) {
        IVec3 c = res.state.grid.vertex_coord(v);
        Vec3 l = res.state.grid.lattice_position(c.x, c.y, c.z);
        for (int ax = 0; ax < 3; ++ax)
            CHECK(std::fabs(pos[v][ax] - l[ax]) < 0.5 * res.state.grid.spacing);
    }
    for (double a : res.state.params.alpha_raw) {
        double act = std::tanh(a) + 1;
        CHECK(act > 0);
        CHECK(act < 2);
    }
}

TEST_CASE("checkpoint round-trip: one step after reload is bitwise identical") {
    FitConfig cfg = small_config(8, 8, 41);
    auto target = make_builtin_target("sphere");

    FitState live = make_initial_state(cfg);
    Tape tape;
    for (int it = 0; it < 5; ++it)
        fit_step(live, cfg, *target, it, cfg.weights.w_sign_at(it, 8), 0.0, tape);
    save_checkpoint(live, "/tmp/flexi_ckpt.bin");
    FitState loaded = load_checkpoint("/tmp/flexi_ckpt.bin");

    // uninterrupted step
    StepInfo a = fit_step(live, cfg, *target, 5, cfg.weights.w_sign_at(5, 8), 0.0, tape);
    Tape tape2;
    StepInfo b = fit_step(loaded, cfg, *target, 5, cfg.weights.w_sign_at(5, 8), 0.0, tape2);

    CHECK(a.total == b.total);
    for (size_t i = 0; i < live.grid.sdf.size(); ++i) CHECK(live.grid.sdf[i] == loaded.grid.sdf[i]);
    for (size_t i = 0; i < live.params.gamma_raw.size(); ++i)
        CHECK(live.params.gamma_raw[i] == loaded.params.gamma_raw[i]);
    for (size_t i = 0; i < live.adam_sdf.m.size(); ++i)
        CHECK(live.adam_sdf.m[i] == loaded.adam_sdf.m[i]);
}

TEST_CASE("csv log carries the documented schedule and defaults") {
    FitConfig cfg = small_config(8, 10, 51);
    cfg.csv_path = "/tmp/flexi_loss.csv";
    auto target = make_builtin_target("sphere");
    FitResult res = fit(cfg, target.get());
    REQUIRE(res.exit_code == 0);
    auto lines = read_lines("/tmp/flexi_loss.csv");
    REQUIRE(lines.size() == 11);  // header + 10 rows
    CHECK(lines[0] == csv_header());
    // header columns: ... w_mask=7, w_depth=8, w_sdf=9, w_dev=10, w_sign=11, w_edge=12, lr=13
    CHECK(csv_field(lines[1], 7) == 1.0);
    CHECK(csv_field(lines[1], 8) == 10.0);
    CHECK(csv_field(lines[1], 9) == 2000.0);
    CHECK(csv_field(lines[1], 10) == 1.0);
    CHECK(csv_field(lines[1], 11) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(csv_field(lines[10], 11) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(csv_field(lines[1], 13) == doctest::Approx(0.01).epsilon(1e-15));
}

TEST_CASE("phase 2 ramps the edge weight from zero to its target") {
    FitConfig cfg = small_config(8, 6, 61);
    cfg.phase2_steps = 5;
    cfg.phase2_edge_weight = 100.0;
    cfg.csv_path = "/tmp/flexi_loss2.csv";
    auto target = make_builtin_target("sphere");
    FitResult res = fit(cfg, target.get());
    REQUIRE(res.exit_code == 0);
    auto lines = read_lines("/tmp/flexi_loss2.csv");
    REQUIRE(lines.size() == 1 + 6 + 5);
    CHECK(csv_field(lines[7], 12) == 0.0);            // first phase-2 row
    CHECK(csv_field(lines[11], 12) == 100.0);         // last phase-2 row
    CHECK(csv_field(lines[6], 12) == 0.0);            // phase 1 has no edge term
    // sign weight stays at its end value through phase 2
    CHECK(csv_field(lines[11], 11) == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("empty extraction aborts with a diagnostic") {
    FitConfig cfg = small_config(8, 50, 71);
    cfg.init_sphere_radius = -10.0;  // sdf positive everywhere, nothing to extract
    cfg.max_empty_iters = 5;
    auto target = make_builtin_target("sphere");
    FitResult res = fit(cfg, target.get());
    CHECK(res.exit_code == 3);
    CHECK(res.abort_reason.find("empty extraction") != std::string::npos);
}

TEST_CASE("mc baseline mode optimizes sdf and deformation only") {
    FitConfig cfg = small_config(8, 10, 81);
    cfg.mc_baseline = true;
    auto target = make_builtin_target("sphere");
    FitResult res = fit(cfg, target.get());
    REQUIRE(res.exit_code == 0);
    for (double a : res.state.params.alpha_raw) CHECK(a == 0.0);
    for (double b : res.state.params.beta_raw) CHECK(b == 0.0);
    for (double c : res.state.params.gamma_raw) CHECK(c == 0.0);
    // sdf moved
    FitState init = make_initial_state(cfg);
    bool sdf_moved = false;
    for (size_t i = 0; i < init.grid.sdf.size(); ++i)
        sdf_moved = sdf_moved || init.grid.sdf[i] != res.state.grid.sdf[i];
    CHECK(sdf_moved);
    CHECK(!res.mesh_final.empty());
}
