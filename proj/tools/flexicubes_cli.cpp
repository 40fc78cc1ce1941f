#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "flexicubes/diff.hpp"
#include "flexicubes/meshcheck.hpp"
#include "flexicubes/octree.hpp"
#include "flexicubes/optimize.hpp"
#include "flexicubes/tables.hpp"
#include "flexicubes/tet.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace flexi;

namespace {

Vec3 parse_rotate(const std::string& s) {
    Vec3 r{0, 0, 0};
    if (s.empty()) return r;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &r.x, &r.y, &r.z) != 3)
        throw CLI::ValidationError("--rotate expects rx,ry,rz in degrees");
    return r;
}

uint64_t env_seed(uint64_t fallback) {
    const char* s = std::getenv("FLEXI_SEED");
    if (!s) return fallback;
    return std::strtoull(s, nullptr, 10);
}

void ensure_outdir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw std::runtime_error("cannot create output dir " + dir);
    // writability probe
    std::ofstream probe(dir + "/.write_probe");
    if (!probe) throw std::runtime_error("output dir not writable: " + dir);
    probe.close();
    fs::remove(dir + "/.write_probe", ec);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << text << "\n";
}

MetricsConfig desk_metrics(uint64_t seed, int samples) {
    MetricsConfig mc;
    mc.n_samples = samples;
    mc.seed = seed;
    return mc;
}

int run_fit(const FitConfig& cfg, const std::string& outdir, bool want_tet, double tet_threshold,
            int metric_samples, bool report_json) {
    ensure_outdir(outdir);
    FitConfig c = cfg;
    c.csv_path = outdir + "/loss.csv";
    c.checkpoint_path = outdir + "/final.ckpt";
    auto target = resolve_target(c.target_spec, c.target_rotate_deg);
    FitResult res = fit(c, target.get());
    if (res.exit_code != 0) {
        std::cerr << "fit aborted: " << res.abort_reason << "\n";
        return res.exit_code;
    }
    save_obj(res.mesh_final, outdir + "/mesh.obj");

    if (want_tet && !c.mc_baseline) {
        auto pos = deformed_positions(res.state.grid);
        auto field = make_field(res.state.grid, res.state.params, pos);
        TetMesh tets = extract_tets(field, dmc_tables(), res.quads);
        tets = filter_thin_tets(tets, tet_threshold);
        save_tet(tets, outdir + "/mesh.tet");
    }

    MetricReport rep = metrics(res.mesh_final, *target, desk_metrics(c.seed, metric_samples));
    write_text(outdir + "/metrics.json", rep.to_json());
    if (report_json) std::cout << rep.to_json() << "\n";
    std::cout << "fit done: " << res.mesh_final.tris.size() << " triangles, cd=" << rep.cd
              << " written to " << outdir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FlexiCubes: differentiable isosurface extraction and mesh fitting"};
    app.require_subcommand(1);

    std::string target = "builtin:sphere";
    std::string rotate_str;
    std::string outdir = "out";
    int res = 32;
    int iters = 1000;
    uint64_t seed = 1;
    int threads = 1;
    bool report_json = false;

    // weight overrides
    LossWeights weights;
    double lr = 0.01;
    int phase2 = 0;

    auto add_common = [&](CLI::App* sub, bool with_fit_opts) {
        sub->add_option("--target", target, "builtin:<name> or path to an OBJ file");
        sub->add_option("--rotate", rotate_str, "target rotation rx,ry,rz in degrees (builtin)");
        sub->add_option("--res", res, "grid resolution (cells per axis)");
        sub->add_option("--seed", seed, "RNG seed (FLEXI_SEED env overrides)");
        sub->add_option("--out", outdir, "output directory");
        sub->add_option("--threads", threads, "worker threads for metrics scans");
        sub->add_flag("--report-json", report_json, "print the report JSON to stdout");
        if (with_fit_opts) {
            sub->add_option("--iters", iters, "optimization iterations");
            sub->add_option("--lr", lr, "learning rate");
            sub->add_option("--w-mask", weights.w_mask, "surface-point loss weight (mask role)");
            sub->add_option("--w-depth", weights.w_depth,
                            "surface-point loss weight (depth role)");
            sub->add_option("--w-sdf", weights.w_sdf, "sdf loss weight");
            sub->add_option("--w-dev", weights.w_dev, "deviation regularizer weight");
            sub->add_option("--w-sign-start", weights.w_sign_start, "sign loss initial weight");
            sub->add_option("--w-sign-end", weights.w_sign_end, "sign loss final weight");
            sub->add_option("--w-developable", weights.w_developable,
                            "developability regularizer weight");
            sub->add_option("--phase2-steps", phase2,
                            "equilateral-edge phase steps (weight ramps 0 to 100)");
        }
    };

    auto* fit_cmd = app.add_subcommand("fit", "optimize a mesh against a target shape");
    bool fit_tet = false;
    int octree_depth = 0;
    double tet_threshold = 2e-7;
    add_common(fit_cmd, true);
    fit_cmd->add_flag("--tet", fit_tet, "also export a tetrahedral mesh");
    fit_cmd->add_option("--octree", octree_depth, "adaptive octree fitting with this many levels");
    fit_cmd->add_option("--tet-threshold", tet_threshold, "thin-tet volume threshold");

    auto* extract_cmd = app.add_subcommand("extract", "one-shot extraction of a target's SDF");
    bool final_split = false;
    bool extract_tet = false;
    add_common(extract_cmd, false);
    extract_cmd->add_flag("--final-split", final_split, "diagonal split instead of midpoints");
    extract_cmd->add_flag("--tet", extract_tet, "also export the tetrahedral mesh");

    auto* bench_cmd = app.add_subcommand("bench", "paired FlexiCubes vs MC-baseline fitting");
    add_common(bench_cmd, true);

    auto* grad_cmd = app.add_subcommand("gradcheck", "verify gradients by finite differences");
    int gc_trials = 10;
    double gc_step = 1e-5;
    double gc_tol = 1e-4;
    add_common(grad_cmd, false);
    grad_cmd->add_option("--trials", gc_trials, "random scenes to check");
    grad_cmd->add_option("--step", gc_step, "central difference step");
    grad_cmd->add_option("--tol", gc_tol, "max relative error tolerance");

    auto* tet_cmd = app.add_subcommand("tet", "extract a tetrahedral mesh of a target's SDF");
    add_common(tet_cmd, false);
    tet_cmd->add_option("--tet-threshold", tet_threshold, "thin-tet volume threshold");

    auto* metrics_cmd = app.add_subcommand("metrics", "mesh-vs-target evaluation metrics");
    std::string mesh_path;
    int metric_samples = 100000;
    add_common(metrics_cmd, false);
    metrics_cmd->add_option("--mesh", mesh_path, "mesh OBJ to evaluate")->required();
    metrics_cmd->add_option("--samples", metric_samples, "point samples per surface");

    CLI11_PARSE(app, argc, argv);

    try {
        seed = env_seed(seed);
        Vec3 rotate = parse_rotate(rotate_str);
        if (octree_depth > 0 && (fit_tet || extract_tet))
            throw std::runtime_error("--octree excludes --tet");

        if (app.got_subcommand(fit_cmd)) {
            FitConfig cfg;
            cfg.resolution = res;
            cfg.iterations = iters;
            cfg.learning_rate = lr;
            cfg.weights = weights;
            cfg.seed = seed;
            cfg.objective.seed = seed;
            cfg.target_spec = target;
            cfg.target_rotate_deg = rotate;
            cfg.phase2_steps = phase2;
            if (octree_depth > 0) {
                ensure_outdir(outdir);
                auto tgt = resolve_target(target, rotate);
                OctreeFitConfig ocfg;
                ocfg.base = cfg;
                ocfg.extra_depth = octree_depth;
                auto ores = fit_octree(ocfg, *tgt);
                save_obj(ores.mesh_final, outdir + "/mesh.obj");
                MetricReport rep =
                    metrics(ores.mesh_final, *tgt, desk_metrics(seed, metric_samples));
                write_text(outdir + "/metrics.json", rep.to_json());
                if (report_json) std::cout << rep.to_json() << "\n";
                std::cout << "octree fit done: " << ores.mesh_final.tris.size()
                          << " triangles\n";
                return 0;
            }
            return run_fit(cfg, outdir, fit_tet, tet_threshold, metric_samples, report_json);
        }

        if (app.got_subcommand(extract_cmd) || app.got_subcommand(tet_cmd)) {
            ensure_outdir(outdir);
            auto tgt = resolve_target(target, rotate);
            ScalarGrid g = ScalarGrid::make_domain(res);
            fill_sdf(g, [&](Vec3 p) { return tgt->sdf(p); });
            FlexParams p = FlexParams::zeros(g.num_cells());
            auto pos = deformed_positions(g);
            auto field = make_field(g, p, pos);
            QuadMesh quads = extract_quads(field, dmc_tables());
            TriMesh mesh = final_split || app.got_subcommand(tet_cmd) ? split_final(quads)
                                                                      : split_training(quads);
            save_obj(mesh, outdir + "/mesh.obj");
            if (extract_tet || app.got_subcommand(tet_cmd)) {
                TetMesh tets = extract_tets(field, dmc_tables(), quads);
                tets = filter_thin_tets(tets, tet_threshold);
                save_tet(tets, outdir + "/mesh.tet");
                std::cout << "tets: " << tets.num_tets() << "\n";
            }
            TopoReport topo = check_topology(mesh);
            write_text(outdir + "/topology.json", topo.to_json());
            if (report_json) std::cout << topo.to_json() << "\n";
            std::cout << "extracted " << mesh.tris.size() << " triangles\n";
            return 0;
        }

        if (app.got_subcommand(bench_cmd)) {
            ensure_outdir(outdir);
            auto tgt = resolve_target(target, rotate);
            FitConfig cfg;
            cfg.resolution = res;
            cfg.iterations = iters;
            cfg.learning_rate = lr;
            cfg.weights = weights;
            cfg.seed = seed;
            cfg.objective.seed = seed;
            cfg.target_spec = target;
            cfg.target_rotate_deg = rotate;
            cfg.csv_path = outdir + "/loss_flexicubes.csv";
            FitResult flexi_res = fit(cfg, tgt.get());

            FitConfig mc_cfg = cfg;
            mc_cfg.mc_baseline = true;
            mc_cfg.csv_path = outdir + "/loss_mc.csv";
            FitResult mc_res = fit(mc_cfg, tgt.get());

            if (flexi_res.exit_code || mc_res.exit_code) {
                std::cerr << "bench aborted: " << flexi_res.abort_reason << mc_res.abort_reason
                          << "\n";
                return 3;
            }
            save_obj(flexi_res.mesh_final, outdir + "/flexicubes.obj");
            save_obj(mc_res.mesh_final, outdir + "/mc.obj");
            MetricsConfig mcfg = desk_metrics(seed, metric_samples);
            nlohmann::ordered_json j;
            j["flexicubes"] = nlohmann::ordered_json::parse(
                metrics(flexi_res.mesh_final, *tgt, mcfg).to_json());
            j["mc"] = nlohmann::ordered_json::parse(metrics(mc_res.mesh_final, *tgt, mcfg).to_json());
            write_text(outdir + "/bench.json", j.dump(2));
            if (report_json) std::cout << j.dump(2) << "\n";
            std::cout << "bench: flexicubes cd=" << j["flexicubes"]["cd"].get<double>()
                      << " mc cd=" << j["mc"]["cd"].get<double>() << "\n";
            return 0;
        }

        if (app.got_subcommand(grad_cmd)) {
            ensure_outdir(outdir);
            Rng rng(seed);
            ObjectiveSpec spec;
            spec.cfg.seed = seed;
            spec.cfg.n_sdf_samples = 200;
            spec.cfg.n_surface_samples = 200;
            auto tgt = make_builtin_target("sphere");
            double worst = 0;
            std::string worst_json;
            for (int trial = 0; trial < gc_trials; ++trial) {
                ScalarGrid g = ScalarGrid::make_domain(res);
                for (auto& s : g.sdf) s = rng.uniform(-0.8, 0.8);
                for (auto& d : g.deform_raw) d = {rng.uniform(-1, 1), rng.uniform(-1, 1),
                                                  rng.uniform(-1, 1)};
                FlexParams p = FlexParams::zeros(g.num_cells());
                for (auto& a : p.alpha_raw) a = rng.uniform(-0.5, 0.5);
                for (auto& b : p.beta_raw) b = rng.uniform(-0.5, 0.5);
                for (auto& c : p.gamma_raw) c = rng.uniform(-0.5, 0.5);
                GradCheckConfig gcc;
                gcc.step = gc_step;
                gcc.seed = seed + trial;
                GradReport rep = grad_check(g, p, tgt.get(), spec, gcc);
                if (rep.max_rel_err > worst) {
                    worst = rep.max_rel_err;
                    worst_json = rep.to_json();
                }
            }
            write_text(outdir + "/gradcheck.json", worst_json);
            if (report_json) std::cout << worst_json << "\n";
            std::cout << "gradcheck: max rel err " << worst << " over " << gc_trials
                      << " trials (tol " << gc_tol << ")\n";
            return worst < gc_tol ? 0 : 1;
        }

        if (app.got_subcommand(metrics_cmd)) {
            ensure_outdir(outdir);
            auto tgt = resolve_target(target, rotate);
            TriMesh mesh = load_obj(mesh_path);
            MetricReport rep = metrics(mesh, *tgt, desk_metrics(seed, metric_samples));
            write_text(outdir + "/metrics.json", rep.to_json());
            if (report_json) std::cout << rep.to_json() << "\n";
            std::cout << "cd=" << rep.cd << " f1=" << rep.f1 << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
