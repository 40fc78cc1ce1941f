#include "flexicubes/diff.hpp"

#include <cmath>

#include "flexicubes/tables.hpp"
#include "json.hpp"

namespace flexi {

SceneRec record_scene(Tape& tape, const ScalarGrid& g, const FlexParams& p) {
    SceneRec rec;
    size_t nv = g.num_vertices();

    rec.sdf_base = tape.alloc_params(g.sdf);
    std::vector<double> deform_flat(3 * nv);
    for (size_t i = 0; i < nv; ++i) {
        deform_flat[3 * i + 0] = g.deform_raw[i].x;
        deform_flat[3 * i + 1] = g.deform_raw[i].y;
        deform_flat[3 * i + 2] = g.deform_raw[i].z;
    }
    rec.deform_base = tape.alloc_params(deform_flat);
    rec.alpha_base = tape.alloc_params(p.alpha_raw);
    rec.beta_base = tape.alloc_params(p.beta_raw);
    rec.gamma_base = tape.alloc_params(p.gamma_raw);

    rec.sdf.resize(nv);
    for (size_t i = 0; i < nv; ++i) rec.sdf[i] = Var{&tape, rec.sdf_base + (int32_t)i};
    rec.pos.resize(nv);
    for (int k = 0; k <= g.resolution.z; ++k)
        for (int j = 0; j <= g.resolution.y; ++j)
            for (int i = 0; i <= g.resolution.x; ++i) {
                size_t v = g.vidx(i, j, k);
                VarVec3 raw{Var{&tape, rec.deform_base + (int32_t)(3 * v + 0)},
                            Var{&tape, rec.deform_base + (int32_t)(3 * v + 1)},
                            Var{&tape, rec.deform_base + (int32_t)(3 * v + 2)}};
                rec.pos[v] = deformed_position(g.lattice_position(i, j, k), g.spacing, raw);
            }
    rec.alpha_raw.resize(p.alpha_raw.size());
    for (size_t i = 0; i < p.alpha_raw.size(); ++i)
        rec.alpha_raw[i] = Var{&tape, rec.alpha_base + (int32_t)i};
    rec.beta_raw.resize(p.beta_raw.size());
    for (size_t i = 0; i < p.beta_raw.size(); ++i)
        rec.beta_raw[i] = Var{&tape, rec.beta_base + (int32_t)i};
    rec.gamma_raw.resize(p.gamma_raw.size());
    for (size_t i = 0; i < p.gamma_raw.size(); ++i)
        rec.gamma_raw[i] = Var{&tape, rec.gamma_base + (int32_t)i};
    return rec;
}

SceneGrads collect_grads(const Tape& tape, const SceneRec& rec, size_t nverts, size_t ncells) {
    SceneGrads g;
    g.sdf.resize(nverts);
    g.deform.resize(3 * nverts);
    g.alpha.resize(8 * ncells);
    g.beta.resize(12 * ncells);
    g.gamma.resize(ncells);
    for (size_t i = 0; i < nverts; ++i) g.sdf[i] = tape.grad(rec.sdf_base + (int32_t)i);
    for (size_t i = 0; i < 3 * nverts; ++i) g.deform[i] = tape.grad(rec.deform_base + (int32_t)i);
    for (size_t i = 0; i < 8 * ncells; ++i) g.alpha[i] = tape.grad(rec.alpha_base + (int32_t)i);
    for (size_t i = 0; i < 12 * ncells; ++i) g.beta[i] = tape.grad(rec.beta_base + (int32_t)i);
    for (size_t i = 0; i < ncells; ++i) g.gamma[i] = tape.grad(rec.gamma_base + (int32_t)i);
    return g;
}

template <class T>
std::optional<T> objective_forward(const CellField<T>& field, const ObjectiveCtx& ctx,
                                   const TargetShape* target, const ObjectiveSpec& spec,
                                   size_t expected_tris) {
    QuadMeshT<T> quads = extract_quads(field, dmc_tables());
    TriMeshT<T> tris = split_training(quads);
    if (!ctx.empty_mesh && tris.tris.size() != expected_tris) return std::nullopt;

    switch (spec.term) {
        case ObjectiveTerm::Sign: return loss_sign(field.sdf, field.res);
        case ObjectiveTerm::Dev:
            return quads.empty() ? const_like(field.sdf[0], 0.0) : loss_dev(quads);
        case ObjectiveTerm::Edge:
            return quads.empty() ? const_like(field.sdf[0], 0.0) : reg_edge(tris);
        case ObjectiveTerm::Developable:
            return quads.empty() ? const_like(field.sdf[0], 0.0) : reg_developable(tris);
        case ObjectiveTerm::Sdf:
            return ctx.empty_mesh ? const_like(field.sdf[0], spec.cfg.empty_mesh_sentinel)
                                  : loss_sdf(ctx, tris, spec.cfg.empty_mesh_sentinel);
        case ObjectiveTerm::SurfacePoints:
            return ctx.empty_mesh ? const_like(field.sdf[0], spec.cfg.empty_mesh_sentinel)
                                  : loss_surface_points(ctx, tris, *target,
                                                        spec.cfg.empty_mesh_sentinel);
        case ObjectiveTerm::Total:
        default: {
            LossBreakdown<T> b =
                evaluate_losses(ctx, quads, tris, field.sdf, field.res, *target, spec.cfg,
                                spec.weights);
            return total_loss(b, spec.weights, spec.w_sign, spec.w_edge);
        }
    }
}

template std::optional<double> objective_forward<double>(const CellField<double>&,
                                                         const ObjectiveCtx&, const TargetShape*,
                                                         const ObjectiveSpec&, size_t);
template std::optional<Var> objective_forward<Var>(const CellField<Var>&, const ObjectiveCtx&,
                                                   const TargetShape*, const ObjectiveSpec&,
                                                   size_t);

namespace {

struct GroupRef {
    const char* name;
    std::vector<double>* values;   // raw parameter storage
    const std::vector<double>* grads;
};

}  // namespace

GradReport grad_check(const ScalarGrid& g, const FlexParams& p, const TargetShape* target,
                      const ObjectiveSpec& spec, const GradCheckConfig& cfg) {
    ScalarGrid grid = g;  // mutable copies for finite differences
    FlexParams params = p;
    size_t nverts = grid.num_vertices();
    size_t ncells = grid.num_cells();

    // frozen sampling structure from the base iterate
    auto base_pos = deformed_positions(grid);
    auto base_field = make_field(grid, params, base_pos);
    QuadMesh base_quads = extract_quads(base_field, dmc_tables());
    TriMesh base_tris = split_training(base_quads);
    ObjectiveCtx ctx;
    if (target && (spec.term == ObjectiveTerm::Total || spec.term == ObjectiveTerm::Sdf ||
                   spec.term == ObjectiveTerm::SurfacePoints))
        ctx = build_objective_ctx(base_tris, *target, spec.cfg, 0);
    else
        ctx.empty_mesh = base_tris.tris.empty();
    size_t expected_tris = base_tris.tris.size();

    // analytic gradients
    Tape tape;
    SceneRec rec = record_scene(tape, grid, params);
    auto loss = objective_forward<Var>(rec.field(grid.resolution), ctx, target, spec,
                                       expected_tris);
    if (!loss) throw std::runtime_error("grad_check: base forward failed");
    tape.backward(*loss);
    SceneGrads grads = collect_grads(tape, rec, nverts, ncells);

    std::vector<double> deform_flat(3 * nverts);
    for (size_t i = 0; i < nverts; ++i) {
        deform_flat[3 * i + 0] = grid.deform_raw[i].x;
        deform_flat[3 * i + 1] = grid.deform_raw[i].y;
        deform_flat[3 * i + 2] = grid.deform_raw[i].z;
    }

    GroupRef groups[5] = {{"sdf", &grid.sdf, &grads.sdf},
                          {"deform", &deform_flat, &grads.deform},
                          {"alpha", &params.alpha_raw, &grads.alpha},
                          {"beta", &params.beta_raw, &grads.beta},
                          {"gamma", &params.gamma_raw, &grads.gamma}};

    auto numeric_eval = [&]() -> std::optional<double> {
        for (size_t i = 0; i < nverts; ++i)
            grid.deform_raw[i] = {deform_flat[3 * i + 0], deform_flat[3 * i + 1],
                                  deform_flat[3 * i + 2]};
        auto pos = deformed_positions(grid);
        auto field = make_field(grid, params, pos);
        return objective_forward<double>(field, ctx, target, spec, expected_tris);
    };

    GradReport report;
    Rng rng(cfg.seed);
    for (auto& gr : groups) {
        GradReport::Group out;
        out.name = gr.name;
        double norm2_acc = 0;
        for (double v : *gr.grads) norm2_acc += v * v;
        out.grad_norm = std::sqrt(norm2_acc);

        size_t n = gr.values->size();
        if (n == 0) {
            report.groups.push_back(out);
            continue;
        }
        for (int trial = 0; trial < cfg.trials; ++trial) {
            for (int pick = 0; pick < cfg.per_group; ++pick) {
                size_t idx = (size_t)rng.uniform_index(n);
                // a perturbed sdf value must not cross zero: the extraction
                // topology is piecewise constant and the check only holds
                // within a piece
                if (gr.values == &grid.sdf &&
                    std::fabs((*gr.values)[idx]) < 10.0 * cfg.step) {
                    ++out.skipped;
                    continue;
                }
                double saved = (*gr.values)[idx];
                (*gr.values)[idx] = saved + cfg.step;
                auto fp = numeric_eval();
                (*gr.values)[idx] = saved - cfg.step;
                auto fm = numeric_eval();
                (*gr.values)[idx] = saved;
                if (!fp || !fm) {
                    ++out.skipped;
                    continue;
                }
                double fd = (*fp - *fm) / (2.0 * cfg.step);
                double an = (*gr.grads)[idx];
                double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-8});
                out.max_rel_err = std::max(out.max_rel_err, rel);
                ++out.checked;
            }
        }
        report.max_rel_err = std::max(report.max_rel_err, out.max_rel_err);
        report.groups.push_back(out);
    }
    // restore deform (paranoia; grid is a local copy anyway)
    return report;
}

std::string GradReport::to_json() const {
    nlohmann::ordered_json j;
    j["max_rel_err"] = max_rel_err;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& g : groups) {
        nlohmann::ordered_json e;
        e["group"] = g.name;
        e["max_rel_err"] = g.max_rel_err;
        e["grad_norm"] = g.grad_norm;
        e["checked"] = g.checked;
        e["skipped"] = g.skipped;
        arr.push_back(std::move(e));
    }
    j["groups"] = std::move(arr);
    return j.dump(2);
}

}  // namespace flexi
