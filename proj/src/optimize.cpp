#include "flexicubes/optimize.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "flexicubes/tables.hpp"

namespace flexi {

FitState make_initial_state(const FitConfig& cfg) {
    FitState st;
    st.grid = ScalarGrid::make_domain(cfg.resolution);
    fill_sdf(st.grid, [&](Vec3 p) { return norm(p) - cfg.init_sphere_radius; });
    st.params = FlexParams::zeros(st.grid.num_cells());
    st.adam_sdf.init(st.grid.sdf.size());
    st.adam_deform.init(3 * st.grid.num_vertices());
    st.adam_alpha.init(st.params.alpha_raw.size());
    st.adam_beta.init(st.params.beta_raw.size());
    st.adam_gamma.init(st.params.gamma_raw.size());
    return st;
}

namespace {

void adam_update(std::vector<double>& x, std::span<const double> grad, AdamState& a,
                 const FitConfig& cfg) {
    a.t += 1;
    double c1 = 1.0 - std::pow(cfg.adam_beta1, (double)a.t);
    double c2 = 1.0 - std::pow(cfg.adam_beta2, (double)a.t);
    for (size_t i = 0; i < x.size(); ++i) {
        double g = grad[i];
        a.m[i] = cfg.adam_beta1 * a.m[i] + (1.0 - cfg.adam_beta1) * g;
        a.v[i] = cfg.adam_beta2 * a.v[i] + (1.0 - cfg.adam_beta2) * g * g;
        double mhat = a.m[i] / c1;
        double vhat = a.v[i] / c2;
        x[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
}

void adam_update_vec3(std::vector<Vec3>& x, std::span<const double> grad, AdamState& a,
                      const FitConfig& cfg) {
    a.t += 1;
    double c1 = 1.0 - std::pow(cfg.adam_beta1, (double)a.t);
    double c2 = 1.0 - std::pow(cfg.adam_beta2, (double)a.t);
    for (size_t i = 0; i < x.size(); ++i)
        for (int ax = 0; ax < 3; ++ax) {
            size_t f = 3 * i + ax;
            double g = grad[f];
            a.m[f] = cfg.adam_beta1 * a.m[f] + (1.0 - cfg.adam_beta1) * g;
            a.v[f] = cfg.adam_beta2 * a.v[f] + (1.0 - cfg.adam_beta2) * g * g;
            double mhat = a.m[f] / c1;
            double vhat = a.v[f] / c2;
            x[i][ax] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
}

}  // namespace

StepInfo fit_step(FitState& st, const FitConfig& cfg, const TargetShape& target,
                  int64_t sample_iter, double w_sign, double w_edge, Tape& tape) {
    StepInfo info;
    info.w_sign = w_sign;
    info.w_edge = w_edge;

    tape.clear();
    SceneRec rec = record_scene(tape, st.grid, st.params);
    CellField<Var> field = rec.field(st.grid.resolution);

    LossBreakdown<Var> terms;
    Var total{};
    if (cfg.mc_baseline) {
        TriMeshT<Var> tris = extract_mc_baseline(field, dmc_tables());
        TriMesh numeric = to_numeric(tris);
        info.empty_extraction = numeric.tris.empty();
        ObjectiveCtx ctx =
            build_objective_ctx(numeric, target, cfg.objective, (uint64_t)sample_iter);
        Var zero = tape.constant(0.0);
        terms.sign = loss_sign<Var>(field.sdf, field.res);
        terms.dev = zero;
        terms.edge = zero;
        terms.developable = zero;
        if (ctx.empty_mesh) {
            terms.surface_points = tape.constant(cfg.objective.empty_mesh_sentinel);
            terms.sdf = tape.constant(cfg.objective.empty_mesh_sentinel);
        } else {
            terms.sdf = loss_sdf(ctx, tris, cfg.objective.empty_mesh_sentinel);
            terms.surface_points =
                loss_surface_points(ctx, tris, target, cfg.objective.empty_mesh_sentinel);
            if (w_edge != 0) terms.edge = reg_edge(tris);
        }
        total = total_loss(terms, cfg.weights, w_sign, w_edge);
    } else {
        QuadMeshT<Var> quads = extract_quads(field, dmc_tables());
        TriMeshT<Var> tris = split_training(quads);
        TriMesh numeric = to_numeric(tris);
        info.empty_extraction = numeric.tris.empty();
        ObjectiveCtx ctx =
            build_objective_ctx(numeric, target, cfg.objective, (uint64_t)sample_iter);
        LossWeights w = cfg.weights;
        w.w_edge = w_edge;  // make evaluate_losses record the edge term
        terms = evaluate_losses<Var>(ctx, quads, tris, field.sdf, field.res, target,
                                     cfg.objective, w);
        total = total_loss(terms, cfg.weights, w_sign, w_edge);
    }

    info.terms.surface_points = value(terms.surface_points);
    info.terms.sdf = value(terms.sdf);
    info.terms.dev = value(terms.dev);
    info.terms.sign = value(terms.sign);
    info.terms.edge = value(terms.edge);
    info.terms.developable = value(terms.developable);
    info.total = value(total);

    if (!std::isfinite(info.total) || tape.has_nonfinite()) {
        info.nonfinite = true;
        return info;
    }

    tape.backward(total);
    SceneGrads grads = collect_grads(tape, rec, st.grid.num_vertices(), st.grid.num_cells());

    adam_update(st.grid.sdf, grads.sdf, st.adam_sdf, cfg);
    adam_update_vec3(st.grid.deform_raw, grads.deform, st.adam_deform, cfg);
    if (!cfg.mc_baseline) {
        adam_update(st.params.alpha_raw, grads.alpha, st.adam_alpha, cfg);
        adam_update(st.params.beta_raw, grads.beta, st.adam_beta, cfg);
        adam_update(st.params.gamma_raw, grads.gamma, st.adam_gamma, cfg);
    }

    st.iteration += 1;
    st.loss_history.push_back(info.total);
    return info;
}

const char* csv_header() {
    return "iter,loss_surface,loss_sdf,loss_dev,loss_sign,loss_edge,loss_developable,"
           "w_mask,w_depth,w_sdf,w_dev,w_sign,w_edge,lr,total";
}

namespace {
void csv_row(std::ostream& os, int64_t iter, const StepInfo& info, const FitConfig& cfg) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%g,%g,%g,%g,%.17g,%.17g,%g,%.17g",
                  (long long)iter, info.terms.surface_points, info.terms.sdf, info.terms.dev,
                  info.terms.sign, info.terms.edge, info.terms.developable, cfg.weights.w_mask,
                  cfg.weights.w_depth, cfg.weights.w_sdf, cfg.weights.w_dev, info.w_sign,
                  info.w_edge, cfg.learning_rate, info.total);
    os << buf << "\n";
}
}  // namespace

FitResult fit(const FitConfig& cfg, const TargetShape* target_override) {
    FitResult res;
    std::unique_ptr<TargetShape> owned;
    const TargetShape* target = target_override;
    if (!target) {
        owned = resolve_target(cfg.target_spec, cfg.target_rotate_deg);
        target = owned.get();
    }

    res.state = make_initial_state(cfg);
    std::ofstream csv;
    if (!cfg.csv_path.empty()) {
        csv.open(cfg.csv_path);
        if (!csv) throw std::runtime_error("fit: cannot write " + cfg.csv_path);
        csv << csv_header() << "\n";
    }

    Tape tape;
    int consecutive_empty = 0;
    int64_t total_iters = cfg.iterations;
    for (int64_t it = 0; it < total_iters; ++it) {
        double w_sign = cfg.weights.w_sign_at((int)it, (int)total_iters);
        StepInfo info = fit_step(res.state, cfg, *target, it, w_sign, 0.0, tape);
        if (csv.is_open()) csv_row(csv, it, info, cfg);
        if (info.nonfinite) {
            res.exit_code = 3;
            res.abort_reason = "non-finite loss at iteration " + std::to_string(it);
            break;
        }
        consecutive_empty = info.empty_extraction ? consecutive_empty + 1 : 0;
        if (consecutive_empty > cfg.max_empty_iters) {
            res.exit_code = 3;
            res.abort_reason = "empty extraction for " + std::to_string(consecutive_empty) +
                               " consecutive iterations";
            break;
        }
    }

    // phase 2: equilateral-edge regularization with a linear ramp
    if (res.exit_code == 0 && cfg.phase2_steps > 0) {
        for (int64_t k = 0; k < cfg.phase2_steps; ++k) {
            double ramp = cfg.phase2_steps > 1 ? double(k) / double(cfg.phase2_steps - 1) : 1.0;
            double w_edge = ramp * cfg.phase2_edge_weight;
            // the sign weight stays at its final value during phase 2
            StepInfo info = fit_step(res.state, cfg, *target, total_iters + k,
                                     cfg.weights.w_sign_end, w_edge, tape);
            if (csv.is_open()) csv_row(csv, total_iters + k, info, cfg);
            if (info.nonfinite) {
                res.exit_code = 3;
                res.abort_reason = "non-finite loss in phase 2 step " + std::to_string(k);
                break;
            }
        }
    }

    // final extraction at the optimized parameters
    auto pos = deformed_positions(res.state.grid);
    auto field = make_field(res.state.grid, res.state.params, pos);
    if (cfg.mc_baseline) {
        res.mesh_final = extract_mc_baseline(field, dmc_tables());
        res.mesh_training = res.mesh_final;
    } else {
        res.quads = extract_quads(field, dmc_tables());
        res.mesh_final = split_final(res.quads);
        res.mesh_training = split_training(res.quads);
    }

    if (!cfg.checkpoint_path.empty()) save_checkpoint(res.state, cfg.checkpoint_path);
    return res;
}

namespace {
template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}
void put_vec(std::ostream& os, const std::vector<double>& v) {
    put(os, (int64_t)v.size());
    os.write(reinterpret_cast<const char*>(v.data()), sizeof(double) * v.size());
}
std::vector<double> get_vec(std::istream& is) {
    int64_t n = get<int64_t>(is);
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), sizeof(double) * n);
    return v;
}
void put_adam(std::ostream& os, const AdamState& a) {
    put_vec(os, a.m);
    put_vec(os, a.v);
    put(os, a.t);
}
AdamState get_adam(std::istream& is) {
    AdamState a;
    a.m = get_vec(is);
    a.v = get_vec(is);
    a.t = get<int64_t>(is);
    return a;
}
}  // namespace

void save_checkpoint(const FitState& st, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
    os.write("FXCKPT01", 8);
    save_grid_binary(st.grid, os);
    put_vec(os, st.params.alpha_raw);
    put_vec(os, st.params.beta_raw);
    put_vec(os, st.params.gamma_raw);
    put_adam(os, st.adam_sdf);
    put_adam(os, st.adam_deform);
    put_adam(os, st.adam_alpha);
    put_adam(os, st.adam_beta);
    put_adam(os, st.adam_gamma);
    put(os, st.iteration);
}

FitState load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot read " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::string(magic, 8) != "FXCKPT01")
        throw std::runtime_error("checkpoint: bad magic");
    FitState st;
    st.grid = load_grid_binary(is);
    st.params.alpha_raw = get_vec(is);
    st.params.beta_raw = get_vec(is);
    st.params.gamma_raw = get_vec(is);
    st.adam_sdf = get_adam(is);
    st.adam_deform = get_adam(is);
    st.adam_alpha = get_adam(is);
    st.adam_beta = get_adam(is);
    st.adam_gamma = get_adam(is);
    st.iteration = get<int64_t>(is);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return st;
}

}  // namespace flexi

// ---- adaptive octree fitting ----

namespace flexi {

OctreeFitState::OctreeFitState(int base_res, int extra_depth)
    : tree(base_res, extra_depth) {
    sync_sizes();
    recompute_vertex_h();
}

void OctreeFitState::sync_sizes() {
    size_t nv = tree.num_vertex_slots();
    size_t nc = tree.num_cell_slots();
    sdf.resize(nv, 0.0);
    deform_raw.resize(nv, Vec3{0, 0, 0});
    alpha_raw.resize(8 * nc, 0.0);
    beta_raw.resize(12 * nc, 0.0);
    gamma_raw.resize(nc, 0.0);
    vertex_h.resize(nv, tree.finest_h());
    cell_loss_ema.resize(nc, 0.0);
    cell_has_ema.resize(nc, 0);
    auto grow = [](AdamState& a, size_t n) {
        a.m.resize(n, 0.0);
        a.v.resize(n, 0.0);
    };
    grow(adam_sdf, nv);
    grow(adam_deform, 3 * nv);
    grow(adam_alpha, 8 * nc);
    grow(adam_beta, 12 * nc);
    grow(adam_gamma, nc);
}

void OctreeFitState::recompute_vertex_h() {
    std::fill(vertex_h.begin(), vertex_h.end(), 2.0);  // domain size upper bound
    double hf = tree.finest_h();
    for (int32_t cid : tree.leaves()) {
        double h = hf * tree.cell_span(cid);
        for (int32_t v : tree.cell_corners(cid)) vertex_h[v] = std::min(vertex_h[v], h);
    }
}

int refine_and_continue(OctreeFitState& st, double threshold) {
    std::vector<int32_t> to_refine;
    for (int32_t cid : st.tree.leaves())
        if (st.cell_has_ema[cid] && st.cell_loss_ema[cid] > threshold) to_refine.push_back(cid);

    int refined = 0;
    for (int32_t cid : to_refine) {
        if (st.tree.cell(cid).depth >= st.tree.max_depth()) continue;  // no-op at max depth
        // parent corner values for the trilinear initialization
        auto corners = st.tree.cell_corners(cid);
        double cs[8];
        for (int k = 0; k < 8; ++k) cs[k] = st.sdf[corners[k]];
        size_t old_nv = st.tree.num_vertex_slots();
        const auto& pc = st.tree.cell(cid);
        int pspan = st.tree.cell_span(cid);
        IVec3 origin{pc.coord.x * pspan, pc.coord.y * pspan, pc.coord.z * pspan};
        if (st.tree.refine_cell(cid).empty()) continue;
        ++refined;
        st.sync_sizes();
        for (size_t v = old_nv; v < st.tree.num_vertex_slots(); ++v) {
            IVec3 c = st.tree.vertex_coord((int32_t)v);
            double u = double(c.x - origin.x) / pspan;
            double w = double(c.y - origin.y) / pspan;
            double t = double(c.z - origin.z) / pspan;
            st.sdf[v] = cs[0] * (1 - u) * (1 - w) * (1 - t) + cs[1] * u * (1 - w) * (1 - t) +
                        cs[2] * (1 - u) * w * (1 - t) + cs[3] * u * w * (1 - t) +
                        cs[4] * (1 - u) * (1 - w) * t + cs[5] * u * (1 - w) * t +
                        cs[6] * (1 - u) * w * t + cs[7] * u * w * t;
        }
    }
    if (refined) {
        st.tree.identify_constraints();
        st.recompute_vertex_h();
    }
    return refined;
}

namespace {

// vertex positions for the octree: constrained vertices stay on the lattice,
// free ones deform within half their smallest incident cell
template <class T>
std::vector<Vec3T<T>> octree_positions(const OctreeFitState& st,
                                       const std::vector<Vec3T<T>>& raw) {
    size_t nv = st.tree.num_vertex_slots();
    std::vector<Vec3T<T>> pos(nv);
    for (size_t v = 0; v < nv; ++v) {
        Vec3 lat = st.tree.lattice_position((int32_t)v);
        if (st.tree.is_constrained((int32_t)v)) {
            if constexpr (std::is_same_v<T, double>)
                pos[v] = lat;
            else
                pos[v] = make_varvec(*raw[v].x.t, lat);
        } else {
            pos[v] = deformed_position(lat, st.vertex_h[v], raw[v]);
        }
    }
    return pos;
}

template <class T>
T loss_sign_pairs(std::span<const T> sdf,
                  const std::vector<std::pair<int32_t, int32_t>>& edges) {
    auto sg = [](double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); };
    auto h_term = [](const T& sa, double sb) -> T {
        T h = softplus(sa);
        if (sb > 0) h = h - sa;
        return h;
    };
    T total = const_like(sdf[0], 0.0);
    for (auto& [a, b] : edges) {
        double va = value(sdf[a]), vb = value(sdf[b]);
        if (sg(va) == sg(vb)) continue;
        total = total + h_term(sdf[a], vb) + h_term(sdf[b], va);
    }
    return total;
}

}  // namespace

QuadMesh octree_extract_numeric(const OctreeFitState& st, bool constrained_projection) {
    std::vector<double> sdf = st.sdf;
    if (constrained_projection) st.tree.project_sdf<double>(sdf);
    std::vector<Vec3> raw(st.deform_raw.begin(), st.deform_raw.end());
    std::vector<Vec3> pos = octree_positions<double>(st, raw);
    OctreeField<double> f;
    f.tree = &st.tree;
    f.sdf = sdf;
    f.pos = pos;
    f.alpha_raw = st.alpha_raw;
    f.beta_raw = st.beta_raw;
    f.gamma_raw = st.gamma_raw;
    return extract_octree_quads(f, dmc_tables());
}

StepInfo octree_fit_step(OctreeFitState& st, const FitConfig& cfg, const TargetShape& target,
                         int64_t sample_iter, double w_sign, Tape& tape) {
    StepInfo info;
    info.w_sign = w_sign;
    size_t nv = st.tree.num_vertex_slots();
    size_t nc = st.tree.num_cell_slots();

    tape.clear();
    int32_t sdf_base = tape.alloc_params(st.sdf);
    std::vector<double> deform_flat(3 * nv);
    for (size_t i = 0; i < nv; ++i) {
        deform_flat[3 * i + 0] = st.deform_raw[i].x;
        deform_flat[3 * i + 1] = st.deform_raw[i].y;
        deform_flat[3 * i + 2] = st.deform_raw[i].z;
    }
    int32_t deform_base = tape.alloc_params(deform_flat);
    int32_t alpha_base = tape.alloc_params(st.alpha_raw);
    int32_t beta_base = tape.alloc_params(st.beta_raw);
    int32_t gamma_base = tape.alloc_params(st.gamma_raw);

    std::vector<Var> sdf(nv);
    for (size_t i = 0; i < nv; ++i) sdf[i] = Var{&tape, sdf_base + (int32_t)i};
    st.tree.project_sdf<Var>(sdf);
    std::vector<VarVec3> raw(nv);
    for (size_t i = 0; i < nv; ++i)
        raw[i] = VarVec3{Var{&tape, deform_base + (int32_t)(3 * i + 0)},
                         Var{&tape, deform_base + (int32_t)(3 * i + 1)},
                         Var{&tape, deform_base + (int32_t)(3 * i + 2)}};
    std::vector<VarVec3> pos = octree_positions<Var>(st, raw);
    std::vector<Var> alpha(8 * nc), beta(12 * nc), gamma(nc);
    for (size_t i = 0; i < alpha.size(); ++i) alpha[i] = Var{&tape, alpha_base + (int32_t)i};
    for (size_t i = 0; i < beta.size(); ++i) beta[i] = Var{&tape, beta_base + (int32_t)i};
    for (size_t i = 0; i < gamma.size(); ++i) gamma[i] = Var{&tape, gamma_base + (int32_t)i};

    OctreeField<Var> field;
    field.tree = &st.tree;
    field.sdf = sdf;
    field.pos = pos;
    field.alpha_raw = alpha;
    field.beta_raw = beta;
    field.gamma_raw = gamma;

    QuadMeshT<Var> quads = extract_octree_quads(field, dmc_tables());
    TriMeshT<Var> tris = split_training(quads);
    TriMesh numeric = to_numeric(tris);
    info.empty_extraction = numeric.tris.empty();
    ObjectiveCtx ctx = build_objective_ctx(numeric, target, cfg.objective, (uint64_t)sample_iter);

    LossBreakdown<Var> terms;
    Var zero = tape.constant(0.0);
    terms.sign = loss_sign_pairs<Var>(sdf, octree_edges(st.tree));
    terms.edge = zero;
    terms.developable = zero;
    if (ctx.empty_mesh || quads.empty()) {
        terms.surface_points = tape.constant(cfg.objective.empty_mesh_sentinel);
        terms.sdf = tape.constant(cfg.objective.empty_mesh_sentinel);
        terms.dev = zero;
    } else {
        terms.dev = loss_dev(quads);
        terms.sdf = loss_sdf(ctx, tris, cfg.objective.empty_mesh_sentinel);
        terms.surface_points =
            loss_surface_points(ctx, tris, target, cfg.objective.empty_mesh_sentinel);
    }
    Var total = total_loss(terms, cfg.weights, w_sign, 0.0);

    info.terms.surface_points = value(terms.surface_points);
    info.terms.sdf = value(terms.sdf);
    info.terms.dev = value(terms.dev);
    info.terms.sign = value(terms.sign);
    info.total = value(total);
    if (!std::isfinite(info.total) || tape.has_nonfinite()) {
        info.nonfinite = true;
        return info;
    }

    tape.backward(total);

    // per-cell loss attribution: surface-point sample errors accumulate on the
    // emitting cells of their dominant vertices
    if (!ctx.empty_mesh) {
        std::vector<double> cell_sum(nc, 0.0);
        std::vector<int32_t> cell_cnt(nc, 0);
        auto attribute = [&](int32_t tri, double err) {
            for (int k = 0; k < 3; ++k) {
                int32_t cell = numeric.vertex_cell[numeric.tris[tri][k]];
                if (cell >= 0) {
                    cell_sum[cell] += err;
                    cell_cnt[cell] += 1;
                }
            }
        };
        for (const auto& s : ctx.ext_samples) {
            const auto& t = numeric.tris[s.tri];
            double b0 = 1.0 - s.b1 - s.b2;
            Vec3 x = b0 * numeric.vertices[t[0]] + s.b1 * numeric.vertices[t[1]] +
                     s.b2 * numeric.vertices[t[2]];
            Vec3 cp = target.closest_point(x);
            attribute(s.tri, norm2(x - cp));
        }
        for (const auto& s : ctx.tgt_samples) {
            const auto& t = numeric.tris[s.tri];
            Vec3 cp = closest_point_triangle(s.point, numeric.vertices[t[0]],
                                             numeric.vertices[t[1]], numeric.vertices[t[2]])
                          .point;
            attribute(s.tri, norm2(s.point - cp));
        }
        for (size_t c = 0; c < nc; ++c) {
            if (!cell_cnt[c]) continue;
            double mean = cell_sum[c] / cell_cnt[c];
            if (st.cell_has_ema[c])
                st.cell_loss_ema[c] = 0.9 * st.cell_loss_ema[c] + 0.1 * mean;
            else {
                st.cell_loss_ema[c] = mean;
                st.cell_has_ema[c] = 1;
            }
        }
    }

    // gradients -> Adam (constrained sdf slots receive no gradient and stay put)
    std::vector<double> gsdf(nv), gdeform(3 * nv), galpha(8 * nc), gbeta(12 * nc), ggamma(nc);
    for (size_t i = 0; i < nv; ++i) gsdf[i] = tape.grad(sdf_base + (int32_t)i);
    for (size_t i = 0; i < 3 * nv; ++i) gdeform[i] = tape.grad(deform_base + (int32_t)i);
    for (size_t i = 0; i < 8 * nc; ++i) galpha[i] = tape.grad(alpha_base + (int32_t)i);
    for (size_t i = 0; i < 12 * nc; ++i) gbeta[i] = tape.grad(beta_base + (int32_t)i);
    for (size_t i = 0; i < nc; ++i) ggamma[i] = tape.grad(gamma_base + (int32_t)i);

    adam_update(st.sdf, gsdf, st.adam_sdf, cfg);
    adam_update_vec3(st.deform_raw, gdeform, st.adam_deform, cfg);
    adam_update(st.alpha_raw, galpha, st.adam_alpha, cfg);
    adam_update(st.beta_raw, gbeta, st.adam_beta, cfg);
    adam_update(st.gamma_raw, ggamma, st.adam_gamma, cfg);
    st.iteration += 1;
    return info;
}

OctreeFitResult fit_octree(const OctreeFitConfig& cfg, const TargetShape& target) {
    OctreeFitResult res;
    OctreeFitState st(cfg.base.resolution, cfg.extra_depth);
    st.tree.identify_constraints();
    // sphere initialization on the base lattice
    for (size_t v = 0; v < st.tree.num_vertex_slots(); ++v) {
        Vec3 p = st.tree.lattice_position((int32_t)v);
        st.sdf[v] = norm(p) - cfg.base.init_sphere_radius;
    }

    int rounds = cfg.rounds > 0 ? cfg.rounds : cfg.extra_depth + 1;
    int64_t total_iters = (int64_t)rounds * cfg.base.iterations;
    Tape tape;
    int64_t it = 0;
    for (int round = 0; round < rounds; ++round) {
        for (int k = 0; k < cfg.base.iterations; ++k, ++it) {
            double w_sign = cfg.base.weights.w_sign_at((int)it, (int)total_iters);
            StepInfo info = octree_fit_step(st, cfg.base, target, it, w_sign, tape);
            if (info.nonfinite) {
                res.exit_code = 3;
                res.abort_reason = "non-finite loss in octree fit";
                return res;
            }
        }
        if (round + 1 < rounds) refine_and_continue(st, cfg.refine_threshold);
    }

    res.quads = octree_extract_numeric(st, true);
    res.mesh_final = split_final(res.quads);
    return res;
}

}  // namespace flexi
