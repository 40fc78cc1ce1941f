#include "flexicubes/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "flexicubes/meshcheck.hpp"
#include "flexicubes/tables.hpp"
#include "json.hpp"

namespace flexi {

namespace {

// a - p with p a plain point, keeping constants out of the tape
template <class T>
Vec3T<T> sub_point(const Vec3T<T>& a, const Vec3& p) {
    return {a.x - p.x, a.y - p.y, a.z - p.z};
}

template <class T>
T safe_sqrt(const T& x) {
    using std::sqrt;
    return sqrt(x + 1e-30);
}

// squared distance from fixed point p to the frozen projection feature of
// triangle (a,b,c); region as produced by closest_point_triangle
template <class T>
T region_dist2(const Vec3& p, const Vec3T<T>& a, const Vec3T<T>& b, const Vec3T<T>& c,
               int region) {
    switch (region) {
        case 0: return norm2(sub_point(a, p));
        case 1: return norm2(sub_point(b, p));
        case 2: return norm2(sub_point(c, p));
        case 3:
        case 4:
        case 5: {
            const Vec3T<T>& A = region == 3 ? a : (region == 4 ? b : c);
            const Vec3T<T>& B = region == 3 ? b : (region == 4 ? c : a);
            Vec3T<T> e = B - A;
            Vec3T<T> dp = sub_point(A, p);
            T t = (-1.0) * vdot(dp, e) / vdot(e, e);
            return norm2(dp + t * e);
        }
        default: {
            Vec3T<T> n = cross(b - a, c - a);
            T s = vdot(sub_point(a, p), n);
            return s * s / vdot(n, n);
        }
    }
}

}  // namespace

ObjectiveCtx build_objective_ctx(const TriMesh& mesh, const TargetShape& target,
                                 const ObjectiveConfig& cfg, uint64_t iteration) {
    ObjectiveCtx ctx;
    if (mesh.tris.empty()) return ctx;
    ctx.empty_mesh = false;

    TriBvh bvh(mesh.vertices, mesh.tris);

    // area table for sampling on the extracted mesh
    std::vector<double> cum;
    cum.reserve(mesh.tris.size());
    double acc = 0;
    for (const auto& t : mesh.tris) {
        Vec3 n = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]],
                       mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        acc += 0.5 * norm(n);
        cum.push_back(acc);
    }
    if (acc <= 0) {
        ctx.empty_mesh = true;
        return ctx;
    }

    Rng rng_ext = Rng::stream(cfg.seed, iteration * 8 + 0);
    for (int i = 0; i < cfg.n_surface_samples; ++i) {
        double u = rng_ext.uniform() * acc;
        size_t ti = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
        ti = std::min(ti, cum.size() - 1);
        double b1 = rng_ext.uniform(), b2 = rng_ext.uniform();
        if (b1 + b2 > 1) {
            b1 = 1 - b1;
            b2 = 1 - b2;
        }
        ctx.ext_samples.push_back({(int32_t)ti, b1, b2});
    }

    Rng rng_tgt = Rng::stream(cfg.seed, iteration * 8 + 1);
    std::vector<Vec3> tp, tn;
    target.sample_surface(rng_tgt, cfg.n_surface_samples, tp, tn);
    for (const Vec3& p : tp) {
        auto hit = bvh.closest(p);
        ctx.tgt_samples.push_back({p, hit.tri, hit.region});
    }

    // inside test against the extracted mesh: parity when closed, winding
    // number otherwise
    bool closed = check_topology(mesh).boundary_edges == 0;
    ctx.used_winding_fallback = !closed;
    static const Vec3 kDirs[3] = {{0.577350269, 0.577350269, 0.577350269},
                                  {-0.274952376, 0.680172737, 0.579585696},
                                  {0.821583836, -0.414134562, 0.391402545}};
    auto inside_mesh = [&](const Vec3& p) -> bool {
        if (closed) {
            int votes = 0;
            for (const Vec3& d : kDirs) votes += (bvh.count_crossings(p, d) & 1) ? 1 : 0;
            return votes >= 2;
        }
        // generalized winding number of the open mesh
        double w = 0;
        for (const auto& t : mesh.tris) {
            Vec3 a = mesh.vertices[t[0]] - p;
            Vec3 b = mesh.vertices[t[1]] - p;
            Vec3 c = mesh.vertices[t[2]] - p;
            double la = norm(a), lb = norm(b), lc = norm(c);
            double num = dot(a, cross(b, c));
            double den = la * lb * lc + dot(a, b) * lc + dot(b, c) * la + dot(c, a) * lb;
            w += 2.0 * std::atan2(num, den);
        }
        return w / (4.0 * M_PI) > 0.5;
    };

    Rng rng_sdf = Rng::stream(cfg.seed, iteration * 8 + 2);
    for (int i = 0; i < cfg.n_sdf_samples; ++i) {
        Vec3 p = rng_sdf.uniform_in_box({-1, -1, -1}, {1, 1, 1});
        auto hit = bvh.closest(p);
        ObjectiveCtx::SdfSample s;
        s.point = p;
        s.target_sdf = target.sdf(p);
        s.tri = hit.tri;
        s.region = hit.region;
        s.sign = inside_mesh(p) ? -1.0 : 1.0;
        ctx.sdf_samples.push_back(s);
    }
    return ctx;
}

template <class T>
T loss_dev(const QuadMeshT<T>& mesh) {
    if (mesh.vertices.empty()) throw std::runtime_error("loss_dev: empty mesh");
    using std::abs;
    T total = const_like(mesh.vertices[0].pos.x, 0.0);
    for (const auto& dv : mesh.vertices) {
        size_t m = dv.crossings.size();
        std::vector<T> d;
        d.reserve(m);
        for (const auto& u : dv.crossings) d.push_back(safe_sqrt(norm2(dv.pos - u)));
        T mean = d[0];
        for (size_t i = 1; i < m; ++i) mean = mean + d[i];
        mean = mean / double(m);
        T mad = abs(d[0] - mean);
        for (size_t i = 1; i < m; ++i) mad = mad + abs(d[i] - mean);
        total = total + mad / double(m);
    }
    return total;
}

template <class T>
T loss_sign(std::span<const T> sdf, const IVec3& res) {
    auto vidx = [&](int i, int j, int k) {
        return size_t(i) + size_t(res.x + 1) * (size_t(j) + size_t(res.y + 1) * k);
    };
    auto sg = [](double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); };
    // one orientation of the cross-entropy: H(sigmoid(sa), 1_{sb>0})
    auto h_term = [](const T& sa, double sb) -> T {
        T h = softplus(sa);
        if (sb > 0) h = h - sa;
        return h;
    };
    T total = const_like(sdf[0], 0.0);
    for (int axis = 0; axis < 3; ++axis) {
        IVec3 lim{res.x + 1, res.y + 1, res.z + 1};
        lim[axis] = res[axis];
        for (int k = 0; k < lim.z; ++k)
            for (int j = 0; j < lim.y; ++j)
                for (int i = 0; i < lim.x; ++i) {
                    IVec3 v1{i, j, k};
                    v1[axis] += 1;
                    const T& sa = sdf[vidx(i, j, k)];
                    const T& sb = sdf[vidx(v1.x, v1.y, v1.z)];
                    double va = value(sa), vb = value(sb);
                    if (sg(va) == sg(vb)) continue;
                    total = total + h_term(sa, vb) + h_term(sb, va);
                }
    }
    return total;
}

template <class T>
T loss_sdf(const ObjectiveCtx& ctx, const TriMeshT<T>& mesh, double) {
    if (ctx.sdf_samples.empty()) throw std::runtime_error("loss_sdf: no samples");
    T total = const_like(mesh.vertices[0].x, 0.0);
    for (const auto& s : ctx.sdf_samples) {
        const auto& t = mesh.tris[s.tri];
        T d2 = region_dist2(s.point, mesh.vertices[t[0]], mesh.vertices[t[1]],
                            mesh.vertices[t[2]], s.region);
        T d = safe_sqrt(d2) * s.sign;
        T err = d - s.target_sdf;
        total = total + err * err;
    }
    return total / double(ctx.sdf_samples.size());
}

template <class T>
T loss_surface_points(const ObjectiveCtx& ctx, const TriMeshT<T>& mesh, const TargetShape& target,
                      double) {
    if (ctx.ext_samples.empty() && ctx.tgt_samples.empty())
        throw std::runtime_error("loss_surface_points: no samples");
    T acc1 = const_like(mesh.vertices[0].x, 0.0);
    for (const auto& s : ctx.ext_samples) {
        const auto& t = mesh.tris[s.tri];
        double b0 = 1.0 - s.b1 - s.b2;
        Vec3T<T> x = b0 * mesh.vertices[t[0]] + s.b1 * mesh.vertices[t[1]] +
                     s.b2 * mesh.vertices[t[2]];
        Vec3 cp = target.closest_point(value(x));
        acc1 = acc1 + norm2(sub_point(x, cp));
    }
    T acc2 = const_like(mesh.vertices[0].x, 0.0);
    for (const auto& s : ctx.tgt_samples) {
        const auto& t = mesh.tris[s.tri];
        acc2 = acc2 + region_dist2(s.point, mesh.vertices[t[0]], mesh.vertices[t[1]],
                                   mesh.vertices[t[2]], s.region);
    }
    return 0.5 * (acc1 / double(ctx.ext_samples.size()) + acc2 / double(ctx.tgt_samples.size()));
}

namespace {
uint64_t ekey(int32_t a, int32_t b) {
    if (a > b) std::swap(a, b);
    return (uint64_t(uint32_t(a)) << 32) | uint32_t(b);
}
}  // namespace

template <class T>
T reg_edge(const TriMeshT<T>& mesh) {
    if (mesh.tris.empty()) throw std::runtime_error("reg_edge: empty mesh");
    // unique undirected edges in deterministic (sorted-key) order
    std::vector<uint64_t> keys;
    keys.reserve(mesh.tris.size() * 3);
    for (const auto& t : mesh.tris) {
        keys.push_back(ekey(t[0], t[1]));
        keys.push_back(ekey(t[1], t[2]));
        keys.push_back(ekey(t[2], t[0]));
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::unordered_map<uint64_t, int32_t> index;
    index.reserve(keys.size());
    std::vector<T> len;
    len.reserve(keys.size());
    for (uint64_t k : keys) {
        int32_t a = int32_t(k >> 32), b = int32_t(k & 0xffffffff);
        index.emplace(k, (int32_t)len.size());
        len.push_back(safe_sqrt(norm2(mesh.vertices[a] - mesh.vertices[b])));
    }
    T mean = len[0];
    for (size_t i = 1; i < len.size(); ++i) mean = mean + len[i];
    mean = mean / double(len.size());

    T total = const_like(mean, 0.0);
    for (const auto& t : mesh.tris) {
        for (int e = 0; e < 3; ++e) {
            const T& l = len[index[ekey(t[e], t[(e + 1) % 3])]];
            T d = l - mean;
            total = total + d * d;
        }
    }
    return total / double(mesh.tris.size());
}

double reg_edge_lengths(std::span<const std::array<double, 3>> tri_lengths,
                        std::span<const double> unique_lengths) {
    double mean = 0;
    for (double l : unique_lengths) mean += l;
    mean /= double(unique_lengths.size());
    double total = 0;
    for (const auto& t : tri_lengths)
        for (double l : t) total += (l - mean) * (l - mean);
    return total / double(tri_lengths.size());
}

double smallest_eig_sym3(const std::array<double, 6>& m) {
    double a00 = m[0], a11 = m[1], a22 = m[2], a01 = m[3], a02 = m[4], a12 = m[5];
    double p1 = a01 * a01 + a02 * a02 + a12 * a12;
    if (p1 < 1e-300) return std::min(a00, std::min(a11, a22));
    double q = (a00 + a11 + a22) / 3.0;
    double p2 = (a00 - q) * (a00 - q) + (a11 - q) * (a11 - q) + (a22 - q) * (a22 - q) + 2.0 * p1;
    double p = std::sqrt(p2 / 6.0);
    double b00 = (a00 - q) / p, b11 = (a11 - q) / p, b22 = (a22 - q) / p;
    double b01 = a01 / p, b02 = a02 / p, b12 = a12 / p;
    double detb = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02) +
                  b02 * (b01 * b12 - b11 * b02);
    double r = std::clamp(detb / 2.0, -1.0, 1.0);
    double phi = std::acos(r) / 3.0;
    return q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
}

namespace {
Vec3 eigvec_for(const std::array<double, 6>& m, double lambda) {
    Vec3 r0{m[0] - lambda, m[3], m[4]};
    Vec3 r1{m[3], m[1] - lambda, m[5]};
    Vec3 r2{m[4], m[5], m[2] - lambda};
    Vec3 c0 = cross(r0, r1), c1 = cross(r0, r2), c2 = cross(r1, r2);
    Vec3 best = c0;
    if (norm2(c1) > norm2(best)) best = c1;
    if (norm2(c2) > norm2(best)) best = c2;
    double n = norm(best);
    if (n < 1e-14) return {1, 0, 0};  // (near-)repeated eigenvalue: any direction works
    return best / n;
}
}  // namespace

Var smallest_eig_sym3(const std::array<Var, 6>& c) {
    std::array<double, 6> m;
    for (int i = 0; i < 6; ++i) m[i] = value(c[i]);
    double lambda = smallest_eig_sym3(m);
    Vec3 u = eigvec_for(m, lambda);
    std::array<double, 6> partials{u.x * u.x,       u.y * u.y,       u.z * u.z,
                                   2.0 * u.x * u.y, 2.0 * u.x * u.z, 2.0 * u.y * u.z};
    return c[0].t->node_n(lambda, std::span<const Var>(c.data(), 6),
                          std::span<const double>(partials.data(), 6));
}

template <class T>
T reg_developable(const TriMeshT<T>& mesh) {
    if (mesh.tris.empty()) throw std::runtime_error("reg_developable: empty mesh");
    size_t nv = mesh.vertices.size();

    // boundary vertices from edge face-counts
    std::unordered_map<uint64_t, int> ecount;
    for (const auto& t : mesh.tris)
        for (int e = 0; e < 3; ++e) ecount[ekey(t[e], t[(e + 1) % 3])]++;
    std::vector<uint8_t> boundary(nv, 0);
    for (auto& [k, c] : ecount)
        if (c == 1) {
            boundary[int32_t(k >> 32)] = 1;
            boundary[int32_t(k & 0xffffffff)] = 1;
        }

    // per-face area weights and unit normals
    std::vector<T> w;
    std::vector<Vec3T<T>> nh;
    w.reserve(mesh.tris.size());
    nh.reserve(mesh.tris.size());
    for (const auto& t : mesh.tris) {
        Vec3T<T> n = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]],
                           mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        T ln = safe_sqrt(norm2(n));
        w.push_back(0.5 * ln);
        nh.push_back(n / ln);
    }

    std::vector<std::vector<int32_t>> vfaces(nv);
    for (size_t fi = 0; fi < mesh.tris.size(); ++fi)
        for (int32_t v : mesh.tris[fi]) vfaces[v].push_back((int32_t)fi);

    T total = const_like(w[0], 0.0);
    for (size_t v = 0; v < nv; ++v) {
        if (boundary[v] || vfaces[v].size() < 3) continue;
        const auto& fs = vfaces[v];
        T wsum = w[fs[0]];
        Vec3T<T> nsum = w[fs[0]] * nh[fs[0]];
        for (size_t i = 1; i < fs.size(); ++i) {
            wsum = wsum + w[fs[i]];
            nsum += w[fs[i]] * nh[fs[i]];
        }
        Vec3T<T> nbar = nsum / wsum;
        std::array<T, 6> cov{const_like(wsum, 0.0), const_like(wsum, 0.0),
                             const_like(wsum, 0.0), const_like(wsum, 0.0),
                             const_like(wsum, 0.0), const_like(wsum, 0.0)};
        for (int32_t fi : fs) {
            Vec3T<T> d = nh[fi] - nbar;
            cov[0] = cov[0] + w[fi] * (d.x * d.x);
            cov[1] = cov[1] + w[fi] * (d.y * d.y);
            cov[2] = cov[2] + w[fi] * (d.z * d.z);
            cov[3] = cov[3] + w[fi] * (d.x * d.y);
            cov[4] = cov[4] + w[fi] * (d.x * d.z);
            cov[5] = cov[5] + w[fi] * (d.y * d.z);
        }
        for (auto& cij : cov) cij = cij / wsum;
        total = total + smallest_eig_sym3(cov);
    }
    return total;
}

template <class T>
T total_loss(const LossBreakdown<T>& b, const LossWeights& w, double w_sign, double w_edge) {
    T total = (w.w_mask + w.w_depth) * b.surface_points + w.w_sdf * b.sdf + w.w_dev * b.dev +
              w_sign * b.sign;
    if (w_edge != 0) total = total + w_edge * b.edge;
    if (w.w_developable != 0) total = total + w.w_developable * b.developable;
    return total;
}

template <class T>
LossBreakdown<T> evaluate_losses(const ObjectiveCtx& ctx, const QuadMeshT<T>& quads,
                                 const TriMeshT<T>& tris, std::span<const T> sdf,
                                 const IVec3& res, const TargetShape& target,
                                 const ObjectiveConfig& cfg, const LossWeights& w) {
    LossBreakdown<T> b;
    T zero = const_like(sdf[0], 0.0);
    b.sign = loss_sign(sdf, res);
    if (ctx.empty_mesh || quads.empty()) {
        b.surface_points = const_like(sdf[0], cfg.empty_mesh_sentinel);
        b.sdf = const_like(sdf[0], cfg.empty_mesh_sentinel);
        b.dev = zero;
        b.edge = zero;
        b.developable = zero;
        return b;
    }
    b.dev = loss_dev(quads);
    b.sdf = loss_sdf(ctx, tris, cfg.empty_mesh_sentinel);
    b.surface_points = loss_surface_points(ctx, tris, target, cfg.empty_mesh_sentinel);
    b.edge = w.w_edge != 0 ? reg_edge(tris) : zero;
    b.developable = w.w_developable != 0 ? reg_developable(tris) : zero;
    return b;
}

// ---- metrics ----

namespace {

struct Cloud {
    std::vector<Vec3> pts;
    std::vector<Vec3> normals;
};

Cloud sample_mesh_cloud(const TriMesh& m, int n, Rng& rng) {
    Cloud c;
    std::vector<double> cum;
    cum.reserve(m.tris.size());
    double acc = 0;
    for (const auto& t : m.tris) {
        Vec3 nr = cross(m.vertices[t[1]] - m.vertices[t[0]], m.vertices[t[2]] - m.vertices[t[0]]);
        acc += 0.5 * norm(nr);
        cum.push_back(acc);
    }
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform() * acc;
        size_t ti = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
        ti = std::min(ti, cum.size() - 1);
        const auto& t = m.tris[ti];
        double b1 = rng.uniform(), b2 = rng.uniform();
        if (b1 + b2 > 1) {
            b1 = 1 - b1;
            b2 = 1 - b2;
        }
        const Vec3 &a = m.vertices[t[0]], &bb = m.vertices[t[1]], &cc = m.vertices[t[2]];
        c.pts.push_back(a + b1 * (bb - a) + b2 * (cc - a));
        c.normals.push_back(normalized(cross(bb - a, cc - a)));
    }
    return c;
}

std::vector<uint8_t> edge_points(const Cloud& c, const PointKd& kd, double dot_threshold,
                                 int knn) {
    std::vector<uint8_t> is_edge(c.pts.size(), 0);
    std::vector<int32_t> nbrs;
    for (size_t i = 0; i < c.pts.size(); ++i) {
        kd.k_nearest(c.pts[i], knn + 1, nbrs);
        double acc = 0;
        int cnt = 0;
        for (int32_t j : nbrs) {
            if (j == (int32_t)i) continue;
            acc += dot(c.normals[i], c.normals[j]);
            ++cnt;
        }
        if (cnt > 0 && acc / cnt < dot_threshold) is_edge[i] = 1;
    }
    return is_edge;
}

struct CdF1 {
    double cd = 0, f1 = 0;
};

CdF1 chamfer_f1(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double tau) {
    CdF1 r;
    if (a.empty() || b.empty()) {
        r.cd = 1e9;
        r.f1 = 0;
        return r;
    }
    PointKd ka(a), kb(b);
    double sum_ab = 0;
    int64_t hit_ab = 0;
    for (const Vec3& p : a) {
        double d = std::sqrt(kb.nearest(p).dist2);
        sum_ab += d;
        if (d < tau) ++hit_ab;
    }
    double sum_ba = 0;
    int64_t hit_ba = 0;
    for (const Vec3& p : b) {
        double d = std::sqrt(ka.nearest(p).dist2);
        sum_ba += d;
        if (d < tau) ++hit_ba;
    }
    r.cd = 0.5 * (sum_ab / a.size() + sum_ba / b.size());
    double precision = double(hit_ab) / a.size();
    double recall = double(hit_ba) / b.size();
    r.f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    return r;
}

}  // namespace

MetricReport metrics(const TriMesh& mesh, const TargetShape& target, const MetricsConfig& cfg) {
    MetricReport r;
    r.num_vertices = (int64_t)mesh.vertices.size();
    r.num_triangles = (int64_t)mesh.tris.size();
    if (mesh.tris.empty()) {
        r.cd = 1e9;
        r.ecd = 1e9;
        return r;
    }

    Rng rng_pred = Rng::stream(cfg.seed, 101);
    Cloud pred = sample_mesh_cloud(mesh, cfg.n_samples, rng_pred);
    Cloud gt;
    Rng rng_gt = Rng::stream(cfg.seed, 102);
    target.sample_surface(rng_gt, cfg.n_samples, gt.pts, gt.normals);

    auto base = chamfer_f1(pred.pts, gt.pts, cfg.f1_threshold);
    r.cd = base.cd;
    r.f1 = base.f1;

    PointKd kd_pred(pred.pts), kd_gt(gt.pts);

    // inaccurate normals: predicted sample vs the normal of its nearest
    // ground-truth sample
    double cos_tol = std::cos(cfg.inaccurate_normal_deg * M_PI / 180.0);
    int64_t bad_n = 0;
    for (size_t i = 0; i < pred.pts.size(); ++i) {
        auto nn = kd_gt.nearest(pred.pts[i]);
        double c = std::fabs(dot(pred.normals[i], gt.normals[nn.idx]));
        if (c < cos_tol) ++bad_n;
    }
    r.in5 = 100.0 * double(bad_n) / double(pred.pts.size());

    // edge point subsets
    auto pe = edge_points(pred, kd_pred, cfg.edge_dot_threshold, cfg.edge_knn);
    auto ge = edge_points(gt, kd_gt, cfg.edge_dot_threshold, cfg.edge_knn);
    std::vector<Vec3> pe_pts, ge_pts;
    for (size_t i = 0; i < pe.size(); ++i)
        if (pe[i]) pe_pts.push_back(pred.pts[i]);
    for (size_t i = 0; i < ge.size(); ++i)
        if (ge[i]) ge_pts.push_back(gt.pts[i]);
    if (pe_pts.empty() && ge_pts.empty()) {
        r.ecd = 0;
        r.ef1 = 1;
    } else {
        auto e = chamfer_f1(pe_pts, ge_pts, cfg.f1_threshold);
        r.ecd = e.cd;
        r.ef1 = e.f1;
    }

    // triangle quality
    int64_t ar4 = 0, rr4 = 0, minang10 = 0;
    double sum_min = 0, sum_max = 0;
    for (const auto& t : mesh.tris) {
        const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
        double la = norm(b - c), lb = norm(a - c), lc = norm(a - b);
        double area = 0.5 * norm(cross(b - a, c - a));
        double perim = la + lb + lc;
        double lmax = std::max(la, std::max(lb, lc));
        double ar, rr;
        if (area < 1e-300) {
            ar = rr = 1e300;
        } else {
            ar = lmax * perim / (4.0 * std::sqrt(3.0) * area);
            rr = la * lb * lc * perim / (16.0 * area * area);
        }
        auto angle = [](double opp, double s1, double s2) {
            double cosv = (s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2);
            return std::acos(std::clamp(cosv, -1.0, 1.0)) * 180.0 / M_PI;
        };
        double aa = angle(la, lb, lc), ab = angle(lb, la, lc), ac = angle(lc, la, lb);
        double mn = std::min(aa, std::min(ab, ac)), mx = std::max(aa, std::max(ab, ac));
        if (ar > 4.0) ++ar4;
        if (rr > 4.0) ++rr4;
        if (mn < 10.0) ++minang10;
        sum_min += mn;
        sum_max += mx;
    }
    double nt = double(mesh.tris.size());
    r.ar_gt4_pct = 100.0 * ar4 / nt;
    r.rr_gt4_pct = 100.0 * rr4 / nt;
    r.min_angle_lt10_pct = 100.0 * minang10 / nt;
    r.mean_min_angle = sum_min / nt;
    r.mean_max_angle = sum_max / nt;

    TopoReport topo = check_topology(mesh, cfg.with_self_intersections);
    if (cfg.with_self_intersections && topo.self_intersecting_tris >= 0)
        r.si_pct = 100.0 * double(topo.self_intersecting_tris) / nt;
    r.nv_pct = topo.num_vertices ? 100.0 * double(topo.non_manifold_vertices) / double(topo.num_vertices) : 0.0;
    r.ne_pct = topo.num_edges ? 100.0 * double(topo.non_manifold_edges) / double(topo.num_edges) : 0.0;
    return r;
}

std::string MetricReport::to_json() const {
    nlohmann::ordered_json j;
    j["cd"] = cd;
    j["f1"] = f1;
    j["ecd"] = ecd;
    j["ef1"] = ef1;
    j["in5"] = in5;
    j["ar_gt4_pct"] = ar_gt4_pct;
    j["rr_gt4_pct"] = rr_gt4_pct;
    j["min_angle_lt10_pct"] = min_angle_lt10_pct;
    j["si_pct"] = si_pct;
    j["nv_pct"] = nv_pct;
    j["ne_pct"] = ne_pct;
    j["mean_min_angle"] = mean_min_angle;
    j["mean_max_angle"] = mean_max_angle;
    j["num_vertices"] = num_vertices;
    j["num_triangles"] = num_triangles;
    return j.dump(2);
}

// explicit instantiations
template double loss_dev<double>(const QuadMeshT<double>&);
template Var loss_dev<Var>(const QuadMeshT<Var>&);
template double loss_sign<double>(std::span<const double>, const IVec3&);
template Var loss_sign<Var>(std::span<const Var>, const IVec3&);
template double loss_sdf<double>(const ObjectiveCtx&, const TriMeshT<double>&, double);
template Var loss_sdf<Var>(const ObjectiveCtx&, const TriMeshT<Var>&, double);
template double loss_surface_points<double>(const ObjectiveCtx&, const TriMeshT<double>&,
                                            const TargetShape&, double);
template Var loss_surface_points<Var>(const ObjectiveCtx&, const TriMeshT<Var>&,
                                      const TargetShape&, double);
template double reg_edge<double>(const TriMeshT<double>&);
template Var reg_edge<Var>(const TriMeshT<Var>&);
template double reg_developable<double>(const TriMeshT<double>&);
template Var reg_developable<Var>(const TriMeshT<Var>&);
template double total_loss<double>(const LossBreakdown<double>&, const LossWeights&, double,
                                   double);
template Var total_loss<Var>(const LossBreakdown<Var>&, const LossWeights&, double, double);
template LossBreakdown<double> evaluate_losses<double>(const ObjectiveCtx&,
                                                       const QuadMeshT<double>&,
                                                       const TriMeshT<double>&,
                                                       std::span<const double>, const IVec3&,
                                                       const TargetShape&, const ObjectiveConfig&,
                                                       const LossWeights&);
template LossBreakdown<Var> evaluate_losses<Var>(const ObjectiveCtx&, const QuadMeshT<Var>&,
                                                 const TriMeshT<Var>&, std::span<const Var>,
                                                 const IVec3&, const TargetShape&,
                                                 const ObjectiveConfig&, const LossWeights&);

}  // namespace flexi
