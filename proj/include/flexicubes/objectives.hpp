#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flexicubes/bvh.hpp"
#include "flexicubes/rng.hpp"
#include "flexicubes/surface.hpp"
#include "flexicubes/targets.hpp"
#include "flexicubes/vec3.hpp"

namespace flexi {

// Weights of the combined objective. The surface-point loss plays the role of
// the rendering losses (mask and depth weights both scale it); defaults follow
// the reported weighting: 1, 10, 2000, 1, with the sign loss decayed linearly
// from 0.2 to 0.01 across the run.
struct LossWeights {
    double w_mask = 1.0;
    double w_depth = 10.0;
    double w_sdf = 2000.0;
    double w_dev = 1.0;
    double w_sign_start = 0.2;
    double w_sign_end = 0.01;
    double w_edge = 0.0;         // phase-2 ramps this to 100
    double w_developable = 0.0;

    double w_sign_at(int iter, int total_iters) const {
        if (total_iters <= 1) return w_sign_start;
        double t = double(iter) / double(total_iters - 1);
        return w_sign_start + (w_sign_end - w_sign_start) * t;
    }
};

struct ObjectiveConfig {
    int n_sdf_samples = 1000;
    int n_surface_samples = 1000;
    uint64_t seed = 1;
    double empty_mesh_sentinel = 1e6;
};

// Frozen per-evaluation structure: sample draws and nearest-element
// assignments are fixed once per iteration so the recorded computation is
// piecewise smooth. Finite-difference checks re-evaluate through the same
// frozen assignments.
struct ObjectiveCtx {
    bool empty_mesh = true;

    // samples on the extracted mesh (triangle + barycentric), paired with the
    // frozen closest point on the target for the forward direction
    struct ExtSample {
        int32_t tri;
        double b1, b2;  // weights of vertices 1 and 2; vertex 0 gets 1-b1-b2
    };
    std::vector<ExtSample> ext_samples;

    // samples on the target surface with their frozen closest extracted
    // triangle and projection region
    struct TgtSample {
        Vec3 point;
        int32_t tri;
        int region;
    };
    std::vector<TgtSample> tgt_samples;

    // volume samples for the SDF loss: frozen closest triangle, region, sign
    struct SdfSample {
        Vec3 point;
        double target_sdf;
        int32_t tri;
        int region;
        double sign;  // extracted-mesh inside/outside at freeze time
    };
    std::vector<SdfSample> sdf_samples;
    bool used_winding_fallback = false;
};

// Builds the frozen context from the numeric mesh at the current iterate.
ObjectiveCtx build_objective_ctx(const TriMesh& mesh, const TargetShape& target,
                                 const ObjectiveConfig& cfg, uint64_t iteration);

// ---- individual loss terms (generic over the scalar type) ----

// Eq. 8: sum over dual vertices of the mean absolute deviation of the
// distances to the loop's edge crossings.
template <class T>
T loss_dev(const QuadMeshT<T>& mesh);

// Eq. 9 on grid edges, both orientations of every undirected sign-change edge.
template <class T>
T loss_sign(std::span<const T> sdf, const IVec3& res);

// MSE between target SDF and extracted-mesh SDF at the frozen volume samples.
template <class T>
T loss_sdf(const ObjectiveCtx& ctx, const TriMeshT<T>& mesh, double sentinel);

// Symmetric mean squared closest-point distance between surface samples.
template <class T>
T loss_surface_points(const ObjectiveCtx& ctx, const TriMeshT<T>& mesh, const TargetShape& target,
                      double sentinel);

// Equilateral-edge regularizer: mean over triangles of the squared deviation
// of their edge lengths from the global mean edge length.
template <class T>
T reg_edge(const TriMeshT<T>& mesh);

// Formula core of reg_edge on explicit per-triangle edge lengths, with the
// mean taken over the unique edge multiset given.
double reg_edge_lengths(std::span<const std::array<double, 3>> tri_lengths,
                        std::span<const double> unique_lengths);

// Developability energy: smallest eigenvalue of the area-weighted face-normal
// covariance around each interior vertex.
template <class T>
T reg_developable(const TriMeshT<T>& mesh);

template <class T>
struct LossBreakdown {
    T surface_points{};
    T sdf{};
    T dev{};
    T sign{};
    T edge{};
    T developable{};
};

// Full objective; w_sign and w_edge are the already-scheduled values for this
// iteration.
template <class T>
T total_loss(const LossBreakdown<T>& b, const LossWeights& w, double w_sign, double w_edge);

// Evaluates every term. The quad mesh provides provenance for loss_dev; the
// triangle mesh is the training split of the same extraction.
template <class T>
LossBreakdown<T> evaluate_losses(const ObjectiveCtx& ctx, const QuadMeshT<T>& quads,
                                 const TriMeshT<T>& tris, std::span<const T> sdf,
                                 const IVec3& res, const TargetShape& target,
                                 const ObjectiveConfig& cfg, const LossWeights& w);

// ---- evaluation metrics ----

struct MetricsConfig {
    int n_samples = 100000;
    double f1_threshold = 0.003;
    double edge_dot_threshold = 0.2;
    int edge_knn = 10;
    double inaccurate_normal_deg = 5.0;
    uint64_t seed = 24;
    bool with_self_intersections = true;
};

struct MetricReport {
    double cd = 0;
    double f1 = 0;
    double ecd = 0;
    double ef1 = 0;
    double in5 = 0;               // percent
    double ar_gt4_pct = 0;
    double rr_gt4_pct = 0;
    double min_angle_lt10_pct = 0;
    double si_pct = 0;
    double nv_pct = 0;
    double ne_pct = 0;
    double mean_min_angle = 0;
    double mean_max_angle = 0;
    int64_t num_vertices = 0;
    int64_t num_triangles = 0;

    std::string to_json() const;
};

MetricReport metrics(const TriMesh& mesh, const TargetShape& target, const MetricsConfig& cfg);

// smallest eigenvalue of a symmetric 3x3 matrix, packed (xx,yy,zz,xy,xz,yz);
// the Var overload registers the derivative through the eigenvector outer
// product
double smallest_eig_sym3(const std::array<double, 6>& c);
Var smallest_eig_sym3(const std::array<Var, 6>& c);

}  // namespace flexi
