#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "flexicubes/diff.hpp"
#include "flexicubes/grid.hpp"
#include "flexicubes/objectives.hpp"
#include "flexicubes/octree.hpp"
#include "flexicubes/surface.hpp"
#include "flexicubes/targets.hpp"

namespace flexi {

struct FitConfig {
    int resolution = 32;
    int iterations = 1000;
    double learning_rate = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    LossWeights weights;
    ObjectiveConfig objective;
    uint64_t seed = 1;
    std::string target_spec = "builtin:sphere";
    Vec3 target_rotate_deg{0, 0, 0};

    // optional second phase with the equilateral-edge regularizer ramping
    // linearly from 0 to phase2_edge_weight
    int phase2_steps = 0;
    double phase2_edge_weight = 100.0;

    double init_sphere_radius = 0.5;
    bool mc_baseline = false;  // classic MC extraction, optimizing sdf and deform only
    int max_empty_iters = 25;

    std::string csv_path;
    std::string checkpoint_path;
};

struct AdamState {
    std::vector<double> m, v;
    int64_t t = 0;

    void init(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        t = 0;
    }
};

struct FitState {
    ScalarGrid grid;
    FlexParams params;
    AdamState adam_sdf, adam_deform, adam_alpha, adam_beta, adam_gamma;
    int64_t iteration = 0;
    std::vector<double> loss_history;
};

FitState make_initial_state(const FitConfig& cfg);

struct StepInfo {
    LossBreakdown<double> terms;
    double total = 0;
    double w_sign = 0;
    double w_edge = 0;
    bool empty_extraction = false;
    bool nonfinite = false;
};

// One optimization step (extraction, losses, backward, Adam update).
// `sample_iter` seeds the per-iteration sampling streams; `w_sign` and
// `w_edge` are the already-scheduled weights for this step.
StepInfo fit_step(FitState& st, const FitConfig& cfg, const TargetShape& target,
                  int64_t sample_iter, double w_sign, double w_edge, Tape& tape);

struct FitResult {
    FitState state;
    QuadMesh quads;
    TriMesh mesh_final;     // split along the winning diagonals
    TriMesh mesh_training;  // with midpoint vertices
    int exit_code = 0;      // 0 ok, 3 non-finite loss abort
    std::string abort_reason;
};

FitResult fit(const FitConfig& cfg, const TargetShape* target_override = nullptr);

// Bit-exact checkpoints (grid snapshot, flexible weights, Adam moments).
void save_checkpoint(const FitState& st, const std::string& path);
FitState load_checkpoint(const std::string& path);

const char* csv_header();

// ---- adaptive octree fitting ----

struct OctreeFitConfig {
    FitConfig base;          // base.resolution must be a power of two
    int extra_depth = 3;     // refinement levels below the base grid
    double refine_threshold = 0.04;
    double ema_decay = 0.9;
    int rounds = -1;         // default: extra_depth + 1
};

struct OctreeFitState {
    Octree tree;
    // flat parameter stores aligned with the tree registries (append-only)
    std::vector<double> sdf;         // per vertex slot
    std::vector<Vec3> deform_raw;    // per vertex slot; constrained vertices stay zero
    std::vector<double> alpha_raw;   // 8 per cell slot
    std::vector<double> beta_raw;    // 12 per cell slot
    std::vector<double> gamma_raw;   // per cell slot
    std::vector<double> vertex_h;    // deformation bound scale per vertex
    std::vector<double> cell_loss_ema;
    std::vector<uint8_t> cell_has_ema;
    AdamState adam_sdf, adam_deform, adam_alpha, adam_beta, adam_gamma;
    int64_t iteration = 0;

    OctreeFitState(int base_res, int extra_depth);
    void sync_sizes();           // grows parameter stores after refinement
    void recompute_vertex_h();
};

// Subdivides every leaf whose running loss average exceeds the threshold.
// New sdf values come from trilinear interpolation of the parent corners;
// flexible parameters start at zero. Returns the number of cells refined.
int refine_and_continue(OctreeFitState& st, double threshold);

// numeric extraction of the current octree state; `constrained_projection`
// exists so tests can demonstrate the cracks that appear without it
QuadMesh octree_extract_numeric(const OctreeFitState& st, bool constrained_projection = true);

struct OctreeFitResult {
    QuadMesh quads;
    TriMesh mesh_final;
    int exit_code = 0;
    std::string abort_reason;
};

OctreeFitResult fit_octree(const OctreeFitConfig& cfg, const TargetShape& target);

// One octree optimization step; exposed for the refinement tests.
StepInfo octree_fit_step(OctreeFitState& st, const FitConfig& cfg, const TargetShape& target,
                         int64_t sample_iter, double w_sign, Tape& tape);

}  // namespace flexi
