#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flexicubes/grid.hpp"
#include "flexicubes/objectives.hpp"
#include "flexicubes/surface.hpp"
#include "flexicubes/tape.hpp"

namespace flexi {

// Parameter registry for one recorded forward pass. Groups are registered in
// a fixed order (sdf, deform, alpha, beta, gamma) so parameter ids are stable
// across recordings of the same scene.
struct SceneRec {
    int32_t sdf_base = 0, deform_base = 0, alpha_base = 0, beta_base = 0, gamma_base = 0;
    std::vector<Var> sdf;
    std::vector<VarVec3> pos;        // deformed positions
    std::vector<Var> alpha_raw, beta_raw, gamma_raw;

    CellField<Var> field(const IVec3& res) const {
        CellField<Var> f;
        f.res = res;
        f.sdf = sdf;
        f.pos = pos;
        f.alpha_raw = alpha_raw;
        f.beta_raw = beta_raw;
        f.gamma_raw = gamma_raw;
        return f;
    }
};

SceneRec record_scene(Tape& tape, const ScalarGrid& g, const FlexParams& p);

struct SceneGrads {
    std::vector<double> sdf;     // per vertex
    std::vector<double> deform;  // 3 per vertex
    std::vector<double> alpha;   // 8 per cell
    std::vector<double> beta;    // 12 per cell
    std::vector<double> gamma;   // per cell
};

// Reads group gradients out of the tape adjoints after backward().
SceneGrads collect_grads(const Tape& tape, const SceneRec& rec, size_t nverts, size_t ncells);

// ---- finite-difference verification ----

enum class ObjectiveTerm { Total, SurfacePoints, Sdf, Dev, Sign, Edge, Developable };

struct ObjectiveSpec {
    LossWeights weights;
    ObjectiveConfig cfg;
    double w_sign = 0.2;
    double w_edge = 0.0;
    ObjectiveTerm term = ObjectiveTerm::Total;
};

struct GradCheckConfig {
    double step = 1e-5;
    int per_group = 20;
    int trials = 1;
    uint64_t seed = 11;
};

struct GradReport {
    struct Group {
        std::string name;
        double max_rel_err = 0;
        double grad_norm = 0;
        int checked = 0;
        int skipped = 0;
    };
    std::vector<Group> groups;
    double max_rel_err = 0;

    bool pass(double tol) const { return max_rel_err < tol; }
    std::string to_json() const;
};

// Compares reverse-mode gradients of the selected objective term against
// central finite differences through the same frozen sampling structure.
// Parameters whose perturbation would flip a grid sign (changing the
// extraction topology) are skipped and counted.
GradReport grad_check(const ScalarGrid& g, const FlexParams& p, const TargetShape* target,
                      const ObjectiveSpec& spec, const GradCheckConfig& cfg);

// Single forward evaluation of the selected term (used by grad_check and the
// optimizer); T is double or Var. Returns nullopt when the extraction
// topology no longer matches the frozen context.
template <class T>
std::optional<T> objective_forward(const CellField<T>& field, const ObjectiveCtx& ctx,
                                   const TargetShape* target, const ObjectiveSpec& spec,
                                   size_t expected_tris);

}  // namespace flexi
