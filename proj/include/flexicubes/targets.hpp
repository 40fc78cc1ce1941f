#pragma once

#include <memory>
#include <string>
#include <vector>

#include "flexicubes/bvh.hpp"
#include "flexicubes/rng.hpp"
#include "flexicubes/surface.hpp"
#include "flexicubes/vec3.hpp"

namespace flexi {

// Ground-truth shape queried by the objectives: either an analytic SDF or a
// watertight triangle mesh with closest-point and sign acceleration.
class TargetShape {
public:
    virtual ~TargetShape() = default;

    virtual double sdf(const Vec3& p) const = 0;
    virtual Vec3 closest_point(const Vec3& p) const = 0;
    virtual void sample_surface(Rng& rng, int n, std::vector<Vec3>& pts,
                                std::vector<Vec3>& normals) const = 0;
    virtual Aabb bounds() const = 0;
    virtual std::string describe() const = 0;
    virtual bool watertight() const { return true; }

    // sdf gradient by central differences, normalized
    Vec3 normal_at(const Vec3& p) const;
};

// Builtin analytic targets: sphere, box, torus, boxminussphere, wedges.
// Rotation (degrees, XYZ euler) is applied first; the shape is then centered
// and scaled so the longest side of its bounding box is `bbox_size`.
std::unique_ptr<TargetShape> make_builtin_target(const std::string& name,
                                                 Vec3 rotate_deg = {0, 0, 0},
                                                 double bbox_size = 1.8);

// Triangle-mesh target. Normalizes to the same convention (centered, longest
// bounding-box side = 1.8) unless normalize = false. Non-watertight input
// falls back to winding-number signing and is flagged.
std::unique_ptr<TargetShape> make_mesh_target(TriMesh mesh, bool normalize = true);
std::unique_ptr<TargetShape> load_target_mesh(const std::string& path, bool normalize = true);

// "builtin:<name>" or a path to an OBJ file.
std::unique_ptr<TargetShape> resolve_target(const std::string& spec, Vec3 rotate_deg = {0, 0, 0});

// Consistency check between sign queries and ray parity on random points;
// returns the number of disagreements (used by tests and target loading).
int sign_parity_mismatches(const TargetShape& shape, const TriBvh& bvh, int n_points,
                           uint64_t seed);

}  // namespace flexi
