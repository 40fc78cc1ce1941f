#pragma once

#include "flexicubes/vec3.hpp"

namespace flexi {

// Filtered geometric predicates: evaluated in doubles with a forward error
// bound, falling back to exact rational arithmetic when the sign is within
// the bound. Returns -1, 0, or +1.

// Sign of det[b-a, c-a, d-a]; positive when d lies on the side of plane (a,b,c)
// that makes the basis right-handed.
int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

// Sign of the 2D cross product (b-a) x (c-a).
int orient2d(double ax, double ay, double bx, double by, double cx, double cy);

// Exact triangle-triangle intersection test (touching counts as intersecting).
bool tri_tri_intersect(const Vec3& p1, const Vec3& q1, const Vec3& r1, const Vec3& p2,
                       const Vec3& q2, const Vec3& r2);

}  // namespace flexi
