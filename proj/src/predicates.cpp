#include "flexicubes/predicates.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>

namespace flexi {

namespace {

using Rational = boost::multiprecision::cpp_rational;

// Shewchuk-style static filter constants (eps = 2^-53).
constexpr double kO3dBound = 7.7715611723760958e-16;  // (7 + 56 eps) eps
constexpr double kO2dBound = 3.3306690738754716e-16;  // (3 + 16 eps) eps

int sign_of(const Rational& r) { return r.sign(); }

int orient3d_exact(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    Rational adx = Rational(b.x) - Rational(a.x), ady = Rational(b.y) - Rational(a.y),
             adz = Rational(b.z) - Rational(a.z);
    Rational bdx = Rational(c.x) - Rational(a.x), bdy = Rational(c.y) - Rational(a.y),
             bdz = Rational(c.z) - Rational(a.z);
    Rational cdx = Rational(d.x) - Rational(a.x), cdy = Rational(d.y) - Rational(a.y),
             cdz = Rational(d.z) - Rational(a.z);
    Rational det = adx * (bdy * cdz - bdz * cdy) - ady * (bdx * cdz - bdz * cdx) +
                   adz * (bdx * cdy - bdy * cdx);
    return sign_of(det);
}

int orient2d_exact(double ax, double ay, double bx, double by, double cx, double cy) {
    Rational det = (Rational(bx) - Rational(ax)) * (Rational(cy) - Rational(ay)) -
                   (Rational(by) - Rational(ay)) * (Rational(cx) - Rational(ax));
    return sign_of(det);
}

}  // namespace

int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    double adx = b.x - a.x, ady = b.y - a.y, adz = b.z - a.z;
    double bdx = c.x - a.x, bdy = c.y - a.y, bdz = c.z - a.z;
    double cdx = d.x - a.x, cdy = d.y - a.y, cdz = d.z - a.z;

    double det = adx * (bdy * cdz - bdz * cdy) - ady * (bdx * cdz - bdz * cdx) +
                 adz * (bdx * cdy - bdy * cdx);
    double perm = std::fabs(adx) * (std::fabs(bdy * cdz) + std::fabs(bdz * cdy)) +
                  std::fabs(ady) * (std::fabs(bdx * cdz) + std::fabs(bdz * cdx)) +
                  std::fabs(adz) * (std::fabs(bdx * cdy) + std::fabs(bdy * cdx));
    double err = kO3dBound * perm;
    if (det > err) return 1;
    if (det < -err) return -1;
    if (err == 0.0) return 0;
    return orient3d_exact(a, b, c, d);
}

int orient2d(double ax, double ay, double bx, double by, double cx, double cy) {
    double l = (bx - ax) * (cy - ay);
    double r = (by - ay) * (cx - ax);
    double det = l - r;
    double perm = std::fabs(l) + std::fabs(r);
    double err = kO2dBound * perm;
    if (det > err) return 1;
    if (det < -err) return -1;
    if (perm == 0.0) return 0;
    return orient2d_exact(ax, ay, bx, by, cx, cy);
}

namespace {

struct P2 {
    double x, y;
};

int o2(const P2& a, const P2& b, const P2& c) { return orient2d(a.x, a.y, b.x, b.y, c.x, c.y); }

bool point_in_tri_2d(const P2& p, const P2& a, const P2& b, const P2& c) {
    int s = o2(a, b, c);
    if (s == 0) {
        // degenerate triangle: treat as segment containment along its hull
        return false;
    }
    int s1 = o2(a, b, p), s2 = o2(b, c, p), s3 = o2(c, a, p);
    if (s > 0) return s1 >= 0 && s2 >= 0 && s3 >= 0;
    return s1 <= 0 && s2 <= 0 && s3 <= 0;
}

bool seg_seg_intersect_2d(const P2& a, const P2& b, const P2& c, const P2& d) {
    int d1 = o2(c, d, a);
    int d2 = o2(c, d, b);
    int d3 = o2(a, b, c);
    int d4 = o2(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
        ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    auto on_seg = [](const P2& p, const P2& q, const P2& r) {
        // r collinear with pq; is r within the box?
        return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
               std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
    };
    if (d1 == 0 && on_seg(c, d, a)) return true;
    if (d2 == 0 && on_seg(c, d, b)) return true;
    if (d3 == 0 && on_seg(a, b, c)) return true;
    if (d4 == 0 && on_seg(a, b, d)) return true;
    return false;
}

bool coplanar_tri_tri(const Vec3& p1, const Vec3& q1, const Vec3& r1, const Vec3& p2,
                      const Vec3& q2, const Vec3& r2) {
    // project out the dominant normal axis
    Vec3 n = cross(q1 - p1, r1 - p1);
    double nx = std::fabs(n.x), ny = std::fabs(n.y), nz = std::fabs(n.z);
    int drop = nz >= nx && nz >= ny ? 2 : (ny >= nx ? 1 : 0);
    auto proj = [&](const Vec3& v) -> P2 {
        if (drop == 0) return {v.y, v.z};
        if (drop == 1) return {v.z, v.x};
        return {v.x, v.y};
    };
    P2 a[3] = {proj(p1), proj(q1), proj(r1)};
    P2 b[3] = {proj(p2), proj(q2), proj(r2)};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (seg_seg_intersect_2d(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3])) return true;
    for (int i = 0; i < 3; ++i)
        if (point_in_tri_2d(a[i], b[0], b[1], b[2])) return true;
    for (int i = 0; i < 3; ++i)
        if (point_in_tri_2d(b[i], a[0], a[1], a[2])) return true;
    return false;
}

// Interval tests of the Guigue-Devillers formulation once the triangles are in
// canonical position (vertex p2 alone on the positive side of T1's plane, T1
// permuted so the crossing region faces p1).
bool check_min_max(const Vec3& p1, const Vec3& q1, const Vec3& r1, const Vec3& p2,
                   const Vec3& q2, const Vec3& r2) {
    if (orient3d(q1, p2, p1, q2) > 0) return false;
    if (orient3d(p1, p2, r1, r2) > 0) return false;
    return true;
}

bool tri_tri_3d(const Vec3& p1, const Vec3& q1, const Vec3& r1, const Vec3& p2, const Vec3& q2,
                const Vec3& r2, int dp2, int dq2, int dr2) {
    if (dp2 > 0) {
        if (dq2 > 0) return check_min_max(p1, r1, q1, r2, p2, q2);
        if (dr2 > 0) return check_min_max(p1, r1, q1, q2, r2, p2);
        return check_min_max(p1, q1, r1, p2, q2, r2);
    }
    if (dp2 < 0) {
        if (dq2 < 0) return check_min_max(p1, q1, r1, r2, p2, q2);
        if (dr2 < 0) return check_min_max(p1, q1, r1, q2, r2, p2);
        return check_min_max(p1, r1, q1, p2, q2, r2);
    }
    if (dq2 < 0) {
        if (dr2 >= 0) return check_min_max(p1, r1, q1, q2, r2, p2);
        return check_min_max(p1, q1, r1, p2, q2, r2);
    }
    if (dq2 > 0) {
        if (dr2 > 0) return check_min_max(p1, r1, q1, p2, q2, r2);
        return check_min_max(p1, q1, r1, q2, r2, p2);
    }
    if (dr2 > 0) return check_min_max(p1, q1, r1, r2, p2, q2);
    if (dr2 < 0) return check_min_max(p1, r1, q1, r2, p2, q2);
    return coplanar_tri_tri(p1, q1, r1, p2, q2, r2);
}

}  // namespace

bool tri_tri_intersect(const Vec3& p1, const Vec3& q1, const Vec3& r1, const Vec3& p2,
                       const Vec3& q2, const Vec3& r2) {
    int dp1 = orient3d(r2, p2, q2, p1);
    int dq1 = orient3d(r2, p2, q2, q1);
    int dr1 = orient3d(r2, p2, q2, r1);
    if (dp1 != 0 && dp1 == dq1 && dp1 == dr1) return false;

    int dp2 = orient3d(r1, p1, q1, p2);
    int dq2 = orient3d(r1, p1, q1, q2);
    int dr2 = orient3d(r1, p1, q1, r2);
    if (dp2 != 0 && dp2 == dq2 && dp2 == dr2) return false;

    if (dp1 > 0) {
        if (dq1 > 0) return tri_tri_3d(r1, p1, q1, p2, r2, q2, dp2, dr2, dq2);
        if (dr1 > 0) return tri_tri_3d(q1, r1, p1, p2, r2, q2, dp2, dr2, dq2);
        return tri_tri_3d(p1, q1, r1, p2, q2, r2, dp2, dq2, dr2);
    }
    if (dp1 < 0) {
        if (dq1 < 0) return tri_tri_3d(r1, p1, q1, p2, q2, r2, dp2, dq2, dr2);
        if (dr1 < 0) return tri_tri_3d(q1, r1, p1, p2, q2, r2, dp2, dq2, dr2);
        return tri_tri_3d(p1, q1, r1, p2, r2, q2, dp2, dr2, dq2);
    }
    if (dq1 < 0) {
        if (dr1 >= 0) return tri_tri_3d(q1, r1, p1, p2, r2, q2, dp2, dr2, dq2);
        return tri_tri_3d(p1, q1, r1, p2, q2, r2, dp2, dq2, dr2);
    }
    if (dq1 > 0) {
        if (dr1 > 0) return tri_tri_3d(p1, q1, r1, p2, r2, q2, dp2, dr2, dq2);
        return tri_tri_3d(q1, r1, p1, p2, q2, r2, dp2, dq2, dr2);
    }
    if (dr1 > 0) return tri_tri_3d(r1, p1, q1, p2, q2, r2, dp2, dq2, dr2);
    if (dr1 < 0) return tri_tri_3d(r1, p1, q1, p2, r2, q2, dp2, dr2, dq2);
    return coplanar_tri_tri(p1, q1, r1, p2, q2, r2);
}

}  // namespace flexi
