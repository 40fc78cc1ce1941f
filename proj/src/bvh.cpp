#include "flexicubes/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace flexi {

TriClosest closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Ericson, Real-Time Collision Detection, 5.1.5
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0 && d2 <= 0) return {a, norm2(p - a), 0};

    Vec3 bp = p - b;
    double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0 && d4 <= d3) return {b, norm2(p - b), 1};

    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        double v = d1 / (d1 - d3);
        Vec3 q = a + v * ab;
        return {q, norm2(p - q), 3};
    }

    Vec3 cp = p - c;
    double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0 && d5 <= d6) return {c, norm2(p - c), 2};

    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        double w = d2 / (d2 - d6);
        Vec3 q = a + w * ac;
        return {q, norm2(p - q), 5};
    }

    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        Vec3 q = b + w * (c - b);
        return {q, norm2(p - q), 4};
    }

    double denom = 1.0 / (va + vb + vc);
    double v = vb * denom, w = vc * denom;
    Vec3 q = a + v * ab + w * ac;
    return {q, norm2(p - q), 6};
}

TriBvh::TriBvh(std::span<const Vec3> vertices, std::span<const std::array<int32_t, 3>> tris)
    : verts_(vertices.begin(), vertices.end()), tris_(tris.begin(), tris.end()) {
    if (tris_.empty()) return;
    order_.resize(tris_.size());
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = (int32_t)i;
    std::vector<Vec3> centroids(tris_.size());
    for (size_t i = 0; i < tris_.size(); ++i) {
        const auto& t = tris_[i];
        centroids[i] =
            (verts_[t[0]] + verts_[t[1]] + verts_[t[2]]) * (1.0 / 3.0);
    }
    nodes_.reserve(2 * tris_.size());
    root_ = build(0, (int32_t)tris_.size(), centroids);
}

int32_t TriBvh::build(int32_t begin, int32_t end, std::vector<Vec3>& centroids) {
    Node n;
    for (int32_t i = begin; i < end; ++i) {
        const auto& t = tris_[order_[i]];
        n.box.expand(verts_[t[0]]);
        n.box.expand(verts_[t[1]]);
        n.box.expand(verts_[t[2]]);
    }
    if (end - begin <= 4) {
        n.begin = begin;
        n.end = end;
        nodes_.push_back(n);
        return (int32_t)nodes_.size() - 1;
    }
    Vec3 ext = n.box.extent();
    int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
    int32_t mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int32_t a, int32_t b) {
                         if (centroids[a][axis] != centroids[b][axis])
                             return centroids[a][axis] < centroids[b][axis];
                         return a < b;
                     });
    int32_t id = (int32_t)nodes_.size();
    nodes_.push_back(n);
    int32_t l = build(begin, mid, centroids);
    int32_t r = build(mid, end, centroids);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
}

void TriBvh::closest_rec(int32_t ni, const Vec3& p, Hit& best) const {
    const Node& n = nodes_[ni];
    if (n.box.dist2(p) >= best.dist2) return;
    if (n.left < 0) {
        for (int32_t i = n.begin; i < n.end; ++i) {
            int32_t ti = order_[i];
            const auto& t = tris_[ti];
            TriClosest c = closest_point_triangle(p, verts_[t[0]], verts_[t[1]], verts_[t[2]]);
            if (c.dist2 < best.dist2) best = {ti, c.point, c.dist2, c.region};
        }
        return;
    }
    double dl = nodes_[n.left].box.dist2(p);
    double dr = nodes_[n.right].box.dist2(p);
    if (dl <= dr) {
        closest_rec(n.left, p, best);
        closest_rec(n.right, p, best);
    } else {
        closest_rec(n.right, p, best);
        closest_rec(n.left, p, best);
    }
}

TriBvh::Hit TriBvh::closest(const Vec3& p) const {
    Hit best;
    if (root_ >= 0) closest_rec(root_, p, best);
    return best;
}

namespace {
// Moller-Trumbore; boundary hits count, callers vote over directions
bool ray_tri(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 e1 = b - a, e2 = c - a;
    Vec3 h = cross(d, e2);
    double det = dot(e1, h);
    if (std::fabs(det) < 1e-14) return false;
    double inv = 1.0 / det;
    Vec3 s = o - a;
    double u = dot(s, h) * inv;
    if (u < 0 || u > 1) return false;
    Vec3 q = cross(s, e1);
    double v = dot(d, q) * inv;
    if (v < 0 || u + v > 1) return false;
    double t = dot(e2, q) * inv;
    return t > 1e-12;
}
}  // namespace

int TriBvh::count_crossings(const Vec3& p, const Vec3& d) const {
    if (root_ < 0) return 0;
    int count = 0;
    std::vector<int32_t> stack{root_};
    // ray box rejection: use a long segment box (cheap and robust enough here)
    while (!stack.empty()) {
        int32_t ni = stack.back();
        stack.pop_back();
        const Node& n = nodes_[ni];
        // slab test
        double tmin = 0, tmax = 1e30;
        bool miss = false;
        for (int axx = 0; axx < 3 && !miss; ++axx) {
            double o = p[axx], dd = d[axx];
            if (std::fabs(dd) < 1e-30) {
                if (o < n.box.lo[axx] || o > n.box.hi[axx]) miss = true;
            } else {
                double t0 = (n.box.lo[axx] - o) / dd;
                double t1 = (n.box.hi[axx] - o) / dd;
                if (t0 > t1) std::swap(t0, t1);
                tmin = std::max(tmin, t0);
                tmax = std::min(tmax, t1);
                if (tmin > tmax) miss = true;
            }
        }
        if (miss) continue;
        if (n.left < 0) {
            for (int32_t i = n.begin; i < n.end; ++i) {
                const auto& t = tris_[order_[i]];
                if (ray_tri(p, d, verts_[t[0]], verts_[t[1]], verts_[t[2]])) ++count;
            }
        } else {
            stack.push_back(n.left);
            stack.push_back(n.right);
        }
    }
    return count;
}

void TriBvh::collect_overlaps(const Aabb& box, std::vector<int32_t>& out) const {
    if (root_ < 0) return;
    std::vector<int32_t> stack{root_};
    while (!stack.empty()) {
        int32_t ni = stack.back();
        stack.pop_back();
        const Node& n = nodes_[ni];
        if (!n.box.overlaps(box)) continue;
        if (n.left < 0) {
            for (int32_t i = n.begin; i < n.end; ++i) out.push_back(order_[i]);
        } else {
            stack.push_back(n.left);
            stack.push_back(n.right);
        }
    }
}

std::vector<std::pair<int32_t, int32_t>> TriBvh::overlap_pairs() const {
    std::vector<std::pair<int32_t, int32_t>> pairs;
    std::vector<int32_t> hits;
    for (int32_t ti = 0; ti < (int32_t)tris_.size(); ++ti) {
        Aabb box;
        const auto& t = tris_[ti];
        box.expand(verts_[t[0]]);
        box.expand(verts_[t[1]]);
        box.expand(verts_[t[2]]);
        hits.clear();
        collect_overlaps(box, hits);
        for (int32_t o : hits)
            if (o > ti) pairs.emplace_back(ti, o);
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

PointKd::PointKd(std::vector<Vec3> pts) : pts_(std::move(pts)) {
    if (pts_.empty()) return;
    order_.resize(pts_.size());
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = (int32_t)i;
    nodes_.reserve(pts_.size());
    root_ = build(0, (int32_t)pts_.size(), 0);
}

int32_t PointKd::build(int32_t begin, int32_t end, int depth) {
    if (begin >= end) return -1;
    int axis = depth % 3;
    int32_t mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int32_t a, int32_t b) {
                         if (pts_[a][axis] != pts_[b][axis]) return pts_[a][axis] < pts_[b][axis];
                         return a < b;
                     });
    Node n;
    n.axis = axis;
    n.index = order_[mid];
    int32_t id = (int32_t)nodes_.size();
    nodes_.push_back(n);
    int32_t l = build(begin, mid, depth + 1);
    int32_t r = build(mid + 1, end, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
}

void PointKd::nearest_rec(int32_t ni, const Vec3& q, Nn& best) const {
    if (ni < 0) return;
    const Node& n = nodes_[ni];
    const Vec3& p = pts_[n.index];
    double d2 = norm2(q - p);
    if (d2 < best.dist2) best = {n.index, d2};
    double delta = q[n.axis] - p[n.axis];
    int32_t near = delta <= 0 ? n.left : n.right;
    int32_t far = delta <= 0 ? n.right : n.left;
    nearest_rec(near, q, best);
    if (delta * delta < best.dist2) nearest_rec(far, q, best);
}

PointKd::Nn PointKd::nearest(const Vec3& q) const {
    Nn best;
    nearest_rec(root_, q, best);
    return best;
}

void PointKd::k_nearest(const Vec3& q, int k, std::vector<int32_t>& out) const {
    // small-k selection by repeated scan of a bounded priority set
    using Entry = std::pair<double, int32_t>;
    std::priority_queue<Entry> heap;  // max-heap on dist2
    // recursive traversal with pruning against the current kth distance
    struct Ctx {
        const PointKd* kd;
        const Vec3& q;
        int k;
        std::priority_queue<Entry>& heap;
        void visit(int32_t ni) {
            if (ni < 0) return;
            const Node& n = kd->nodes_[ni];
            const Vec3& p = kd->pts_[n.index];
            double d2 = norm2(q - p);
            if ((int)heap.size() < k)
                heap.emplace(d2, n.index);
            else if (d2 < heap.top().first) {
                heap.pop();
                heap.emplace(d2, n.index);
            }
            double delta = q[n.axis] - p[n.axis];
            int32_t near = delta <= 0 ? n.left : n.right;
            int32_t far = delta <= 0 ? n.right : n.left;
            visit(near);
            if ((int)heap.size() < k || delta * delta < heap.top().first) visit(far);
        }
    } ctx{this, q, k, heap};
    ctx.visit(root_);
    out.clear();
    while (!heap.empty()) {
        out.push_back(heap.top().second);
        heap.pop();
    }
    std::reverse(out.begin(), out.end());
}

}  // namespace flexi
