#include "flexicubes/targets.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace flexi {

Vec3 TargetShape::normal_at(const Vec3& p) const {
    const double h = 1e-6;
    Vec3 g{sdf({p.x + h, p.y, p.z}) - sdf({p.x - h, p.y, p.z}),
           sdf({p.x, p.y + h, p.z}) - sdf({p.x, p.y - h, p.z}),
           sdf({p.x, p.y, p.z + h}) - sdf({p.x, p.y, p.z - h})};
    double n = norm(g);
    return n > 0 ? g / n : Vec3{0, 0, 1};
}

namespace {

class SphereShape : public TargetShape {
public:
    explicit SphereShape(double r) : r_(r) {}
    double sdf(const Vec3& p) const override { return norm(p) - r_; }
    Vec3 closest_point(const Vec3& p) const override {
        double n = norm(p);
        if (n < 1e-12) return {r_, 0, 0};
        return p * (r_ / n);
    }
    void sample_surface(Rng& rng, int n, std::vector<Vec3>& pts,
                        std::vector<Vec3>& normals) const override {
        for (int i = 0; i < n; ++i) {
            Vec3 d = rng.unit_vector();
            pts.push_back(d * r_);
            normals.push_back(d);
        }
    }
    Aabb bounds() const override {
        Aabb b;
        b.expand({-r_, -r_, -r_});
        b.expand({r_, r_, r_});
        return b;
    }
    std::string describe() const override { return "sphere"; }

private:
    double r_;
};

class BoxShape : public TargetShape {
public:
    explicit BoxShape(Vec3 half) : h_(half) {}
    double sdf(const Vec3& p) const override {
        Vec3 q{std::fabs(p.x) - h_.x, std::fabs(p.y) - h_.y, std::fabs(p.z) - h_.z};
        Vec3 qp{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
        return norm(qp) + std::min(std::max(q.x, std::max(q.y, q.z)), 0.0);
    }
    Vec3 closest_point(const Vec3& p) const override {
        Vec3 c{std::clamp(p.x, -h_.x, h_.x), std::clamp(p.y, -h_.y, h_.y),
               std::clamp(p.z, -h_.z, h_.z)};
        if (c.x != p.x || c.y != p.y || c.z != p.z) return c;
        // inside: project to the nearest face
        double dx = h_.x - std::fabs(p.x), dy = h_.y - std::fabs(p.y), dz = h_.z - std::fabs(p.z);
        Vec3 q = p;
        if (dx <= dy && dx <= dz)
            q.x = p.x >= 0 ? h_.x : -h_.x;
        else if (dy <= dz)
            q.y = p.y >= 0 ? h_.y : -h_.y;
        else
            q.z = p.z >= 0 ? h_.z : -h_.z;
        return q;
    }
    void sample_surface(Rng& rng, int n, std::vector<Vec3>& pts,
                        std::vector<Vec3>& normals) const override {
        double ax = h_.y * h_.z, ay = h_.x * h_.z, az = h_.x * h_.y;
        double total = ax + ay + az;
        for (int i = 0; i < n; ++i) {
            double u = rng.uniform() * total;
            int axis = u < ax ? 0 : (u < ax + ay ? 1 : 2);
            double side = rng.sign();
            Vec3 p, nn{0, 0, 0};
            p[axis] = side * h_[axis];
            nn[axis] = side;
            int b = (axis + 1) % 3, c = (axis + 2) % 3;
            p[b] = rng.uniform(-h_[b], h_[b]);
            p[c] = rng.uniform(-h_[c], h_[c]);
            pts.push_back(p);
            normals.push_back(nn);
        }
    }
    Aabb bounds() const override {
        Aabb b;
        b.expand(-1.0 * h_);
        b.expand(h_);
        return b;
    }
    std::string describe() const override { return "box"; }

private:
    Vec3 h_;
};

class TorusShape : public TargetShape {
public:
    TorusShape(double R, double r) : R_(R), r_(r) {}
    double sdf(const Vec3& p) const override {
        double q = std::sqrt(p.x * p.x + p.y * p.y) - R_;
        return std::sqrt(q * q + p.z * p.z) - r_;
    }
    Vec3 closest_point(const Vec3& p) const override {
        double len = std::sqrt(p.x * p.x + p.y * p.y);
        Vec3 ring = len > 1e-12 ? Vec3{p.x * R_ / len, p.y * R_ / len, 0} : Vec3{R_, 0, 0};
        Vec3 d = p - ring;
        double dn = norm(d);
        if (dn < 1e-12) return ring + Vec3{0, 0, r_};
        return ring + d * (r_ / dn);
    }
    void sample_surface(Rng& rng, int n, std::vector<Vec3>& pts,
                        std::vector<Vec3>& normals) const override {
        // rejection in the tube angle keeps the density uniform in area
        int made = 0;
        while (made < n) {
            double u = rng.uniform(0.0, 2.0 * M_PI);
            double v = rng.uniform(0.0, 2.0 * M_PI);
            double accept = (R_ + r_ * std::cos(v)) / (R_ + r_);
            if (rng.uniform() > accept) continue;
            Vec3 ring{std::cos(u), std::sin(u), 0};
            Vec3 nrm = ring * std::cos(v) + Vec3{0, 0, std::sin(v)};
            pts.push_back(ring * R_ + nrm * r_);
            normals.push_back(nrm);
            ++made;
        }
    }
    Aabb bounds() const override {
        Aabb b;
        b.expand({-(R_ + r_), -(R_ + r_), -r_});
        b.expand({R_ + r_, R_ + r_, r_});
        return b;
    }
    std::string describe() const override { return "torus"; }

private:
    double R_, r_;
};

// rigid rotation + uniform scale + translation of a base shape
class TransformedShape : public TargetShape {
public:
    TransformedShape(std::unique_ptr<TargetShape> base, Mat3 rot, double scale, Vec3 offset)
        : base_(std::move(base)), rot_(rot), inv_(rot.transposed()), scale_(scale),
          offset_(offset) {}
    double sdf(const Vec3& p) const override {
        return scale_ * base_->sdf(inv_ * ((p - offset_) / scale_));
    }
    Vec3 closest_point(const Vec3& p) const override {
        Vec3 q = base_->closest_point(inv_ * ((p - offset_) / scale_));
        return rot_ * (q * scale_) + offset_;
    }
    void sample_surface(Rng& rng, int n, std::vector<Vec3>& pts,
                        std::vector<Vec3>& normals) const override {
        std::vector<Vec3> p0, n0;
        base_->sample_surface(rng, n, p0, n0);
        for (int i = 0; i < n; ++i) {
            pts.push_back(rot_ * (p0[i] * scale_) + offset_);
            normals.push_back(rot_ * n0[i]);
        }
    }
    Aabb bounds() const override {
        Aabb b0 = base_->bounds();
        Aabb b;
        for (int c = 0; c < 8; ++c) {
            Vec3 corner{c & 1 ? b0.hi.x : b0.lo.x, c & 2 ? b0.hi.y : b0.lo.y,
                        c & 4 ? b0.hi.z : b0.lo.z};
            b.expand(rot_ * (corner * scale_) + offset_);
        }
        return b;
    }
    std::string describe() const override { return base_->describe() + "-transformed"; }

private:
    std::unique_ptr<TargetShape> base_;
    Mat3 rot_, inv_;
    double scale_;
    Vec3 offset_;
};

// union (op=0) or difference a\b (op=1); boolean combinations of distance
// fields are exact in sign, approximate in magnitude near the seams
class BooleanShape : public TargetShape {
public:
    BooleanShape(std::unique_ptr<TargetShape> a, std::unique_ptr<TargetShape> b, int op,
                 std::string name)
        : a_(std::move(a)), b_(std::move(b)), op_(op), name_(std::move(name)) {}

    double sdf(const Vec3& p) const override {
        double sa = a_->sdf(p), sb = b_->sdf(p);
        return op_ == 0 ? std::min(sa, sb) : std::max(sa, -sb);
    }
    Vec3 closest_point(const Vec3& p) const override {
        double sa = a_->sdf(p), sb = b_->sdf(p);
        if (op_ == 0) return sa <= sb ? a_->closest_point(p) : b_->closest_point(p);
        return sa >= -sb ? a_->closest_point(p) : b_->closest_point(p);
    }
    void sample_surface(Rng& rng, int n, std::vector<Vec3>& pts,
                        std::vector<Vec3>& normals) const override {
        // rejection sampling per piece; piece weights estimated from the
        // acceptance rates of a pilot batch
        const double eps = 1e-9;
        auto on_surface_a = [&](const Vec3& p) {
            return op_ == 0 ? b_->sdf(p) > -eps : b_->sdf(p) > -eps;
        };
        auto on_surface_b = [&](const Vec3& p) {
            return op_ == 0 ? a_->sdf(p) > -eps : a_->sdf(p) < eps;
        };
        auto accept_rate = [&](TargetShape& s, auto&& pred) {
            std::vector<Vec3> tp, tn;
            s.sample_surface(rng, 512, tp, tn);
            int acc = 0;
            for (auto& q : tp) acc += pred(q) ? 1 : 0;
            return acc / 512.0;
        };
        double wa = accept_rate(*a_, on_surface_a) * piece_area(*a_);
        double wb = accept_rate(*b_, on_surface_b) * piece_area(*b_);
        if (wa + wb <= 0) throw std::runtime_error("target: empty boolean surface");
        int made = 0;
        while (made < n) {
            bool pick_a = rng.uniform() * (wa + wb) < wa;
            std::vector<Vec3> tp, tn;
            (pick_a ? a_ : b_)->sample_surface(rng, 1, tp, tn);
            bool ok = pick_a ? on_surface_a(tp[0]) : on_surface_b(tp[0]);
            if (!ok) continue;
            Vec3 nrm = tn[0];
            if (!pick_a && op_ == 1) nrm = -1.0 * nrm;  // carved surface faces inward
            pts.push_back(tp[0]);
            normals.push_back(nrm);
            ++made;
        }
    }
    Aabb bounds() const override {
        Aabb b = a_->bounds();
        if (op_ == 0) b.expand(b_->bounds());
        return b;
    }
    std::string describe() const override { return name_; }

private:
    static double piece_area(const TargetShape& s) {
        Aabb b = s.bounds();
        Vec3 e = b.extent();
        // proxy: box surface area of the bounds, adequate for weighting
        return 2.0 * (e.x * e.y + e.y * e.z + e.z * e.x);
    }
    std::unique_ptr<TargetShape> a_, b_;
    int op_;
    std::string name_;
};

class MeshShape : public TargetShape {
public:
    MeshShape(TriMesh mesh, bool normalize) : mesh_(std::move(mesh)) {
        if (mesh_.tris.empty()) throw std::runtime_error("target: empty mesh");
        if (normalize) {
            Aabb b;
            for (const Vec3& v : mesh_.vertices) b.expand(v);
            Vec3 c = b.center();
            Vec3 e = b.extent();
            double longest = std::max(e.x, std::max(e.y, e.z));
            double s = 1.8 / longest;
            for (Vec3& v : mesh_.vertices) v = (v - c) * s;
        }
        bvh_ = TriBvh(mesh_.vertices, mesh_.tris);
        // cumulative areas for sampling
        areas_.reserve(mesh_.tris.size());
        double acc = 0;
        for (const auto& t : mesh_.tris) {
            Vec3 n = cross(mesh_.vertices[t[1]] - mesh_.vertices[t[0]],
                           mesh_.vertices[t[2]] - mesh_.vertices[t[0]]);
            acc += 0.5 * norm(n);
            areas_.push_back(acc);
        }
        // watertightness decides the signing strategy
        std::vector<std::pair<int64_t, int64_t>> dummy;
        watertight_ = boundary_edge_count() == 0;
        if (!watertight_)
            std::cerr << "warning: target mesh is not watertight; using winding-number signs\n";
    }

    double sdf(const Vec3& p) const override {
        auto hit = bvh_.closest(p);
        double d = std::sqrt(hit.dist2);
        return is_inside(p) ? -d : d;
    }
    Vec3 closest_point(const Vec3& p) const override { return bvh_.closest(p).point; }
    void sample_surface(Rng& rng, int n, std::vector<Vec3>& pts,
                        std::vector<Vec3>& normals) const override {
        double total = areas_.back();
        for (int i = 0; i < n; ++i) {
            double u = rng.uniform() * total;
            size_t ti = std::lower_bound(areas_.begin(), areas_.end(), u) - areas_.begin();
            ti = std::min(ti, areas_.size() - 1);
            const auto& t = mesh_.tris[ti];
            double b0 = rng.uniform(), b1 = rng.uniform();
            if (b0 + b1 > 1) {
                b0 = 1 - b0;
                b1 = 1 - b1;
            }
            const Vec3 &a = mesh_.vertices[t[0]], &b = mesh_.vertices[t[1]],
                       &c = mesh_.vertices[t[2]];
            pts.push_back(a + b0 * (b - a) + b1 * (c - a));
            normals.push_back(normalized(cross(b - a, c - a)));
        }
    }
    Aabb bounds() const override {
        Aabb b;
        for (const Vec3& v : mesh_.vertices) b.expand(v);
        return b;
    }
    std::string describe() const override { return "mesh"; }
    bool watertight() const override { return watertight_; }

    const TriMesh& mesh() const { return mesh_; }
    const TriBvh& bvh() const { return bvh_; }

    bool is_inside(const Vec3& p) const {
        if (watertight_) {
            // parity vote over three fixed directions
            static const Vec3 dirs[3] = {{0.577350269, 0.577350269, 0.577350269},
                                         {-0.274952376, 0.680172737, 0.579585696},
                                         {0.821583836, -0.414134562, 0.391402545}};
            int votes = 0;
            for (const Vec3& d : dirs) votes += (bvh_.count_crossings(p, d) & 1) ? 1 : 0;
            return votes >= 2;
        }
        return winding_number(p) > 0.5;
    }

    double winding_number(const Vec3& p) const {
        double w = 0;
        for (const auto& t : mesh_.tris) {
            Vec3 a = mesh_.vertices[t[0]] - p;
            Vec3 b = mesh_.vertices[t[1]] - p;
            Vec3 c = mesh_.vertices[t[2]] - p;
            double la = norm(a), lb = norm(b), lc = norm(c);
            double num = dot(a, cross(b, c));
            double den = la * lb * lc + dot(a, b) * lc + dot(b, c) * la + dot(c, a) * lb;
            w += 2.0 * std::atan2(num, den);
        }
        return w / (4.0 * M_PI);
    }

private:
    int64_t boundary_edge_count() const {
        std::vector<std::pair<uint64_t, int>> edges;
        auto key = [](int32_t a, int32_t b) {
            if (a > b) std::swap(a, b);
            return (uint64_t(uint32_t(a)) << 32) | uint32_t(b);
        };
        std::vector<uint64_t> all;
        for (const auto& t : mesh_.tris) {
            all.push_back(key(t[0], t[1]));
            all.push_back(key(t[1], t[2]));
            all.push_back(key(t[2], t[0]));
        }
        std::sort(all.begin(), all.end());
        int64_t boundary = 0;
        for (size_t i = 0; i < all.size();) {
            size_t j = i;
            while (j < all.size() && all[j] == all[i]) ++j;
            if (j - i == 1) ++boundary;
            i = j;
        }
        return boundary;
    }

    TriMesh mesh_;
    TriBvh bvh_;
    std::vector<double> areas_;
    bool watertight_ = true;
};

// centers and rescales any shape so the longest bounding-box side matches
std::unique_ptr<TargetShape> normalized_shape(std::unique_ptr<TargetShape> s, double bbox_size) {
    Aabb b = s->bounds();
    Vec3 e = b.extent();
    double longest = std::max(e.x, std::max(e.y, e.z));
    double scale = bbox_size / longest;
    Vec3 offset = -scale * b.center();
    return std::make_unique<TransformedShape>(std::move(s), Mat3::identity(), scale, offset);
}

}  // namespace

std::unique_ptr<TargetShape> make_builtin_target(const std::string& name, Vec3 rotate_deg,
                                                 double bbox_size) {
    std::unique_ptr<TargetShape> base;
    if (name == "sphere") {
        base = std::make_unique<SphereShape>(0.5);
    } else if (name == "box") {
        base = std::make_unique<BoxShape>(Vec3{0.5, 0.5, 0.5});
    } else if (name == "torus") {
        base = std::make_unique<TorusShape>(0.6, 0.25);
    } else if (name == "boxminussphere") {
        // sphere carved out of one corner: sharp concave circular edges
        auto carve = std::make_unique<TransformedShape>(std::make_unique<SphereShape>(0.45),
                                                        Mat3::identity(), 1.0,
                                                        Vec3{0.5, 0.5, 0.5});
        base = std::make_unique<BooleanShape>(std::make_unique<BoxShape>(Vec3{0.5, 0.5, 0.5}),
                                              std::move(carve), 1, "boxminussphere");
    } else if (name == "wedges") {
        auto a = std::make_unique<TransformedShape>(
            std::make_unique<BoxShape>(Vec3{0.55, 0.28, 0.2}), Mat3::rotation_z(M_PI / 6.0), 1.0,
            Vec3{0, 0, 0.14});
        auto b = std::make_unique<TransformedShape>(
            std::make_unique<BoxShape>(Vec3{0.55, 0.28, 0.2}), Mat3::rotation_z(-M_PI / 5.0), 1.0,
            Vec3{0.05, 0, -0.14});
        base = std::make_unique<BooleanShape>(std::move(a), std::move(b), 0, "wedges");
    } else {
        throw std::runtime_error("target: unknown builtin '" + name + "'");
    }

    bool rotated = rotate_deg.x != 0 || rotate_deg.y != 0 || rotate_deg.z != 0;
    if (rotated) {
        Mat3 rot = Mat3::euler_xyz(rotate_deg.x * M_PI / 180.0, rotate_deg.y * M_PI / 180.0,
                                   rotate_deg.z * M_PI / 180.0);
        base = std::make_unique<TransformedShape>(std::move(base), rot, 1.0, Vec3{0, 0, 0});
    }
    return normalized_shape(std::move(base), bbox_size);
}

std::unique_ptr<TargetShape> make_mesh_target(TriMesh mesh, bool normalize) {
    return std::make_unique<MeshShape>(std::move(mesh), normalize);
}

std::unique_ptr<TargetShape> load_target_mesh(const std::string& path, bool normalize) {
    return make_mesh_target(load_obj(path), normalize);
}

std::unique_ptr<TargetShape> resolve_target(const std::string& spec, Vec3 rotate_deg) {
    if (spec.rfind("builtin:", 0) == 0) return make_builtin_target(spec.substr(8), rotate_deg);
    auto t = load_target_mesh(spec);
    if (rotate_deg.x != 0 || rotate_deg.y != 0 || rotate_deg.z != 0)
        throw std::runtime_error("target: rotation is only supported for builtin targets");
    return t;
}

int sign_parity_mismatches(const TargetShape& shape, const TriBvh& bvh, int n_points,
                           uint64_t seed) {
    Rng rng(seed);
    Aabb b = shape.bounds();
    int mism = 0;
    for (int i = 0; i < n_points; ++i) {
        Vec3 p = rng.uniform_in_box(b.lo - Vec3{0.1, 0.1, 0.1}, b.hi + Vec3{0.1, 0.1, 0.1});
        double s = shape.sdf(p);
        if (std::fabs(s) < 1e-6) continue;  // too close to the surface to trust parity
        Vec3 d = rng.unit_vector();
        bool inside_parity = bvh.count_crossings(p, d) & 1;
        if (inside_parity != (s < 0)) ++mism;
    }
    return mism;
}

}  // namespace flexi
