#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flexicubes/vec3.hpp"

namespace flexi {

class Tape;

// Handle to a tape node. Carries its tape so that generic geometry code
// templated on the scalar type works without a global recording context.
struct Var {
    Tape* t = nullptr;
    int32_t i = -1;
    bool valid() const { return t != nullptr; }
};

using VarVec3 = Vec3T<Var>;

// Reverse-mode tape. Each node stores its forward value and the local partial
// derivative w.r.t. each parent; the backward sweep is a single reverse pass
// accumulating adjoints in a fixed order, so repeated backward passes over the
// same tape are bit-identical.
//
// Parameters are leaf nodes registered up front via alloc_params; their
// adjoints after backward() are the gradients. Discrete choices (table
// lookups, branch selections) never enter the tape: callers bake them in as
// piecewise-constant structure.
class Tape {
public:
    Tape() { clear(); }

    void clear() {
        vals_.clear();
        noff_.assign(1, 0);
        pars_.clear();
        pds_.clear();
        n_params_ = 0;
        nonfinite_ = 0;
    }

    size_t size() const { return vals_.size(); }
    size_t num_params() const { return n_params_; }

    // Registers a contiguous block of parameters; must precede any other node.
    // Returns the index of the first node of the block.
    int32_t alloc_params(std::span<const double> values) {
        if (vals_.size() != n_params_)
            throw std::logic_error("tape: parameters must be registered before other nodes");
        int32_t base = (int32_t)vals_.size();
        for (double v : values) push_value(v);
        n_params_ += values.size();
        return base;
    }

    Var param(double v) {
        int32_t base = alloc_params(std::span<const double>(&v, 1));
        return {this, base};
    }

    Var constant(double v) { return {this, push_value(v)}; }

    Var node1(double v, Var a, double da) {
        int32_t id = push_raw(v);
        pars_.push_back(a.i);
        pds_.push_back(da);
        noff_.push_back((uint32_t)pars_.size());
        return {this, id};
    }

    Var node2(double v, Var a, double da, Var b, double db) {
        int32_t id = push_raw(v);
        pars_.push_back(a.i);
        pds_.push_back(da);
        pars_.push_back(b.i);
        pds_.push_back(db);
        noff_.push_back((uint32_t)pars_.size());
        return {this, id};
    }

    Var node_n(double v, std::span<const Var> parents, std::span<const double> partials) {
        int32_t id = push_raw(v);
        for (size_t k = 0; k < parents.size(); ++k) {
            pars_.push_back(parents[k].i);
            pds_.push_back(partials[k]);
        }
        noff_.push_back((uint32_t)pars_.size());
        return {this, id};
    }

    double val(Var v) const { return vals_[v.i]; }
    double val(int32_t i) const { return vals_[i]; }

    bool has_nonfinite() const { return nonfinite_ > 0; }

    // Reverse sweep from `root`. Refuses to differentiate a tape whose forward
    // pass produced non-finite values.
    void backward(Var root) {
        if (root.t != this) throw std::logic_error("tape: root belongs to another tape");
        if (nonfinite_ > 0)
            throw std::runtime_error("tape: forward pass contains " + std::to_string(nonfinite_) +
                                     " non-finite value(s); differentiation refused");
        adj_.assign(vals_.size(), 0.0);
        adj_[root.i] = 1.0;
        for (int32_t i = (int32_t)vals_.size() - 1; i >= (int32_t)n_params_; --i) {
            double a = adj_[i];
            if (a == 0.0) continue;
            for (uint32_t k = noff_[i]; k < noff_[i + 1]; ++k) adj_[pars_[k]] += a * pds_[k];
        }
    }

    double grad(Var v) const { return adj_[v.i]; }
    double grad(int32_t i) const { return adj_[i]; }
    std::span<const double> adjoints() const { return adj_; }

private:
    int32_t push_raw(double v) {
        if (!std::isfinite(v)) ++nonfinite_;
        vals_.push_back(v);
        return (int32_t)vals_.size() - 1;
    }
    // leaf node: empty parent range
    int32_t push_value(double v) {
        int32_t id = push_raw(v);
        noff_.push_back((uint32_t)pars_.size());
        return id;
    }

    std::vector<double> vals_;
    std::vector<uint32_t> noff_;  // noff_[i]..noff_[i+1] indexes pars_/pds_
    std::vector<int32_t> pars_;
    std::vector<double> pds_;
    std::vector<double> adj_;
    size_t n_params_ = 0;
    size_t nonfinite_ = 0;
};

inline double value(const Var& v) { return v.t->val(v); }
inline double value(double v) { return v; }
inline Vec3 value(const VarVec3& v) { return {value(v.x), value(v.y), value(v.z)}; }
inline Vec3 value(const Vec3& v) { return v; }

// ---- arithmetic ----

inline Var operator+(Var a, Var b) { return a.t->node2(a.t->val(a) + b.t->val(b), a, 1.0, b, 1.0); }
inline Var operator+(Var a, double b) { return a.t->node1(a.t->val(a) + b, a, 1.0); }
inline Var operator+(double a, Var b) { return b + a; }

inline Var operator-(Var a, Var b) { return a.t->node2(a.t->val(a) - b.t->val(b), a, 1.0, b, -1.0); }
inline Var operator-(Var a, double b) { return a.t->node1(a.t->val(a) - b, a, 1.0); }
inline Var operator-(double a, Var b) { return b.t->node1(a - b.t->val(b), b, -1.0); }
inline Var operator-(Var a) { return a.t->node1(-a.t->val(a), a, -1.0); }

inline Var operator*(Var a, Var b) {
    double va = a.t->val(a), vb = b.t->val(b);
    return a.t->node2(va * vb, a, vb, b, va);
}
inline Var operator*(Var a, double b) { return a.t->node1(a.t->val(a) * b, a, b); }
inline Var operator*(double a, Var b) { return b * a; }

inline Var operator/(Var a, Var b) {
    double va = a.t->val(a), vb = b.t->val(b);
    return a.t->node2(va / vb, a, 1.0 / vb, b, -va / (vb * vb));
}
inline Var operator/(Var a, double b) { return a.t->node1(a.t->val(a) / b, a, 1.0 / b); }
inline Var operator/(double a, Var b) {
    double vb = b.t->val(b);
    return b.t->node1(a / vb, b, -a / (vb * vb));
}

inline Var& operator+=(Var& a, Var b) { return a = a + b; }
inline Var& operator-=(Var& a, Var b) { return a = a - b; }

// ---- elementary functions ----

inline Var tanh(Var a) {
    double t = std::tanh(a.t->val(a));
    return a.t->node1(t, a, 1.0 - t * t);
}
inline Var exp(Var a) {
    double e = std::exp(a.t->val(a));
    return a.t->node1(e, a, e);
}
inline Var log(Var a) {
    double v = a.t->val(a);
    return a.t->node1(std::log(v), a, 1.0 / v);
}
inline Var sqrt(Var a) {
    double s = std::sqrt(a.t->val(a));
    return a.t->node1(s, a, 0.5 / s);
}
inline Var abs(Var a) {
    double v = a.t->val(a);
    double s = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
    return a.t->node1(std::fabs(v), a, s);
}
inline Var sq(Var a) {
    double v = a.t->val(a);
    return a.t->node1(v * v, a, 2.0 * v);
}
inline double sq(double a) { return a * a; }

inline double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + exp(x)), evaluated stably; derivative is sigmoid(x)
inline Var softplus(Var a) {
    double x = a.t->val(a);
    double v = (x > 0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
    return a.t->node1(v, a, sigmoid_d(x));
}
inline double softplus(double x) { return (x > 0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x))); }

// Piecewise selections; ties resolve to the first argument.
inline Var max(Var a, Var b) { return a.t->val(a) >= b.t->val(b) ? a : b; }
inline Var min(Var a, Var b) { return a.t->val(a) <= b.t->val(b) ? a : b; }

// ---- generic-scalar helpers ----

// Constant of the same scalar kind as the exemplar value.
inline double const_like(double, double c) { return c; }
inline Var const_like(Var exemplar, double c) { return exemplar.t->constant(c); }

template <class T>
inline T vdot(const Vec3T<T>& a, const Vec3T<T>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <class T>
inline T vnorm(const Vec3T<T>& a) {
    using std::sqrt;
    return sqrt(vdot(a, a));
}

inline VarVec3 make_varvec(Tape& t, const Vec3& v) {
    return {t.constant(v.x), t.constant(v.y), t.constant(v.z)};
}

}  // namespace flexi
