#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "flexicubes/tape.hpp"

using namespace flexi;

namespace {

double fd(double (*f)(double), double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

}  // namespace

TEST_CASE("elementary ops match finite differences") {
    auto check = [](auto&& builder, double (*ref)(double), double x) {
        Tape t;
        Var v = t.param(x);
        Var y = builder(v);
        t.backward(y);
        double a = t.grad(v);
        double f = fd(ref, x);
        CHECK(std::fabs(a - f) < 1e-6 * std::max(1.0, std::fabs(f)));
    };
    check([](Var v) { return tanh(v); }, [](double x) { return std::tanh(x); }, 0.7);
    check([](Var v) { return exp(v); }, [](double x) { return std::exp(x); }, -0.3);
    check([](Var v) { return log(v); }, [](double x) { return std::log(x); }, 1.7);
    check([](Var v) { return sqrt(v); }, [](double x) { return std::sqrt(x); }, 2.5);
    check([](Var v) { return softplus(v); },
          [](double x) { return std::log1p(std::exp(x)); }, 0.4);
    check([](Var v) { return v * v * v + 2.0 * v - 1.0 / v; },
          [](double x) { return x * x * x + 2 * x - 1 / x; }, 1.3);
}

TEST_CASE("composite gradient through a small expression graph") {
    Tape t;
    Var a = t.param(0.8);
    Var b = t.param(-1.2);
    Var y = tanh(a * b) + sq(a - b) / (1.0 + exp(-a));
    t.backward(y);
    double ga = t.grad(a), gb = t.grad(b);

    auto eval = [](double av, double bv) {
        return std::tanh(av * bv) +
               (av - bv) * (av - bv) / (1.0 + std::exp(-av));
    };
    double h = 1e-6;
    CHECK(std::fabs(ga - (eval(0.8 + h, -1.2) - eval(0.8 - h, -1.2)) / (2 * h)) < 1e-6);
    CHECK(std::fabs(gb - (eval(0.8, -1.2 + h) - eval(0.8, -1.2 - h)) / (2 * h)) < 1e-6);
}

TEST_CASE("parameter registry keeps stable leading ids") {
    Tape t;
    std::vector<double> block{1.0, 2.0, 3.0};
    int32_t base = t.alloc_params(block);
    CHECK(base == 0);
    CHECK(t.num_params() == 3);
    Var v0{&t, base};
    Var v2{&t, base + 2};
    Var y = v0 * v2;
    t.backward(y);
    CHECK(t.grad(v0) == 3.0);
    CHECK(t.grad(v2) == 1.0);
    CHECK(t.grad(base + 1) == 0.0);
    CHECK_THROWS(t.alloc_params(block));  // params must precede other nodes
}

TEST_CASE("two backward passes are bit-identical") {
    Tape t;
    Var a = t.param(0.37);
    Var b = t.param(1.91);
    Var y = tanh(a) * exp(b) + a / b;
    t.backward(y);
    double g1a = t.grad(a), g1b = t.grad(b);
    t.backward(y);
    CHECK(t.grad(a) == g1a);
    CHECK(t.grad(b) == g1b);
}

TEST_CASE("non-finite forward values refuse differentiation") {
    Tape t;
    Var a = t.param(0.0);
    Var y = 1.0 / a;  // inf
    CHECK(t.has_nonfinite());
    CHECK_THROWS_AS(t.backward(y), std::runtime_error);
}

TEST_CASE("piecewise selections differentiate the active branch") {
    Tape t;
    Var a = t.param(2.0);
    Var b = t.param(5.0);
    Var y = max(a, b) + min(a, b) * 2.0;
    t.backward(y);
    CHECK(t.grad(b) == 1.0);
    CHECK(t.grad(a) == 2.0);
    Var z = abs(-a);
    t.backward(z);
    CHECK(t.grad(a) == 1.0);
}
