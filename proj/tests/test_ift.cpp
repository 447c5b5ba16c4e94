#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "critedge/errors.hpp"
#include "critedge/ift.hpp"

using namespace critedge;

namespace {

IftProblem cubic(double eps, double hx, double hy) {
    IftProblem p;
    p.n = 1;
    p.m = 1;
    p.h_x = hx;
    p.h_y = hy;
    p.map = [eps](const Vec& x, const Vec& y) {
        Vec f(1);
        f(0) = y(0) + eps * y(0) * y(0) * y(0) - x(0);
        return f;
    };
    return p;
}

double cubic_root(double eps, double x) {
    double lo = -10, hi = 10;
    for (int i = 0; i < 200; ++i) {
        double m = 0.5 * (lo + hi);
        (m + eps * m * m * m - x < 0 ? lo : hi) = m;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("identity map is solved in one step") {
    IftProblem p;
    p.n = 2;
    p.m = 2;
    p.h_x = p.h_y = 1;
    p.map = [](const Vec& x, const Vec& y) { return Vec(y - x); };
    Vec x(2);
    x << 0.3, -0.2;
    auto r = quantitative_ift(p, x);
    CHECK((r.y - x).norm() < 1e-14);
    CHECK(r.cert.iterations == 1);
    CHECK(r.cert.c1 == doctest::Approx(1.0));
}

TEST_CASE("small cubic perturbation matches the polynomial root") {
    auto p = cubic(0.1, 0.5, 0.6);
    for (double x : {-0.25, 0.05, 0.2}) {
        Vec xt(1);
        xt << x;
        auto r = quantitative_ift(p, xt);
        CHECK(std::abs(r.y(0) - cubic_root(0.1, x)) < 1e-13);
    }
}

TEST_CASE("iterates decay geometrically") {
    auto p = cubic(0.5, 0.3, 0.5);
    Vec xt(1);
    xt << 0.12;
    auto r = quantitative_ift(p, xt, {1e-15});
    REQUIRE(r.cert.steps.size() >= 3);
    CHECK(r.cert.contraction <= 0.5);
    for (std::size_t k = 0; k < r.cert.steps.size(); ++k)
        CHECK(r.cert.steps[k] <= std::ldexp(r.cert.steps[0], -static_cast<int>(k)) * (1 + 1e-12) + 1e-16);
}

TEST_CASE("solution map is Lipschitz with constant 2 c1 c2") {
    IftProblem p;
    p.n = 3;
    p.m = 2;
    p.h_x = 0.1;
    p.h_y = 0.5;
    p.map = [](const Vec& x, const Vec& y) {
        Vec f(2);
        f(0) = 2 * y(0) + 0.3 * y(1) * y(1) - x(0) - 0.5 * x(1) * x(2);
        f(1) = y(1) - 0.2 * y(0) * y(1) + std::sin(x(2)) - x(1);
        return f;
    };
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    double worst = 0, bound = 0;
    for (int s = 0; s < 50; ++s) {
        Vec a(3), b(3);
        for (int k = 0; k < 3; ++k) a(k) = 0.05 * u(rng), b(k) = 0.05 * u(rng);
        auto ra = quantitative_ift(p, a);
        auto rb = quantitative_ift(p, b);
        bound = ra.cert.lipschitz_bound;
        worst = std::max(worst, (ra.y - rb.y).norm() / (a - b).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= bound);
}

TEST_CASE("contraction and radius errors") {
    auto wide = cubic(1.0, 0.5, 2.0);
    Vec xt(1);
    xt << 0.1;
    CHECK_THROWS_AS(quantitative_ift(wide, xt), ContractionFailed);
    auto p = cubic(0.1, 0.2, 0.5);
    xt << 0.3;
    CHECK_THROWS_AS(quantitative_ift(p, xt), RadiusExceeded);
}
