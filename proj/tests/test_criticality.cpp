#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "critedge/criticality.hpp"
#include "critedge/errors.hpp"
#include "critedge/sampling.hpp"

using namespace critedge;

namespace {

DeformationSpectrum pm_one(std::int64_t n) { return DeformationSpectrum({cd(1, 0), cd(-1, 0)}, {n / 2, n / 2}); }

// finite-difference Hessian of z -> <|A - z|^-2>
Hessian2 fd_hessian(const DeformationSpectrum& a) {
    auto f = [&](double x, double y) { return a.trace([&](cd l) { return 1.0 / std::norm(l - cd(x, y)); }); };
    const double h = 1e-4;
    Hessian2 r;
    r.h11 = (f(h, 0) - 2 * f(0, 0) + f(-h, 0)) / (h * h);
    r.h22 = (f(0, h) - 2 * f(0, 0) + f(0, -h)) / (h * h);
    r.h12 = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h);
    return r;
}

}  // namespace

TEST_CASE("+-1 spectrum is critical with alpha -1/3") {
    auto r = verify_criticality(pm_one(8), 2.0);
    CHECK(r.inv2 == doctest::Approx(1.0));
    CHECK(std::abs(r.skew) < 1e-15);
    CHECK(r.is_critical);
    CHECK(std::abs(r.alpha + 1.0 / 3) < 1e-14);
    CHECK(r.hessian.h11 == doctest::Approx(6.0));
    CHECK(r.hessian.h22 == doctest::Approx(-2.0));
    CHECK(std::abs(r.hessian.h12) < 1e-15);
    CHECK(r.theta == 0.0);
    CHECK(r.chi == doctest::Approx(1.0));
}

TEST_CASE("unbalanced +-1 spectrum is not critical") {
    DeformationSpectrum a({cd(1, 0), cd(-1, 0)}, {3, 6});
    auto r = verify_criticality(a, 2.0);
    CHECK(r.inv2 == doctest::Approx(1.0));
    CHECK(r.skew.real() == doctest::Approx(-1.0 / 3));
    CHECK_FALSE(r.is_critical);
}

TEST_CASE("errors") {
    DeformationSpectrum z({cd(0, 0), cd(1, 0)}, {1, 1});
    CHECK_THROWS_AS(verify_criticality(z, 2.0), ZeroEigenvalue);
    DeformationSpectrum bad({cd(1, 0)}, {2});
    bad.n = 5;
    CHECK_THROWS_AS(verify_criticality(bad, 2.0), DimensionMismatch);
    CHECK_THROWS_AS(shape_alpha(Hessian2{-1, 0, -2}), DegenerateHessian);
}

TEST_CASE("A_c family") {
    for (double c : {0.25, 0.5, 0.75, 1.0}) {
        auto a = ac_family(16, c);
        auto r = verify_criticality(a, 4.0);
        CHECK(r.is_critical);
        CHECK(std::abs(r.alpha - (-1 + 3 * c * c) / (3 - c * c)) < 1e-12);
        CHECK(std::abs(r.alpha - alpha_from_chi(r.chi)) < 1e-12);
    }
    auto r = verify_criticality(ac_family(8, 0.5), 4.0);
    CHECK(std::abs(r.alpha + 1.0 / 11) < 1e-13);
    auto h1 = hessian_at_origin(ac_family(8, 1.0));
    CHECK(h1.h11 == doctest::Approx(h1.h22));
    CHECK(shape_alpha(h1) == doctest::Approx(1.0));
}

TEST_CASE("chi examples") {
    CHECK(chi(pm_one(4)).chi == doctest::Approx(1.0));
    CHECK(alpha_from_chi(1.0) == doctest::Approx(-1.0 / 3));
    DeformationSpectrum q({cd(1, 0), cd(-1, 0), cd(0, 1), cd(0, -1)}, {1, 1, 1, 1});
    CHECK(std::abs(chi(q).chi) < 1e-15);
    CHECK(alpha_from_chi(0.0) == 1.0);
    for (double c : {0.2, 0.6, 0.9}) {
        // four-term closed form over d = +-1 +- ic, B = D^-1
        std::vector<cd> ev;
        cd num = 0;
        double den = 0;
        for (int sx : {1, -1})
            for (int sy : {1, -1}) {
                cd b = 1.0 / cd(sx, sy * c);
                ev.push_back(b);
                num += b * b * b * std::conj(b);
                den += std::pow(std::norm(b), 2);
            }
        auto v = chi(DeformationSpectrum::from_values(ev));
        CHECK(v.chi == doctest::Approx(num.real() / den).epsilon(1e-14));
        CHECK(v.chi == doctest::Approx((1 - c * c) / (1 + c * c)).epsilon(1e-13));
        CHECK(std::abs(v.imag_residual) < 1e-15);
    }
}

TEST_CASE("Hessian matches finite differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto a = random_critical_spectrum(40, seed);
        auto h = hessian_at_origin(a);
        auto f = fd_hessian(a);
        CHECK(h.h11 == doctest::Approx(f.h11).epsilon(1e-5));
        CHECK(h.h22 == doctest::Approx(f.h22).epsilon(1e-5));
        CHECK(h.h12 == doctest::Approx(f.h12).epsilon(1e-5));
    }
}

TEST_CASE("dense Hessian agrees with the diagonal one") {
    auto a = random_critical_spectrum(12, 7);
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(12, 12);
    for (int i = 0; i < 12; ++i) d(i, i) = a.eigenvalues[i];
    auto h1 = hessian_at_origin(a);
    auto h2 = hessian_at_origin(d);
    CHECK(h1.h11 == doctest::Approx(h2.h11));
    CHECK(h1.h12 == doctest::Approx(h2.h12));
    CHECK(h1.h22 == doctest::Approx(h2.h22));
}

TEST_CASE("non-normal example 1") {
    for (double c : {0.1, 1.0, 10.0}) {
        auto h = hessian_at_origin(nonnormal_example1(8, c));
        CHECK(std::abs(shape_alpha(h) + (2 + 2 * c * c) / (6 + 2 * c * c)) < 1e-10);
    }
}

TEST_CASE("eigen-angle and tie rule") {
    auto e = hessian_eigen(Hessian2{6, 0, -2});
    CHECK(e.theta == 0.0);
    CHECK(shape_alpha(Hessian2{6, 0, -2}) == doctest::Approx(-1.0 / 3));
    auto t = hessian_eigen(Hessian2{3, 0, 3});
    CHECK(t.tie);
    CHECK(t.theta == 0.0);
    auto g = hessian_eigen(Hessian2{0, 1, 0});
    CHECK(g.theta == doctest::Approx(std::numbers::pi / 4));
}

TEST_CASE("gamma brings the Hessian to normal form") {
    // along gamma^-1 w the quadratic form is lambda1 x^2 + lambda2 y^2 up to |gamma|^-2
    for (std::uint64_t seed = 11; seed <= 15; ++seed) {
        auto a = random_critical_spectrum(30, seed);
        auto h = hessian_at_origin(a);
        auto e = hessian_eigen(h);
        auto s = scaling_gamma(a);
        auto q = [&](cd w) {
            cd z = w / s.gamma;
            return h.h11 * z.real() * z.real() + 2 * h.h12 * z.real() * z.imag() + h.h22 * z.imag() * z.imag();
        };
        const double g2 = std::norm(s.gamma);
        CHECK(q(1.0) * g2 == doctest::Approx(e.lambda1));
        CHECK(q(cd(0, 1)) * g2 == doctest::Approx(e.lambda2));
        CHECK(std::abs(q(cd(1, 1)) - q(1.0) - q(cd(0, 1))) < 1e-10);
    }
}

TEST_CASE("beta offset") {
    auto a = pm_one(16);
    CHECK(beta_offset(a, 0.0) == doctest::Approx(0.0));
    const double expect = 4.0 * (1 - 0.5 * (1 / 0.81 + 1 / 1.21));
    CHECK(beta_offset(a, 0.1) == doctest::Approx(expect));
    DeformationSpectrum scaled = a;
    for (auto& z : scaled.eigenvalues) z *= 1.5;
    CHECK(beta_offset(scaled, 0.0) == doctest::Approx(4.0 * (1 - 1 / 2.25)));
    CHECK_THROWS_AS(beta_offset(a, 1.0), ZeroEigenvalue);
}

TEST_CASE("density quadratic") {
    auto a = pm_one(16);
    auto r = verify_criticality(a, 2.0);
    CHECK(density_quadratic(a, r, 0.0) == 0.0);
    // alpha < 0: purely imaginary points fall outside the super-level set
    CHECK(density_quadratic(a, r, cd(0, 0.05)) == 0.0);
    CHECK(density_quadratic(a, r, cd(0.05, 0)) > 0.0);
    auto c1 = ac_family(16, 1.0);
    auto r1 = verify_criticality(c1, 4.0);
    const double d0 = density_quadratic(c1, r1, std::polar(0.1, 0.3));
    const double d1 = density_quadratic(c1, r1, std::polar(0.1, 1.1));
    CHECK(d0 == doctest::Approx(d1));
}

TEST_CASE("property: random critical spectra") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0, 2 * std::numbers::pi);
    for (std::uint64_t seed = 100; seed < 300; ++seed) {
        const bool herm = seed % 4 == 0;
        auto a = random_critical_spectrum(24, seed, {4.0, 1.0, herm});
        auto r = verify_criticality(a, 4.0);
        REQUIRE(r.is_critical);
        CHECK(std::abs(r.lambda1 + r.lambda2 - r.trace_identity) <= 1e-10 * r.trace_identity);
        CHECK(r.alpha >= -1.0 / 3 - 1e-9);
        CHECK(r.alpha <= 1.0);
        if (herm) CHECK(std::abs(r.alpha + 1.0 / 3) < 1e-12);
        CHECK(std::abs(r.alpha - alpha_from_chi(r.chi)) < 1e-9);
        CHECK(std::abs(r.chi_imag) < 1e-12);
        CHECK(std::abs(r.gamma) > 0);
        // rotation invariance
        DeformationSpectrum rot = a;
        const cd ph = std::polar(1.0, u(rng));
        for (auto& z : rot.eigenvalues) z *= ph;
        auto rr = verify_criticality(rot, 4.0);
        CHECK(std::abs(rr.alpha - r.alpha) < 1e-10);
        CHECK(std::abs(std::abs(rr.gamma) - std::abs(r.gamma)) < 1e-10);
        // beta scaling covariance
        const double s = 1.3;
        DeformationSpectrum sc = a;
        for (auto& z : sc.eigenvalues) z *= s;
        CHECK(beta_offset(sc, 0.0) ==
              doctest::Approx(std::sqrt(24.0) * (1 - r.inv2 / (s * s))).epsilon(1e-12));
    }
}
