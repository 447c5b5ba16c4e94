#include "critedge/ift.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "critedge/errors.hpp"

namespace critedge {

namespace {

Mat central(const std::function<Vec(const Vec&)>& f, const Vec& at, Eigen::Index rows) {
    Mat j(rows, at.size());
    Vec p = at;
    for (Eigen::Index k = 0; k < at.size(); ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(at(k)));
        p(k) = at(k) + h;
        Vec fp = f(p);
        p(k) = at(k) - h;
        Vec fm = f(p);
        p(k) = at(k);
        j.col(k) = (fp - fm) / (2 * h);
    }
    return j;
}

double op2(const Mat& a) { return Eigen::JacobiSVD<Mat>(a).singularValues()(0); }

}  // namespace

Mat jacobian_y(const IftProblem& p, const Vec& x, const Vec& y) {
    if (p.dy) return p.dy(x, y);
    return central([&](const Vec& yy) { return p.map(x, yy); }, y, p.m);
}

Mat jacobian_x(const IftProblem& p, const Vec& x, const Vec& y) {
    if (p.dx) return p.dx(x, y);
    return central([&](const Vec& xx) { return p.map(xx, y); }, x, p.m);
}

double norm_inf_to_2(const Mat& a) { return a.cwiseAbs().rowwise().sum().norm(); }

namespace {

// random points of the box plus its corners along each axis
template <class Fn>
void for_samples(const IftProblem& p, const IftOptions& opt, Fn&& fn) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> u(-1, 1);
    fn(Vec::Zero(p.n), Vec::Zero(p.m));
    for (int s = 0; s < opt.samples; ++s) {
        Vec x(p.n), y(p.m);
        for (Eigen::Index k = 0; k < p.n; ++k) x(k) = p.h_x * (s % 2 ? (u(rng) < 0 ? -1 : 1) : u(rng));
        for (Eigen::Index k = 0; k < p.m; ++k) y(k) = u(rng);
        if (y.norm() > 0) y *= p.h_y * std::pow(std::abs(u(rng)), 1.0 / p.m) / y.norm();
        fn(x, y);
    }
}

}  // namespace

double sampled_contraction(const IftProblem& p, const IftOptions& opt) {
    const Mat d0 = jacobian_y(p, Vec::Zero(p.n), Vec::Zero(p.m));
    Eigen::FullPivLU<Mat> lu(d0);
    if (!lu.isInvertible()) throw SingularJacobian("D_yF(0,0) is singular");
    double worst = 0;
    for_samples(p, opt, [&](const Vec& x, const Vec& y) {
        Mat e = Mat::Identity(p.m, p.m) - lu.solve(jacobian_y(p, x, y));
        worst = std::max(worst, op2(e));
    });
    return worst;
}

IftCertificate ift_certify(const IftProblem& p, const IftOptions& opt) {
    IftCertificate c;
    const Mat d0 = jacobian_y(p, Vec::Zero(p.n), Vec::Zero(p.m));
    Eigen::FullPivLU<Mat> lu(d0);
    if (!lu.isInvertible()) throw SingularJacobian("D_yF(0,0) is singular");
    c.c1 = p.c1 > 0 ? p.c1 : std::max(1.0, op2(d0.inverse()));
    c.h_x = p.h_x;
    c.h_y = p.h_y;
    c.contraction = sampled_contraction(p, opt);
    if (c.contraction > 0.5 + opt.slack)
        throw ContractionFailed("sampled |I - D0^-1 DyF| = " + std::to_string(c.contraction));
    if (p.c2 > 0) {
        c.c2 = p.c2;
    } else {
        for_samples(p, opt, [&](const Vec& x, const Vec& y) { c.c2 = std::max(c.c2, norm_inf_to_2(jacobian_x(p, x, y))); });
    }
    c.h_x_tilde = c.c2 > 0 ? std::min(p.h_x, p.h_y / (2 * c.c1 * c.c2)) : p.h_x;
    c.lipschitz_bound = 2 * c.c1 * c.c2;
    return c;
}

IftResult ift_solve(const IftProblem& p, const IftCertificate& cert, const Vec& x_target, const IftOptions& opt) {
    IftResult r;
    r.cert = cert;
    auto& c = r.cert;
    c.steps.clear();
    c.newton_used = false;
    const double xn = x_target.size() ? x_target.cwiseAbs().maxCoeff() : 0.0;
    if (xn > c.h_x_tilde * (1 + 1e-12))
        throw RadiusExceeded("|x| = " + std::to_string(xn) + " > " + std::to_string(c.h_x_tilde));
    const Vec y0 = Vec::Zero(p.m);
    Eigen::FullPivLU<Mat> lu(jacobian_y(p, Vec::Zero(p.n), y0));

    Vec y = y0;
    Vec f = p.map(x_target, y);
    int it = 0;
    while (f.norm() > opt.tol && it < opt.max_iter) {
        Vec next = y - lu.solve(f);
        c.steps.push_back((next - y).norm());
        y = next;
        f = p.map(x_target, y);
        ++it;
        if (c.steps.size() > 2 && c.steps.back() >= c.steps[c.steps.size() - 2]) break;
    }
    if (f.norm() > opt.tol && opt.newton_fallback) {
        c.newton_used = true;
        for (int k = 0; k < 50 && f.norm() > opt.tol; ++k) {
            Vec next = y - jacobian_y(p, x_target, y).fullPivLu().solve(f);
            c.steps.push_back((next - y).norm());
            y = next;
            f = p.map(x_target, y);
            ++it;
        }
    }
    c.iterations = it;
    c.residual = f.norm();
    if (!(c.residual <= opt.tol))
        throw NoConvergence("IFT iteration residual " + std::to_string(c.residual));
    if (y.norm() > p.h_y * (1 + 1e-9)) throw RadiusExceeded("solution left the y-ball");
    r.y = y;
    return r;
}

IftResult quantitative_ift(const IftProblem& p, const Vec& x_target, const IftOptions& opt) {
    return ift_solve(p, ift_certify(p, opt), x_target, opt);
}

}  // namespace critedge
