#include "critedge/dyson.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/tools/toms748_solve.hpp>

#include "critedge/errors.hpp"

namespace critedge {

ScalarProfile profile_of(const DeformationSpectrum& a, cd z) {
    a.validate();
    ScalarProfile p;
    const double inv_n = 1.0 / static_cast<double>(a.n);
    for (std::size_t i = 0; i < a.size(); ++i) {
        p.weight.push_back(static_cast<double>(a.multiplicities[i]) * inv_n);
        p.sq.push_back(std::norm(a.eigenvalues[i] - z));
    }
    return p;
}

ScalarProfile profile_of(const Eigen::MatrixXcd& a, cd z) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXcd d = a - z * Eigen::MatrixXcd::Identity(n, n);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(d);
    ScalarProfile p;
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = svd.singularValues()(i);
        p.weight.push_back(1.0 / static_cast<double>(n));
        p.sq.push_back(s * s);
    }
    return p;
}

namespace {

double s_of(const ScalarProfile& p, double v) {
    double s = 0;
    const double v2 = v * v;
    for (std::size_t i = 0; i < p.sq.size(); ++i) s += p.weight[i] / (p.sq[i] + v2);
    return s;
}

}  // namespace

double scalar_defect(const ScalarProfile& p, double eta, double v) {
    return std::abs(v - eta - v * s_of(p, v));
}

MdeSolution solve_v_profile(const ScalarProfile& p, double eta, const MdeConfig& cfg) {
    if (!(eta > 0)) throw InvalidEta("eta must be positive");
    MdeSolution sol;
    sol.eta = eta;

    double min_sq = INFINITY, d0 = 1.0, i4 = 0;
    for (std::size_t i = 0; i < p.sq.size(); ++i) min_sq = std::min(min_sq, p.sq[i]);
    const bool split = min_sq > 0;
    if (split)
        for (std::size_t i = 0; i < p.sq.size(); ++i) {
            d0 -= p.weight[i] / p.sq[i];
            i4 += p.weight[i] / (p.sq[i] * p.sq[i]);
        }

    // h is increasing in v with a single root in [lo, hi]
    auto eval = [&](double v, double& h, double& dh) {
        const double v2 = v * v;
        if (split) {
            double t = 0, t1 = 0;
            for (std::size_t i = 0; i < p.sq.size(); ++i) {
                const double q = 1.0 / (p.sq[i] + v2);
                const double u = p.weight[i] / p.sq[i] * q;
                t += u;
                t1 += u * q;
            }
            h = d0 + v2 * t - eta / v;
            dh = 2 * v * t - 2 * v * v2 * t1 + eta / v2;
        } else {
            double s = 0, s1 = 0;
            for (std::size_t i = 0; i < p.sq.size(); ++i) {
                const double q = 1.0 / (p.sq[i] + v2);
                s += p.weight[i] * q;
                s1 += p.weight[i] * q * q;
            }
            h = 1.0 - s - eta / v;
            dh = 2 * v * s1 + eta / v2;
        }
    };

    double lo = eta, hi = 0.5 * (eta + std::sqrt(eta * eta + 4.0));
    double v = split && i4 > 0 ? std::max(eta, std::cbrt(eta / i4)) : std::sqrt(lo * hi);
    v = std::clamp(v, lo, hi);
    int it = 0;
    for (; it < cfg.max_iter; ++it) {
        double h, dh;
        eval(v, h, dh);
        if (h < 0)
            lo = v;
        else
            hi = v;
        double next = v - h / dh;
        if (!(next > lo && next < hi)) next = std::sqrt(lo * hi);
        const double step = std::abs(next - v);
        v = next;
        if (step <= 4e-16 * v || hi - lo <= 4e-16 * hi) break;
    }
    sol.v = v;
    sol.iterations = it + 1;
    sol.residual = scalar_defect(p, eta, v);
    sol.m_trace = cd(0.0, v - eta);
    // v - eta cancels in floating point once v is large
    const double scale = std::max(1.0, v);
    sol.converged = sol.residual <= cfg.tol * scale;
    if (!sol.converged && sol.residual > 1e3 * cfg.tol * scale)
        throw NoConvergence("scalar MDE defect " + std::to_string(sol.residual));
    return sol;
}

MdeSolution solve_v_scalar(const DeformationSpectrum& a, cd z, double eta, const MdeConfig& cfg) {
    for (auto& l : a.eigenvalues)
        if (l == z) throw ZeroEigenvalue("z coincides with an eigenvalue");
    auto sol = solve_v_profile(profile_of(a, z), eta, cfg);
    sol.z = z;
    return sol;
}

MdeSolution solve_v_fixed_point(const DeformationSpectrum& a, cd z, double eta, const MdeConfig& cfg) {
    if (!(eta > 0)) throw InvalidEta("eta must be positive");
    const auto p = profile_of(a, z);
    double i4 = 0;
    for (std::size_t i = 0; i < p.sq.size(); ++i) i4 += p.weight[i] / (p.sq[i] * p.sq[i]);
    double v = std::max(eta, std::cbrt(eta / i4));
    double w = 1.0;
    double prev = scalar_defect(p, eta, v);
    MdeSolution sol;
    sol.z = z;
    sol.eta = eta;
    int it = 0;
    // the defect is flat near the edge, so stop on tol * v^2
    auto done = [&] { return prev <= cfg.tol * std::min(1.0, v * v); };
    for (; it < cfg.max_fixed_point_iter && !done(); ++it) {
        const double next = (1 - w) * v + w * (eta + v * s_of(p, v));
        const double d = scalar_defect(p, eta, next);
        if (d > prev && w > 1e-6) {
            w *= 0.5;
            continue;
        }
        v = next;
        prev = d;
    }
    sol.v = v;
    sol.iterations = it;
    sol.residual = prev;
    sol.m_trace = cd(0.0, v - eta);
    sol.converged = done();
    return sol;
}

MdeSolution solve_mde_full(const Eigen::MatrixXcd& a, cd z, double eta, const MdeConfig& cfg) {
    if (!(eta > 0)) throw InvalidEta("eta must be positive");
    const Eigen::Index n = a.rows();
    if (a.cols() != n) throw DimensionMismatch("A must be square");
    Eigen::MatrixXcd h0 = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    h0.topRightCorner(n, n) = a - z * Eigen::MatrixXcd::Identity(n, n);
    h0.bottomLeftCorner(n, n) = h0.topRightCorner(n, n).adjoint();
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(2 * n, 2 * n);

    int evals = 0;
    auto resolvent = [&](cd m) -> Eigen::MatrixXcd {
        ++evals;
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(h0 - (cd(0, eta) + m) * id);
        Eigen::MatrixXcd inv = lu.inverse();
        if (!inv.allFinite()) throw SingularIterate("non-invertible iterate");
        return inv;
    };
    auto trace_of = [&](cd m) { return resolvent(m).trace() / static_cast<double>(2 * n); };

    auto phi = [&](double u) { return trace_of(cd(0, u)).imag() - u; };
    const double hi = 0.5 * (-eta + std::sqrt(eta * eta + 4.0)) * (1 + 1e-10) + 1e-300;
    double u = 0;
    const double f0 = phi(0.0);
    if (f0 > 0) {
        boost::uintmax_t max_it = static_cast<boost::uintmax_t>(cfg.max_iter);
        auto tol = [](double l, double r) { return std::abs(r - l) <= 1e-15 * std::max(1.0, std::abs(r)); };
        auto res = boost::math::tools::toms748_solve(phi, 0.0, hi, f0, phi(hi), tol, max_it);
        u = 0.5 * (res.first + res.second);
    }
    // complex polish of m = <M(m)>
    cd m(0, u);
    Eigen::MatrixXcd mm = resolvent(m);
    cd tr = mm.trace() / static_cast<double>(2 * n);
    for (int k = 0; k < 3 && std::abs(tr - m) > 0.1 * cfg.full_tol; ++k) {
        m = tr;
        mm = resolvent(m);
        tr = mm.trace() / static_cast<double>(2 * n);
    }
    MdeSolution sol;
    sol.z = z;
    sol.eta = eta;
    sol.m_trace = tr;
    sol.v = tr.imag() + eta;
    sol.residual = std::abs(tr - m);
    sol.iterations = evals;
    sol.converged = sol.residual <= cfg.full_tol;
    if (cfg.keep_matrix) sol.m = std::move(mm);
    if (!sol.converged) throw NoConvergence("full MDE defect " + std::to_string(sol.residual));
    return sol;
}

MdeSolution solve_mde_full(const DeformationSpectrum& a, cd z, double eta, const MdeConfig& cfg) {
    a.validate();
    const auto ev = a.expanded();
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(a.n, a.n);
    for (std::int64_t i = 0; i < a.n; ++i) d(i, i) = ev[static_cast<std::size_t>(i)];
    return solve_mde_full(d, z, eta, cfg);
}

double cubic_residual(const DeformationSpectrum& a, const CriticalityReport& report, cd z, double eta,
                      const MdeConfig& cfg) {
    const double v = solve_v_scalar(a, z, eta, cfg).v;
    const double x = z.real(), y = z.imag();
    const auto& h = report.hessian;
    const double q = h.h11 * x * x + 2 * h.h12 * x * y + h.h22 * y * y;
    return std::abs(report.inv4 * v * v * v - 0.5 * q * v - eta);
}

FlowScalings flow_scalings(const DeformationSpectrum& a, std::int64_t n, double delta) {
    a.require_nonzero();
    FlowScalings s;
    s.i4 = a.trace([](cd l) { return std::pow(std::norm(l), -2); });
    s.i4_tilde = std::abs(a.trace([](cd l) {
        cd q = 1.0 / l;
        return q * q * std::conj(q * q);
    }));
    s.c_t = std::pow(s.i4, -0.25);
    const Hessian2 h = hessian_at_origin(a);
    const auto e = hessian_eigen(h);
    s.theta_t = e.theta;
    s.alpha = shape_alpha(h);
    s.gamma_t = std::polar(2.0 * std::pow(s.i4, -0.25) * std::sqrt(s.i4_tilde), -e.theta);
    s.eta_inf = std::pow(static_cast<double>(n), -0.75 - delta);
    s.eta_t = s.eta_inf / s.c_t;
    return s;
}

double rescaled_v(const DeformationSpectrum& a, cd w, const FlowScalings& s, std::int64_t n,
                  const MdeConfig& cfg) {
    const cd z = std::pow(static_cast<double>(n), -0.25) * w / s.gamma_t;
    return std::pow(s.i4, 0.25) * solve_v_scalar(a, z, s.eta_t, cfg).v;
}

double rescaled_cubic_residual(const DeformationSpectrum& a, cd w, const FlowScalings& s, std::int64_t n,
                               const MdeConfig& cfg) {
    const double r = rescaled_v(a, w, s, n, cfg);
    const double x = w.real(), y = w.imag();
    const double coef = 0.5 * (x * x + s.alpha * y * y) / (1 + s.alpha) / std::sqrt(static_cast<double>(n));
    return std::abs(r * r * r - coef * r - s.eta_inf);
}

}  // namespace critedge
