#include "critedge/criticality.hpp"

#include <cmath>
#include <numbers>

#include "critedge/errors.hpp"

namespace critedge {

namespace {

constexpr double kFloor = 1e-300;

Hessian2 hessian_from(cd m3, double i4) {
    return {4.0 * m3.real() + 2.0 * i4, -4.0 * m3.imag(), -4.0 * m3.real() + 2.0 * i4};
}

}  // namespace

void to_json(nlohmann::json& j, const CriticalityReport& r) {
    j = nlohmann::json{{"inv2", r.inv2},
                       {"skew_re", r.skew.real()},
                       {"skew_im", r.skew.imag()},
                       {"h11", r.hessian.h11},
                       {"h12", r.hessian.h12},
                       {"h22", r.hessian.h22},
                       {"lambda1", r.lambda1},
                       {"lambda2", r.lambda2},
                       {"alpha", r.alpha},
                       {"theta", r.theta},
                       {"gamma_re", r.gamma.real()},
                       {"gamma_im", r.gamma.imag()},
                       {"chi", r.chi},
                       {"chi_imag", r.chi_imag},
                       {"phi", r.phi},
                       {"inv4", r.inv4},
                       {"trace_identity", r.trace_identity},
                       {"norm_a", r.norm_a},
                       {"norm_a_inv", r.norm_a_inv},
                       {"frak_c", r.frak_c},
                       {"tol", r.tol},
                       {"is_critical", r.is_critical}};
    if (r.beta) j["beta"] = *r.beta;
}

cd skew3(const DeformationSpectrum& a) {
    a.require_nonzero(kFloor);
    return a.trace([](cd z) {
        cd r = 1.0 / z;
        return r * r * r * std::conj(r);
    });
}

Hessian2 hessian_at_origin(const DeformationSpectrum& a) {
    a.require_nonzero(kFloor);
    cd m3 = skew3(a);
    double i4 = a.trace([](cd z) { return std::pow(std::norm(z), -2); });
    return hessian_from(m3, i4);
}

Hessian2 hessian_at_origin(const Eigen::MatrixXcd& a) {
    if (a.rows() != a.cols() || a.rows() == 0) throw DimensionMismatch("dense A must be square");
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(a);
    if (!lu.isInvertible()) throw ZeroEigenvalue("dense A is singular");
    const Eigen::MatrixXcd r = lu.inverse();
    const Eigen::MatrixXcd rs = r.adjoint();
    const Eigen::MatrixXcd r2 = r * r;
    const double n = static_cast<double>(a.rows());
    cd m3 = (r2 * r * rs).trace() / n;
    double t4 = ((r2 * rs * rs).trace() / n).real();
    return hessian_from(m3, t4);
}

HessianEigen hessian_eigen(const Hessian2& h, double tie_tol) {
    HessianEigen e;
    const double mean = 0.5 * (h.h11 + h.h22);
    const double half = 0.5 * (h.h11 - h.h22);
    const double rad = std::hypot(half, h.h12);
    e.lambda1 = mean + rad;
    e.lambda2 = mean - rad;
    if (rad <= tie_tol * std::abs(e.lambda1)) {
        e.tie = true;
        e.theta = 0.0;
        return e;
    }
    double th = 0.5 * std::atan2(h.h12, half);
    if (th < 0) th += std::numbers::pi;
    if (th >= std::numbers::pi) th -= std::numbers::pi;
    e.theta = th;
    return e;
}

double shape_alpha(const Hessian2& h) {
    auto e = hessian_eigen(h);
    if (!(e.lambda1 > 0)) throw DegenerateHessian("lambda1 = " + std::to_string(e.lambda1));
    return e.lambda2 / e.lambda1;
}

Scaling scaling_gamma(const DeformationSpectrum& a) {
    Hessian2 h = hessian_at_origin(a);
    auto e = hessian_eigen(h);
    if (!(e.lambda1 > 0)) throw DegenerateHessian("lambda1 = " + std::to_string(e.lambda1));
    double i4 = a.trace([](cd z) { return std::pow(std::norm(z), -2); });
    double mag = std::sqrt(h.trace()) / std::pow(i4, 0.25);
    return {std::polar(mag, -e.theta), e.theta};
}

double beta_offset(const DeformationSpectrum& a, cd z) {
    for (auto& l : a.eigenvalues)
        if (std::abs(l - z) < kFloor) throw ZeroEigenvalue("z coincides with an eigenvalue");
    double s = a.trace([z](cd l) { return 1.0 / std::norm(l - z); });
    return std::sqrt(static_cast<double>(a.n)) * (1.0 - s);
}

double density_quadratic(const DeformationSpectrum& a, const CriticalityReport& report, cd z) {
    const cd zz = z / report.gamma;
    for (auto& l : a.eigenvalues)
        if (std::abs(l - zz) < kFloor) throw ZeroEigenvalue("gamma^-1 z coincides with an eigenvalue");
    const double s = a.trace([zz](cd l) { return 1.0 / std::norm(l - zz); });
    if (s < 1.0) return 0.0;
    const double x = z.real(), y = z.imag(), al = report.alpha;
    const double q = (x * x + al * y * y) / (1 + al) +
                     2.0 * (x * x + al * al * y * y) / ((1 + al) * (1 + al));
    return q / (8.0 * std::numbers::pi);
}

ChiValue chi(const DeformationSpectrum& b) {
    cd num = b.trace([](cd z) { return z * z * z * std::conj(z); });
    double den = b.trace([](cd z) { return std::norm(z) * std::norm(z); });
    return {num.real() / den, num.imag() / den};
}

double alpha_from_chi(double c) { return (1.0 - 2.0 * c) / (1.0 + 2.0 * c); }

double rotation_phi(const DeformationSpectrum& a, double zero_tol) {
    cd m3 = skew3(a);
    double scale = a.trace([](cd z) { return std::pow(std::norm(z), -2); });
    if (std::abs(m3) <= zero_tol * scale) return 0.0;
    double phi = 0.5 * std::arg(m3);
    if (phi < 0) phi += std::numbers::pi;
    if (phi >= std::numbers::pi) phi -= std::numbers::pi;
    return phi;
}

DeformationSpectrum rotated_inverse(const DeformationSpectrum& a, double phi) {
    a.require_nonzero(kFloor);
    DeformationSpectrum b = a;
    const cd rot = std::polar(1.0, -phi);
    for (auto& z : b.eigenvalues) z = rot / z;
    return b;
}

CriticalityReport verify_criticality(const DeformationSpectrum& a, double frak_c, double tol,
                                     std::optional<cd> z) {
    a.validate();
    a.require_nonzero(kFloor);
    CriticalityReport r;
    r.frak_c = frak_c;
    r.tol = tol;
    r.inv2 = a.trace([](cd l) { return 1.0 / std::norm(l); });
    r.skew = a.trace([](cd l) {
        cd q = 1.0 / l;
        return q * q * std::conj(q);
    });
    r.inv4 = a.trace([](cd l) { return std::pow(std::norm(l), -2); });
    r.trace_identity = 4.0 * a.trace([](cd l) {
                           cd q = 1.0 / l;
                           cd qs = std::conj(q);
                           return q * q * qs * qs;
                       }).real();
    r.hessian = hessian_at_origin(a);
    auto e = hessian_eigen(r.hessian);
    r.lambda1 = e.lambda1;
    r.lambda2 = e.lambda2;
    r.theta = e.theta;
    r.alpha = shape_alpha(r.hessian);
    r.gamma = scaling_gamma(a).gamma;
    r.phi = rotation_phi(a);
    auto c = chi(rotated_inverse(a, r.phi));
    r.chi = c.chi;
    r.chi_imag = c.imag_residual;
    r.norm_a = a.max_modulus();
    r.norm_a_inv = 1.0 / a.min_modulus();
    if (z) r.beta = beta_offset(a, *z);
    const double bound = frak_c * (1.0 + tol);
    r.is_critical = std::abs(r.inv2 - 1.0) <= tol && std::abs(r.skew) <= tol && r.norm_a <= bound &&
                    r.norm_a_inv <= bound;
    return r;
}

}  // namespace critedge
