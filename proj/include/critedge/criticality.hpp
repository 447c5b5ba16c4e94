#pragma once

#include <optional>

#include <Eigen/Dense>

#include "critedge/spectrum.hpp"

namespace critedge {

/// Symmetric 2x2 Hessian of z -> <|A-z|^-2> at the origin, (Re z, Im z) coordinates.
struct Hessian2 {
    double h11 = 0, h12 = 0, h22 = 0;
    double trace() const { return h11 + h22; }
};

struct HessianEigen {
    double lambda1 = 0, lambda2 = 0;  // lambda1 >= lambda2
    double theta = 0;                 // angle of the lambda1 eigenvector, in [0, pi)
    bool tie = false;
};

struct ChiValue {
    double chi = 0;
    double imag_residual = 0;
};

struct Scaling {
    cd gamma;
    double theta = 0;
};

struct CriticalityReport {
    double inv2 = 0;
    cd skew;
    Hessian2 hessian;
    double lambda1 = 0, lambda2 = 0;
    double alpha = 0;
    double theta = 0;
    cd gamma;
    std::optional<double> beta;
    double chi = 0;
    double chi_imag = 0;
    double phi = 0;
    double inv4 = 0;
    double trace_identity = 0;  // 4 <A^-2 A*^-2>, equal to lambda1 + lambda2
    double norm_a = 0, norm_a_inv = 0;
    double frak_c = 0;
    double tol = 0;
    bool is_critical = false;
};

void to_json(nlohmann::json& j, const CriticalityReport& r);

/// <A^-3 (A*)^-1>, the quantity whose phase fixes theta and phi.
cd skew3(const DeformationSpectrum& a);

Hessian2 hessian_at_origin(const DeformationSpectrum& a);
/// Dense escape hatch for non-normal A; uses R = A^-1 in the trace identities.
Hessian2 hessian_at_origin(const Eigen::MatrixXcd& a);

HessianEigen hessian_eigen(const Hessian2& h, double tie_tol = 1e-9);

/// lambda2 / lambda1. Throws DegenerateHessian if lambda1 <= 0.
double shape_alpha(const Hessian2& h);

/// gamma = (Tr H)^{1/2} <|A|^-4>^{-1/4} e^{-i theta}, theta the lambda1 eigen-angle.
Scaling scaling_gamma(const DeformationSpectrum& a);

double beta_offset(const DeformationSpectrum& a, cd z);

double density_quadratic(const DeformationSpectrum& a, const CriticalityReport& report, cd z);

ChiValue chi(const DeformationSpectrum& b);
double alpha_from_chi(double chi);

/// phi = arg<A^-3 A*^-1> / 2 in [0, pi); zero when that trace vanishes.
double rotation_phi(const DeformationSpectrum& a, double zero_tol = 1e-14);

/// B = e^{-i phi} A^-1, entrywise.
DeformationSpectrum rotated_inverse(const DeformationSpectrum& a, double phi);

CriticalityReport verify_criticality(const DeformationSpectrum& a, double frak_c, double tol = 1e-8,
                                     std::optional<cd> z = std::nullopt);

}  // namespace critedge
