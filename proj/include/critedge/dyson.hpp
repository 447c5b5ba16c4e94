#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "critedge/criticality.hpp"
#include "critedge/spectrum.hpp"

namespace critedge {

struct MdeConfig {
    double tol = 1e-12;       // defect of the scalar equation, relative to max(1, v)
    double full_tol = 1e-10;  // defect of the 2N x 2N equation
    int max_iter = 200;
    int max_fixed_point_iter = 2000000;
    bool keep_matrix = false;
};

struct MdeSolution {
    cd z;
    double eta = 0;
    double v = 0;
    cd m_trace;
    double residual = 0;
    int iterations = 0;
    bool converged = false;
    std::optional<Eigen::MatrixXcd> m;
};

struct FlowScalings {
    double i4 = 0;
    double i4_tilde = 0;
    double c_t = 0;
    cd gamma_t;
    double theta_t = 0;
    double alpha = 0;
    double eta_inf = 0;
    double eta_t = 0;
};

/// Weights w_i and squared distances s_i = |lambda_i - z|^2 (or squared singular values).
struct ScalarProfile {
    std::vector<double> weight;
    std::vector<double> sq;
};

ScalarProfile profile_of(const DeformationSpectrum& a, cd z);
ScalarProfile profile_of(const Eigen::MatrixXcd& a, cd z);

/// Defect |v - eta - v <1/(s + v^2)>|.
double scalar_defect(const ScalarProfile& p, double eta, double v);

/// Bracketed Newton on (1 - <1/s>) + v^2 <1/(s(s+v^2))> - eta/v.
MdeSolution solve_v_profile(const ScalarProfile& p, double eta, const MdeConfig& cfg = {});

MdeSolution solve_v_scalar(const DeformationSpectrum& a, cd z, double eta, const MdeConfig& cfg = {});

/// Damped fixed point v <- (1-w) v + w (eta + v S(v)); the slow reference scheme.
MdeSolution solve_v_fixed_point(const DeformationSpectrum& a, cd z, double eta,
                                const MdeConfig& cfg = {});

/// Full 2N x 2N matrix Dyson equation on the imaginary axis.
MdeSolution solve_mde_full(const Eigen::MatrixXcd& a, cd z, double eta, const MdeConfig& cfg = {});
MdeSolution solve_mde_full(const DeformationSpectrum& a, cd z, double eta, const MdeConfig& cfg = {});

/// |<|A|^-4> v^3 - (1/2) (x,y) H (x,y)^T v - eta| with v from the scalar solver.
double cubic_residual(const DeformationSpectrum& a, const CriticalityReport& report, cd z, double eta,
                      const MdeConfig& cfg = {});

FlowScalings flow_scalings(const DeformationSpectrum& a, std::int64_t n, double delta = 0.05);

/// Residual of the rescaled cubic at w, evaluated at z = gamma_t^-1 N^-1/4 w, eta = eta_t.
double rescaled_cubic_residual(const DeformationSpectrum& a, cd w, const FlowScalings& s, std::int64_t n,
                               const MdeConfig& cfg = {});

/// Rescaled solution I4^{1/4} v_t^w.
double rescaled_v(const DeformationSpectrum& a, cd w, const FlowScalings& s, std::int64_t n,
                  const MdeConfig& cfg = {});

}  // namespace critedge
