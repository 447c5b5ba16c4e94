#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace critedge {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Implicit equation F(x, y) = 0 near (0, 0); x in R^n with the max norm, y in R^m with the
/// Euclidean norm.
struct IftProblem {
    std::function<Vec(const Vec& x, const Vec& y)> map;
    std::function<Mat(const Vec& x, const Vec& y)> dy;  // central differences when empty
    std::function<Mat(const Vec& x, const Vec& y)> dx;  // central differences when empty
    Eigen::Index n = 0, m = 0;
    double h_x = 0, h_y = 0;
    double c1 = 0;  // computed when zero
    double c2 = 0;  // sampled when zero
};

struct IftOptions {
    double tol = 1e-13;
    int max_iter = 200;
    int samples = 64;
    double slack = 0.0;
    std::uint64_t seed = 1;
    bool newton_fallback = true;
};

struct IftCertificate {
    double c1 = 0, c2 = 0;
    double h_x = 0, h_y = 0, h_x_tilde = 0;
    double contraction = 0;  // sampled sup |I - D0^-1 DyF|
    double lipschitz_bound = 0;  // 2 c1 c2
    int iterations = 0;
    bool newton_used = false;
    double residual = 0;
    std::vector<double> steps;  // |g_{n+1} - g_n|
};

struct IftResult {
    Vec y;
    IftCertificate cert;
};

/// Sampled sup of |I - D_yF(0,0)^-1 D_yF(x,y)| over the box of radii (h_x, h_y).
double sampled_contraction(const IftProblem& p, const IftOptions& opt = {});

/// Constants of the quantitative IFT without solving; throws ContractionFailed.
IftCertificate ift_certify(const IftProblem& p, const IftOptions& opt = {});

/// Chord iteration for one control value under an existing certificate.
IftResult ift_solve(const IftProblem& p, const IftCertificate& cert, const Vec& x_target, const IftOptions& opt = {});

/// Solve F(x_target, y) = 0 by y <- y - D_yF(0,0)^-1 F(x_target, y) from y = 0.
/// Throws ContractionFailed or RadiusExceeded.
IftResult quantitative_ift(const IftProblem& p, const Vec& x_target, const IftOptions& opt = {});

/// Central-difference Jacobians used when the problem omits them.
Mat jacobian_y(const IftProblem& p, const Vec& x, const Vec& y);
Mat jacobian_x(const IftProblem& p, const Vec& x, const Vec& y);

/// Upper bound for the operator norm from (R^n, max) to (R^m, Euclidean).
double norm_inf_to_2(const Mat& a);

}  // namespace critedge
