#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "critedge/dyson.hpp"
#include "critedge/sampling.hpp"
#include "critedge/spectrum.hpp"

namespace critedge {

/// Eigenvalues of a general complex matrix (LAPACK zgeev, no vectors).
std::vector<cd> eigenvalues_of(const Eigen::MatrixXcd& m);
/// Singular values, ascending.
std::vector<double> singular_values_of(const Eigen::MatrixXcd& m);
/// 2N x 2N matrix [[0, Y - z], [(Y - z)*, 0]].
Eigen::MatrixXcd hermitization(const Eigen::MatrixXcd& y, cd z = 0);
/// Nonnegative eigenvalues of the Hermitization, ascending; equal to the singular values of Y - z.
std::vector<double> hermitized_singular_values(const Eigen::MatrixXcd& y, cd z = 0);

Eigen::MatrixXcd diagonal_matrix(const DeformationSpectrum& a);

/// Eigenvalues of diag(a) + x.
std::vector<cd> deformed_eigenvalues(const DeformationSpectrum& a, const Eigen::MatrixXcd& x);

/// z -> N^{1/4} gamma z.
std::vector<cd> rescale(const std::vector<cd>& points, std::int64_t n, cd gamma);
std::vector<cd> unrescale(const std::vector<cd>& points, std::int64_t n, cd gamma);

struct EnsembleSample {
    std::uint64_t seed = 0;
    std::int64_t n = 0;
    Model model = Model::ginibre;
    std::vector<cd> eigenvalues;
    std::optional<std::vector<double>> singular_values;  // of A + X - z, ascending
};

EnsembleSample sample_ensemble(const DeformationSpectrum& a, Model model, std::uint64_t seed,
                               std::optional<cd> z = std::nullopt);

// --- test functions ----------------------------------------------------------------

/// Smooth function of one complex variable with its Laplacian. Vanishes for |z - center| > radius.
struct TestFunction {
    std::string id;
    cd center = 0;
    double radius = 1;
    std::function<double(cd)> f;
    std::function<double(cd)> laplacian;
};

/// exp(-1 / (1 - r^2/R^2)) inside the disk of radius R.
TestFunction radial_bump(double radius, cd center = 0);
/// Radial bump times (x^2 - y^2) / R^2, sensitive to the orientation of the local density.
TestFunction anisotropic_bump(double radius, cd center = 0);
/// exp(-|z - c|^2 / (2 s^2)), truncated at 8 s.
TestFunction gaussian_bump(double sigma, cd center = 0);
/// 1 on |z| <= r_in, 0 beyond r_out, degree-7 smootherstep in between.
TestFunction plateau(double r_in, double r_out, cd center = 0);

TestFunction test_function_by_id(const std::string& id, double radius);

/// k-point test function built as a product of one-point factors, symmetric in its arguments.
struct KPointFunction {
    int k = 1;
    TestFunction factor;
    double operator()(const std::vector<cd>& w) const;
};

// --- correlation estimates ------------------------------------------------------------

struct CorrelationEstimate {
    int k = 1;
    std::string test_function_id;
    double value = 0;
    double std_error = 0;
    int trials = 0;
    std::int64_t n = 0;
    double scale = 0;  // N^{1/4}
    cd gamma;
    std::vector<double> per_trial;
};

/// Sum of F over distinct ordered k-tuples of one rescaled spectrum.
double tuple_sum(const std::vector<cd>& w, const KPointFunction& f);

/// Monte Carlo mean of the k-tuple sum over rescaled eigenvalues of A + X, trial j seeded with seed0 + j.
CorrelationEstimate estimate_statistic(const DeformationSpectrum& a, Model model, const KPointFunction& f, int trials,
                                       std::uint64_t seed0, bool parallel = true);

struct Comparison {
    double difference = 0;
    double combined_error = 0;
    double z_score = 0;
};
Comparison compare_estimates(const CorrelationEstimate& x, const CorrelationEstimate& y);

// --- Girko ----------------------------------------------------------------------------

struct GirkoResult {
    double lhs = 0, rhs = 0, gap = 0;
    int nodes = 0;
    int jittered = 0;
    bool subtracted = false;
};

/// (1/N) sum F(lambda_i) against (1/(4 pi N)) int Laplacian(F) log|det H^z| d^2z on a q x q composite
/// Gauss-Legendre grid over the bounding box of supp F. With `subtract`, the term Laplacian(F)(lambda) log|z - lambda|
/// of each eigenvalue is removed from the integrand and integrated over the box in closed form.
GirkoResult girko_check(const Eigen::MatrixXcd& y, const TestFunction& f, int q, bool parallel = true,
                        bool subtract = true);

/// int_0^inf [Im Tr G^z(i eta) - 2 N eta / (1 + eta^2)] d eta for given singular values: numerical on
/// [eta_lo, 1] with log-spaced panels, closed form on [0, eta_lo] and [1, inf).
double logdet_eta_integral(const std::vector<double>& sv, double eta_lo = 1e-8, int panels = 80, int order = 12);
/// The same integral for one singular value, fully numerical below 1.
double logdet_eta_integral_single(double sigma, double eta_lo = 1e-12, int panels = 120, int order = 16);

// --- log-determinant statistic -----------------------------------------------------------

/// 2N <<log|h - i eta|>>, the deterministic counterpart of Tr log|H - i eta|, from the Dyson solution.
double deterministic_logdet(const DeformationSpectrum& a, cd z, double eta, const MdeConfig& cfg = {});

/// L(w) = Tr log|H^z - i eta| - 2N <<log|h^z - i eta|>> at z = N^{-1/4} w / gamma_t and eta = eta_t.
double log_det_statistic(const DeformationSpectrum& a, const Eigen::MatrixXcd& x, cd w, const FlowScalings& s);

// --- smallest singular values ----------------------------------------------------------------

enum class SvPool { direct, modulus };

/// Smallest singular value of A + X - z (direct) or |A - z| + X (modulus) per trial.
std::vector<double> smallest_sv_pool(const DeformationSpectrum& a, cd z, SvPool pool, int trials, std::uint64_t seed0,
                                     Model model = Model::ginibre, bool parallel = true);

struct TailEstimate {
    double probability = 0;
    double std_error = 0;
    int trials = 0;
};
TailEstimate smallest_sv_tail(const DeformationSpectrum& a, Model model, cd z, double eta, int trials,
                              std::uint64_t seed0, bool parallel = true);

struct KsResult {
    double statistic = 0;
    double p_value = 0;
};
/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov distribution.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
/// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

}  // namespace critedge
