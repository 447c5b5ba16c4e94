#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "critedge/ift.hpp"
#include "critedge/partition.hpp"
#include "critedge/spectrum.hpp"

namespace critedge {

enum class SegmentKind { shrink, fix, hermitian, junction, constant };

std::string segment_name(SegmentKind k);
SegmentKind parse_segment(const std::string& s);

/// Grid indices [begin, end] sharing one entry layout.
struct FlowSegment {
    std::size_t begin = 0, end = 0;
    SegmentKind kind = SegmentKind::constant;
};

/// Sampled path of diagonal matrices. Junction times appear twice, once per layout.
struct FlowPath {
    std::vector<double> grid;
    std::vector<DeformationSpectrum> states;
    std::vector<double> derivatives;   // max entrywise |dB/dt|
    std::vector<double> residual_crit;  // |<B^2 B*>| (A side: |<A^-2 A*^-1>|)
    std::vector<double> residual_chi;   // |chi(B_t) - chi target(t)| (A side: |alpha_t - alpha_0|)
    std::vector<FlowSegment> segments;
    bool a_side = false;

    std::size_t size() const { return grid.size(); }
    double max_residual_crit() const;
    double max_residual_chi() const;
    double max_derivative() const;
    /// Smallest and largest eigenvalue modulus over the path.
    std::pair<double, double> modulus_range() const;
};

/// Entrywise finite differences inside each segment.
void fill_derivatives(FlowPath& p);

/// |<B^2 B*>|.
double crit_residual(const DeformationSpectrum& b);
/// Re <B^3 B*> / <|B|^4>.
double chi_value(const DeformationSpectrum& b);

/// Path of constant B on the grid.
FlowPath constant_path(const DeformationSpectrum& b, int points = 257);

/// Concatenate paths on consecutive equal time slots, inserting junction markers.
FlowPath concatenate(const std::vector<FlowPath>& parts);

// --- rotation and lift --------------------------------------------------------

struct DerivedB {
    DeformationSpectrum b;
    double phi = 0;
};

/// B = e^{-i phi} A^-1 with phi = arg<A^-3 A*^-1> / 2.
DerivedB derive_b0(const DeformationSpectrum& a);

/// A_t = e^{-i phi} <|B_t|^2>^{1/2} B_t^-1 on every grid point. Throws ResidualExceeded when the
/// B-side criticality residual exceeds tol.
FlowPath lift_to_deformation(const FlowPath& path_b, double phi, double tol = 1e-8);

// --- two-point map ------------------------------------------------------------

struct FChiP {
    Eigen::Vector4d f;  // (Re F1, Im F1, Re F2, Im F2)
    Eigen::Matrix4d df;
    double inv_norm = 0;
};

/// Conditions of the two-point stability region with constant c; empty when all hold.
std::vector<std::string> z1z2_violations(cd z1, cd z2, double chi, double p, double c);

/// F_{chi,p} with its real 4x4 differential. Throws ConditionViolated when c > 0 and the region
/// conditions fail, SingularJacobian when DF is numerically singular.
FChiP f_chi_p(cd z1, cd z2, double chi, double p, double c = 0.0);

/// Determinant of [DH1(z1) DH1(z2); DH2(z1) DH2(z2)], so det DF = p (1-p) times this.
double jacobian_core_det(cd z1, cd z2, double chi);

struct JacobianSweep {
    double min_abs_det = 0;  // of DF with p in the sweep
    cd arg_z1, arg_z2;
    double arg_chi = 0, arg_p = 0;
    std::int64_t points = 0;
};

/// Grid sweep of |det DF| over c_mod <= |z_i| <= 1/c_mod, Re z1 >= 0 >= Re z2, |Re z1| + |Re z2| >= c_re,
/// chi in [0, chi_max], p in [p_min, 1 - p_min].
JacobianSweep jacobian_sweep(double c_mod, double c_re, double chi_max, double p_min, double step, double chi_step,
                             bool parallel = true);

// --- implicit tracking --------------------------------------------------------

struct TrackStats {
    int charts = 0;
    int newton = 0;
    double min_chart_width = 1e300;
    double max_contraction = 0;
    double max_lipschitz = 0;
};

/// y(t) on the grid with G(t, y(t)) = 0 and y(grid[0]) = y0, chart by chart with the quantitative IFT.
std::vector<Vec> track_implicit(const std::function<Vec(double, const Vec&)>& g,
                                const std::function<Mat(double, const Vec&)>& dy, const std::vector<double>& grid,
                                const Vec& y0, double h_y, TrackStats& stats, double min_width = 1e-4);

// --- cluster shrinking --------------------------------------------------------

struct ShrinkOptions {
    double h = 0;  // cluster radius bound; 0 disables the check
    double c = 0;  // region constant for the centres; 0 disables the check
    double h_y = 0;  // IFT ball for (w1, w2); 0 picks min(|z1|, |z2|) / 4
    double min_chart_width = 1e-4;
};

struct ClusterFlow {
    std::vector<std::vector<cd>> v1, v2;  // per grid point
    cd z1_final, z2_final;
    TrackStats stats;
    double conserved_drift = 0;  // max deviation of the two pair sums
};

/// Move V_i along (1-t) V_i + t z_i 1 plus a common shift w_i(t) keeping both pair sums fixed.
ClusterFlow shrink_clusters(const std::vector<cd>& v1, const std::vector<cd>& v2, cd z1, cd z2, double chi,
                            const std::vector<double>& grid, const ShrinkOptions& opt = {});

// --- finite-support flow --------------------------------------------------------

struct HalfPlaneMass {
    double c = 0;
    std::int64_t left = 0, right = 0;  // counts with Re < -c and Re > c
};

/// Largest dyadic c with both half-plane counts above c N. Throws NoValidConstant.
HalfPlaneMass half_plane_mass_constant(const DeformationSpectrum& b, double frak_c);

struct FlowConfig {
    double frak_c = 4;
    double frak_c1 = 0;  // 0 -> 2 frak_c
    int points = 257;
    double tol = 1e-8;
    double h0 = 0;  // 0 -> 0.1 / frak_c
    int max_doublings = 8;
    double min_chart_width = 1e-4;
    double delta_tv = 0.25;
    int q_min = 64;
    int chi_grid = 256;
    int z_grid = 1024;
};

struct FiniteSupportResult {
    FlowPath path;
    double h = 0;
    double c0 = 0;
    double kappa = 0;
    double m_bound = 0;  // 100 frak_c^2 / h^2
    std::size_t support = 0;
    std::size_t pairs = 0;
    TrackStats stats;
};

FiniteSupportResult finite_support_flow(const DeformationSpectrum& b, const FlowConfig& cfg = {});

// --- fix flow -------------------------------------------------------------------

struct Target {
    DeformationSpectrum b1;  // indexed like the collapsed source
    std::size_t anchor_left = 0, anchor_right = 0;
    int q = 0;
    double chi = 0;
};

/// Weights on a 1/q grid with q | N, chi on a 1/chi_grid grid, points on a 1/z_grid grid followed by one
/// common shift per half plane, solved so the target is exactly critical with that chi.
Target n_independent_target(const DeformationSpectrum& b0, const FlowConfig& cfg = {});

struct FixResult {
    FlowPath path;
    double chi0 = 0, chi1 = 0;
    double endpoint_gap = 0;  // |w(1) - (z1 - z0)| before snapping
    TrackStats stats;
};

/// Path from b0 to b1 (common indexing) with chi linear in t. Anchors default to the point of largest
/// multiplicity times |Re z| in each half plane.
FixResult fix_spectrum_flow(const DeformationSpectrum& b0, const DeformationSpectrum& b1, const FlowConfig& cfg = {},
                            std::optional<std::pair<std::size_t, std::size_t>> anchors = std::nullopt);

// --- Hermitian flow --------------------------------------------------------------

/// f_+(s) or f_-(s) = (1/N) sum_{+-b > 0} (+-b + s)^3.
double hermitian_f(const DeformationSpectrum& b, int sign, double s);
/// g(s) = f_-^{-1}(f_+(s)) by bisection.
double hermitian_g(const DeformationSpectrum& b, double s);

FlowPath hermitian_flow(const DeformationSpectrum& b, double frak_c, int points = 257);

// --- full pipeline and audit -------------------------------------------------------

struct PipelineResult {
    DerivedB start;
    FlowPath path_b;
    FlowPath path_a;
    std::optional<FiniteSupportResult> finite;
    std::optional<Target> target;
    std::optional<FixResult> fix;
    bool hermitian = false;
};

PipelineResult run_pipeline(const DeformationSpectrum& a, const FlowConfig& cfg = {});

struct AssumptionReport {
    bool crit_ok = true, drift_ok = true, deriv_ok = true;
    double worst_crit = 0, worst_drift = 0, worst_deriv = 0;
    std::size_t worst_crit_index = 0, worst_drift_index = 0, worst_deriv_index = 0;
    std::vector<std::size_t> flagged_crit;
    double drift_bound = 0, deriv_bound = 0;
};

AssumptionReport validate_assumption(const FlowPath& path_a, double frak_c1, double frak_c_small, std::int64_t n,
                                     double tol = 1e-8);

// --- serialization -----------------------------------------------------------------

void write_flow_jsonl(const std::string& path, const FlowPath& p);
FlowPath read_flow_jsonl(const std::string& path);
void to_json(nlohmann::json& j, const AssumptionReport& r);

}  // namespace critedge
