#include "critedge/flow.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "critedge/criticality.hpp"
#include "critedge/errors.hpp"

namespace critedge {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> uniform_grid(int points) {
    if (points < 2) throw DimensionMismatch("a path needs at least two grid points");
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
    g.back() = 1.0;
    return g;
}

// H1 = u^2 ubar, H2 = u^3 ubar - chi |u|^4 and their partial derivatives in (Re u, Im u)
struct HVals {
    cd h1, h2, h1x, h1y, h2x, h2y;
};

HVals hvals(cd u, double chi) {
    const cd ub = std::conj(u);
    const double a = std::norm(u);
    HVals d;
    d.h1 = u * u * ub;
    d.h2 = u * u * u * ub - chi * a * a;
    const cd p1 = 2.0 * u * ub, q1 = u * u;
    d.h1x = p1 + q1;
    d.h1y = cd(0, 1) * (p1 - q1);
    // grouped so the chi terms cancel exactly on the real line at chi = 1
    const cd uuu = u * u * u, uub = u * u * ub, ubb = u * ub * ub;
    d.h2x = (3.0 * uub + uuu) - 2.0 * chi * (ubb + uub);
    d.h2y = cd(0, 1) * ((3.0 * uub - uuu) - 2.0 * chi * (ubb - uub));
    return d;
}

Eigen::Vector4d as_real(cd a, cd b) { return {a.real(), a.imag(), b.real(), b.imag()}; }

Eigen::Matrix<double, 4, 2> hcols(const HVals& d) {
    Eigen::Matrix<double, 4, 2> m;
    m.col(0) = as_real(d.h1x, d.h2x);
    m.col(1) = as_real(d.h1y, d.h2y);
    return m;
}

DeformationSpectrum with_layout(const std::vector<cd>& ev, const std::vector<std::int64_t>& mult, std::int64_t n) {
    DeformationSpectrum s;
    s.eigenvalues = ev;
    s.multiplicities = mult;
    s.n = n;
    return s;
}

void fill_residuals(FlowPath& p, const std::vector<double>& chi_target) {
    p.residual_crit.resize(p.size());
    p.residual_chi.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        p.residual_crit[i] = crit_residual(p.states[i]);
        p.residual_chi[i] = std::abs(chi_value(p.states[i]) - chi_target[i]);
    }
}

std::vector<std::pair<double, double>> sorted_points(const DeformationSpectrum& s) {
    std::vector<std::pair<double, double>> v;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::int64_t k = 0; k < s.multiplicities[i]; ++k) v.emplace_back(s.eigenvalues[i].real(), s.eigenvalues[i].imag());
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

std::string segment_name(SegmentKind k) {
    switch (k) {
        case SegmentKind::shrink: return "shrink";
        case SegmentKind::fix: return "fix";
        case SegmentKind::hermitian: return "hermitian";
        case SegmentKind::junction: return "concat-junction";
        case SegmentKind::constant: return "constant";
    }
    return "constant";
}

SegmentKind parse_segment(const std::string& s) {
    if (s == "shrink") return SegmentKind::shrink;
    if (s == "fix") return SegmentKind::fix;
    if (s == "hermitian") return SegmentKind::hermitian;
    if (s == "concat-junction") return SegmentKind::junction;
    return SegmentKind::constant;
}

double FlowPath::max_residual_crit() const {
    return residual_crit.empty() ? 0.0 : *std::max_element(residual_crit.begin(), residual_crit.end());
}
double FlowPath::max_residual_chi() const {
    return residual_chi.empty() ? 0.0 : *std::max_element(residual_chi.begin(), residual_chi.end());
}
double FlowPath::max_derivative() const {
    return derivatives.empty() ? 0.0 : *std::max_element(derivatives.begin(), derivatives.end());
}
std::pair<double, double> FlowPath::modulus_range() const {
    double lo = INFINITY, hi = 0;
    for (auto& s : states) {
        lo = std::min(lo, s.min_modulus());
        hi = std::max(hi, s.max_modulus());
    }
    return {lo, hi};
}

double crit_residual(const DeformationSpectrum& b) {
    return std::abs(b.trace([](cd z) { return z * z * std::conj(z); }));
}

double chi_value(const DeformationSpectrum& b) { return chi(b).chi; }

void fill_derivatives(FlowPath& p) {
    p.derivatives.assign(p.size(), 0.0);
    for (auto& seg : p.segments) {
        if (seg.kind == SegmentKind::junction || seg.end <= seg.begin) continue;
        for (std::size_t i = seg.begin; i <= seg.end; ++i) {
            const std::size_t a = i == seg.begin ? i : i - 1;
            const std::size_t b = i == seg.end ? i : i + 1;
            const double dt = p.grid[b] - p.grid[a];
            if (!(dt > 0)) continue;
            double m = 0;
            const auto& ea = p.states[a].eigenvalues;
            const auto& eb = p.states[b].eigenvalues;
            for (std::size_t k = 0; k < ea.size(); ++k) m = std::max(m, std::abs(eb[k] - ea[k]) / dt);
            p.derivatives[i] = std::max(p.derivatives[i], m);
        }
    }
}

FlowPath constant_path(const DeformationSpectrum& b, int points) {
    FlowPath p;
    p.grid = uniform_grid(points);
    p.states.assign(p.grid.size(), b);
    p.segments.push_back({0, p.grid.size() - 1, SegmentKind::constant});
    const double c = chi_value(b);
    fill_residuals(p, std::vector<double>(p.size(), c));
    fill_derivatives(p);
    return p;
}

FlowPath concatenate(const std::vector<FlowPath>& parts) {
    if (parts.empty()) throw DimensionMismatch("nothing to concatenate");
    FlowPath out;
    out.a_side = parts.front().a_side;
    const double k = static_cast<double>(parts.size());
    for (std::size_t j = 0; j < parts.size(); ++j) {
        const auto& p = parts[j];
        const std::size_t off = out.size();
        if (j > 0) {
            auto a = sorted_points(out.states.back()), b = sorted_points(p.states.front());
            if (a.size() != b.size()) throw ResidualExceeded("junction states differ in size");
            for (std::size_t i = 0; i < a.size(); ++i)
                if (std::hypot(a[i].first - b[i].first, a[i].second - b[i].second) > 1e-10)
                    throw ResidualExceeded("junction states differ");
            out.segments.push_back({off - 1, off, SegmentKind::junction});
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            out.grid.push_back(j + 1 == parts.size() && i + 1 == p.size() ? 1.0 : (static_cast<double>(j) + p.grid[i]) / k);
            out.states.push_back(p.states[i]);
            out.residual_crit.push_back(p.residual_crit[i]);
            out.residual_chi.push_back(p.residual_chi[i]);
        }
        for (auto seg : p.segments) {
            seg.begin += off;
            seg.end += off;
            out.segments.push_back(seg);
        }
    }
    fill_derivatives(out);
    return out;
}

DerivedB derive_b0(const DeformationSpectrum& a) {
    a.validate();
    a.require_nonzero();
    DerivedB d;
    d.phi = rotation_phi(a);
    d.b = rotated_inverse(a, d.phi);
    return d;
}

FlowPath lift_to_deformation(const FlowPath& path_b, double phi, double tol) {
    FlowPath out = path_b;
    out.a_side = true;
    const cd rot = std::polar(1.0, -phi);
    double alpha0 = 0;
    for (std::size_t i = 0; i < path_b.size(); ++i) {
        if (path_b.residual_crit[i] > tol)
            throw ResidualExceeded("B-side criticality residual " + std::to_string(path_b.residual_crit[i]) +
                                   " at grid index " + std::to_string(i));
        const auto& b = path_b.states[i];
        const double scale = std::sqrt(b.trace([](cd z) { return std::norm(z); }));
        auto& a = out.states[i];
        for (auto& z : a.eigenvalues) z = rot * scale / z;
        out.residual_crit[i] = std::abs(a.trace([](cd l) {
            cd q = 1.0 / l;
            return q * q * std::conj(q);
        }));
        const double al = shape_alpha(hessian_at_origin(a));
        if (i == 0) alpha0 = al;
        out.residual_chi[i] = std::abs(al - alpha0);
    }
    fill_derivatives(out);
    return out;
}

std::vector<std::string> z1z2_violations(cd z1, cd z2, double chi, double p, double c) {
    std::vector<std::string> v;
    for (cd z : {z1, z2})
        if (std::abs(z) < c || std::abs(z) > 1 / c) v.push_back("c <= |z_i| <= 1/c");
    if (z1.real() * z2.real() > 0) v.push_back("(Re z1)(Re z2) <= 0");
    if (std::abs(z1.real()) + std::abs(z2.real()) < c) v.push_back("|Re z1| + |Re z2| >= c");
    if (chi > 1 - c) v.push_back("chi <= 1 - c");
    if (p < c || p > 1 - c) v.push_back("c <= p <= 1 - c");
    return v;
}

FChiP f_chi_p(cd z1, cd z2, double chi, double p, double c) {
    if (c > 0) {
        auto v = z1z2_violations(z1, z2, chi, p, c);
        if (!v.empty()) {
            std::string msg;
            for (auto& s : v) msg += (msg.empty() ? "" : "; ") + s;
            throw ConditionViolated(msg);
        }
    }
    const HVals a = hvals(z1, chi), b = hvals(z2, chi);
    FChiP r;
    r.f = as_real(p * a.h1 + (1 - p) * b.h1, p * a.h2 + (1 - p) * b.h2);
    r.df.leftCols<2>() = p * hcols(a);
    r.df.rightCols<2>() = (1 - p) * hcols(b);
    Eigen::JacobiSVD<Eigen::Matrix4d> svd(r.df);
    const auto& s = svd.singularValues();
    if (!(s(3) > 1e-14 * s(0))) throw SingularJacobian("DF is numerically singular");
    r.inv_norm = 1.0 / s(3);
    return r;
}

double jacobian_core_det(cd z1, cd z2, double chi) {
    Eigen::Matrix4d m;
    m.leftCols<2>() = hcols(hvals(z1, chi));
    m.rightCols<2>() = hcols(hvals(z2, chi));
    return m.determinant();
}

namespace {

// the six 2x2 row minors of a 4x2 block, in the order of kPairs
constexpr int kPairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

std::array<double, 6> minors(const Eigen::Matrix<double, 4, 2>& m) {
    std::array<double, 6> out{};
    for (int k = 0; k < 6; ++k) {
        const int i = kPairs[k][0], j = kPairs[k][1];
        out[static_cast<std::size_t>(k)] = m(i, 0) * m(j, 1) - m(j, 0) * m(i, 1);
    }
    return out;
}

// Laplace expansion along the first two columns; complement of pair k is pair 5-k
constexpr double kSign[6] = {1, -1, 1, 1, -1, 1};

double laplace(const std::array<double, 6>& a, const std::array<double, 6>& b) {
    double d = 0;
    for (int k = 0; k < 6; ++k) d += kSign[k] * a[static_cast<std::size_t>(k)] * b[static_cast<std::size_t>(5 - k)];
    return d;
}

}  // namespace

JacobianSweep jacobian_sweep(double c_mod, double c_re, double chi_max, double p_min, double step, double chi_step,
                             bool parallel) {
    const double r = 1.0 / c_mod;
    const int kmax = static_cast<int>(std::floor(r / step + 1e-9));
    std::vector<cd> right, left;
    for (int i = -kmax; i <= kmax; ++i)
        for (int j = -kmax; j <= kmax; ++j) {
            const cd z(i * step, j * step);
            const double m = std::abs(z);
            if (m < c_mod - 1e-12 || m > r + 1e-12) continue;
            if (i >= 0) right.push_back(z);
            if (i <= 0) left.push_back(z);
        }
    const int nchi = static_cast<int>(std::floor(chi_max / chi_step + 1e-9)) + 1;
    JacobianSweep best;
    best.min_abs_det = INFINITY;
    const double pw = p_min * (1 - p_min);
    for (int ic = 0; ic < nchi; ++ic) {
        const double chi = std::min(chi_max, ic * chi_step);
        std::vector<std::array<double, 6>> mr(right.size()), ml(left.size());
        for (std::size_t i = 0; i < right.size(); ++i) mr[i] = minors(hcols(hvals(right[i], chi)));
        for (std::size_t i = 0; i < left.size(); ++i) ml[i] = minors(hcols(hvals(left[i], chi)));
        const auto nr = static_cast<std::int64_t>(right.size());
        std::int64_t count = 0;
        double gmin = INFINITY;
        std::int64_t gi = -1, gj = -1;
#pragma omp parallel if (parallel)
        {
            double lmin = INFINITY;
            std::int64_t li = -1, lj = -1, lcount = 0;
#pragma omp for schedule(static) nowait
            for (std::int64_t i = 0; i < nr; ++i) {
                const double re1 = std::abs(right[static_cast<std::size_t>(i)].real());
                for (std::size_t j = 0; j < left.size(); ++j) {
                    if (re1 + std::abs(left[j].real()) < c_re - 1e-12) continue;
                    ++lcount;
                    const double d = std::abs(laplace(mr[static_cast<std::size_t>(i)], ml[j]));
                    if (d < lmin) {
                        lmin = d;
                        li = i;
                        lj = static_cast<std::int64_t>(j);
                    }
                }
            }
#pragma omp critical
            {
                count += lcount;
                if (lmin < gmin) {
                    gmin = lmin;
                    gi = li;
                    gj = lj;
                }
            }
        }
        best.points += count;
        if (gi >= 0 && pw * gmin < best.min_abs_det) {
            best.min_abs_det = pw * gmin;
            best.arg_z1 = right[static_cast<std::size_t>(gi)];
            best.arg_z2 = left[static_cast<std::size_t>(gj)];
            best.arg_chi = chi;
            best.arg_p = p_min;
        }
    }
    return best;
}

std::vector<Vec> track_implicit(const std::function<Vec(double, const Vec&)>& g,
                                const std::function<Mat(double, const Vec&)>& dy, const std::vector<double>& grid,
                                const Vec& y0, double h_y, TrackStats& stats, double min_width) {
    std::vector<Vec> out(grid.size());
    out[0] = y0;
    double tb = grid[0];
    Vec yb = y0;
    std::size_t next = 1;
    IftOptions opt;
    opt.tol = 1e-12;
    opt.samples = 32;
    while (next < grid.size()) {
        IftProblem p;
        p.n = 1;
        p.m = y0.size();
        p.map = [&](const Vec& x, const Vec& y) { return g(tb + x(0), yb + y); };
        p.dy = [&](const Vec& x, const Vec& y) { return dy(tb + x(0), yb + y); };
        const double remaining = grid.back() - tb;
        double hx = remaining, hy = h_y;
        IftCertificate cert;
        const Vec zero_x = Vec::Zero(1), zero_y = Vec::Zero(p.m);
        const double lip = 2 * std::max(1.0, jacobian_y(p, zero_x, zero_y).inverse().norm()) *
                           norm_inf_to_2(jacobian_x(p, zero_x, zero_y));
        for (;;) {
            p.h_x = hx;
            p.h_y = hy;
            try {
                cert = ift_certify(p, opt);
                break;
            } catch (const ContractionFailed&) {
            }
            // shrink whichever side limits the chart less
            if (hx * lip > hy)
                hx *= 0.5;
            else
                hy *= 0.5;
            if (hx < min_width && hx < remaining)
                throw MeshTooCoarse("no contracting chart at t = " + std::to_string(tb));
        }
        const double width = cert.h_x_tilde;
        if (width < min_width && width < remaining)
            throw MeshTooCoarse("chart width " + std::to_string(width) + " at t = " + std::to_string(tb));
        ++stats.charts;
        stats.min_chart_width = std::min(stats.min_chart_width, width);
        stats.max_contraction = std::max(stats.max_contraction, cert.contraction);
        stats.max_lipschitz = std::max(stats.max_lipschitz, cert.lipschitz_bound);

        bool advanced = false;
        while (next < grid.size() && grid[next] - tb <= width) {
            Vec x(1);
            x << grid[next] - tb;
            auto r = ift_solve(p, cert, x, opt);
            stats.newton += r.cert.newton_used;
            out[next] = yb + r.y;
            ++next;
            advanced = true;
        }
        if (advanced) {
            tb = grid[next - 1];
            yb = out[next - 1];
        } else {
            // chart narrower than the grid spacing: step to an interior base point
            Vec x(1);
            x << 0.5 * width;
            auto r = ift_solve(p, cert, x, opt);
            stats.newton += r.cert.newton_used;
            yb = yb + r.y;
            tb = tb + 0.5 * width;
        }
    }
    return out;
}

ClusterFlow shrink_clusters(const std::vector<cd>& v1, const std::vector<cd>& v2, cd z1, cd z2, double chi,
                            const std::vector<double>& grid, const ShrinkOptions& opt) {
    if (v1.empty() || v2.empty()) throw DimensionMismatch("empty cluster");
    const double m1 = static_cast<double>(v1.size()), m2 = static_cast<double>(v2.size());
    if (opt.h > 0) {
        for (cd v : v1)
            if (std::abs(v - z1) > opt.h * (1 + 1e-12)) throw ConditionViolated("|V1 - z1| > h");
        for (cd v : v2)
            if (std::abs(v - z2) > opt.h * (1 + 1e-12)) throw ConditionViolated("|V2 - z2| > h");
    }
    if (opt.c > 0) {
        const double ratio = m1 / m2;
        if (!(ratio > 2 * opt.c && ratio < 1 / (2 * opt.c))) throw ConditionViolated("m1/m2 outside (2c, 1/(2c))");
        auto v = z1z2_violations(z1, z2, chi, m1 / (m1 + m2), opt.c);
        if (!v.empty()) throw ConditionViolated(v.front());
    }
    const double inv = 1.0 / (m1 + m2);
    auto point = [](cd v, cd z, double t, cd w) { return (1 - t) * v + t * z + w; };
    auto sums = [&](double t, const Vec& y, Eigen::Vector4d* f, Eigen::Matrix4d* j) {
        const cd w1(y(0), y(1)), w2(y(2), y(3));
        cd s1 = 0, s2 = 0;
        Eigen::Matrix<double, 4, 2> j1 = Eigen::Matrix<double, 4, 2>::Zero(), j2 = j1;
        for (cd v : v1) {
            const HVals d = hvals(point(v, z1, t, w1), chi);
            s1 += d.h1;
            s2 += d.h2;
            if (j) j1 += hcols(d);
        }
        for (cd v : v2) {
            const HVals d = hvals(point(v, z2, t, w2), chi);
            s1 += d.h1;
            s2 += d.h2;
            if (j) j2 += hcols(d);
        }
        if (f) *f = inv * as_real(s1, s2);
        if (j) {
            j->leftCols<2>() = inv * j1;
            j->rightCols<2>() = inv * j2;
        }
    };
    Eigen::Vector4d base;
    sums(0.0, Vec::Zero(4), &base, nullptr);
    auto g = [&](double t, const Vec& y) -> Vec {
        Eigen::Vector4d f;
        sums(t, y, &f, nullptr);
        return f - base;
    };
    auto dy = [&](double t, const Vec& y) -> Mat {
        Eigen::Matrix4d j;
        sums(t, y, nullptr, &j);
        return j;
    };
    ClusterFlow out;
    const double hy = opt.h_y > 0 ? opt.h_y : 0.25 * std::min(std::abs(z1), std::abs(z2));
    auto ws = track_implicit(g, dy, grid, Vec::Zero(4), hy, out.stats, opt.min_chart_width);
    out.v1.resize(grid.size());
    out.v2.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        const cd w1(ws[k](0), ws[k](1)), w2(ws[k](2), ws[k](3));
        for (cd v : v1) out.v1[k].push_back(k == 0 ? v : point(v, z1, t, w1));
        for (cd v : v2) out.v2[k].push_back(k == 0 ? v : point(v, z2, t, w2));
        out.conserved_drift = std::max(out.conserved_drift, g(t, ws[k]).norm());
    }
    const Vec& wl = ws.back();
    out.z1_final = z1 + cd(wl(0), wl(1));
    out.z2_final = z2 + cd(wl(2), wl(3));
    if (grid.back() == 1.0) {
        std::fill(out.v1.back().begin(), out.v1.back().end(), out.z1_final);
        std::fill(out.v2.back().begin(), out.v2.back().end(), out.z2_final);
    }
    return out;
}

HalfPlaneMass half_plane_mass_constant(const DeformationSpectrum& b, double frak_c) {
    b.validate();
    (void)frak_c;
    const double n = static_cast<double>(b.n);
    for (int k = 1; k <= 40; ++k) {
        const double c = std::ldexp(1.0, -k);
        std::int64_t left = 0, right = 0;
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (b.eigenvalues[i].real() < -c) left += b.multiplicities[i];
            if (b.eigenvalues[i].real() > c) right += b.multiplicities[i];
        }
        if (left > c * n && right > c * n) return {c, left, right};
    }
    throw NoValidConstant("no dyadic c >= 2^-40 separates both half planes");
}

namespace {

using BoxKey = std::pair<std::int64_t, std::int64_t>;

BoxKey box_of(cd z, double side) {
    return {static_cast<std::int64_t>(std::ceil(z.real() / side)) - 1,
            static_cast<std::int64_t>(std::ceil(z.imag() / side)) - 1};
}

cd box_center(const BoxKey& k, double side) {
    return {(static_cast<double>(k.first) + 0.5) * side, (static_cast<double>(k.second) + 0.5) * side};
}

Partition box_partition(const IndexSet& idx, const std::vector<cd>& vals, double side) {
    std::map<BoxKey, IndexSet> boxes;
    for (auto i : idx) boxes[box_of(vals[static_cast<std::size_t>(i)], side)].push_back(i);
    Partition p;
    for (auto& [k, v] : boxes) p.push_back(v);
    return p;
}

struct Pairing {
    IndexSet right, left;  // cluster 1 on the right half plane, cluster 2 on the left
};

}  // namespace

FiniteSupportResult finite_support_flow(const DeformationSpectrum& b, const FlowConfig& cfg) {
    b.validate();
    b.require_nonzero();
    const double chi0 = chi_value(b);
    if (crit_residual(b) > cfg.tol) throw ConditionViolated("<B^2 B*> is not zero");
    if (chi0 < -cfg.tol || chi0 > 1 - 1 / cfg.frak_c) throw ConditionViolated("chi(B) outside [0, 1 - 1/frak_c]");
    const std::vector<cd> vals = b.expanded();
    const auto n = static_cast<std::int64_t>(vals.size());

    FiniteSupportResult res;
    const auto hp = half_plane_mass_constant(b, cfg.frak_c);
    double cap = 1.0;
    while (cap >= 1 / (2 * cfg.frak_c)) cap *= 0.5;
    res.c0 = std::min(hp.c, cap);
    const double c0 = res.c0;

    IndexSet ip, im, op, om;
    for (std::int64_t i = 0; i < n; ++i) {
        const double x = vals[static_cast<std::size_t>(i)].real();
        if (x > c0)
            op.push_back(i);
        else if (x > 0)
            ip.push_back(i);
        else if (x > -c0)
            im.push_back(i);
        else
            om.push_back(i);
    }

    // split fraction: 1, 1/2, 1/4, ... and finally c0/2
    std::optional<std::array<Pairing, 3>> pairs;
    for (double kappa = 1.0;; kappa *= 0.5) {
        const double k = std::max(kappa, c0 / 2);
        const auto noi_p = static_cast<std::size_t>(std::ceil(k * static_cast<double>(im.size())));
        const auto noi_m = static_cast<std::size_t>(std::ceil(k * static_cast<double>(ip.size())));
        if (noi_p <= op.size() && noi_m <= om.size() && ((op.size() == noi_p) == (om.size() == noi_m))) {
            std::array<Pairing, 3> pr;
            pr[0] = {IndexSet(op.begin(), op.begin() + static_cast<std::ptrdiff_t>(noi_p)), im};
            pr[1] = {ip, IndexSet(om.begin(), om.begin() + static_cast<std::ptrdiff_t>(noi_m))};
            pr[2] = {IndexSet(op.begin() + static_cast<std::ptrdiff_t>(noi_p), op.end()),
                     IndexSet(om.begin() + static_cast<std::ptrdiff_t>(noi_m), om.end())};
            bool ok = true;
            for (auto& q : pr) ok &= q.right.empty() == q.left.empty();
            if (ok) {
                pairs = pr;
                res.kappa = k;
                break;
            }
        }
        if (k <= c0 / 2) break;
    }
    if (!pairs) throw PairingInfeasible("no split fraction balances the three pairings");

    // mesh calibration
    double h = cfg.h0 > 0 ? cfg.h0 : 0.1 / cfg.frak_c;
    std::vector<std::pair<PartitionMatching, double>> matchings;
    std::vector<std::size_t> which;
    bool found = false;
    for (int attempt = 0; attempt <= cfg.max_doublings && !found; ++attempt, h *= 2) {
        matchings.clear();
        which.clear();
        found = true;
        for (std::size_t q = 0; q < 3; ++q) {
            const auto& pr = (*pairs)[q];
            if (pr.right.empty()) continue;
            const double r = static_cast<double>(pr.right.size()) / static_cast<double>(pr.left.size());
            const double cm = std::min(1.0, std::min(r, 1 / r));
            try {
                auto m = match_partitions(box_partition(pr.right, vals, h / 2), box_partition(pr.left, vals, h / 2), cm,
                                          MatchMode::relaxed);
                matchings.emplace_back(std::move(m), cm);
                which.push_back(q);
            } catch (const SizePreconditionFailed&) {
                found = false;
                break;
            }
        }
        if (found) break;
    }
    if (!found) throw MeshTooCoarse("no mesh up to the doubling limit admits all three matchings");
    res.h = h;
    res.m_bound = 100 * cfg.frak_c * cfg.frak_c / (h * h);

    FlowPath& path = res.path;
    path.grid = uniform_grid(cfg.points);
    std::vector<std::vector<cd>> entries(path.grid.size(), vals);
    const double side = h / 2;
    for (std::size_t q = 0; q < matchings.size(); ++q) {
        const auto& [m, cm] = matchings[q];
        const double c_pair = std::min({c0 / 2, 1 / (2 * cfg.frak_c), 1 - chi0, cm / (4 + cm)});
        for (std::size_t j = 0; j < m.refined_s1.size(); ++j) {
            const IndexSet& r = m.refined_s1[j];
            const IndexSet& l = m.refined_s2[j];
            const cd z1 = box_center(box_of(vals[static_cast<std::size_t>(r.front())], side), side);
            const cd z2 = box_center(box_of(vals[static_cast<std::size_t>(l.front())], side), side);
            const double p = static_cast<double>(r.size()) / static_cast<double>(r.size() + l.size());
            auto bad = z1z2_violations(z1, z2, chi0, p, c_pair);
            if (!bad.empty()) throw PairingInfeasible("box centres violate " + bad.front());
            std::vector<cd> v1, v2;
            for (auto i : r) v1.push_back(vals[static_cast<std::size_t>(i)]);
            for (auto i : l) v2.push_back(vals[static_cast<std::size_t>(i)]);
            ShrinkOptions so;
            so.h = h;
            so.min_chart_width = cfg.min_chart_width;
            auto cf = shrink_clusters(v1, v2, z1, z2, chi0, path.grid, so);
            res.stats.charts += cf.stats.charts;
            res.stats.newton += cf.stats.newton;
            res.stats.min_chart_width = std::min(res.stats.min_chart_width, cf.stats.min_chart_width);
            res.stats.max_contraction = std::max(res.stats.max_contraction, cf.stats.max_contraction);
            res.stats.max_lipschitz = std::max(res.stats.max_lipschitz, cf.stats.max_lipschitz);
            for (std::size_t k = 1; k < path.grid.size(); ++k) {
                for (std::size_t e = 0; e < r.size(); ++e) entries[k][static_cast<std::size_t>(r[e])] = cf.v1[k][e];
                for (std::size_t e = 0; e < l.size(); ++e) entries[k][static_cast<std::size_t>(l[e])] = cf.v2[k][e];
            }
            ++res.pairs;
        }
    }
    const std::vector<std::int64_t> ones(vals.size(), 1);
    for (auto& e : entries) path.states.push_back(with_layout(e, ones, n));
    path.segments.push_back({0, path.grid.size() - 1, SegmentKind::shrink});
    fill_residuals(path, std::vector<double>(path.size(), chi0));
    fill_derivatives(path);
    res.support = path.states.back().collapsed().size();
    return res;
}

namespace {

std::pair<std::size_t, std::size_t> default_anchors(const DeformationSpectrum& b) {
    std::size_t l = b.size(), r = b.size();
    double bl = -1, br = -1;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double x = b.eigenvalues[i].real();
        const double score = static_cast<double>(b.multiplicities[i]) * std::abs(x);
        if (x < 0 && score > bl) bl = score, l = i;
        if (x > 0 && score > br) br = score, r = i;
    }
    if (l == b.size() || r == b.size()) throw NoValidConstant("no anchor on one side of the imaginary axis");
    return {l, r};
}

double round_to(double x, int grid) { return std::round(x * grid) / grid; }

}  // namespace

Target n_independent_target(const DeformationSpectrum& b0, const FlowConfig& cfg) {
    b0.validate();
    const std::size_t m = b0.size();
    const std::int64_t n = b0.n;
    Target tg;
    const std::int64_t want = std::max<std::int64_t>(cfg.q_min, 2 * static_cast<std::int64_t>(m));
    std::int64_t q = n;
    for (std::int64_t d = want; d <= n; ++d)
        if (n % d == 0) {
            q = d;
            break;
        }
    tg.q = static_cast<int>(q);

    // weights k_i / q, each k_i >= 1, by largest remainder
    std::vector<std::int64_t> k(m);
    std::vector<double> frac(m);
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double x = static_cast<double>(b0.multiplicities[i]) * static_cast<double>(q) / static_cast<double>(n);
        k[i] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(x)));
        frac[i] = x - std::floor(x);
        sum += k[i];
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
    for (std::size_t j = 0; sum < q; j = (j + 1) % m) ++k[order[j]], ++sum;
    for (std::size_t j = m; sum > q; --j) {
        const std::size_t i = order[(j - 1) % m];
        if (k[i] > 1) --k[i], --sum;
        if (j == 1) j = m + 1;
    }

    tg.chi = round_to(chi_value(b0), cfg.chi_grid);
    const auto [al, ar] = default_anchors(b0);
    tg.anchor_left = al;
    tg.anchor_right = ar;

    std::vector<cd> z(m);
    for (std::size_t i = 0; i < m; ++i)
        z[i] = {round_to(b0.eigenvalues[i].real(), cfg.z_grid), round_to(b0.eigenvalues[i].imag(), cfg.z_grid)};

    // Newton for one common shift per half plane so that both weighted sums vanish
    std::vector<double> w(m);
    for (std::size_t i = 0; i < m; ++i) w[i] = static_cast<double>(k[i]) / static_cast<double>(q);
    std::vector<bool> left(m);
    for (std::size_t i = 0; i < m; ++i) left[i] = b0.eigenvalues[i].real() < 0;
    cd sl = 0, sr = 0;
    auto residual = [&](Eigen::Matrix4d* jac) {
        cd s1 = 0, s2 = 0;
        if (jac) jac->setZero();
        for (std::size_t i = 0; i < m; ++i) {
            const HVals d = hvals(z[i] + (left[i] ? sl : sr), tg.chi);
            s1 += w[i] * d.h1;
            s2 += w[i] * d.h2;
            if (jac && left[i]) jac->leftCols<2>() += w[i] * hcols(d);
            if (jac && !left[i]) jac->rightCols<2>() += w[i] * hcols(d);
        }
        return Eigen::Vector4d(as_real(s1, s2));
    };
    Eigen::Matrix4d jac;
    Eigen::Vector4d f = residual(&jac);
    for (int it = 0; it < 60 && f.norm() > 1e-15; ++it) {
        Eigen::Vector4d step = jac.fullPivLu().solve(f);
        sl -= cd(step(0), step(1));
        sr -= cd(step(2), step(3));
        f = residual(&jac);
    }
    if (f.norm() > 1e-13) throw NoConvergence("target shift residual " + std::to_string(f.norm()));
    for (std::size_t i = 0; i < m; ++i) z[i] += left[i] ? sl : sr;

    std::vector<std::int64_t> mult(m);
    for (std::size_t i = 0; i < m; ++i) mult[i] = k[i] * (n / q);
    tg.b1 = with_layout(z, mult, n);
    return tg;
}

FixResult fix_spectrum_flow(const DeformationSpectrum& b0, const DeformationSpectrum& b1, const FlowConfig& cfg,
                            std::optional<std::pair<std::size_t, std::size_t>> anchors) {
    b0.validate();
    b1.validate();
    if (b0.size() != b1.size() || b0.n != b1.n) throw DimensionMismatch("endpoints must share indexing and N");
    const std::size_t m = b0.size();
    const std::int64_t n = b0.n;
    double dz = 0, dn = 0;
    for (std::size_t i = 0; i < m; ++i) {
        dz = std::max(dz, std::abs(b0.eigenvalues[i] - b1.eigenvalues[i]));
        dn = std::max(dn, std::abs(static_cast<double>(b0.multiplicities[i] - b1.multiplicities[i])));
    }
    if (dz > cfg.delta_tv || dn > cfg.delta_tv * static_cast<double>(n))
        throw DeltaTvExceeded("|z0 - z1| = " + std::to_string(dz) + ", |n0 - n1| / N = " +
                              std::to_string(dn / static_cast<double>(n)));
    for (const auto* b : {&b0, &b1}) {
        const double scale = b->trace([](cd z) { return std::norm(z) * std::norm(z); });
        const cd m3 = b->trace([](cd z) { return z * z * z * std::conj(z); });
        if (crit_residual(*b) > cfg.tol * scale || std::abs(m3.imag()) > cfg.tol * scale)
            throw ConditionViolated("endpoint needs <B^2 B*> = 0 and <B^3 B*> real");
    }
    const auto [al, ar] = anchors ? *anchors : default_anchors(b0);

    std::vector<std::int64_t> nh(m);
    for (std::size_t i = 0; i < m; ++i) nh[i] = std::min(b0.multiplicities[i], b1.multiplicities[i]);

    // block 3: leftovers of both endpoints paired position by position
    struct Run {
        cd z;
        std::int64_t count;
    };
    auto leftovers = [&](const DeformationSpectrum& b) {
        std::vector<Run> runs;
        for (std::size_t i = 0; i < m; ++i)
            if (b.multiplicities[i] > nh[i]) runs.push_back({b.eigenvalues[i], b.multiplicities[i] - nh[i]});
        return runs;
    };
    auto r0 = leftovers(b0), r1 = leftovers(b1);
    struct Piece {
        cd a, b;
        std::int64_t count;
    };
    std::vector<Piece> block3;
    for (std::size_t i = 0, j = 0; i < r0.size() && j < r1.size();) {
        const std::int64_t take = std::min(r0[i].count, r1[j].count);
        block3.push_back({r0[i].z, r1[j].z, take});
        r0[i].count -= take;
        r1[j].count -= take;
        if (r0[i].count == 0) ++i;
        if (r1[j].count == 0) ++j;
    }

    FixResult res;
    res.chi0 = chi_value(b0);
    res.chi1 = chi_value(b1);
    const double s = static_cast<double>(nh[al] + nh[ar]);
    const double p = static_cast<double>(nh[al]) / s;
    const cd za = b0.eigenvalues[al], zb = b0.eigenvalues[ar];
    auto chi_t = [&](double t) { return (1 - t) * res.chi0 + t * res.chi1; };
    auto angle = [](cd z) {
        double a = std::arg(z);
        return a < 0 ? a + 2 * kPi : a;
    };
    auto polar_mix = [&](const Piece& pc, double t) {
        if (t == 0.0) return pc.a;
        if (t == 1.0) return pc.b;
        return std::polar((1 - t) * std::abs(pc.a) + t * std::abs(pc.b), (1 - t) * angle(pc.a) + t * angle(pc.b));
    };
    auto crude = [&](double t, double ch) {
        cd q1 = 0, q2 = 0;
        auto add = [&](cd z, double c) {
            const HVals d = hvals(z, ch);
            q1 += c * d.h1;
            q2 += c * d.h2;
        };
        for (std::size_t i = 0; i < m; ++i)
            if (i != al && i != ar) add((1 - t) * b0.eigenvalues[i] + t * b1.eigenvalues[i], static_cast<double>(nh[i]));
        for (auto& pc : block3) add(polar_mix(pc, t), static_cast<double>(pc.count));
        return Eigen::Vector4d(as_real(q1 / s, q2 / s));
    };
    auto g = [&](double t, const Vec& y) -> Vec {
        const double ch = chi_t(t);
        const HVals a = hvals(za + cd(y(0), y(1)), ch), b = hvals(zb + cd(y(2), y(3)), ch);
        return as_real(p * a.h1 + (1 - p) * b.h1, p * a.h2 + (1 - p) * b.h2) + crude(t, ch);
    };
    auto dy = [&](double t, const Vec& y) -> Mat {
        const double ch = chi_t(t);
        Eigen::Matrix4d j;
        j.leftCols<2>() = p * hcols(hvals(za + cd(y(0), y(1)), ch));
        j.rightCols<2>() = (1 - p) * hcols(hvals(zb + cd(y(2), y(3)), ch));
        return j;
    };
    FlowPath& path = res.path;
    path.grid = uniform_grid(cfg.points);
    const double hy = 0.5 * std::min(std::abs(za), std::abs(zb));
    auto ws = track_implicit(g, dy, path.grid, Vec::Zero(4), hy, res.stats, cfg.min_chart_width);
    const cd wa_end = b1.eigenvalues[al] - za, wb_end = b1.eigenvalues[ar] - zb;
    res.endpoint_gap = std::hypot(std::abs(cd(ws.back()(0), ws.back()(1)) - wa_end),
                                  std::abs(cd(ws.back()(2), ws.back()(3)) - wb_end));
    if (res.endpoint_gap > 1e-9)
        throw NoConvergence("tracked anchors end " + std::to_string(res.endpoint_gap) + " away from the target");

    std::vector<std::int64_t> mult{nh[al], nh[ar]};
    for (std::size_t i = 0; i < m; ++i)
        if (i != al && i != ar) mult.push_back(nh[i]);
    for (auto& pc : block3) mult.push_back(pc.count);
    std::vector<double> target;
    for (std::size_t k = 0; k < path.grid.size(); ++k) {
        const double t = path.grid[k];
        std::vector<cd> ev;
        if (k == 0) {
            ev = {za, zb};
        } else if (k + 1 == path.grid.size()) {
            ev = {b1.eigenvalues[al], b1.eigenvalues[ar]};
        } else {
            ev = {za + cd(ws[k](0), ws[k](1)), zb + cd(ws[k](2), ws[k](3))};
        }
        for (std::size_t i = 0; i < m; ++i)
            if (i != al && i != ar) ev.push_back(k == 0 ? b0.eigenvalues[i] : (1 - t) * b0.eigenvalues[i] + t * b1.eigenvalues[i]);
        for (auto& pc : block3) ev.push_back(polar_mix(pc, t));
        path.states.push_back(with_layout(ev, mult, n));
        target.push_back(chi_t(t));
    }
    path.segments.push_back({0, path.grid.size() - 1, SegmentKind::fix});
    fill_residuals(path, target);
    fill_derivatives(path);
    return res;
}

double hermitian_f(const DeformationSpectrum& b, int sign, double s) {
    double acc = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double x = sign * b.eigenvalues[i].real();
        if (x > 0) acc += static_cast<double>(b.multiplicities[i]) * std::pow(x + s, 3);
    }
    return acc / static_cast<double>(b.n);
}

double hermitian_g(const DeformationSpectrum& b, double s) {
    const double target = hermitian_f(b, 1, s);
    std::int64_t nm = 0;
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b.eigenvalues[i].real() < 0) nm += b.multiplicities[i];
    double lo = 0, hi = std::cbrt(target * static_cast<double>(b.n) / static_cast<double>(nm));
    if (hermitian_f(b, -1, lo) >= target) return 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (hermitian_f(b, -1, mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

FlowPath hermitian_flow(const DeformationSpectrum& b, double frak_c, int points) {
    b.validate();
    b.require_nonzero();
    (void)frak_c;
    for (auto& z : b.eigenvalues)
        if (std::abs(z.imag()) > 1e-12 * std::abs(z)) throw NotReal("eigenvalue with imaginary part " + std::to_string(z.imag()));
    std::int64_t np = 0, nm = 0;
    for (std::size_t i = 0; i < b.size(); ++i) (b.eigenvalues[i].real() > 0 ? np : nm) += b.multiplicities[i];
    if (np == 0 || nm == 0) throw ConditionViolated("both signs must be present");
    const double neg_end = -std::cbrt(static_cast<double>(np) / static_cast<double>(nm));

    FlowPath path;
    path.grid = uniform_grid(points);
    for (std::size_t k = 0; k < path.grid.size(); ++k) {
        const double t = path.grid[k];
        DeformationSpectrum st = b;
        if (k == 0) {
            for (auto& z : st.eigenvalues) z = z.real();
        } else if (t == 1.0) {
            for (auto& z : st.eigenvalues) z = z.real() > 0 ? 1.0 : neg_end;
        } else {
            const double s = t / (1 - t);
            const double g = hermitian_g(b, s);
            for (auto& z : st.eigenvalues) {
                const double x = z.real();
                z = x > 0 ? t + (1 - t) * x : (1 - t) * (x - g);
            }
        }
        path.states.push_back(std::move(st));
    }
    path.segments.push_back({0, path.grid.size() - 1, SegmentKind::hermitian});
    fill_residuals(path, std::vector<double>(path.size(), 1.0));
    fill_derivatives(path);
    return path;
}

PipelineResult run_pipeline(const DeformationSpectrum& a, const FlowConfig& cfg) {
    PipelineResult r;
    r.start = derive_b0(a);
    const auto& b = r.start.b;
    bool real = true;
    for (auto& z : b.eigenvalues) real &= std::abs(z.imag()) <= 1e-12 * std::abs(z);
    if (real) {
        r.hermitian = true;
        DeformationSpectrum br = b;
        for (auto& z : br.eigenvalues) z = z.real();
        r.path_b = hermitian_flow(br, cfg.frak_c, cfg.points);
        // the real projection differs from B by rounding only; keep B exactly at t = 0
        r.path_b.states.front() = b;
    } else {
        r.finite = finite_support_flow(b, cfg);
        const DeformationSpectrum end = r.finite->path.states.back().collapsed();
        r.target = n_independent_target(end, cfg);
        r.fix = fix_spectrum_flow(end, r.target->b1, cfg, std::make_pair(r.target->anchor_left, r.target->anchor_right));
        r.path_b = concatenate({r.finite->path, r.fix->path});
    }
    r.path_a = lift_to_deformation(r.path_b, r.start.phi, cfg.tol);
    return r;
}

AssumptionReport validate_assumption(const FlowPath& path_a, double frak_c1, double frak_c_small, std::int64_t n,
                                     double tol) {
    AssumptionReport rep;
    const double nn = static_cast<double>(n);
    rep.drift_bound = std::pow(nn, -frak_c_small);
    rep.deriv_bound = frak_c1 * std::log(nn);
    std::vector<double> alpha(path_a.size());
    for (std::size_t i = 0; i < path_a.size(); ++i) {
        const auto& a = path_a.states[i];
        const double inv2 = a.trace([](cd l) { return 1.0 / std::norm(l); });
        const double skew = std::abs(a.trace([](cd l) {
            cd q = 1.0 / l;
            return q * q * std::conj(q);
        }));
        double bad = std::max(std::abs(inv2 - 1), skew);
        const double norm_excess = std::max(a.max_modulus(), 1 / a.min_modulus()) - frak_c1;
        const bool ok = bad <= tol && norm_excess <= 0;
        if (!ok) rep.flagged_crit.push_back(i);
        bad = std::max(bad, norm_excess > 0 ? norm_excess : 0.0);
        if (bad > rep.worst_crit) rep.worst_crit = bad, rep.worst_crit_index = i;
        alpha[i] = shape_alpha(hessian_at_origin(a));
    }
    rep.crit_ok = rep.flagged_crit.empty();
    for (auto& seg : path_a.segments) {
        if (seg.kind == SegmentKind::junction) continue;
        for (std::size_t i = seg.begin; i < seg.end; ++i) {
            const double dt = path_a.grid[i + 1] - path_a.grid[i];
            if (!(dt > 0)) continue;
            const double d = std::abs(alpha[i + 1] - alpha[i]) / dt;
            if (d > rep.worst_drift) rep.worst_drift = d, rep.worst_drift_index = i;
        }
    }
    rep.drift_ok = rep.worst_drift <= rep.drift_bound;
    for (std::size_t i = 0; i < path_a.derivatives.size(); ++i)
        if (path_a.derivatives[i] > rep.worst_deriv) rep.worst_deriv = path_a.derivatives[i], rep.worst_deriv_index = i;
    rep.deriv_ok = rep.worst_deriv <= rep.deriv_bound;
    return rep;
}

}  // namespace critedge
