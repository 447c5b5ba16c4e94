#include "critedge/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "critedge/criticality.hpp"
#include "critedge/errors.hpp"
#include "critedge/quadrature.hpp"

namespace critedge {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::vector<cd> eigenvalues_of(const Eigen::MatrixXcd& m) {
    const auto n = static_cast<lapack_int>(m.rows());
    if (m.cols() != m.rows()) throw DimensionMismatch("eigenvalues of a non-square matrix");
    Eigen::MatrixXcd a = m;
    std::vector<cd> w(static_cast<std::size_t>(n));
    const lapack_int info =
        LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n, a.data(), n, w.data(), nullptr, 1, nullptr, 1);
    if (info != 0) throw NoConvergence("zgeev failed with info " + std::to_string(info));
    return w;
}

std::vector<double> singular_values_of(const Eigen::MatrixXcd& m) {
    const auto rows = static_cast<lapack_int>(m.rows()), cols = static_cast<lapack_int>(m.cols());
    Eigen::MatrixXcd a = m;
    std::vector<double> s(static_cast<std::size_t>(std::min(rows, cols)));
    const lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', rows, cols, a.data(), rows, s.data(), nullptr, 1,
                                           nullptr, 1);
    if (info != 0) throw NoConvergence("zgesdd failed with info " + std::to_string(info));
    std::sort(s.begin(), s.end());
    return s;
}

Eigen::MatrixXcd hermitization(const Eigen::MatrixXcd& y, cd z) {
    const Eigen::Index n = y.rows();
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    h.topRightCorner(n, n) = y - z * Eigen::MatrixXcd::Identity(n, n);
    h.bottomLeftCorner(n, n) = h.topRightCorner(n, n).adjoint();
    return h;
}

std::vector<double> hermitized_singular_values(const Eigen::MatrixXcd& y, cd z) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitization(y, z), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const Eigen::Index n = y.rows();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::abs(ev(n + i));
    std::sort(out.begin(), out.end());
    return out;
}

Eigen::MatrixXcd diagonal_matrix(const DeformationSpectrum& a) {
    const auto ev = a.expanded();
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(a.n, a.n);
    for (std::int64_t i = 0; i < a.n; ++i) d(i, i) = ev[static_cast<std::size_t>(i)];
    return d;
}

std::vector<cd> deformed_eigenvalues(const DeformationSpectrum& a, const Eigen::MatrixXcd& x) {
    if (x.rows() != a.n || x.cols() != a.n) throw DimensionMismatch("X does not match the deformation");
    Eigen::MatrixXcd y = x;
    const auto ev = a.expanded();
    for (std::int64_t i = 0; i < a.n; ++i) y(i, i) += ev[static_cast<std::size_t>(i)];
    return eigenvalues_of(y);
}

std::vector<cd> rescale(const std::vector<cd>& points, std::int64_t n, cd gamma) {
    const cd f = std::pow(static_cast<double>(n), 0.25) * gamma;
    std::vector<cd> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = f * points[i];
    return out;
}

std::vector<cd> unrescale(const std::vector<cd>& points, std::int64_t n, cd gamma) {
    const cd f = std::pow(static_cast<double>(n), 0.25) * gamma;
    std::vector<cd> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = points[i] / f;
    return out;
}

EnsembleSample sample_ensemble(const DeformationSpectrum& a, Model model, std::uint64_t seed, std::optional<cd> z) {
    a.validate();
    EnsembleSample s;
    s.seed = seed;
    s.n = a.n;
    s.model = model;
    Eigen::MatrixXcd y = sample_matrix(model, a.n, seed) + diagonal_matrix(a);
    s.eigenvalues = eigenvalues_of(y);
    if (z) s.singular_values = singular_values_of(y - *z * Eigen::MatrixXcd::Identity(a.n, a.n));
    return s;
}

// --- test functions ---------------------------------------------------------------------

namespace {

struct BumpParts {
    double g = 0, dg = 0, lap = 0;  // g(u), dg/du, Laplacian in the plane
};

// g(u) = exp(-1/(1-u)) with u = r^2 / R^2
BumpParts bump_parts(cd d, double radius) {
    const double r2 = radius * radius;
    const double u = std::norm(d) / r2;
    BumpParts b;
    if (u >= 1) return b;
    const double q = 1 - u;
    b.g = std::exp(-1 / q);
    b.dg = -b.g / (q * q);
    const double ddg = b.g * (2 * u - 1) / (q * q * q * q);
    b.lap = 4 / r2 * (u * ddg + b.dg);
    return b;
}

}  // namespace

TestFunction radial_bump(double radius, cd center) {
    TestFunction t;
    t.id = "radial";
    t.center = center;
    t.radius = radius;
    t.f = [=](cd z) { return bump_parts(z - center, radius).g; };
    t.laplacian = [=](cd z) { return bump_parts(z - center, radius).lap; };
    return t;
}

TestFunction anisotropic_bump(double radius, cd center) {
    TestFunction t;
    t.id = "anisotropic";
    t.center = center;
    t.radius = radius;
    const double r2 = radius * radius;
    t.f = [=](cd z) {
        const cd d = z - center;
        return bump_parts(d, radius).g * (d.real() * d.real() - d.imag() * d.imag()) / r2;
    };
    t.laplacian = [=](cd z) {
        const cd d = z - center;
        const auto b = bump_parts(d, radius);
        const double h = (d.real() * d.real() - d.imag() * d.imag()) / r2;
        return h * b.lap + 8 * b.dg * h / r2;
    };
    return t;
}

TestFunction gaussian_bump(double sigma, cd center) {
    TestFunction t;
    t.id = "gaussian";
    t.center = center;
    t.radius = 8 * sigma;
    const double s2 = sigma * sigma;
    t.f = [=](cd z) { return std::exp(-std::norm(z - center) / (2 * s2)); };
    t.laplacian = [=](cd z) {
        const double r2 = std::norm(z - center);
        return std::exp(-r2 / (2 * s2)) * (r2 / (s2 * s2) - 2 / s2);
    };
    return t;
}

TestFunction plateau(double r_in, double r_out, cd center) {
    TestFunction t;
    t.id = "plateau";
    t.center = center;
    t.radius = r_out;
    const double len = r_out - r_in;
    t.f = [=](cd z) {
        const double r = std::abs(z - center);
        if (r <= r_in) return 1.0;
        if (r >= r_out) return 0.0;
        const double s = (r - r_in) / len;
        return 1 - s * s * s * s * (35 - 84 * s + 70 * s * s - 20 * s * s * s);
    };
    t.laplacian = [=](cd z) {
        const double r = std::abs(z - center);
        if (r <= r_in || r >= r_out) return 0.0;
        const double s = (r - r_in) / len;
        const double d1 = -140 * s * s * s * (1 - 3 * s + 3 * s * s - s * s * s);
        const double d2 = -420 * s * s * (1 - 4 * s + 5 * s * s - 2 * s * s * s);
        return d2 / (len * len) + d1 / (len * r);
    };
    return t;
}

TestFunction test_function_by_id(const std::string& id, double radius) {
    if (id == "radial") return radial_bump(radius);
    if (id == "anisotropic") return anisotropic_bump(radius);
    if (id == "gaussian") return gaussian_bump(radius / 8);
    if (id == "plateau") return plateau(0.5 * radius, radius);
    throw UnknownModel("unknown test function '" + id + "'");
}

double KPointFunction::operator()(const std::vector<cd>& w) const {
    double p = 1;
    for (cd z : w) p *= factor.f(z);
    return p;
}

// --- correlation estimates ------------------------------------------------------------------

double tuple_sum(const std::vector<cd>& w, const KPointFunction& f) {
    // product form: sum over distinct ordered tuples is k! e_k(F(w_1), ..., F(w_n))
    std::vector<double> e(static_cast<std::size_t>(f.k) + 1, 0.0);
    e[0] = 1;
    for (cd z : w) {
        if (std::abs(z - f.factor.center) >= f.factor.radius) continue;
        const double v = f.factor.f(z);
        for (int j = f.k; j >= 1; --j) e[static_cast<std::size_t>(j)] += v * e[static_cast<std::size_t>(j - 1)];
    }
    double fact = 1;
    for (int j = 2; j <= f.k; ++j) fact *= j;
    return fact * e[static_cast<std::size_t>(f.k)];
}

CorrelationEstimate estimate_statistic(const DeformationSpectrum& a, Model model, const KPointFunction& f, int trials,
                                       std::uint64_t seed0, bool parallel) {
    a.validate();
    if (trials < 2) throw DimensionMismatch("at least two trials are needed for an error bar");
    CorrelationEstimate est;
    est.k = f.k;
    est.test_function_id = f.factor.id;
    est.trials = trials;
    est.n = a.n;
    est.scale = std::pow(static_cast<double>(a.n), 0.25);
    est.gamma = scaling_gamma(a).gamma;
    est.per_trial.assign(static_cast<std::size_t>(trials), 0.0);
    const Eigen::MatrixXcd d = diagonal_matrix(a);
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int j = 0; j < trials; ++j) {
        const Eigen::MatrixXcd y = d + sample_matrix(model, a.n, seed0 + static_cast<std::uint64_t>(j));
        est.per_trial[static_cast<std::size_t>(j)] = tuple_sum(rescale(eigenvalues_of(y), a.n, est.gamma), f);
    }
    const double t = trials;
    est.value = std::accumulate(est.per_trial.begin(), est.per_trial.end(), 0.0) / t;
    double ss = 0;
    for (double v : est.per_trial) ss += (v - est.value) * (v - est.value);
    est.std_error = std::sqrt(ss / (t - 1) / t);
    return est;
}

Comparison compare_estimates(const CorrelationEstimate& x, const CorrelationEstimate& y) {
    Comparison c;
    c.difference = x.value - y.value;
    c.combined_error = std::hypot(x.std_error, y.std_error);
    c.z_score = c.combined_error > 0 ? std::abs(c.difference) / c.combined_error : (c.difference == 0 ? 0 : INFINITY);
    return c;
}

// --- Girko -----------------------------------------------------------------------------------

namespace {

// int over [x0,x1] x [y0,y1] of log(x^2 + y^2)
double log_rect_integral(double x0, double x1, double y0, double y1) {
    auto g = [](double x, double y) {
        const double r = x * x + y * y;
        double t = r > 0 ? x * y * (std::log(r) - 3) : 0.0;
        if (x != 0) t += x * x * std::atan(y / x);
        if (y != 0) t += y * y * std::atan(x / y);
        return t;
    };
    return g(x1, y1) - g(x0, y1) - g(x1, y0) + g(x0, y0);
}

Rule composite_rule(double a, double b, int q) {
    const int order = q >= 8 ? 8 : q;
    const int panels = std::max(1, q / order);
    const double h = (b - a) / panels;
    Rule r;
    for (int p = 0; p < panels; ++p) {
        Rule g = gauss_legendre(order, a + p * h, a + (p + 1) * h);
        r.x.insert(r.x.end(), g.x.begin(), g.x.end());
        r.w.insert(r.w.end(), g.w.begin(), g.w.end());
    }
    return r;
}

}  // namespace

GirkoResult girko_check(const Eigen::MatrixXcd& y, const TestFunction& f, int q, bool parallel, bool subtract) {
    const Eigen::Index n = y.rows();
    const auto lambda = eigenvalues_of(y);
    GirkoResult res;
    res.subtracted = subtract;
    for (cd l : lambda) res.lhs += f.f(l);
    res.lhs /= static_cast<double>(n);

    const double x0 = f.center.real() - f.radius, x1 = f.center.real() + f.radius;
    const double y0 = f.center.imag() - f.radius, y1 = f.center.imag() + f.radius;
    const Rule xr = composite_rule(x0, x1, q);
    const Rule yr = composite_rule(y0, y1, q);
    const auto nq = static_cast<int>(xr.x.size());
    res.nodes = nq * nq;

    // eigenvalues whose log singularity is subtracted and integrated in closed form
    std::vector<cd> sing;
    std::vector<double> sing_lap;
    if (subtract) {
        for (cd l : lambda) {
            const double lap = f.laplacian(l);
            if (lap == 0) continue;
            sing.push_back(l);
            sing_lap.push_back(lap);
        }
    }

    const double floor = 1e-10;
    const double jitter = 1e-7 * f.radius / nq;
    std::vector<double> row(static_cast<std::size_t>(nq), 0.0);
    std::vector<int> jit(static_cast<std::size_t>(nq), 0);
    bool unstable = false;
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int i = 0; i < nq; ++i) {
        double acc = 0;
        for (int j = 0; j < nq; ++j) {
            cd z(xr.x[static_cast<std::size_t>(i)], yr.x[static_cast<std::size_t>(j)]);
            const double lap = f.laplacian(z);
            if (lap == 0 && sing.empty()) continue;
            int tries = 0;
            auto near = [&](cd p) {
                for (cd l : lambda)
                    if (std::abs(p - l) < floor) return true;
                return false;
            };
            while (near(z) && tries < 5) {
                z += cd(jitter, jitter);
                ++tries;
            }
            if (tries == 5) {
#pragma omp atomic write
                unstable = true;
                continue;
            }
            jit[static_cast<std::size_t>(i)] += tries > 0;
            // log|det H^z| = 2 log|det(Y - z)|
            double val = 0;
            if (lap != 0) {
                Eigen::PartialPivLU<Eigen::MatrixXcd> lu(y - z * id);
                const auto& m = lu.matrixLU();
                double logdet = 0;
                for (Eigen::Index k = 0; k < n; ++k) logdet += std::log(std::abs(m(k, k)));
                val = lap * 2 * logdet;
            }
            for (std::size_t k = 0; k < sing.size(); ++k) val -= sing_lap[k] * 2 * std::log(std::abs(z - sing[k]));
            acc += xr.w[static_cast<std::size_t>(i)] * yr.w[static_cast<std::size_t>(j)] * val;
        }
        row[static_cast<std::size_t>(i)] = acc;
    }
    if (unstable) throw QuadratureUnstable("quadrature node within 1e-10 of an eigenvalue after jittering");
    double total = 0;
    for (double r : row) total += r;
    for (std::size_t k = 0; k < sing.size(); ++k) {
        const cd l = sing[k];
        total += sing_lap[k] * log_rect_integral(x0 - l.real(), x1 - l.real(), y0 - l.imag(), y1 - l.imag());
    }
    for (int j : jit) res.jittered += j;
    res.rhs = total / (4 * kPi * static_cast<double>(n));
    res.gap = std::abs(res.lhs - res.rhs);
    return res;
}

namespace {

// int_a^b [2 eta / (s^2 + eta^2) - 2 eta / (1 + eta^2)] d eta
double closed_piece(double s2, double a, double b) {
    if (std::isinf(b)) return -std::log(s2 + a * a) + std::log1p(a * a);
    return std::log((s2 + b * b) / (s2 + a * a)) - std::log((1 + b * b) / (1 + a * a));
}

}  // namespace

double logdet_eta_integral(const std::vector<double>& sv, double eta_lo, int panels, int order) {
    const Rule r = log_panels(eta_lo, 1.0, panels, order);
    double total = 0;
    for (std::size_t k = 0; k < r.x.size(); ++k) {
        const double eta = r.x[k];
        double im_tr = 0;
        for (double s : sv) im_tr += 2 * eta / (s * s + eta * eta);
        total += r.w[k] * (im_tr - 2 * static_cast<double>(sv.size()) * eta / (1 + eta * eta));
    }
    for (double s : sv) total += closed_piece(s * s, 0, eta_lo) + closed_piece(s * s, 1, INFINITY);
    return total;
}

double logdet_eta_integral_single(double sigma, double eta_lo, int panels, int order) {
    const Rule r = log_panels(eta_lo, 1.0, panels, order);
    const double s2 = sigma * sigma;
    double total = 0;
    for (std::size_t k = 0; k < r.x.size(); ++k) {
        const double eta = r.x[k];
        total += r.w[k] * (2 * eta / (s2 + eta * eta) - 2 * eta / (1 + eta * eta));
    }
    return total + closed_piece(s2, 0, eta_lo) + closed_piece(s2, 1, INFINITY);
}

// --- log-determinant statistic ------------------------------------------------------------------

double deterministic_logdet(const DeformationSpectrum& a, cd z, double eta, const MdeConfig& cfg) {
    const ScalarProfile prof = profile_of(a, z);
    // Im<M(i e)> = v S(v), computed without the cancellation in v - e
    auto im_m = [&](double e) {
        const double v = solve_v_profile(prof, e, cfg).v;
        double s = 0;
        for (std::size_t i = 0; i < prof.sq.size(); ++i) s += prof.weight[i] / (prof.sq[i] + v * v);
        return v * s;
    };
    double integral = 0;
    if (eta < 1) {
        const Rule r = log_panels(eta, 1.0, 40, 12);
        for (std::size_t k = 0; k < r.x.size(); ++k)
            integral += r.w[k] * (im_m(r.x[k]) - r.x[k] / (1 + r.x[k] * r.x[k]));
    }
    // eta' = 1/s on [max(eta, 1), inf)
    const double s_hi = 1 / std::max(eta, 1.0);
    for (int p = 0; p < 4; ++p) {
        const Rule g = gauss_legendre(16, s_hi * p / 4, s_hi * (p + 1) / 4);
        for (std::size_t k = 0; k < g.x.size(); ++k) {
            const double s = g.x[k];
            integral += g.w[k] * (im_m(1 / s) / (s * s) - 1 / (s * (1 + s * s)));
        }
    }
    const double nn = 2 * static_cast<double>(a.n);
    return nn * (0.5 * std::log1p(eta * eta) - integral);
}

double log_det_statistic(const DeformationSpectrum& a, const Eigen::MatrixXcd& x, cd w, const FlowScalings& s) {
    const cd z = std::pow(static_cast<double>(a.n), -0.25) * w / s.gamma_t;
    const double eta = s.eta_t;
    Eigen::MatrixXcd y = x + diagonal_matrix(a);
    y -= z * Eigen::MatrixXcd::Identity(a.n, a.n);
    double random = 0;
    for (double sv : singular_values_of(y)) random += std::log(sv * sv + eta * eta);
    return random - deterministic_logdet(a, z, eta);
}

// --- smallest singular values -------------------------------------------------------------------

std::vector<double> smallest_sv_pool(const DeformationSpectrum& a, cd z, SvPool pool, int trials, std::uint64_t seed0,
                                     Model model, bool parallel) {
    a.validate();
    const auto ev = a.expanded();
    std::vector<double> out(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int j = 0; j < trials; ++j) {
        Eigen::MatrixXcd y = sample_matrix(model, a.n, seed0 + static_cast<std::uint64_t>(j));
        for (std::int64_t i = 0; i < a.n; ++i) {
            const cd d = ev[static_cast<std::size_t>(i)] - z;
            y(i, i) += pool == SvPool::direct ? d : cd(std::abs(d), 0.0);
        }
        out[static_cast<std::size_t>(j)] = singular_values_of(y).front();
    }
    return out;
}

TailEstimate smallest_sv_tail(const DeformationSpectrum& a, Model model, cd z, double eta, int trials,
                              std::uint64_t seed0, bool parallel) {
    const auto pool = smallest_sv_pool(a, z, SvPool::direct, trials, seed0, model, parallel);
    TailEstimate t;
    t.trials = trials;
    t.probability = static_cast<double>(std::count_if(pool.begin(), pool.end(), [&](double s) { return s < eta; })) /
                    static_cast<double>(trials);
    t.std_error = std::sqrt(t.probability * (1 - t.probability) / static_cast<double>(trials));
    return t;
}

double kolmogorov_survival(double lambda) {
    if (lambda <= 0) return 1.0;
    if (lambda < 1.18) {
        double s = 0;
        for (int k = 1; k <= 20; ++k) {
            const double j = 2 * k - 1;
            s += std::exp(-j * j * kPi * kPi / (8 * lambda * lambda));
        }
        return 1 - std::sqrt(2 * kPi) / lambda * s;
    }
    double s = 0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 ? 2 : -2) * term;
        if (term < 1e-18) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DimensionMismatch("empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d)};
}

}  // namespace critedge
