#include "critedge/sampling.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "critedge/criticality.hpp"
#include "critedge/errors.hpp"

namespace critedge {

Model parse_model(const std::string& name) {
    if (name == "ginibre") return Model::ginibre;
    if (name == "iid") return Model::iid;
    throw UnknownModel("'" + name + "'");
}

std::string model_name(Model m) { return m == Model::ginibre ? "ginibre" : "iid"; }

Eigen::MatrixXcd sample_matrix(Model model, std::int64_t n, std::uint64_t seed) {
    if (n < 2) throw DimensionMismatch("n must be at least 2");
    std::mt19937_64 rng(seed);
    Eigen::MatrixXcd x(n, n);
    const double nn = static_cast<double>(n);
    if (model == Model::ginibre) {
        std::normal_distribution<double> g(0.0, std::sqrt(0.5 / nn));
        for (std::int64_t j = 0; j < n; ++j)
            for (std::int64_t i = 0; i < n; ++i) {
                const double re = g(rng);
                x(i, j) = cd(re, g(rng));
            }
    } else {
        // independent uniform real and imaginary parts, variance 1/(2N) each
        const double a = std::sqrt(1.5 / nn);
        std::uniform_real_distribution<double> u(-a, a);
        for (std::int64_t j = 0; j < n; ++j)
            for (std::int64_t i = 0; i < n; ++i) {
                const double re = u(rng);
                x(i, j) = cd(re, u(rng));
            }
    }
    return x;
}

DeformationSpectrum ac_family(std::int64_t n, double c) {
    if (n % 4 != 0) throw DimensionMismatch("n must be divisible by 4");
    const double s = std::sqrt(1.0 / (1.0 + c * c));  // <|D|^-2>^{1/2}
    std::vector<cd> ev{s * cd(1, c), s * cd(1, -c), s * cd(-1, c), s * cd(-1, -c)};
    std::vector<std::int64_t> m(4, n / 4);
    return DeformationSpectrum(ev, m);
}

Eigen::MatrixXcd nonnormal_example1(std::int64_t n, double c) {
    if (n % 2 != 0) throw DimensionMismatch("n must be even");
    const double s = std::sqrt(1.0 + 0.5 * c * c);
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);
    for (std::int64_t k = 0; k < n; k += 2) {
        a(k, k) = -s;
        a(k, k + 1) = s * c;
        a(k + 1, k + 1) = s;
    }
    return a;
}

Eigen::MatrixXcd nonnormal_example2(std::int64_t n, double c) {
    if (n % 4 != 0) throw DimensionMismatch("n must be divisible by 4");
    const double s = std::sqrt(1.0 + 0.5 * c * c);
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);
    for (std::int64_t k = 0; k < n; k += 4) {
        a(k, k) = -s;
        a(k, k + 1) = s * c;
        a(k + 1, k + 1) = -s;
        a(k + 2, k + 2) = s;
        a(k + 2, k + 3) = s * c;
        a(k + 3, k + 3) = s;
    }
    return a;
}

namespace {

// Newton for a shift s with <(b+s)^2 conj(b+s)> = 0.
bool balance_shift(std::vector<cd>& b, cd start) {
    cd s = start;
    const double nn = static_cast<double>(b.size());
    for (int it = 0; it < 60; ++it) {
        cd g = 0, gs = 0, gsb = 0;
        for (auto& x : b) {
            const cd y = x + s;
            g += y * y * std::conj(y);
            gs += 2.0 * y * std::conj(y);
            gsb += y * y;
        }
        g /= nn;
        gs /= nn;
        gsb /= nn;
        if (std::abs(g) < 1e-15) {
            for (auto& x : b) x += s;
            return true;
        }
        // g(s + d) ~ g + gs d + gsb conj(d); solve the real 2x2 system
        Eigen::Matrix2d j;
        j << gs.real() + gsb.real(), -gs.imag() + gsb.imag(), gs.imag() + gsb.imag(), gs.real() - gsb.real();
        Eigen::Vector2d d = j.partialPivLu().solve(Eigen::Vector2d(-g.real(), -g.imag()));
        if (!d.allFinite()) return false;
        s += cd(d(0), d(1));
    }
    return false;
}

}  // namespace

DeformationSpectrum random_critical_spectrum(std::int64_t n, std::uint64_t seed, const CriticalSampleOptions& opt) {
    if (n < 2) throw DimensionMismatch("n must be at least 2");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const auto un = static_cast<std::size_t>(n);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        std::vector<cd> b(un);
        if (opt.hermitian) {
            const double p = 0.3 + 0.4 * u(rng);
            double pos3 = 0, neg3 = 0;
            for (auto& x : b) {
                const double mag = 0.4 + 1.1 * u(rng);
                x = u(rng) < p ? mag : -mag;
                (x.real() > 0 ? pos3 : neg3) += std::pow(mag, 3);
            }
            if (pos3 == 0 || neg3 == 0) continue;
            const double f = std::cbrt(pos3 / neg3);
            for (auto& x : b)
                if (x.real() < 0) x *= f;
        } else {
            const int k = 2 + static_cast<int>(u(rng) * 4);
            std::vector<cd> centers(k);
            std::vector<double> spread(k);
            for (int i = 0; i < k; ++i) {
                centers[i] = std::polar(0.5 + u(rng), 2 * std::numbers::pi * u(rng));
                spread[i] = 0.05 + 0.3 * u(rng);
            }
            for (auto& x : b) {
                const int c = static_cast<int>(u(rng) * k);
                const double re = g(rng);
                x = centers[c] + spread[c] * cd(re, g(rng));
            }
            cd mean = 0;
            for (auto& x : b) mean += x;
            mean /= static_cast<double>(n);
            if (!balance_shift(b, -mean) && !balance_shift(b, 0.0)) continue;
        }
        double m2 = 0;
        for (auto& x : b) m2 += std::norm(x);
        const double scale = 1.0 / std::sqrt(m2 / static_cast<double>(n));
        for (auto& x : b) x *= scale;
        DeformationSpectrum bs = DeformationSpectrum::from_values(b);
        if (bs.min_modulus() < 1.0 / opt.frak_c || bs.max_modulus() > opt.frak_c) continue;
        cd m3 = bs.trace([](cd z) { return z * z * z * std::conj(z); });
        // rotate so that <B^3 B*> is real and nonnegative
        const cd rot = opt.hermitian ? cd(1.0) : std::polar(1.0, -0.5 * std::arg(m3));
        for (auto& x : bs.eigenvalues) x *= rot;
        if (chi(bs).chi > opt.chi_max) continue;
        const cd phase = opt.hermitian ? cd(1.0) : std::polar(1.0, 2 * std::numbers::pi * u(rng));
        DeformationSpectrum a = bs;
        for (auto& x : a.eigenvalues) x = phase / x;
        return a;
    }
    throw NoValidConstant("could not draw a critical spectrum");
}

}  // namespace critedge
