#include "critedge/quadrature.hpp"

#include <cmath>
#include <numbers>

namespace critedge {

Rule gauss_legendre(int n, double a, double b) {
    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1, p1 = x;
            dp = n * (x * p1 - p0) / (x * x - 1);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        {
            double p0 = 1, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1);
        }
        const double w = 2.0 / ((1 - x * x) * dp * dp);
        r.x[i] = mid - half * x;
        r.x[n - 1 - i] = mid + half * x;
        r.w[i] = r.w[n - 1 - i] = half * w;
    }
    return r;
}

Rule log_panels(double a, double b, int panels, int order) {
    Rule out;
    const Rule g = gauss_legendre(order);
    const double la = std::log(a), lb = std::log(b);
    for (int p = 0; p < panels; ++p) {
        const double lo = std::exp(la + (lb - la) * p / panels);
        const double hi = std::exp(la + (lb - la) * (p + 1) / panels);
        for (int i = 0; i < order; ++i) {
            out.x.push_back(0.5 * (lo + hi) + 0.5 * (hi - lo) * g.x[i]);
            out.w.push_back(0.5 * (hi - lo) * g.w[i]);
        }
    }
    return out;
}

}  // namespace critedge
