#pragma once

#include <vector>

namespace critedge {

struct Rule {
    std::vector<double> x;
    std::vector<double> w;
};

/// n-point Gauss-Legendre rule on [a, b].
Rule gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Composite Gauss-Legendre on [a, b] with log-spaced panel edges (a > 0).
Rule log_panels(double a, double b, int panels, int order);

}  // namespace critedge
