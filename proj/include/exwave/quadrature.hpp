#pragma once

#include <functional>
#include <vector>

namespace exwave {

struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1] (Newton on the Legendre recurrence).
GaussRule gauss_legendre(int n);

/// n-point Gauss-Legendre rule mapped to [a, b].
GaussRule gauss_legendre(int n, double a, double b);

/// Composite Gauss-Legendre integral of f over [a, b] with `panels` panels.
double integrate(const std::function<double(double)>& f, double a, double b, int points = 16,
                 int panels = 8);

/// 1-D trapezoid weight (in units of h) for node i of 0..n.
inline double trapezoid_weight(int i, int n) { return (i == 0 || i == n) ? 0.5 : 1.0; }

}  // namespace exwave
