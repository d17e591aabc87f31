#pragma once

#include <vector>

namespace beamlab {

struct QuadRule {
    std::vector<double> x, w;
    std::size_t size() const { return x.size(); }
};

// n-point Gauss-Legendre rule on [a, b].
QuadRule gauss_legendre(int n, double a, double b);

// Composite rule: `panels` equal panels of n-point Gauss-Legendre.
QuadRule composite_gauss(int panels, int n, double a, double b);

// Composite rule over explicit breakpoints.
QuadRule composite_gauss(const std::vector<double>& breaks, int n);

template <class F>
auto integrate(const QuadRule& q, F&& f) -> decltype(f(0.0) * 1.0) {
    decltype(f(0.0) * 1.0) acc{};
    for (std::size_t i = 0; i < q.size(); ++i) acc += q.w[i] * f(q.x[i]);
    return acc;
}

}  // namespace beamlab
