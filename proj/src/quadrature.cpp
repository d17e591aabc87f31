#include "beamlab/quadrature.hpp"

#include <gsl/gsl_integration.h>

#include <map>
#include <mutex>

#include "beamlab/errors.hpp"

namespace beamlab {

namespace {

// Nodes and weights on [-1, 1], cached per order.
const QuadRule& reference_rule(int n) {
    static std::map<int, QuadRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    gsl_integration_glfixed_table* tab = gsl_integration_glfixed_table_alloc(static_cast<size_t>(n));
    if (!tab) throw QuadratureError("cannot build Gauss-Legendre table of order " + std::to_string(n));
    QuadRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) gsl_integration_glfixed_point(-1.0, 1.0, static_cast<size_t>(i), &r.x[i], &r.w[i], tab);
    gsl_integration_glfixed_table_free(tab);
    return cache.emplace(n, std::move(r)).first->second;
}

}  // namespace

QuadRule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw QuadratureError("quadrature order must be positive");
    const QuadRule& ref = reference_rule(n);
    QuadRule r;
    r.x.resize(n);
    r.w.resize(n);
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (int i = 0; i < n; ++i) {
        r.x[i] = c + h * ref.x[i];
        r.w[i] = h * ref.w[i];
    }
    return r;
}

QuadRule composite_gauss(int panels, int n, double a, double b) {
    std::vector<double> breaks(panels + 1);
    for (int p = 0; p <= panels; ++p) breaks[p] = a + (b - a) * p / panels;
    return composite_gauss(breaks, n);
}

QuadRule composite_gauss(const std::vector<double>& breaks, int n) {
    QuadRule r;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        if (breaks[p + 1] <= breaks[p]) continue;
        QuadRule g = gauss_legendre(n, breaks[p], breaks[p + 1]);
        r.x.insert(r.x.end(), g.x.begin(), g.x.end());
        r.w.insert(r.w.end(), g.w.begin(), g.w.end());
    }
    return r;
}

}  // namespace beamlab
