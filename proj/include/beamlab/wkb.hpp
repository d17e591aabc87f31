#pragma once

// WKB quasimodes on simple surfaces, v_s(r, theta) = e^{i s (r - r0)} J^{-1/2} b(theta)
// in geodesic polar coordinates (r, theta) about a point omega outside M0.
// J is the polar volume factor, dV = J dr dtheta, obtained from the Jacobi
// equation J'' + K J = 0 along each ray.

#include "beamlab/beam.hpp"

namespace beamlab {

struct WkbOptions {
    double alpha = 0.5;          // ||b||_{W^{2,inf}} = O(tau^alpha)
    double width0 = 0.5;         // bump support width at tau = 1, in radians
    double base_distance = 0.5;  // distance from omega to the entry point, in units of the chart radius
    bool assume_simple = false;  // accept a conformal chart without the simplicity check
    double h = 1e-3;             // ray step
};

// State along one polar ray.
struct RayPoint {
    Vec2 x;
    double J = 0, Jr = 0;
};

class WkbQuasimode {
  public:
    const MetricChart* chart = nullptr;
    Vec2 omega{0, 0};
    double theta0 = 0;  // direction of the geodesic at omega
    double r0 = 0;      // r of the entry point
    double width = 1;   // bump support is |theta - theta0| < width / 2
    double norm = 1;    // b = norm * cutoff((theta - theta0) / width)
    double h = 1e-3;
    double r_max = 0;

    double b(double theta) const;
    double b_d1(double theta) const;
    double b_d2(double theta) const;

    // Chart point and Jacobi data at polar coordinates (r, theta).
    RayPoint ray(double r, double theta) const;
    // r-intervals of the ray that lie inside M0.
    std::vector<std::pair<double, double>> inside(double theta) const;

    cplx value(double r, double theta, const Frequency& f) const;
    // (-Delta - s^2) v at (r, theta).
    cplx residual(double r, double theta, const Frequency& f) const;
};

// Throws PreconditionError when the chart is not known to be simple, or when
// a ray of the bump support meets a conjugate point.
WkbQuasimode wkb_quasimode_simple(const MetricChart& chart, const GeodesicPath& path, double tau,
                                  const WkbOptions& opt = {});

double wkb_residual_norm(const WkbQuasimode& qm, const Frequency& f);
// int |v_s|^2 psi dV over M0.
double wkb_concentration(const WkbQuasimode& qm, const Expression& psi, const Frequency& f);

}  // namespace beamlab
