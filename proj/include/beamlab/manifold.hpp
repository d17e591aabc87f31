#pragma once

// Charts for compact surfaces with boundary, geodesics and parallel transport.
// Every catalog metric is conformal to the Euclidean one, g = e^{2 sigma} delta,
// on a chart disk |x| <= radius.

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "beamlab/expression.hpp"

namespace beamlab {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class ChartKind { EuclideanDisk, SphereCap, ConformalDisk };

std::string to_string(ChartKind k);

class MetricChart {
  public:
    static MetricChart euclidean_disk(double radius = 1.0);
    // Sphere with a cap removed, in the stereographic chart g = 4(1+|u|^2)^{-2} delta, |u| <= r0.
    static MetricChart sphere_cap(double r0);
    // g = e^{2 phi} delta on the disk of the given radius.
    static MetricChart conformal_disk(const Expression& phi, double radius = 1.0);

    ChartKind kind() const { return kind_; }
    double radius() const { return radius_; }
    int dimension() const { return 2; }

    // Log conformal factor and its derivatives.
    double sigma(const Vec2& x) const;
    Vec2 grad_sigma(const Vec2& x) const;
    Mat2 hess_sigma(const Vec2& x) const;
    const Expression& sigma_expr() const { return sigma_; }
    const Expression& sigma_derivative_expr(int j) const { return dsigma_[j]; }
    const Expression& curvature_expr() const { return curvature_; }

    Mat2 metric(const Vec2& x) const { return std::exp(2 * sigma(x)) * Mat2::Identity(); }
    double inner(const Vec2& x, const Vec2& a, const Vec2& b) const { return std::exp(2 * sigma(x)) * a.dot(b); }
    double norm(const Vec2& x, const Vec2& a) const { return std::exp(sigma(x)) * a.norm(); }

    // Gamma[l](j, k) = Gamma^l_{jk}. Throws DomainError outside the closed chart disk.
    std::array<Mat2, 2> christoffel(const Vec2& x) const;
    // Geodesic acceleration -Gamma(v, v), no domain check (used on extensions).
    Vec2 geodesic_accel(const Vec2& x, const Vec2& v) const;
    double gauss_curvature(const Vec2& x) const;

    bool inside(const Vec2& x) const { return x.norm() < radius_; }
    Vec2 boundary_point(double angle) const { return radius_ * Vec2(std::cos(angle), std::sin(angle)); }
    // Euclidean unit outward normal at a boundary point (direction of x).
    Vec2 outward_normal(const Vec2& x) const { return x.normalized(); }
    // Area element density sqrt|g| = e^{2 sigma}.
    double area_density(const Vec2& x) const { return std::exp(2 * sigma(x)); }

  private:
    MetricChart(ChartKind kind, double radius, Expression sigma);

    ChartKind kind_;
    double radius_;
    Expression sigma_;
    std::array<Expression, 2> dsigma_;
    std::array<Expression, 3> d2sigma_;  // 11, 12, 22
    Expression curvature_;
};

struct SelfIntersection {
    double t1, t2;
    double angle;  // crossing angle in radians; 0 for a tangential (retraced) run
};

// A sampled unit-speed geodesic on the uniform grid t_k = k h, covering
// [t_begin, t_end] which contains [0, L] plus the extensions.
class GeodesicPath {
  public:
    double h = 0.0;
    double length = 0.0;  // L, the exit time
    int k0 = 0;           // index of t = 0
    std::vector<Vec2> x, v, a;
    Vec2 entry_point{0, 0}, entry_dir{0, 0}, exit_point{0, 0}, exit_dir{0, 0};
    bool exits = true;  // false for fixed-duration runs
    bool nontangential = false;
    std::vector<SelfIntersection> self_intersections;

    std::size_t size() const { return x.size(); }
    double time(std::size_t k) const { return (static_cast<double>(k) - k0) * h; }
    double t_begin() const { return time(0); }
    double t_end() const { return time(x.size() - 1); }
    // Quintic Hermite interpolation of position and velocity.
    Vec2 position(double t) const;
    Vec2 velocity(double t) const;
};

struct GeodesicOptions {
    double t_max = 200.0;
    double extension = -1.0;  // negative: 0.05 L
    double exit_tol = 1e-10;
    double intersection_tol = 1e-6;
    double angle_tol = 1e-3;
};

// RK4 from a boundary point with a g-unit inward direction until exit.
GeodesicPath integrate_geodesic(const MetricChart& chart, const Vec2& x0, const Vec2& v0, double h_ode,
                                const GeodesicOptions& opt = {});

// Geodesic entering at boundary angle `entry_angle`, with direction rotated
// by `aim_angle` from the inward normal.
GeodesicPath geodesic_from_angles(const MetricChart& chart, double entry_angle, double aim_angle, double h_ode,
                                  const GeodesicOptions& opt = {});

// Fixed-duration run from an arbitrary point, no exit handling.
GeodesicPath integrate_geodesic_for(const MetricChart& chart, const Vec2& x0, const Vec2& v0, double h_ode,
                                    double duration);

// One RK4 step of the geodesic flow.
void geodesic_rk4_step(const MetricChart& chart, Vec2& x, Vec2& v, double h);

bool is_nontangential(const GeodesicPath& path, const MetricChart& chart, double angle_tol);

// Angle between the path and the boundary tangent at entry and exit.
double entry_angle_to_boundary(const GeodesicPath& path);
double exit_angle_to_boundary(const GeodesicPath& path);

class Frame {
  public:
    std::vector<Vec2> e;   // unit normal field at the path samples
    std::vector<Vec2> de;  // its t-derivative in chart coordinates
    const GeodesicPath* path = nullptr;
    Vec2 at(double t) const;
};

// Transport of w0 (given at t = 0) along the whole sampled path.
Frame parallel_transport(const MetricChart& chart, const GeodesicPath& path, const Vec2& w0);
// The g-unit normal obtained by rotating the initial velocity by +90 degrees.
Vec2 unit_normal(const MetricChart& chart, const Vec2& x, const Vec2& v);

std::vector<SelfIntersection> find_self_intersections(const GeodesicPath& path, double tol);

}  // namespace beamlab
