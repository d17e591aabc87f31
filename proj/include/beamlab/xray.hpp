#pragma once

// Geodesic and attenuated ray transforms, geodesic fans, Tikhonov inversion
// and the lambda-derivative moment recursion.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "beamlab/manifold.hpp"

namespace beamlab {

// Composite Gauss-Legendre rule along a geodesic, with the chart points.
struct RayRule {
    std::vector<double> t, w;
    std::vector<Vec2> x;
    double length = 0;
    std::size_t size() const { return t.size(); }
};

// 16-point panels of length at most panel_length.
RayRule ray_rule(const GeodesicPath& path, double panel_length = 0.25);

// Scalar field on the (n x n) node grid over [-R, R]^2, bilinear in between.
struct GridField {
    int n = 0;
    double R = 1;
    Eigen::VectorXd values;  // index i + n j for node (x1_i, x2_j)

    GridField() = default;
    GridField(int n_, double R_) : n(n_), R(R_), values(Eigen::VectorXd::Zero(n_ * n_)) {}
    double spacing() const { return 2 * R / (n - 1); }
    Vec2 node(int i, int j) const { return Vec2(-R + i * spacing(), -R + j * spacing()); }
    int index(int i, int j) const { return i + n * j; }
    // Bilinear interpolation; zero outside the grid square.
    double operator()(const Vec2& x) const;
    // Nonzero interpolation weights at x as (node index, weight).
    std::vector<std::pair<int, double>> stencil(const Vec2& x) const;
    static GridField sample(const Expression& f, int n, double R);
};

double ray_transform(const Expression& f, const RayRule& rule);
double ray_transform(const GridField& f, const RayRule& rule);
double ray_transform(const Expression& f, const GeodesicPath& path);
// int_0^L e^{-2 lambda t} f(gamma(t)) dt.
double attenuated_transform(const Expression& f, const RayRule& rule, double lambda);
double attenuated_transform(const Expression& f, const GeodesicPath& path, double lambda);

struct FanMember {
    double entry_angle = 0, aim_angle = 0;
    int entry_index = 0, aim_index = 0;
    RayRule rule;
    Vec2 entry_point{0, 0}, exit_point{0, 0};
};

struct FanReject {
    double entry_angle = 0, aim_angle = 0;
    std::string reason;
};

struct GeodesicFan {
    int n_entry = 0, n_aim = 0;
    std::vector<FanMember> members;
    std::vector<FanReject> rejects;
    std::size_t size() const { return members.size(); }
};

// Entry angles 2 pi i / n_entry, aims -pi/2 + pi j / n_aim relative to the
// inward normal, so doubling either count refines the grid. Tangential and
// trapped geodesics go to the reject log. Throws ConfigError on an empty fan.
GeodesicFan build_fan(const MetricChart& chart, int n_entry, int n_aim, double angle_tol = 1e-3,
                      double h_ode = 1e-3);

// values(member, lambda index).
struct TransformData {
    std::vector<double> lambdas;
    Eigen::MatrixXd values;
    Eigen::VectorXd column(double lambda) const;
};

TransformData attenuated_data(const Expression& f, const GeodesicFan& fan, const std::vector<double>& lambdas);

// Path-integral matrix of bilinear grid fields: rows are fan members.
Eigen::MatrixXd ray_matrix(const GeodesicFan& fan, int n, double R);

// argmin ||A f - data||^2 + reg sum over grid edges (f_i - f_j)^2, the edge
// sum being the discrete Dirichlet energy int |grad f|^2.
// Throws RegularizationError when the normal equations are singular.
GridField invert_ray_transform(const GeodesicFan& fan, const Eigen::VectorXd& data, int n, double R,
                               double reg_weight);

// Relative L2 error of a grid field against f over the nodes inside the chart disk.
double relative_l2_error(const GridField& got, const Expression& f, double disk_radius);

// Moments M_k = int t^k g_0(gamma(t)) dt, k = 0..k_max, from data
// D(lambda) = int e^{-2 lambda t} qhat(2 lambda, gamma(t)) dt sampled on a
// symmetric lambda grid, for qhat(2 lambda, x) = p(lambda) g_0(x) with known
// profile derivatives p^{(j)}(0) (default p = 1). Differentiating k times at
// 0 gives D^{(k)} = sum_j C(k,j) (-2)^{k-j} p^{(j)}(0) M_{k-j}, solved for M_k.
std::vector<double> moment_reduction(const std::vector<double>& lambdas, const std::vector<double>& data, int k_max,
                                     const std::vector<double>& profile = {});

// Weights of the derivative of order `order` at x0 from values at `nodes`.
std::vector<double> finite_difference_weights(const std::vector<double>& nodes, double x0, int order);

}  // namespace beamlab
