#pragma once

// Spectral solver for -d_t^2 - Delta_{g0} + q0 - lambda on T = R x M0.
//
// M0 is discretized by second-order finite differences: the interval [0, pi]
// (node spacing h, boundary nodes 0 and pi) or a disk in cell-centred polar
// coordinates (boundary nodes on the circle). The discrete operator is
// M^{-1} (K + M Q) with K symmetric and M the diagonal node weights, so the
// eigenvectors are M-orthonormal and every quantity below is computed for the
// same discrete problem.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "beamlab/expression.hpp"

namespace beamlab {

using cplx = std::complex<double>;
using VecC = Eigen::VectorXcd;
using MatC = Eigen::MatrixXcd;

enum class TransversalKind { Interval, Disk };

struct TransversalGrid {
    TransversalKind kind = TransversalKind::Interval;
    int n_radial = 0, n_angular = 0;  // disk only
    double radius = 1;                 // disk only
    std::vector<double> weight;        // M, one per interior node
    std::vector<std::array<double, 2>> node;
    std::vector<std::array<double, 2>> boundary_node;
    Eigen::SparseMatrix<double> K;     // interior stiffness
    Eigen::SparseMatrix<double> Kb;    // interior-to-boundary coupling, (K u)_i + (Kb u_b)_i
    // Normal derivative: d_nu u(b) = (S u)_b + (Sb u_b)_b.
    Eigen::SparseMatrix<double> S, Sb;
    std::vector<double> q;             // q0 at the interior nodes
    std::size_t size() const { return weight.size(); }
    std::size_t boundary_size() const { return boundary_node.size(); }
    double boundary_weight = 1;        // dS per boundary node (1 for the interval)
};

TransversalGrid interval_grid(int n, const Expression& q0);
TransversalGrid disk_grid(int n_radial, int n_angular, double radius, const Expression& q0);

struct TransversalSpectrum {
    TransversalGrid grid;
    Eigen::VectorXd lambda;  // all discrete eigenvalues, ascending
    Eigen::MatrixXd phi;     // columns: M-orthonormal eigenvectors at interior nodes
    Eigen::MatrixXd dphi;    // rows: boundary nodes, columns: d_nu phi_l
    int lmax = 0;            // resolved modes

    // l0 with lambda_{l0} < lambda < lambda_{l0+1} (1-based count of propagating modes).
    int propagating(double lambda) const;
    // h~(l) = int_{dM0} h d_nu phi_l dS.
    VecC boundary_moments(const VecC& h) const;
};

// Dense symmetric eigensolve of the discrete operator. Throws ConfigError if
// lmax exceeds the resolvable modes (fewer than 8 lmax nodes per dimension).
TransversalSpectrum solve_transversal_eigen(TransversalGrid grid, int lmax);

// Nearest discrete eigenvalue to mu, as (index, value).
std::pair<int, double> nearest_eigenvalue(const TransversalSpectrum& sp, cplx mu);

// Solve (-Delta + q0 - mu) v = 0, v = h on the boundary, by a direct sparse
// solve; returns d_nu v at the boundary nodes. Throws PoleError near an eigenvalue.
VecC transversal_dn(const TransversalSpectrum& sp, cplx mu, const VecC& h);
// The same solve returning v at the interior nodes.
VecC transversal_solution(const TransversalSpectrum& sp, cplx mu, const VecC& h);

// DN operator on the boundary node basis at spectral parameter mu.
struct DnSample {
    cplx mu;
    MatC matrix;  // (i, j): d_nu v at node i for h = e_j
};
DnSample transversal_dn_matrix(const TransversalSpectrum& sp, cplx mu);

// Uniform grid t_j = -T + j dt, j < n (periodic, dt = 2T / n).
struct TGrid {
    double T = 20;
    int n = 4096;
    double dt() const { return 2 * T / n; }
    double t(int j) const { return -T + j * dt(); }
};

// Mode-wise solve of (-d_t^2 + lambda_l - lambda) u(t, l) = F(t, l) by FFT.
// F has one column per mode (modes 0..F.cols()-1). Requires lambda below the
// spectrum; throws PreconditionError on a decay failure at |t| = T.
MatC cylinder_mode_solve(const TransversalSpectrum& sp, double lambda, const MatC& F, const TGrid& g = {});
// max_l ||(-d_t^2 + lambda_l - lambda) u - F|| / ||F|| with spectral derivatives.
double mode_residual(const TransversalSpectrum& sp, double lambda, const MatC& u, const MatC& F, const TGrid& g = {});

// Lambda^T(lambda)(e^{ikt} h) at time t: e^{ikt} transversal_dn(lambda - k^2, h).
VecC cylinder_dn(const TransversalSpectrum& sp, double lambda, double k, const VecC& h, double t = 0);
// The same quantity from the mode expansion of u = E + w, with E the discrete
// harmonic extension of h and w solved mode by mode.
VecC cylinder_dn_modes(const TransversalSpectrum& sp, double lambda, double k, const VecC& h, double t = 0);

// Independent oracle for the interval model: 5-point finite differences on the
// truncated cylinder [-T, T] x [0, pi] (zero data at t = +-T), factored once.
class TruncatedCylinder {
  public:
    // Square cells of size pi / (nx + 1); T is rounded up to a whole number of cells.
    TruncatedCylinder(const Expression& q0, double lambda, int nx, double T = 12);
    // d_nu u at x = 0 and x = pi, t = 0, for boundary data e^{ikt} h.
    VecC dn(double k, const VecC& h) const;
    int nx() const { return nx_; }

  private:
    int nx_, nt_;
    double dx_;
    Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu_;
};

// Richardson extrapolation over nx and 2 nx + 1.
struct OracleValue {
    VecC dn;
    double gap = 0;  // |fine - coarse|, a bound on the unextrapolated error
};
std::vector<OracleValue> truncated_cylinder_dn(const Expression& q0, double lambda,
                                               const std::vector<std::pair<double, VecC>>& cases, int nx = 64,
                                               double T = 12);

// Outgoing solution of (-d_t^2 + lambda_l - lambda) u = s for lambda > lambda_l:
// u = G * s, G(t) = (i / 2 kappa) e^{i kappa |t|}, kappa = sqrt(lambda - lambda_l).
// s is supported in [a, b]. Throws PreconditionError at a threshold.
struct OutgoingSolution {
    double kappa = 0;
    std::vector<double> t;
    std::vector<cplx> u, du;
    // max over t = +-T of |(d_t -+ i kappa) u| / max |u|.
    double radiation_residual = 0;
};
OutgoingSolution outgoing_mode_solve(const TransversalSpectrum& sp, double lambda, int l,
                                     const std::function<cplx(double)>& source, double a, double b,
                                     const std::vector<double>& t_out);

// Cutoff Psi_R(t) = 1 for |t| <= R, Phi(R^alpha (|t| - R)) beyond, with Phi the
// quintic bump (1 on |s| <= 1/2, 0 on |s| >= 1).
struct CutoffFamily {
    double R = 1, alpha = 0.1;
    double operator()(double t) const;
    double d1(double t) const;
    double d2(double t) const;
    double support() const { return R + std::pow(R, -alpha); }
    // m_s alpha + mu_w + 1/2 < 0; throws ConfigError citing the inequality otherwise.
    static void check_constraint(double m_s, double alpha, double mu_w);
    static double default_alpha(double m_s, double mu_w) { return 0.4 * (-mu_w - 0.5) / m_s; }
};

struct RadiatingResult {
    VecC dn;                        // d_nu u at the boundary nodes at time t
    VecC propagating, evanescent;   // contributions of modes l <= l0 and l > l0 (of w)
    VecC extension;                 // Psi e^{ikt} d_nu E
    double radiation_residual = 0;  // outgoing condition at |t| = T for modes l <= l0
};

// Lambda^T(lambda) f_R, f_R = e^{ikt} Psi_R(t) h, inside the continuous
// spectrum, at time t. Modes l <= l0 use the outgoing kernel, modes l > l0 the
// decaying one. t_rad is where the radiation condition is checked.
RadiatingResult radiating_dn(const TransversalSpectrum& sp, double lambda, double k, const VecC& h,
                             const CutoffFamily& cut, double t = 0, double t_rad = -1);

// (1 / (R - 1)) int_1^R fn(R') dR' by composite Gauss-Legendre.
cplx cesaro_average(const std::function<cplx(double)>& fn, double R, double panel = 0.5);

struct AveragePoint {
    double R;
    VecC average, target;
    double error;  // max over boundary nodes of |average - target|
    double radiation_residual;
};

// Cesaro averages of radiating_dn over the cutoff radius for each R in R_list.
std::vector<AveragePoint> averaged_recovery(const TransversalSpectrum& sp, double lambda, double k, const VecC& h,
                                            const std::vector<double>& R_list, double alpha, double t = 0);

struct ContinuationFit {
    std::vector<double> poles;
    MatC residues;       // one row per pole, entries flattened column-major
    MatC c0, c1;         // polynomial part c0 + c1 mu
    double fit_residual = 0;
    MatC evaluate(cplx mu) const;
    MatC residue(int pole) const;
};

// Entrywise least-squares fit of sum_l r_l / (mu - p_l) + c0 + c1 mu with the
// given poles; throws NumericalError when the relative fit residual exceeds tol.
ContinuationFit meromorphic_fit(const std::vector<DnSample>& samples, const std::vector<double>& poles,
                                double tol = 1e-6);
DnSample meromorphic_continuation(const std::vector<DnSample>& samples, const std::vector<double>& poles, cplx target,
                                  double tol = 1e-6);
// Experimental: refines pole locations from seeds by Gauss-Newton on the
// projected residual (residues eliminated by least squares).
ContinuationFit blind_fit(const std::vector<DnSample>& samples, std::vector<double> seeds, int iterations = 30);

}  // namespace beamlab
