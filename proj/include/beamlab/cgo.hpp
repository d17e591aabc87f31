#pragma once

// CTA model M = R x M0 with g = c (e + g0), the CGO limit identity through
// Gaussian beam pairings, and the potential-recovery pipeline.
//
// Model expressions use x1 for the Euclidean direction and (x2, x3) for the
// chart coordinates of M0, so a point is (x1, x'), x' = (x2, x3).

#include <functional>

#include "beamlab/beam.hpp"
#include "beamlab/quadrature.hpp"
#include "beamlab/xray.hpp"

namespace beamlab {

struct CtaModel {
    const MetricChart* chart = nullptr;
    Expression c{1.0};
    Expression q1{0.0}, q2{0.0};
    double x1max = 1;
    int n = 3;  // dim M = dim M0 + 1
    // q1 - q2 is cut off to |x1| <= x1max (zero extension). Without truncation
    // the support is checked by sampling.
    bool truncate = true;

    double c_at(double x1, const Vec2& xp) const { return c(x1, xp[0], xp[1]); }
    double dq(double x1, const Vec2& xp) const { return q1(x1, xp[0], xp[1]) - q2(x1, xp[0], xp[1]); }
};

// Throws ConfigError when c <= 0 at a sample point or, without truncation,
// when q1 - q2 is nonzero beyond x1max.
void check_cta_model(const CtaModel& model);

// qtilde = c (q - c^{(n-2)/4} Delta_g c^{-(n-2)/4}), derivatives of c by
// central differences with step 1e-4.
class ReducedPotential {
  public:
    ReducedPotential(const CtaModel& model, const Expression& q) : model_(&model), q_(q) {}
    double operator()(double x1, const Vec2& xp) const;

  private:
    const CtaModel* model_;
    Expression q_;
};

ReducedPotential conformal_reduce(const CtaModel& model, const Expression& q);

// Gauss-Legendre rule on [-x1max, x1max].
QuadRule x1_rule(const CtaModel& model, int panels = 4);

// qhat_c(2 lambda, x') = int e^{-2 i lambda x1} (c (q1 - q2))(x1, x') dx1.
cplx fourier_profile(const CtaModel& model, double lambda, const Vec2& xp, const QuadRule& q1rule);

// int_0^L e^{-2 lambda t} qhat_c(2 lambda, gamma(t)) dt.
cplx fourier_ray_functional(const CtaModel& model, const RayRule& rule, double lambda);
cplx fourier_ray_functional(const CtaModel& model, const GeodesicPath& path, double lambda);

// int_M (q1 - q2) e^{-i (l1 + l2) x1} c^{-(n-2)/2} v_s conj(w_t) dV_g with
// s = tau + i l1, t = tau + i l2 and dV_g = c^{n/2} dx1 dV_{g0}. Both beams
// must be the same construction (frequency is applied at evaluation).
cplx cgo_pairing(const CtaModel& model, const Quasimode& qm_v, const Quasimode& qm_w, double lambda1, double lambda2,
                 double tau, const QuadratureSpec& q = {});

struct RecoveryResult {
    GridField q0;             // qhat(0, .)
    GridField dq_re, dq_im;   // d/dlambda qhat(2 lambda, .) at lambda = 0
    TransformData functional_re, functional_im;
};

// Measures fourier_ray_functional over the fan and lambda grid, inverts the
// lambda = 0 data, then inverts int d/dlambda qhat dt = D'(0) + 2 int t qhat(0) dt.
RecoveryResult recover_potential(const CtaModel& model, const GeodesicFan& fan, const std::vector<double>& lambdas,
                                 int grid_n, double reg_weight);

}  // namespace beamlab
