#pragma once

// Gaussian beam quasimodes v_s = e^{i s Theta} a on Fermi tubes of a surface
// (transversal dimension m = 2, so the Hessian H is a complex scalar).

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include "beamlab/fermi.hpp"

namespace beamlab {

using cplx = std::complex<double>;
using VecC = Eigen::VectorXcd;

struct Frequency {
    double tau = 1.0;
    double lambda = 0.0;
    Frequency() = default;
    Frequency(double t, double l) : tau(t), lambda(l) {
        if (!(t >= 1.0)) throw PreconditionError("tau must be >= 1");
    }
    cplx s() const { return {tau, lambda}; }
};

// Cutoff profile: 1 on |r| <= 1/4, 0 on |r| >= 1/2, quintic in between.
double cutoff(double r);
double cutoff_d1(double r);
double cutoff_d2(double r);
// Quintic smoothstep S(u) on [0, 1] with vanishing first and second derivatives at the ends.
double smoothstep(double u);
double smoothstep_d1(double u);
double smoothstep_d2(double u);

// Axis jets at every half step of a uniform grid, shared by all ODE solves.
class JetTable {
  public:
    JetTable(const FermiTube& tube, double t0, double h, int n, int degree);
    const AxisJets& node(int k) const { return j_[2 * k]; }
    const AxisJets& mid(int k) const { return j_[2 * k + 1]; }
    double t0() const { return t0_; }
    double h() const { return h_; }
    int steps() const { return n_; }
    int degree() const { return degree_; }

  private:
    double t0_, h_;
    int n_, degree_;
    std::vector<AxisJets> j_;
};

class RiccatiSolution {
  public:
    double t0 = 0, h = 0;
    std::vector<cplx> H, dH, ddH;  // samples at t0 + k h
    std::vector<double> F;
    std::vector<double> int_re_h;  // int_{t0}^{t_k} Re H

    std::size_t size() const { return H.size(); }
    double time(std::size_t k) const { return t0 + h * static_cast<double>(k); }
    cplx at(double t) const;
    // max_k |Im H_k - Im H_0 exp(-2 int Re H)| / Im H_k
    double determinant_identity_residual() const;
    double min_im() const;
};

// RK4 for H' = F - H^2 on the table grid. Throws IntegrationError when Im H
// stops being positive.
RiccatiSolution solve_riccati(const JetTable& jets, cplx H0);
RiccatiSolution solve_riccati(const FermiTube& tube, cplx H0, double h = 1e-3);

// Theta(t, y) = sum_p theta_p(t) y^p, theta_0 = t, theta_1 = 0, theta_2 = H/2.
struct PhaseJet {
    double t0 = 0, h = 0;
    int order = 0;
    std::vector<VecC> th, dth, ddth;

    std::size_t size() const { return th.size(); }
    cplx H(std::size_t k) const { return 2.0 * th[k][2]; }
    // Coefficient vectors and their first two t-derivatives at time t.
    void at(double t, VecC& v, VecC& d, VecC& dd) const;
};

PhaseJet build_phase(const JetTable& jets, const RiccatiSolution& ric, int order, const VecC* theta0 = nullptr);

// a = tau^{1/4} (a_0 + s^{-1} a_{-1} + ... + s^{-N} a_{-N}) chi(y / delta').
struct AmplitudeJet {
    double t0 = 0, h = 0;
    int order = 0;
    double c0 = 0;
    double delta = 1;
    std::vector<std::vector<VecC>> a, da, dda;  // [level k][node]

    // Sum over levels with weights s^{-k}.
    void at(double t, cplx s, int levels, VecC& v, VecC& d, VecC& dd) const;
};

// The normalization constant (det Im H0)^{1/4} / (int e^{-y^2} dy)^{1/2}.
double beam_c0(cplx H0);

AmplitudeJet build_amplitude(const JetTable& jets, const PhaseJet& phase, int order, double delta, double c0,
                             const std::vector<VecC>* initial = nullptr);

struct BeamSegment {
    std::shared_ptr<FermiTube> tube;
    RiccatiSolution riccati;
    PhaseJet phase;
    AmplitudeJet amp;
    // Partition weight in t: ramps up on [up_lo, up_hi], down on [down_lo, down_hi].
    double up_lo = -1e300, up_hi = -1e300, down_lo = 1e300, down_hi = 1e300;
    double weight(double t) const;
    double weight_d1(double t) const;
    double weight_d2(double t) const;
};

struct BeamOptions {
    int order = 7;
    double h = 1e-3;
    cplx H0 = cplx(0, 1);
    double delta = -1;     // tube cutoff radius; negative picks default_tube_delta
    double overlap = 0.2;  // segment overlap on self-intersecting paths
    int max_halvings = 6;
    bool single_segment = false;
    std::vector<double> cuts;  // explicit segment boundaries (overrides crossing-based splitting)
};

class Quasimode {
  public:
    std::vector<BeamSegment> segments;
    const MetricChart* chart = nullptr;
    const GeodesicPath* path = nullptr;
    int order = 0;

    // Field of one segment at Fermi coordinates, with the partition weight.
    cplx segment_value(std::size_t j, double t, double y, const Frequency& f) const;
    // Sum over segments covering x; 0 outside all supports.
    cplx evaluate(const Vec2& x, const Frequency& f) const;
};

Quasimode build_quasimode(const MetricChart& chart, const GeodesicPath& path, const Frame& frame,
                          const BeamOptions& opt = {});

// Glue already built segments; checks that consecutive intervals overlap and
// installs smooth partition weights on the overlaps.
Quasimode glue_quasimode(std::vector<BeamSegment> segments, const MetricChart& chart, const GeodesicPath& path,
                         int order);

// Pointwise residual (-Delta - s^2) v of one segment at Fermi coordinates,
// including the cutoff and partition weight.
cplx segment_residual(const Quasimode& qm, std::size_t j, double t, double y, const Frequency& f, cplx* value = nullptr);

struct QuadratureSpec {
    int axis_nodes = 96;
    int transverse_nodes = 64;
    double width_factor = 12;  // transverse window in units of the beam width
    bool refine_check = true;
};

// L2(M0) norm of the residual. On a path with transversal crossings the
// axis-coordinate norm is scaled by sqrt(2), an upper bound for two branches.
double residual_norm(const Quasimode& qm, const Frequency& f, const QuadratureSpec& q = {});
// ||v_s||^2 in L2(M0), diagonal part (plus cross terms when present).
double mass(const Quasimode& qm, const Frequency& f, const QuadratureSpec& q = {});
// int |v_s|^2 psi dV, including cross terms between branches.
double concentration(const Quasimode& qm, const Expression& psi, const Frequency& f, const QuadratureSpec& q = {});
// int_0^L e^{-2 lambda t} psi(gamma(t)) dt.
double concentration_limit(const GeodesicPath& path, const Expression& psi, double lambda);
// int v^(l) conj(v^(l')) psi dV over points reached by both segments on different branches.
cplx cross_term(const Quasimode& qm, std::size_t l, std::size_t lp, const Expression& psi, const Frequency& f,
                const QuadratureSpec& q = {});
// int F v_{fv} conj(v_{fw}) dV over M0, both fields from the same beam at
// frequencies sharing tau; cross terms between branches included.
cplx beam_pairing(const Quasimode& qm, const Frequency& fv, const Frequency& fw,
                  const std::function<cplx(const Vec2&)>& F, const QuadratureSpec& q = {});

}  // namespace beamlab
