#include <cmath>

#include "beamlab/cgo.hpp"
#include "doctest.h"

using namespace beamlab;

namespace {

struct Diameter {
    MetricChart chart = MetricChart::euclidean_disk(1.0);
    GeodesicPath path;
    Frame frame;
    Diameter() {
        path = geodesic_from_angles(chart, M_PI, 0.0, 1e-3);
        frame = parallel_transport(chart, path, unit_normal(chart, path.entry_point, path.entry_dir));
    }
    Diameter(const Diameter&) = delete;
};

// Symbolic Delta_g w for g = c (dx1^2 + e^{2 sigma}(dx2^2 + dx3^2)), n = 3, flux form.
Expression symbolic_laplacian(const Expression& c, const Expression& sigma, const Expression& w) {
    const Expression half = pow(c, Expression(0.5));
    const Expression e2s = exp(Expression(2.0) * sigma);
    Expression sum = (half * e2s * w.derivative(0)).derivative(0);
    for (int j : {1, 2}) sum = sum + (half * w.derivative(j)).derivative(j);
    return sum / (pow(c, Expression(1.5)) * e2s);
}

}  // namespace

TEST_CASE("conformal reduction") {
    const auto flat = MetricChart::euclidean_disk(1.0);
    CtaModel m;
    m.chart = &flat;
    const Expression q = Expression::parse("x1 + x2*x3 + 2");
    const ReducedPotential same = conformal_reduce(m, q);
    for (const Vec2& xp : {Vec2(0.1, 0.2), Vec2(-0.5, 0.3)}) CHECK(same(0.4, xp) == q(0.4, xp[0], xp[1]));

    // c = e^{x1}: qtilde = 1/16 by hand, and the symbolic oracle agrees.
    m.c = Expression::parse("exp(x1)");
    const ReducedPotential red = conformal_reduce(m, Expression(0.0));
    const Expression w = pow(m.c, Expression(-0.25));
    const Expression oracle = m.c * (Expression(0.0) - pow(m.c, Expression(0.25)) * symbolic_laplacian(m.c, Expression(0.0), w));
    for (const Vec2& xp : {Vec2(0.1, 0.2), Vec2(-0.5, 0.3)})
        for (double x1 : {-0.7, 0.0, 0.9}) {
            CHECK(std::fabs(red(x1, xp) - 1.0 / 16) <= 1e-6);
            CHECK(std::fabs(red(x1, xp) - oracle(x1, xp[0], xp[1])) <= 1e-6);
        }

    // Curved M0 and c depending on all variables.
    const auto curved = MetricChart::conformal_disk(Expression::parse("0.3*x1 - 0.2*x2^2"), 1.0);
    CtaModel cm;
    cm.chart = &curved;
    cm.c = Expression::parse("1 + 0.3*x1^2 + 0.2*x2*x3 + 0.1*x3");
    const Expression qq = Expression::parse("sin(x1) + x2");
    const ReducedPotential rc = conformal_reduce(cm, qq);
    // The chart exponent in model variables: chart x1, x2 are model x2, x3.
    const Expression sigma = Expression::parse("0.3*x2 - 0.2*x3^2");
    const Expression wc = pow(cm.c, Expression(-0.25));
    const Expression oc = cm.c * (qq - pow(cm.c, Expression(0.25)) * symbolic_laplacian(cm.c, sigma, wc));
    for (const Vec2& xp : {Vec2(0.1, 0.2), Vec2(-0.5, 0.3), Vec2(0.2, -0.6)})
        for (double x1 : {-0.7, 0.4})
            CHECK(std::fabs(rc(x1, xp) - oc(x1, xp[0], xp[1])) <= 1e-6 * (1 + std::fabs(oc(x1, xp[0], xp[1]))));

    // Equal potentials reduce to equal potentials.
    CHECK(conformal_reduce(cm, qq)(0.3, Vec2(0.1, 0.1)) - rc(0.3, Vec2(0.1, 0.1)) == 0.0);
    cm.c = Expression::parse("x1");
    CHECK_THROWS_AS(conformal_reduce(cm, qq), ConfigError);
}

TEST_CASE("Fourier ray functional") {
    Diameter d;
    CtaModel m;
    m.chart = &d.chart;
    m.x1max = 3;
    m.q1 = Expression::parse("exp(-x1^2) * (1 + 0.5*x2 + x3^2)");
    const RayRule r = ray_rule(d.path);
    // Same quadrature by hand at lambda = 0.
    const QuadRule qx = x1_rule(m);
    double by_hand = 0;
    for (std::size_t k = 0; k < r.size(); ++k)
        for (std::size_t i = 0; i < qx.size(); ++i) by_hand += r.w[k] * qx.w[i] * m.q1(qx.x[i], r.x[k][0], r.x[k][1]);
    const cplx f0 = fourier_ray_functional(m, r, 0.0);
    CHECK(std::fabs(f0.real() - by_hand) <= 1e-10);
    CHECK(f0.imag() == 0.0);

    // x1 factor at lambda = 0.5: truncated Gaussian transform at frequency 1,
    // against a fine independent quadrature and the untruncated closed form.
    const Vec2 xp(0.2, 0.0);
    const double sx = 1 + 0.5 * xp[0];
    const cplx prof = fourier_profile(m, 0.5, xp, qx) / sx;
    const QuadRule fine = composite_gauss(200, 8, -3.0, 3.0);
    const cplx oracle = integrate(fine, [](double x) { return std::exp(-x * x) * std::exp(cplx(0, -x)); });
    CHECK(std::abs(prof - oracle) <= 1e-12);
    CHECK(std::abs(prof - std::sqrt(M_PI) * std::exp(-0.25)) <= 1e-3);

    CtaModel zero = m;
    zero.q2 = zero.q1;
    CHECK(fourier_ray_functional(zero, r, 0.3) == cplx(0.0));
}

TEST_CASE("CGO pairing converges to the Fourier ray functional") {
    Diameter d;
    const Quasimode qm = build_quasimode(d.chart, d.path, d.frame);
    CtaModel m;
    m.chart = &d.chart;
    m.x1max = 3;
    m.q1 = Expression::parse("exp(-x1^2) * (1 + 0.5*x2 + x3^2)");
    m.q2 = Expression::parse("0.2*exp(-x1^2) * (1 + 0.5*x2 + x3^2)");
    for (double lambda : {0.0, 0.5}) {
        const cplx target = fourier_ray_functional(m, d.path, lambda);
        std::vector<double> errs;
        for (double tau : {100.0, 200.0, 400.0})
            errs.push_back(std::abs(cgo_pairing(m, qm, qm, lambda, lambda, tau) - target));
        MESSAGE("lambda " << lambda << " errors " << errs[0] << " " << errs[1] << " " << errs[2]);
        CHECK(errs[2] <= 0.05 * std::abs(target));
        CHECK(errs[1] <= 1.2 * errs[0]);
        CHECK(errs[2] <= 1.2 * errs[1]);
    }
    // Separable limit at lambda = 0: (int rho)(int sigma(gamma)).
    const double rho = 0.8 * std::sqrt(M_PI) * std::erf(3.0);
    const double ray = ray_transform(Expression::parse("1 + 0.5*x1 + x2^2"), d.path);
    CHECK(std::abs(cgo_pairing(m, qm, qm, 0, 0, 400) - rho * ray) <= 0.05 * rho * ray);

    // Swapping the frequencies conjugates the pairing for an even x1 profile.
    const cplx a = cgo_pairing(m, qm, qm, 0.3, 0.5, 50), b = cgo_pairing(m, qm, qm, 0.5, 0.3, 50);
    CHECK(std::abs(a - std::conj(b)) <= 1e-10 * std::abs(a));

    CtaModel zero = m;
    zero.q2 = zero.q1;
    for (double tau : {50.0, 400.0}) CHECK(cgo_pairing(zero, qm, qm, 0.5, 0.5, tau) == cplx(0.0));
}

TEST_CASE("potential recovery from functionals") {
    const auto disk = MetricChart::euclidean_disk(1.0);
    const GeodesicFan fan = build_fan(disk, 32, 16);
    const std::vector<double> lambdas{-0.02, -0.01, 0.0, 0.01, 0.02};
    CtaModel m;
    m.chart = &disk;
    m.x1max = 3;
    const Expression prof = Expression::parse("1 - x1^2 - x2^2");
    m.q1 = Expression::parse("exp(-x1^2) / sqrt(pi) * (1 - x2^2 - x3^2)");
    const RecoveryResult r = recover_potential(m, fan, lambdas, 41, 1e-4);
    const double e0 = relative_l2_error(r.q0, prof, 1.0);
    MESSAGE("q0 error " << e0);
    CHECK(e0 <= 0.07);

    // Odd rho: qhat(0) = 0 and d/dlambda qhat(2 lambda) = -2i (int x1 rho) f = -i sqrt(pi) f.
    CtaModel odd = m;
    odd.q1 = Expression::parse("x1 * exp(-x1^2) * (1 - x2^2 - x3^2)");
    const RecoveryResult ro = recover_potential(odd, fan, lambdas, 41, 1e-4);
    CHECK(ro.q0.values.cwiseAbs().maxCoeff() <= 1e-8);
    const Expression dtarget = Expression(-std::sqrt(M_PI)) * prof;
    const double ed = relative_l2_error(ro.dq_im, dtarget, 1.0);
    MESSAGE("derivative error " << ed);
    CHECK(ed <= 0.10);
    CHECK(ro.dq_re.values.cwiseAbs().maxCoeff() <= 1e-6);

    CtaModel zero = m;
    zero.q2 = zero.q1;
    const RecoveryResult rz = recover_potential(zero, fan, lambdas, 21, 1e-4);
    CHECK(rz.q0.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rz.dq_re.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rz.dq_im.values.cwiseAbs().maxCoeff() == 0.0);
}
