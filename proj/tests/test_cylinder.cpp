#include <algorithm>
#include <cmath>

#include "beamlab/cylinder.hpp"
#include "beamlab/errors.hpp"
#include "doctest.h"

using namespace beamlab;

namespace {

const TransversalSpectrum& interval(int n = 512) {
    static const TransversalSpectrum sp512 = solve_transversal_eigen(interval_grid(512, Expression(0.0)), 15);
    static const TransversalSpectrum sp128 = solve_transversal_eigen(interval_grid(128, Expression(0.0)), 15);
    return n == 512 ? sp512 : sp128;
}

VecC vec2(cplx a, cplx b) {
    VecC v(2);
    v << a, b;
    return v;
}

// sqrt(mu) cot(sqrt(mu) pi), continued through mu < 0.
double dn_exact(double mu) {
    if (mu < 0) {
        const double s = std::sqrt(-mu);
        return s / std::tanh(s * M_PI);
    }
    const double s = std::sqrt(mu);
    return s / std::tan(s * M_PI);
}

}  // namespace

TEST_CASE("interval spectrum") {
    const int n = 128;
    const TransversalSpectrum& sp = interval(n);
    const double h = M_PI / (n + 1);
    // Second-difference eigenvalues are known exactly.
    for (int l = 1; l <= 20; ++l) {
        const double exact = 2 / (h * h) * (1 - std::cos(l * h));
        CHECK(std::fabs(sp.lambda[l - 1] - exact) <= 1e-9 * exact);
    }
    const Eigen::MatrixXd M = Eigen::VectorXd::Map(sp.grid.weight.data(), n).asDiagonal();
    CHECK((sp.phi.transpose() * M * sp.phi - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10);
    const Eigen::MatrixXd K = Eigen::MatrixXd(sp.grid.K);
    for (int l = 0; l < 15; ++l) {
        const Eigen::VectorXd r = K * sp.phi.col(l) - sp.lambda[l] * M * sp.phi.col(l);
        CHECK(r.norm() <= 1e-8 * std::max(1.0, sp.lambda[l]));
    }
    CHECK(sp.propagating(1.5) == 1);
    CHECK(sp.propagating(0.5) == 0);
    CHECK_THROWS_AS(solve_transversal_eigen(interval_grid(64, Expression(0.0)), 9), ConfigError);
}

TEST_CASE("disk spectrum") {
    const TransversalSpectrum sp = solve_transversal_eigen(disk_grid(30, 24, 1.0, Expression(0.0)), 5);
    const double j01sq = 5.783185962946784;
    CHECK(std::fabs(sp.lambda[0] - j01sq) <= 0.005 * j01sq);
    const auto n = static_cast<Eigen::Index>(sp.grid.size());
    const Eigen::MatrixXd M = Eigen::VectorXd::Map(sp.grid.weight.data(), n).asDiagonal();
    const Eigen::MatrixXd G = sp.phi.leftCols(10).transpose() * M * sp.phi.leftCols(10);
    CHECK((G - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() <= 1e-10);
    // The second eigenvalue is the doubly degenerate j_{1,1}^2 = 14.682.
    CHECK(std::fabs(sp.lambda[1] - sp.lambda[2]) <= 1e-8 * sp.lambda[1]);
    CHECK(std::fabs(sp.lambda[1] - 14.681970642123893) <= 0.01 * 14.68);
    // Constant boundary data at mu = 0 extends to the constant: zero flux.
    const VecC dn = transversal_dn(sp, 0.0, VecC::Ones(24));
    CHECK(dn.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("transversal DN map") {
    const TransversalSpectrum& sp = interval();
    for (double mu : {-2.5, -10.0, 0.5, 2.5}) {
        const VecC d = transversal_dn(sp, mu, vec2(1, 0));
        CHECK(std::fabs(d[0].real() - dn_exact(mu)) <= 2e-3 * std::max(1.0, std::fabs(dn_exact(mu))));
    }
    // A constant potential shifts the spectral parameter.
    const TransversalSpectrum shifted = solve_transversal_eigen(interval_grid(128, Expression(1.0)), 15);
    const VecC a = transversal_dn(shifted, 0.3, vec2(0.4, -1.2)), b = transversal_dn(interval(128), -0.7, vec2(0.4, -1.2));
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-11);
    // Residue at lambda_1 for h = (1, 0) is h~(1) d_nu phi_1(0).
    const double l1 = sp.lambda[0], e = 1e-5;
    const double res = 0.5 * ((e * transversal_dn(sp, l1 + e, vec2(1, 0))[0]).real() -
                              (e * transversal_dn(sp, l1 - e, vec2(1, 0))[0]).real());
    CHECK(std::fabs(-res - sp.boundary_moments(vec2(1, 0))[0].real() * sp.dphi(0, 0)) <= 1e-3 * std::fabs(res));
    CHECK(std::fabs(std::fabs(res) - 2 / M_PI) <= 1e-3);
    CHECK_THROWS_AS(transversal_dn(sp, l1 + 1e-8, vec2(1, 0)), PoleError);
    try {
        transversal_dn(sp, 4.0, vec2(1, 0));
    } catch (const PoleError& err) {
        CHECK(std::fabs(err.nearest_eigenvalue() - sp.lambda[1]) < 1e-12);
    }
    const DnSample m = transversal_dn_matrix(sp, -3.0);
    CHECK((m.matrix.col(0) - transversal_dn(sp, -3.0, vec2(1, 0))).norm() <= 1e-12);
}

TEST_CASE("mode solve against the erfc closed form") {
    const TransversalSpectrum& sp = interval(128);
    const TGrid g;
    const double lambda = -1;
    MatC F(g.n, 2);
    for (int j = 0; j < g.n; ++j) F(j, 0) = F(j, 1) = std::exp(-g.t(j) * g.t(j));
    const MatC U = cylinder_mode_solve(sp, lambda, F, g);
    for (int l = 0; l < 2; ++l) {
        const double b = std::sqrt(sp.lambda[l] - lambda);
        double worst = 0;
        for (int j = 0; j < g.n; j += 7) {
            const double t = g.t(j);
            const double exact = std::sqrt(M_PI) / (4 * b) * std::exp(b * b / 4) *
                                 (std::exp(-b * t) * std::erfc(b / 2 - t) + std::exp(b * t) * std::erfc(b / 2 + t));
            worst = std::max(worst, std::abs(U(j, l) - exact));
        }
        CHECK(worst <= 1e-8);
    }
    CHECK(mode_residual(sp, lambda, U, F, g) <= 1e-8);
    // A source near the edge leaves the solution nonzero at |t| = T.
    MatC G(g.n, 1);
    for (int j = 0; j < g.n; ++j) G(j, 0) = std::exp(-std::pow(g.t(j) - 17, 2));
    CHECK_THROWS_AS(cylinder_mode_solve(sp, lambda, G, g), PreconditionError);
    CHECK_THROWS_AS(cylinder_mode_solve(sp, 2.0, F, g), PreconditionError);
}

TEST_CASE("cylinder DN: direct, mode expansion and truncated-cylinder oracle") {
    const Expression q0 = Expression::parse("0.5*sin(x1)");
    const TransversalSpectrum sp = solve_transversal_eigen(interval_grid(128, q0), 15);
    const std::vector<std::pair<double, VecC>> cases{{0.0, vec2(1, 0)}, {1.5, vec2(0.3, -0.7)}};
    const auto oracle = truncated_cylinder_dn(q0, -1, cases, 48);
    for (std::size_t m = 0; m < cases.size(); ++m) {
        const auto& [k, h] = cases[m];
        const VecC a = cylinder_dn(sp, -1, k, h), b = cylinder_dn_modes(sp, -1, k, h);
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((a - oracle[m].dn).cwiseAbs().maxCoeff() <= 1e-3 * a.cwiseAbs().maxCoeff());
        // Time dependence is the factor e^{ikt}.
        CHECK((cylinder_dn(sp, -1, k, h, 0.7) - std::exp(cplx(0, 0.7 * k)) * a).norm() <= 1e-12);
    }
    CHECK_THROWS_AS(cylinder_dn(sp, sp.lambda[0] + 0.1, 1.0, vec2(1, 0)), PreconditionError);
}

TEST_CASE("outgoing mode solve") {
    const TransversalSpectrum& sp = interval(128);
    // lambda - lambda_1 = 4: kappa = 2. Gaussian of unit mass and width eps.
    const double lambda = sp.lambda[0] + 4, eps = 0.05;
    auto src = [&](double s) { return cplx(std::exp(-s * s / (eps * eps)) / (eps * std::sqrt(M_PI))); };
    std::vector<double> ts{-3.0, -1.0, 1.0, 3.0};
    const OutgoingSolution o = outgoing_mode_solve(sp, lambda, 0, src, -1, 1, ts);
    CHECK(o.kappa == doctest::Approx(2.0).epsilon(1e-12));
    const cplx I(0, 1);
    for (std::size_t j = 0; j < ts.size(); ++j) {
        // Outside the source the solution is the point-source kernel times the Gaussian's transform.
        const cplx exact = I / 4.0 * std::exp(2.0 * I * std::fabs(ts[j])) * std::exp(-4 * eps * eps / 4);
        CHECK(std::abs(o.u[j] - exact) <= 1e-10);
    }
    CHECK(o.radiation_residual <= 1e-6);
    // Residual of -u'' - kappa^2 u = s inside the support, 8th-order differences.
    const double d = 1e-3;
    const double c[] = {-1.0 / 560, 8.0 / 315, -1.0 / 5, 8.0 / 5, -205.0 / 72};
    for (double t0 : {0.01, 0.03}) {
        std::vector<double> tt;
        for (int j = -4; j <= 4; ++j) tt.push_back(t0 + j * d);
        const OutgoingSolution w = outgoing_mode_solve(sp, lambda, 0, src, -1, 1, tt);
        cplx d2 = c[4] * w.u[4];
        for (int j = 1; j <= 4; ++j) d2 += c[4 - j] * (w.u[static_cast<std::size_t>(4 + j)] + w.u[static_cast<std::size_t>(4 - j)]);
        d2 /= d * d;
        CHECK(std::abs(-d2 - 4.0 * w.u[4] - src(t0)) <= 1e-6 * std::abs(src(t0)));
    }
    CHECK_THROWS_AS(outgoing_mode_solve(sp, sp.lambda[0], 0, src, -1, 1, ts), PreconditionError);
}

TEST_CASE("cutoff family") {
    const CutoffFamily c{50, 0.1};
    CHECK(c(0) == 1);
    CHECK(c(50) == 1);
    CHECK(c(-50) == 1);
    CHECK(c(c.support() + 1e-9) == 0);
    CHECK(c(-c.support() - 1e-9) == 0);
    const double w = c.support() - 50;
    for (double t : {50 + 0.6 * w, 50 + 0.8 * w, -(50 + 0.7 * w)}) {
        const double e = 1e-6;
        CHECK(std::fabs((c(t + e) - c(t - e)) / (2 * e) - c.d1(t)) <= 1e-6 * std::max(1.0, std::fabs(c.d1(t))));
        CHECK(std::fabs((c.d1(t + e) - c.d1(t - e)) / (2 * e) - c.d2(t)) <= 1e-5 * std::max(1.0, std::fabs(c.d2(t))));
    }
    CHECK_NOTHROW(CutoffFamily::check_constraint(2, CutoffFamily::default_alpha(2, -1), -1));
    CHECK_THROWS_AS(CutoffFamily::check_constraint(2, 0.3, -1), ConfigError);
    CHECK_THROWS_AS(CutoffFamily::check_constraint(2, 0.1, -0.5), ConfigError);
}

TEST_CASE("Cesaro average of a pure oscillation") {
    for (double a : {0.5, 2.0, 7.0})
        for (double R : {50.0, 400.0}) {
            const cplx I(0, 1);
            const cplx avg = cesaro_average([&](double r) { return std::exp(I * a * r); }, R);
            const cplx exact = (std::exp(I * a * R) - std::exp(I * a)) / (I * a * (R - 1));
            CHECK(std::abs(avg - exact) <= 1e-12);
            CHECK(std::abs(avg) <= 2 / (a * (R - 1)) + 1e-14);
        }
}

TEST_CASE("radiating DN") {
    const TransversalSpectrum& sp = interval(128);
    const VecC h = vec2(1, 0);
    // Below the continuous spectrum the cutoff data converge to the full solve.
    const RadiatingResult below = radiating_dn(sp, -1, 1.0, h, CutoffFamily{40, 0.1});
    CHECK((below.dn - cylinder_dn(sp, -1, 1.0, h)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(below.propagating.cwiseAbs().maxCoeff() == 0);
    // Inside it, evanescent modes settle while the propagating one keeps oscillating.
    const RadiatingResult a = radiating_dn(sp, 1.5, 2.0, h, CutoffFamily{50, 0.1});
    const RadiatingResult b = radiating_dn(sp, 1.5, 2.0, h, CutoffFamily{81, 0.1});
    CHECK((a.evanescent - b.evanescent).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((a.propagating - b.propagating).cwiseAbs().maxCoeff() > 1e-3);
    CHECK(a.radiation_residual <= 1e-6);
    const double kres = std::sqrt(1.5 - sp.lambda[0]);
    CHECK_THROWS_AS(radiating_dn(sp, 1.5, kres, h, CutoffFamily{50, 0.1}), PreconditionError);
    CHECK_THROWS_AS(radiating_dn(sp, sp.lambda[1], 0.5, h, CutoffFamily{50, 0.1}), PreconditionError);
}

TEST_CASE("averaged recovery converges to the transversal DN map") {
    const TransversalSpectrum& sp = interval();
    const auto pts = averaged_recovery(sp, 1.5, 2.0, vec2(1, 0), {100, 200, 400}, 0.1);
    const double exact = dn_exact(-2.5);
    for (const auto& p : pts) MESSAGE("R " << p.R << " error " << p.error);
    CHECK(pts[2].error <= 0.7 * pts[1].error);
    CHECK(std::abs(pts[2].average[0] - exact) <= 1e-2);
    CHECK(pts[2].radiation_residual <= 1e-6);
}

TEST_CASE("meromorphic continuation") {
    const TransversalSpectrum& sp = interval();
    std::vector<DnSample> samples;
    for (int j = 1; j <= 40; ++j) samples.push_back(transversal_dn_matrix(sp, -double(j)));
    std::vector<double> poles;
    for (int l = 0; l < 15; ++l) poles.push_back(sp.lambda[l]);
    const ContinuationFit f = meromorphic_fit(samples, poles);
    CHECK(f.fit_residual <= 1e-6);
    for (double mu : {0.5, 2.5}) {
        const double v = f.evaluate(mu)(0, 0).real();
        CHECK(std::fabs(v - dn_exact(mu)) <= 1e-3 * std::fabs(dn_exact(mu)));
        // The fit also agrees with the direct solve off the sample set.
        CHECK(std::abs(f.evaluate(mu)(1, 0) - transversal_dn(sp, mu, vec2(1, 0))[1]) <= 1e-4);
    }
    CHECK(std::fabs(f.residue(0)(0, 0).real() - sp.dphi(0, 0) * sp.dphi(0, 0)) <= 1e-3 * 2 / M_PI);
    CHECK_THROWS_AS(meromorphic_fit(samples, {sp.lambda[0]}), NumericalError);
    CHECK_THROWS_AS(meromorphic_fit(std::vector<DnSample>(samples.begin(), samples.begin() + 10), poles),
                    PreconditionError);
    CHECK_THROWS_AS(meromorphic_continuation(samples, poles, sp.lambda[1]), PoleError);

    // Blind mode: starting from poles perturbed by 2 %, the projected residual
    // does not grow and the fitted poles stay ordered and finite.
    std::vector<double> seeds;
    for (int l = 0; l < 15; ++l) seeds.push_back(sp.lambda[l] * 1.02);
    const double seeded = meromorphic_fit(samples, seeds, 1.0).fit_residual;
    const ContinuationFit b = blind_fit(samples, seeds);
    MESSAGE("blind residual " << b.fit_residual << " from " << seeded << ", first pole " << b.poles[0]);
    CHECK(b.fit_residual <= seeded);
    CHECK(std::is_sorted(b.poles.begin(), b.poles.end()));
}
