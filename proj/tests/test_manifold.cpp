#include <cmath>

#include "beamlab/manifold.hpp"
#include "doctest.h"

using namespace beamlab;

namespace {

// Sphere great-circle exit time from stereographic data.
Eigen::Vector3d stereo(const Vec2& u) {
    const double q = 1 + u.squaredNorm();
    return {2 * u[0] / q, 2 * u[1] / q, (1 - u.squaredNorm()) / q};
}

double sphere_exit_time(const Vec2& u0, const Vec2& v0, double r0) {
    const double h = 1e-7;
    const Eigen::Vector3d P = stereo(u0);
    const Eigen::Vector3d Q = ((stereo(u0 + h * v0) - stereo(u0 - h * v0)) / (2 * h)).normalized();
    const double z = (1 - r0 * r0) / (1 + r0 * r0);
    const double A = std::hypot(P[2], Q[2]), phi = std::atan2(Q[2], P[2]);
    const double c = std::acos(z / A);
    double best = 1e9;
    for (double t : {phi + c, phi - c})
        for (int k = -2; k <= 2; ++k) {
            const double tt = t + 2 * M_PI * k;
            if (tt > 1e-6 && tt < best) best = tt;
        }
    return best;
}

Expression balloon() { return Expression::parse("1.5*exp(-(x1^2 + x2^2)/0.16)"); }

}  // namespace

TEST_CASE("christoffel symbols") {
    const auto flat = MetricChart::euclidean_disk();
    for (const auto& G : flat.christoffel(Vec2(0.2, -0.4))) CHECK(G.cwiseAbs().maxCoeff() == 0);

    // Sphere: general Levi-Civita formula from a symbolically differentiated metric.
    const auto sph = MetricChart::sphere_cap(2.0);
    const Expression f = Expression::parse("4*(1 + x1^2 + x2^2)^-2");
    const Vec2 u(0.3, 0);
    const double fv = f(u[0], u[1]);
    const double df[2] = {f.derivative(0)(u[0], u[1]), f.derivative(1)(u[0], u[1])};
    const auto G = sph.christoffel(u);
    for (int l = 0; l < 2; ++l)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) {
                // g_{ab} = f delta_ab, g^{lm} = delta/f
                const double want = 0.5 / fv * ((l == k ? df[j] : 0) + (l == j ? df[k] : 0) - (j == k ? df[l] : 0));
                CHECK(G[l](j, k) == doctest::Approx(want).epsilon(1e-12));
                CHECK(G[l](j, k) == G[l](k, j));
            }

    const auto conf = MetricChart::conformal_disk(Expression::parse("x1"));
    const auto C = conf.christoffel(Vec2(0.1, 0.1));
    CHECK(C[0](0, 0) == doctest::Approx(1));
    CHECK(C[0](1, 1) == doctest::Approx(-1));
    CHECK(C[1](0, 1) == doctest::Approx(1));
    CHECK(C[1](1, 0) == doctest::Approx(1));
    CHECK(C[0](0, 1) == doctest::Approx(0));
    CHECK(C[1](0, 0) == doctest::Approx(0));
    CHECK_THROWS_AS(conf.christoffel(Vec2(1.5, 0)), DomainError);
}

TEST_CASE("christoffel symbols agree with finite differences of the metric") {
    const auto conf = MetricChart::conformal_disk(balloon());
    const Vec2 x(0.2, -0.1);
    const double h = 1e-5;
    Mat2 dg[2];
    for (int m = 0; m < 2; ++m) {
        Vec2 e = Vec2::Zero();
        e[m] = h;
        dg[m] = (conf.metric(x + e) - conf.metric(x - e)) / (2 * h);
    }
    const Mat2 gi = conf.metric(x).inverse();
    const auto G = conf.christoffel(x);
    for (int l = 0; l < 2; ++l)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) {
                double want = 0;
                for (int m = 0; m < 2; ++m) want += 0.5 * gi(l, m) * (dg[j](m, k) + dg[k](m, j) - dg[m](j, k));
                CHECK(G[l](j, k) == doctest::Approx(want).epsilon(1e-7));
            }
}

TEST_CASE("gauss curvature of the catalog") {
    CHECK(MetricChart::sphere_cap(2).gauss_curvature(Vec2(0.5, 0.7)) == 1);
    const auto c = MetricChart::conformal_disk(Expression::parse("log(2) - log(1 + x1^2 + x2^2)"), 2.0);
    CHECK(c.gauss_curvature(Vec2(0.5, 0.7)) == doctest::Approx(1).epsilon(1e-12));
}

TEST_CASE("disk chords") {
    const auto disk = MetricChart::euclidean_disk();
    const auto d = integrate_geodesic(disk, Vec2(-1, 0), Vec2(1, 0), 1e-3);
    CHECK(std::fabs(d.length - 2) < 1e-8);
    CHECK((d.exit_point - Vec2(1, 0)).norm() < 1e-8);
    CHECK(d.nontangential);
    CHECK(d.self_intersections.empty());

    const double p = 0.5;
    const auto c = integrate_geodesic(disk, Vec2(-std::sqrt(1 - p * p), p), Vec2(1, 0), 1e-3);
    CHECK(std::fabs(c.length - std::sqrt(3.0)) < 1e-8);

    const double pg = 1 - 1e-9;
    const auto g = integrate_geodesic(disk, Vec2(-std::sqrt(1 - pg * pg), pg), Vec2(1, 0), 1e-3);
    CHECK_FALSE(is_nontangential(g, disk, 1e-3));
}

TEST_CASE("sphere arcs match spherical trigonometry") {
    const double r0 = 2;
    const auto sph = MetricChart::sphere_cap(r0);
    // Through the chart origin: length 4 atan(r0).
    const Vec2 x0(-r0, 0);
    const Vec2 v0 = Vec2(1, 0) * (1 + r0 * r0) / 2;
    const auto p = integrate_geodesic(sph, x0, v0, 1e-3);
    CHECK(std::fabs(p.length - 4 * std::atan(r0)) < 1e-8);
    CHECK(std::fabs(p.exit_point[0] - r0) < 1e-8);
    CHECK(p.nontangential);

    for (double entry : {0.3, 1.9, 4.0})
        for (double aim : {-1.0, 0.4, 1.2}) {
            const auto q = geodesic_from_angles(sph, entry, aim, 1e-3);
            CHECK(std::fabs(q.length - sphere_exit_time(q.entry_point, q.entry_dir, r0)) < 1e-8);
            CHECK(is_nontangential(q, sph, 1e-3));
        }
}

TEST_CASE("unit speed is preserved") {
    const MetricChart charts[] = {MetricChart::euclidean_disk(), MetricChart::sphere_cap(2),
                                  MetricChart::conformal_disk(balloon())};
    for (const auto& c : charts) {
        const auto p = geodesic_from_angles(c, 2.5, 0.3, 1e-3);
        double dev = 0;
        for (std::size_t k = 0; k < p.size(); ++k) dev = std::max(dev, std::fabs(c.inner(p.x[k], p.v[k], p.v[k]) - 1));
        CHECK(dev <= 1e-8);
        for (std::size_t k = 0; k < p.size(); ++k)
            if (p.time(k) > 0 && p.time(k) < p.length) CHECK(c.inside(p.x[k]));
    }
}

TEST_CASE("RK4 exit points converge at fourth order") {
    const auto c = MetricChart::conformal_disk(balloon());
    const double hs[] = {0.08, 0.04, 0.02, 0.0025};
    Vec2 ex[4];
    for (int i = 0; i < 4; ++i) ex[i] = geodesic_from_angles(c, 2.9, 0.2, hs[i]).exit_point;
    const double e1 = (ex[0] - ex[3]).norm(), e2 = (ex[1] - ex[3]).norm(), e3 = (ex[2] - ex[3]).norm();
    CHECK(e1 / e2 >= 12);
    CHECK(e2 / e3 >= 12);
}

TEST_CASE("geodesic preconditions and trapping") {
    const auto disk = MetricChart::euclidean_disk();
    GeodesicOptions opt;
    opt.t_max = 0.5;
    try {
        integrate_geodesic(disk, Vec2(-1, 0), Vec2(1, 0), 1e-3, opt);
        FAIL("expected a trapped-geodesic error");
    } catch (const TrappedGeodesicError& e) {
        CHECK(e.t_max() == 0.5);
    }
    CHECK_THROWS_AS(integrate_geodesic(disk, Vec2(-1, 0), Vec2(2, 0), 1e-3), PreconditionError);
    CHECK_THROWS_AS(integrate_geodesic(disk, Vec2(-1, 0), Vec2(-1, 0), 1e-3), PreconditionError);
    CHECK_THROWS_AS(integrate_geodesic(disk, Vec2(-0.5, 0), Vec2(1, 0), 1e-3), PreconditionError);
}

TEST_CASE("parallel transport") {
    const auto disk = MetricChart::euclidean_disk();
    const auto d = geodesic_from_angles(disk, 1.0, 0.4, 1e-3);
    const auto fd = parallel_transport(disk, d, unit_normal(disk, d.entry_point, d.entry_dir));
    for (const auto& e : fd.e) CHECK((e - fd.e[d.k0]).norm() < 1e-12);

    const MetricChart curved[] = {MetricChart::sphere_cap(2), MetricChart::conformal_disk(balloon())};
    for (const auto& c : curved) {
        const auto p = geodesic_from_angles(c, 2.2, -0.5, 1e-3);
        const auto f = parallel_transport(c, p, unit_normal(c, p.entry_point, p.entry_dir));
        double dn = 0, dp = 0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            dn = std::max(dn, std::fabs(c.norm(p.x[k], f.e[k]) - 1));
            dp = std::max(dp, std::fabs(c.inner(p.x[k], f.e[k], p.v[k])));
        }
        CHECK(dn <= 1e-8);
        CHECK(dp <= 1e-8);
    }
    CHECK_THROWS_AS(parallel_transport(disk, d, d.entry_dir), PreconditionError);
}

TEST_CASE("self-intersections") {
    const auto disk = MetricChart::euclidean_disk();
    CHECK(find_self_intersections(geodesic_from_angles(disk, 0.0, 0.3, 1e-3), 1e-6).empty());

    // The image of the equator wraps with period 2 pi.
    const auto sph = MetricChart::sphere_cap(2);
    const auto w = integrate_geodesic_for(sph, Vec2(1, 0), Vec2(0, 1), 1e-3, 2 * M_PI + 1.0);
    const auto si = find_self_intersections(w, 1e-6);
    REQUIRE(si.size() == 1);
    CHECK(std::fabs(si[0].t2 - si[0].t1 - 2 * M_PI) < 1e-6);
    CHECK(si[0].angle == 0);
    CHECK(find_self_intersections(w, 5e-7).size() == si.size());

    // A geodesic looping around the bump crosses itself once, transversally.
    const auto bal = MetricChart::conformal_disk(balloon());
    const double b = 0.625;
    const Vec2 x0(-std::sqrt(1 - b * b), b);
    const auto p = integrate_geodesic(bal, x0, Vec2(1, 0) * std::exp(-bal.sigma(x0)), 1e-3);
    REQUIRE(p.self_intersections.size() == 1);
    CHECK(p.self_intersections[0].angle > 0.5);
    CHECK((p.position(p.self_intersections[0].t1) - p.position(p.self_intersections[0].t2)).norm() < 1e-6);
    CHECK(find_self_intersections(p, 5e-7).size() == 1);
    CHECK(p.nontangential);
}
