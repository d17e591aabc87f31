#include <cmath>

#include "beamlab/quadrature.hpp"
#include "beamlab/xray.hpp"
#include "doctest.h"

using namespace beamlab;

namespace {

GeodesicPath chord(double p) {
    static const MetricChart disk = MetricChart::euclidean_disk(1.0);
    return integrate_geodesic(disk, Vec2(-std::sqrt(1 - p * p), p), Vec2(1, 0), 1e-3);
}

// Odd under the antipodal map of the sphere, vanishing for |X3| >= 0.6.
const char* kSphereOdd =
    "(2*x1/(1 + x1^2 + x2^2)) * max(0, 1 - ((x1^2 + x2^2 - 1)/(1 + x1^2 + x2^2))^2 / 0.36)^8";

}  // namespace

TEST_CASE("chord transforms") {
    for (double p : {0.0, 0.3, 0.5, 0.9}) {
        const auto path = chord(p);
        CHECK(std::fabs(ray_transform(Expression(1.0), path) - 2 * std::sqrt(1 - p * p)) <= 1e-6);
        CHECK(ray_transform(Expression(0.0), path) == 0.0);
    }
    const auto d = chord(0.0);
    CHECK(attenuated_transform(Expression(1.0), d, 0.5) == doctest::Approx(1 - std::exp(-2.0)).epsilon(1e-10));
    const Expression f = Expression::parse("1 + x1^2 + sin(x2)");
    const RayRule r = ray_rule(d);
    CHECK(attenuated_transform(f, r, 0.0) == ray_transform(f, r));
    // d/dlambda at 0 is -2 int t f; along the diameter int t (1 + (t-1)^2) dt = 8/3.
    const double e = 1e-4;
    const double deriv = (attenuated_transform(f, r, e) - attenuated_transform(f, r, -e)) / (2 * e);
    CHECK(std::fabs(deriv + 16.0 / 3) <= 1e-6);
}

TEST_CASE("linearity and quadrature convergence") {
    const auto path = chord(0.4);
    const Expression f = Expression::parse("exp(x1) * cos(3*x2)"), g = Expression::parse("x1*x2 + 1");
    const RayRule r = ray_rule(path);
    const double a = 0.7, b = -2.3;
    const Expression comb = Expression(a) * f + Expression(b) * g;
    CHECK(std::fabs(ray_transform(comb, r) - (a * ray_transform(f, r) + b * ray_transform(g, r))) <= 1e-12);
    const RayRule fine = ray_rule(path, 0.125);
    CHECK(std::fabs(ray_transform(f, r) - ray_transform(f, fine)) <= 1e-8);
    CHECK(std::fabs(attenuated_transform(g, r, 0.5) - attenuated_transform(g, fine, 0.5)) <= 1e-8);
}

TEST_CASE("finite difference weights are exact on polynomials") {
    const std::vector<double> nodes{-0.02, -0.01, 0.0, 0.01, 0.02};
    for (int order = 0; order <= 4; ++order) {
        const auto w = finite_difference_weights(nodes, 0.0, order);
        // x^order has derivative order! at 0; lower powers have none.
        for (int p = 0; p <= 4; ++p) {
            double s = 0;
            for (std::size_t i = 0; i < nodes.size(); ++i) s += w[i] * std::pow(nodes[i], p);
            const double expect = p == order ? std::tgamma(order + 1.0) : 0.0;
            CHECK(std::fabs(s - expect) <= 1e-6 * std::max(1.0, std::fabs(expect)));
        }
    }
}

TEST_CASE("disk fan: only tangential aims rejected, nesting under refinement") {
    const auto disk = MetricChart::euclidean_disk(1.0);
    const GeodesicFan fan = build_fan(disk, 16, 8);
    CHECK(fan.size() == 16 * 7);
    for (const auto& r : fan.rejects) CHECK(std::fabs(std::fabs(r.aim_angle) - M_PI / 2) < 1e-12);
    const GeodesicFan fine = build_fan(disk, 16, 16);
    for (const auto& m : fan.members) {
        bool found = false;
        for (const auto& q : fine.members)
            if (q.entry_index == m.entry_index && q.aim_index == 2 * m.aim_index)
                found = (q.exit_point - m.exit_point).norm() < 1e-12;
        CHECK(found);
    }
    CHECK_THROWS_AS(build_fan(disk, 1, 8), ConfigError);
}

TEST_CASE("sphere with a small cap removed: odd functions are annihilated") {
    const auto cap = MetricChart::sphere_cap(3.0);
    const GeodesicFan fan = build_fan(cap, 16, 8);
    CHECK(!fan.rejects.empty());
    const Expression f = Expression::parse(kSphereOdd);
    double worst = 0, scale = 0;
    const Expression absf = Expression::parse(std::string("abs(") + kSphereOdd + ")");
    for (const auto& m : fan.members) {
        worst = std::max(worst, std::fabs(ray_transform(f, m.rule)));
        scale = std::max(scale, ray_transform(absf, m.rule));
    }
    MESSAGE("max |I f| = " << worst << ", max I|f| = " << scale);
    CHECK(worst <= 1e-6);
    CHECK(scale > 0.1);
    // The inversion sees zero data and cannot recover f.
    const Eigen::VectorXd data = attenuated_data(f, fan, {0.0}).column(0.0);
    const GridField rec = invert_ray_transform(fan, data, 21, 3.0, 1e-4);
    CHECK(rec.values.cwiseAbs().maxCoeff() <= 1e-5);
    CHECK(relative_l2_error(rec, f, 3.0) > 0.99);
}

TEST_CASE("disk inversion of 1 - |x|^2") {
    const auto disk = MetricChart::euclidean_disk(1.0);
    const Expression f = Expression::parse("1 - x1^2 - x2^2");
    auto run = [&](int ne, int na) {
        const GeodesicFan fan = build_fan(disk, ne, na);
        const Eigen::VectorXd data = attenuated_data(f, fan, {0.0}).column(0.0);
        return relative_l2_error(invert_ray_transform(fan, data, 41, 1.0, 1e-4), f, 1.0);
    };
    const double fine = run(64, 32), coarse = run(32, 16);
    MESSAGE("inversion error fine " << fine << " coarse " << coarse);
    CHECK(fine <= 0.05);
    CHECK(fine < coarse);
    CHECK(coarse <= 2 * fine + 0.05);
    const GeodesicFan fan = build_fan(disk, 16, 8);
    const GridField zero = invert_ray_transform(fan, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan.size())), 11, 1.0, 1e-4);
    CHECK(zero.values.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_THROWS_AS(invert_ray_transform(fan, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan.size())), 41, 1.0, 0.0),
                    RegularizationError);
}

TEST_CASE("moment recursion") {
    const std::vector<double> lambdas{-0.02, -0.01, 0.0, 0.01, 0.02};
    const auto d = chord(0.0);
    const RayRule r = ray_rule(d);
    std::vector<double> data;
    for (double l : lambdas) data.push_back(attenuated_transform(Expression(1.0), r, l));
    const auto M = moment_reduction(lambdas, data, 2);
    CHECK(M[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(M[1] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(M[2] == doctest::Approx(8.0 / 3).epsilon(1e-4));

    // qhat(2 lambda, x) = f(x) / (1 + lambda^2).
    const auto path = chord(0.3);
    const RayRule rp = ray_rule(path);
    const Expression f = Expression::parse("1 + x1 + x2^2");
    std::vector<double> syn;
    for (double l : lambdas) syn.push_back(attenuated_transform(f, rp, l) / (1 + l * l));
    const auto Ms = moment_reduction(lambdas, syn, 2, {1.0, 0.0, -2.0});
    const QuadRule q = composite_gauss(32, 16, 0.0, path.length);
    for (int k = 0; k <= 2; ++k) {
        const double oracle = integrate(q, [&](double t) {
            const Vec2 x = path.position(t);
            return std::pow(t, k) * f(x[0], x[1]);
        });
        CHECK(std::fabs(Ms[static_cast<std::size_t>(k)] - oracle) <= 0.01 * std::fabs(oracle));
    }
    CHECK_THROWS_AS(moment_reduction(lambdas, data, 5), PreconditionError);
    CHECK_THROWS_AS(moment_reduction({-0.1, 0.0, 0.1}, {1, 1, 1}, 1), PreconditionError);
}
