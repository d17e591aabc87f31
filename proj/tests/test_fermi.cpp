#include <cmath>

#include "beamlab/fermi.hpp"
#include "doctest.h"

using namespace beamlab;

namespace {

Expression balloon() { return Expression::parse("1.5*exp(-(x1^2 + x2^2)/0.16)"); }

struct Setup {
    MetricChart chart;
    GeodesicPath path;
    Frame frame;
    Setup(MetricChart c, double entry, double aim) : chart(std::move(c)) {
        path = geodesic_from_angles(chart, entry, aim, 1e-3);
        frame = parallel_transport(chart, path, unit_normal(chart, path.entry_point, path.entry_dir));
    }
    Setup(const Setup&) = delete;
};

}  // namespace

TEST_CASE("flat tube") {
    Setup s(MetricChart::euclidean_disk(), M_PI, 0.0);
    auto tube = build_fermi_tube(s.chart, s.path, s.frame, default_tube_delta(s.chart, s.path), 7);
    for (double t : {0.0, 0.7, 1.9}) CHECK(tube->curvature_jet(t) == 0);
    const auto rep = tube->check_normalization();
    CHECK(rep.max_metric_dev <= 1e-6);
    CHECK(rep.max_metric_deriv <= 1e-4);
    const Vec2 x = tube->to_chart(0.5, 0.3);
    CHECK((x - Vec2(-0.5, 0.3)).norm() < 1e-12);
    const auto ty = tube->from_chart(x);
    REQUIRE(ty);
    CHECK(std::fabs((*ty)[0] - 0.5) < 1e-12);
}

TEST_CASE("sphere tube has F = -1 and matches the numeric construction") {
    Setup s(MetricChart::sphere_cap(2), 0.4, 0.5);
    auto tube = build_fermi_tube(s.chart, s.path, s.frame, 3.0, 9);
    for (double t : {0.0, 1.0, 2.5}) CHECK(tube->curvature_jet(t) == doctest::Approx(-1).epsilon(1e-12));
    const auto rep = tube->check_normalization();
    CHECK(rep.max_metric_dev <= 1e-6);
    CHECK(rep.max_metric_deriv <= 1e-4);

    // The axis of the closed-form tube is the integrated geodesic.
    for (double t : {0.1, 1.3, s.path.length})
        CHECK((tube->to_chart(t, 0) - s.path.position(t)).norm() < 1e-9);

    // The generic series/ODE construction reproduces the closed forms.
    auto num = build_fermi_tube(s.chart, s.path, s.frame, 2.0, 9, s.path.t_begin(), s.path.t_end(), true);
    const auto jn = num->jets(1.2, 8), jc = tube->jets(1.2, 8);
    for (int k = 0; k <= 8; ++k) {
        CHECK(std::fabs(jn.g11[k] - jc.g11[k]) < 1e-7);
        CHECK(std::fabs(jn.gy[k] - jc.gy[k]) < 1e-7);
        CHECK(std::fabs(jn.gt[k]) < 1e-7);
    }
    for (double t : {0.2, 1.7})
        for (double y : {-0.6, 0.1, 0.9}) {
            CHECK((num->to_chart(t, y) - tube->to_chart(t, y)).norm() < 1e-8);
            const auto m = num->metric(t, y);
            CHECK(std::fabs(m.G - std::cos(y)) < 1e-8);
            CHECK(std::fabs(m.G_y + std::sin(y)) < 1e-7);
            CHECK(std::fabs(m.G_t) < 1e-7);
            const auto back = num->from_chart(tube->to_chart(t, y));
            REQUIRE(back);
            CHECK(std::fabs((*back)[0] - t) < 1e-8);
            CHECK(std::fabs((*back)[1] - y) < 1e-8);
        }
}

TEST_CASE("sphere tube radius limits") {
    Setup s(MetricChart::sphere_cap(2), 0.4, 0.5);
    CHECK_THROWS_AS(build_fermi_tube(s.chart, s.path, s.frame, 3.3, 7), TubeRadiusError);
    auto t = build_fermi_tube_adaptive(s.chart, s.path, s.frame, 6.4, 7, s.path.t_begin(), s.path.t_end());
    CHECK(t->delta() == doctest::Approx(1.6));
}

TEST_CASE("conformal tube: F = -K along the axis and Fermi normal form") {
    const auto chart = MetricChart::conformal_disk(balloon());
    Setup s(chart, 2.6, 0.3);
    auto tube = build_fermi_tube(s.chart, s.path, s.frame, 0.5, 7);
    for (double t : {0.2, 0.8, 1.4}) {
        const double K = s.chart.gauss_curvature(s.path.position(t));
        CHECK(tube->curvature_jet(t) == doctest::Approx(-K).epsilon(1e-7));
    }
    const auto rep = tube->check_normalization();
    CHECK(rep.max_metric_dev <= 1e-6);
    CHECK(rep.max_metric_deriv <= 1e-4);

    // Jets against the ODE-tabulated metric: G = 1/sqrt(g11) near the axis.
    const auto j = tube->jets(0.9, 7);
    for (double y : {-0.05, 0.03, 0.08}) {
        double g11 = 0, p = 1;
        for (double c : j.g11) {
            g11 += c * p;
            p *= y;
        }
        CHECK(std::fabs(tube->metric(0.9, y).G - 1 / std::sqrt(g11)) < 1e-7);
    }
}

TEST_CASE("segments of a self-intersecting geodesic") {
    const auto chart = MetricChart::conformal_disk(balloon());
    const double b = 0.625;
    const Vec2 x0(-std::sqrt(1 - b * b), b);
    const auto path = integrate_geodesic(chart, x0, Vec2(1, 0) * std::exp(-chart.sigma(x0)), 1e-3);
    const auto frame = parallel_transport(chart, path, unit_normal(chart, path.entry_point, path.entry_dir));
    REQUIRE(path.self_intersections.size() == 1);
    const auto iv = segment_intervals(path, path.t_begin(), path.t_end(), 0.2);
    REQUIRE(iv.size() == 2);
    CHECK(iv[0].hi > iv[1].lo);
    std::vector<std::shared_ptr<FermiTube>> tubes;
    for (const auto& I : iv) tubes.push_back(build_fermi_tube_adaptive(chart, path, frame, 0.6, 7, I.lo, I.hi));
    // Overlapping chart maps agree.
    double dev = 0;
    for (int k = 0; k <= 10; ++k) {
        const double t = tubes[1]->t_lo() + (tubes[0]->t_hi() - tubes[1]->t_lo()) * k / 10;
        for (double y : {-0.1, 0.0, 0.1}) dev = std::max(dev, (tubes[0]->to_chart(t, y) - tubes[1]->to_chart(t, y)).norm());
    }
    CHECK(dev < 1e-8);
}
