#include "beamlab/wkb.hpp"

#include <algorithm>
#include <cmath>

#include "beamlab/parallel.hpp"
#include "beamlab/quadrature.hpp"

namespace beamlab {

namespace {

constexpr cplx I(0, 1);

struct RayState {
    Vec2 x, v;
    double J, Jr;
};

// Geodesic flow together with the scalar Jacobi equation J'' = -K J.
RayState rk4(const MetricChart& chart, const RayState& s, double h) {
    auto f = [&](const RayState& q) {
        return RayState{q.v, chart.geodesic_accel(q.x, q.v), q.Jr, -chart.gauss_curvature(q.x) * q.J};
    };
    auto add = [](const RayState& a, const RayState& d, double c) {
        return RayState{a.x + c * d.x, a.v + c * d.v, a.J + c * d.J, a.Jr + c * d.Jr};
    };
    const RayState k1 = f(s), k2 = f(add(s, k1, h / 2)), k3 = f(add(s, k2, h / 2)), k4 = f(add(s, k3, h));
    RayState out = s;
    out.x += h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    out.v += h / 6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
    out.J += h / 6 * (k1.J + 2 * k2.J + 2 * k3.J + k4.J);
    out.Jr += h / 6 * (k1.Jr + 2 * k2.Jr + 2 * k3.Jr + k4.Jr);
    return out;
}

RayState start(const WkbQuasimode& qm, double theta) {
    const Vec2 v = std::exp(-qm.chart->sigma(qm.omega)) * Vec2(std::cos(theta), std::sin(theta));
    return {qm.omega, v, 0.0, 1.0};
}

// Ray states at the sorted radii rs.
std::vector<RayState> trace(const WkbQuasimode& qm, double theta, const std::vector<double>& rs) {
    std::vector<RayState> out;
    out.reserve(rs.size());
    RayState s = start(qm, theta);
    double r = 0;
    for (double target : rs) {
        while (r + qm.h <= target) {
            s = rk4(*qm.chart, s, qm.h);
            r += qm.h;
            if (!(s.J > 0)) throw PreconditionError("conjugate point on a polar ray: the chart is not simple");
        }
        out.push_back(target > r ? rk4(*qm.chart, s, target - r) : s);
    }
    return out;
}

// Real amplitude of (-Delta - s^2) v without the phase factor, from the rays
// at theta - d, theta, theta + d.
double residual_amplitude(const MetricChart& chart, const RayState& m, const RayState& c, const RayState& p,
                          double d, double bb, double b1, double b2) {
    const double J = c.J, Jr = c.Jr, K = chart.gauss_curvature(c.x);
    const double Jt = (p.J - m.J) / (2 * d), Jtt = (p.J - 2 * J + m.J) / (d * d);
    // B = J^{-1/2} b and its theta derivatives.
    const double B1 = -0.5 * Jt * std::pow(J, -1.5) * bb + std::pow(J, -0.5) * b1;
    const double B2 = (0.75 * Jt * Jt * std::pow(J, -2.5) - 0.5 * Jtt * std::pow(J, -1.5)) * bb -
                      Jt * std::pow(J, -1.5) * b1 + std::pow(J, -0.5) * b2;
    const double radial = (0.5 * K * std::pow(J, -0.5) + 0.25 * Jr * Jr * std::pow(J, -2.5)) * bb;
    const double angular = (-Jt * B1 / (J * J) + B2 / J) / J;
    return radial + angular;
}

constexpr double kThetaStep = 1e-3;

double bump_l2_squared() {
    const QuadRule q = composite_gauss({-0.5, -0.25, 0.25, 0.5}, 16);
    return integrate(q, [](double u) { return cutoff(u) * cutoff(u); });
}

QuadRule theta_rule(const WkbQuasimode& qm) {
    const double w = qm.width, c = qm.theta0;
    return composite_gauss({c - w / 2, c - w / 4, c, c + w / 4, c + w / 2}, 16);
}

// sum over theta nodes of w_theta * int over the inside part of fn(theta, r nodes).
template <class Fn>
double polar_integral(const WkbQuasimode& qm, Fn fn) {
    const QuadRule qt = theta_rule(qm);
    std::vector<double> part(qt.size(), 0.0);
    parallel_for(qt.size(), [&](std::size_t i) {
        const double th = qt.x[i];
        double acc = 0;
        for (const auto& [a, b] : qm.inside(th)) {
            const QuadRule qr = composite_gauss(8, 16, a, b);
            acc += fn(th, qr);
        }
        part[i] = qt.w[i] * acc;
    });
    double total = 0;
    for (double p : part) total += p;
    return total;
}

}  // namespace

double WkbQuasimode::b(double theta) const { return norm * cutoff((theta - theta0) / width); }
double WkbQuasimode::b_d1(double theta) const { return norm * cutoff_d1((theta - theta0) / width) / width; }
double WkbQuasimode::b_d2(double theta) const {
    return norm * cutoff_d2((theta - theta0) / width) / (width * width);
}

RayPoint WkbQuasimode::ray(double r, double theta) const {
    const RayState s = trace(*this, theta, {r})[0];
    return {s.x, s.J, s.Jr};
}

std::vector<std::pair<double, double>> WkbQuasimode::inside(double theta) const {
    const double R = chart->radius();
    std::vector<std::pair<double, double>> out;
    RayState s = start(*this, theta);
    double r = 0, start_r = NAN;
    bool in = s.x.norm() < R;
    if (in) start_r = 0;
    // Crossing of |x| = R inside the step from s, by bisection on the step length.
    auto cross = [&](const RayState& from) {
        double a = 0, b = h;
        for (int it = 0; it < 60; ++it) {
            const double m = 0.5 * (a + b);
            if ((rk4(*chart, from, m).x.norm() < R) == in)
                a = m;
            else
                b = m;
        }
        return 0.5 * (a + b);
    };
    while (r < r_max) {
        const RayState n = rk4(*chart, s, h);
        if ((n.x.norm() < R) != in) {
            const double rc = r + cross(s);
            if (!in) {
                start_r = rc;
            } else {
                // Rays of a simple domain leave it once.
                out.emplace_back(start_r, rc);
                return out;
            }
            in = !in;
        }
        s = n;
        r += h;
    }
    if (in) out.emplace_back(start_r, r_max);
    return out;
}

cplx WkbQuasimode::value(double r, double theta, const Frequency& f) const {
    const double bt = b(theta);
    if (bt == 0.0) return 0.0;
    const RayPoint p = ray(r, theta);
    return std::exp(I * f.s() * (r - r0)) * bt / std::sqrt(p.J);
}

cplx WkbQuasimode::residual(double r, double theta, const Frequency& f) const {
    const double d = kThetaStep;
    const auto m = trace(*this, theta - d, {r})[0], c = trace(*this, theta, {r})[0], p = trace(*this, theta + d, {r})[0];
    const double amp = residual_amplitude(*chart, m, c, p, d, b(theta), b_d1(theta), b_d2(theta));
    return -std::exp(I * f.s() * (r - r0)) * amp;
}

WkbQuasimode wkb_quasimode_simple(const MetricChart& chart, const GeodesicPath& path, double tau,
                                  const WkbOptions& opt) {
    switch (chart.kind()) {
        case ChartKind::EuclideanDisk: break;
        case ChartKind::SphereCap:
            // Less than a hemisphere: strictly convex boundary and no conjugate points.
            if (!(chart.radius() < 1) && !opt.assume_simple)
                throw PreconditionError("sphere cap chart with radius >= 1 is not simple");
            break;
        case ChartKind::ConformalDisk:
            if (!opt.assume_simple) throw PreconditionError("conformal chart is not known to be simple");
            break;
    }
    if (!(tau >= 1)) throw PreconditionError("tau must be >= 1");
    if (!path.exits || !path.nontangential) throw PreconditionError("WKB quasimode needs a nontangential geodesic");
    WkbQuasimode qm;
    qm.chart = &chart;
    qm.h = opt.h;
    qm.width = opt.width0 * std::pow(tau, -0.4 * opt.alpha);
    qm.norm = 1 / std::sqrt(qm.width * bump_l2_squared());
    // Follow the geodesic backwards from the entry point to find omega. The
    // extension beyond M0 need not be simple, so omega moves closer until the
    // bump rays are free of conjugate points.
    double d = opt.base_distance * chart.radius() * std::exp(chart.sigma(path.entry_point));
    for (int attempt = 0;; ++attempt) {
        Vec2 x = path.entry_point, v = -path.entry_dir;
        const int n = std::max(1, static_cast<int>(std::ceil(d / opt.h)));
        for (int k = 0; k < n; ++k) geodesic_rk4_step(chart, x, v, d / n);
        qm.omega = x;
        qm.theta0 = std::atan2(-v[1], -v[0]);
        qm.r0 = d;
        qm.r_max = d + 2 * path.length;
        try {
            for (double th : {qm.theta0 - qm.width / 2, qm.theta0, qm.theta0 + qm.width / 2})
                for (const auto& [a, b] : qm.inside(th)) trace(qm, th, {a, b});
            break;
        } catch (const PreconditionError&) {
            if (attempt >= 6) throw;
            d *= 0.5;
        }
    }
    return qm;
}

double wkb_residual_norm(const WkbQuasimode& qm, const Frequency& f) {
    const double d = kThetaStep;
    const double sq = polar_integral(qm, [&](double th, const QuadRule& qr) {
        const auto m = trace(qm, th - d, qr.x), c = trace(qm, th, qr.x), p = trace(qm, th + d, qr.x);
        const double bb = qm.b(th), b1 = qm.b_d1(th), b2 = qm.b_d2(th);
        double acc = 0;
        for (std::size_t k = 0; k < qr.size(); ++k) {
            const double amp = residual_amplitude(*qm.chart, m[k], c[k], p[k], d, bb, b1, b2);
            acc += qr.w[k] * std::exp(-2 * f.lambda * (qr.x[k] - qm.r0)) * amp * amp * c[k].J;
        }
        return acc;
    });
    return std::sqrt(sq);
}

double wkb_concentration(const WkbQuasimode& qm, const Expression& psi, const Frequency& f) {
    return polar_integral(qm, [&](double th, const QuadRule& qr) {
        const auto c = trace(qm, th, qr.x);
        const double bb = qm.b(th);
        double acc = 0;
        for (std::size_t k = 0; k < qr.size(); ++k)
            acc += qr.w[k] * std::exp(-2 * f.lambda * (qr.x[k] - qm.r0)) * bb * bb * psi(c[k].x[0], c[k].x[1]);
        return acc;
    });
}

}  // namespace beamlab
