#include "beamlab/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "beamlab/hermite.hpp"

namespace beamlab {

std::string to_string(ChartKind k) {
    switch (k) {
        case ChartKind::EuclideanDisk: return "disk";
        case ChartKind::SphereCap: return "sphere_cap";
        case ChartKind::ConformalDisk: return "conformal_disk";
    }
    return "?";
}

MetricChart::MetricChart(ChartKind kind, double radius, Expression sigma)
    : kind_(kind), radius_(radius), sigma_(std::move(sigma)) {
    if (!(radius > 0)) throw DomainError("chart radius must be positive");
    dsigma_ = {sigma_.derivative(0), sigma_.derivative(1)};
    d2sigma_ = {dsigma_[0].derivative(0), dsigma_[0].derivative(1), dsigma_[1].derivative(1)};
    curvature_ = Expression(-1.0) * exp(Expression(-2.0) * sigma_) * (d2sigma_[0] + d2sigma_[2]);
}

MetricChart MetricChart::euclidean_disk(double radius) {
    return MetricChart(ChartKind::EuclideanDisk, radius, Expression(0.0));
}

MetricChart MetricChart::sphere_cap(double r0) {
    return MetricChart(ChartKind::SphereCap, r0, Expression::parse("log(2) - log(1 + x1^2 + x2^2)"));
}

MetricChart MetricChart::conformal_disk(const Expression& phi, double radius) {
    if (phi.depends_on(2) || phi.depends_on(kVarT)) throw DomainError("conformal exponent may depend on x1, x2 only");
    return MetricChart(ChartKind::ConformalDisk, radius, phi);
}

double MetricChart::sigma(const Vec2& x) const {
    switch (kind_) {
        case ChartKind::EuclideanDisk: return 0.0;
        case ChartKind::SphereCap: return std::log(2.0 / (1.0 + x.squaredNorm()));
        default: return sigma_(x[0], x[1]);
    }
}

Vec2 MetricChart::grad_sigma(const Vec2& x) const {
    switch (kind_) {
        case ChartKind::EuclideanDisk: return Vec2::Zero();
        case ChartKind::SphereCap: return -2.0 * x / (1.0 + x.squaredNorm());
        default: return Vec2(dsigma_[0](x[0], x[1]), dsigma_[1](x[0], x[1]));
    }
}

Mat2 MetricChart::hess_sigma(const Vec2& x) const {
    switch (kind_) {
        case ChartKind::EuclideanDisk: return Mat2::Zero();
        case ChartKind::SphereCap: {
            const double q = 1.0 + x.squaredNorm();
            return -2.0 / q * Mat2::Identity() + 4.0 / (q * q) * x * x.transpose();
        }
        default: {
            Mat2 m;
            m(0, 0) = d2sigma_[0](x[0], x[1]);
            m(0, 1) = m(1, 0) = d2sigma_[1](x[0], x[1]);
            m(1, 1) = d2sigma_[2](x[0], x[1]);
            return m;
        }
    }
}

std::array<Mat2, 2> MetricChart::christoffel(const Vec2& x) const {
    if (x.norm() > radius_ * (1 + 1e-12)) throw DomainError("point outside the chart domain");
    const Vec2 s = grad_sigma(x);
    std::array<Mat2, 2> G;
    for (int l = 0; l < 2; ++l)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                G[l](j, k) = (l == j ? s[k] : 0.0) + (l == k ? s[j] : 0.0) - (j == k ? s[l] : 0.0);
    return G;
}

Vec2 MetricChart::geodesic_accel(const Vec2& x, const Vec2& v) const {
    const Vec2 s = grad_sigma(x);
    return -2.0 * s.dot(v) * v + v.squaredNorm() * s;
}

double MetricChart::gauss_curvature(const Vec2& x) const {
    if (kind_ == ChartKind::EuclideanDisk) return 0.0;
    if (kind_ == ChartKind::SphereCap) return 1.0;
    return -std::exp(-2 * sigma(x)) * hess_sigma(x).trace();
}

// ---------------------------------------------------------------- geodesics

void geodesic_rk4_step(const MetricChart& chart, Vec2& x, Vec2& v, double h) {
    const Vec2 k1x = v, k1v = chart.geodesic_accel(x, v);
    const Vec2 x2 = x + 0.5 * h * k1x, v2 = v + 0.5 * h * k1v;
    const Vec2 k2x = v2, k2v = chart.geodesic_accel(x2, v2);
    const Vec2 x3 = x + 0.5 * h * k2x, v3 = v + 0.5 * h * k2v;
    const Vec2 k3x = v3, k3v = chart.geodesic_accel(x3, v3);
    const Vec2 x4 = x + h * k3x, v4 = v + h * k3v;
    const Vec2 k4x = v4, k4v = chart.geodesic_accel(x4, v4);
    x += h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
    v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
}

namespace {

void renormalize(const MetricChart& chart, const Vec2& x, Vec2& v) { v /= chart.norm(x, v); }

void finish_samples(const MetricChart& chart, GeodesicPath& p) {
    p.a.resize(p.x.size());
    for (std::size_t k = 0; k < p.x.size(); ++k) p.a[k] = chart.geodesic_accel(p.x[k], p.v[k]);
}

// Samples for k = 1..n stepping by h from (x, v); appended to the vectors.
void run(const MetricChart& chart, Vec2 x, Vec2 v, double h, int n, std::vector<Vec2>& xs, std::vector<Vec2>& vs) {
    for (int k = 0; k < n; ++k) {
        geodesic_rk4_step(chart, x, v, h);
        renormalize(chart, x, v);
        xs.push_back(x);
        vs.push_back(v);
    }
}

double boundary_angle(const Vec2& x, const Vec2& v) {
    const double c = std::fabs(v.normalized().dot(x.normalized()));
    return std::asin(std::min(1.0, c));
}

}  // namespace

Vec2 GeodesicPath::position(double t) const {
    const double u = (t - t_begin()) / h;
    long k = std::clamp(static_cast<long>(std::floor(u)), 0L, static_cast<long>(x.size()) - 2);
    const double s = u - static_cast<double>(k);
    return hermite5<Vec2>(x[k], v[k], a[k], x[k + 1], v[k + 1], a[k + 1], h, s).value;
}

Vec2 GeodesicPath::velocity(double t) const {
    const double u = (t - t_begin()) / h;
    long k = std::clamp(static_cast<long>(std::floor(u)), 0L, static_cast<long>(x.size()) - 2);
    const double s = u - static_cast<double>(k);
    return hermite5<Vec2>(x[k], v[k], a[k], x[k + 1], v[k + 1], a[k + 1], h, s).d1;
}

GeodesicPath integrate_geodesic(const MetricChart& chart, const Vec2& x0, const Vec2& v0, double h_ode,
                                const GeodesicOptions& opt) {
    const double R = chart.radius();
    if (!(h_ode > 0)) throw PreconditionError("h_ode must be positive");
    if (std::fabs(x0.norm() - R) > 1e-9 * R) throw PreconditionError("initial point is not on the boundary");
    if (std::fabs(chart.norm(x0, v0) - 1.0) > 1e-8) throw PreconditionError("initial direction is not g-unit");
    if (!(v0.dot(x0) < 0)) throw PreconditionError("initial direction is not strictly inward");

    // Forward run to the exit.
    std::vector<Vec2> fx{x0}, fv{v0};
    Vec2 x = x0, v = v0;
    double L = -1;
    Vec2 xe, ve;
    const long kmax = static_cast<long>(std::ceil(opt.t_max / h_ode));
    for (long k = 0; k < kmax; ++k) {
        Vec2 xn = x, vn = v;
        geodesic_rk4_step(chart, xn, vn, h_ode);
        renormalize(chart, xn, vn);
        if (xn.norm() >= R) {
            double lo = 0, hi = h_ode;
            while (hi - lo > opt.exit_tol) {
                const double mid = 0.5 * (lo + hi);
                Vec2 xm = x, vm = v;
                geodesic_rk4_step(chart, xm, vm, mid);
                (xm.norm() < R ? lo : hi) = mid;
            }
            const double dt = 0.5 * (lo + hi);
            xe = x;
            ve = v;
            geodesic_rk4_step(chart, xe, ve, dt);
            renormalize(chart, xe, ve);
            L = static_cast<double>(k) * h_ode + dt;
            fx.push_back(xn);
            fv.push_back(vn);
            break;
        }
        x = xn;
        v = vn;
        fx.push_back(x);
        fv.push_back(v);
    }
    if (L < 0) throw TrappedGeodesicError(opt.t_max);

    const double eps = opt.extension < 0 ? 0.05 * L : opt.extension;
    const int n_back = static_cast<int>(std::ceil(eps / h_ode)) + 3;
    const double t_last = L + eps + 3 * h_ode;
    const int n_fwd_total = static_cast<int>(std::ceil(t_last / h_ode));
    const int have = static_cast<int>(fx.size()) - 1;
    if (n_fwd_total > have) run(chart, fx.back(), fv.back(), h_ode, n_fwd_total - have, fx, fv);

    std::vector<Vec2> bx, bv;
    run(chart, x0, v0, -h_ode, n_back, bx, bv);

    GeodesicPath p;
    p.h = h_ode;
    p.length = L;
    p.k0 = n_back;
    p.x.assign(bx.rbegin(), bx.rend());
    p.v.assign(bv.rbegin(), bv.rend());
    p.x.insert(p.x.end(), fx.begin(), fx.end());
    p.v.insert(p.v.end(), fv.begin(), fv.end());
    finish_samples(chart, p);
    p.entry_point = x0;
    p.entry_dir = v0;
    p.exit_point = xe;
    p.exit_dir = ve;
    p.exits = true;
    p.nontangential = is_nontangential(p, chart, opt.angle_tol);
    p.self_intersections = find_self_intersections(p, opt.intersection_tol);
    return p;
}

GeodesicPath geodesic_from_angles(const MetricChart& chart, double entry_angle, double aim_angle, double h_ode,
                                  const GeodesicOptions& opt) {
    const Vec2 x0 = chart.boundary_point(entry_angle);
    const Vec2 n_in = -x0.normalized();
    const double c = std::cos(aim_angle), s = std::sin(aim_angle);
    Vec2 d(c * n_in[0] - s * n_in[1], s * n_in[0] + c * n_in[1]);
    d /= chart.norm(x0, d);
    return integrate_geodesic(chart, x0, d, h_ode, opt);
}

GeodesicPath integrate_geodesic_for(const MetricChart& chart, const Vec2& x0, const Vec2& v0, double h_ode,
                                    double duration) {
    if (std::fabs(chart.norm(x0, v0) - 1.0) > 1e-8) throw PreconditionError("initial direction is not g-unit");
    GeodesicPath p;
    p.h = h_ode;
    p.k0 = 0;
    p.x = {x0};
    p.v = {v0};
    run(chart, x0, v0, h_ode, static_cast<int>(std::ceil(duration / h_ode)), p.x, p.v);
    finish_samples(chart, p);
    p.length = p.t_end();
    p.entry_point = x0;
    p.entry_dir = v0;
    p.exit_point = p.x.back();
    p.exit_dir = p.v.back();
    p.exits = false;
    p.nontangential = false;
    p.self_intersections = find_self_intersections(p, 1e-6);
    return p;
}

double entry_angle_to_boundary(const GeodesicPath& path) { return boundary_angle(path.entry_point, path.entry_dir); }
double exit_angle_to_boundary(const GeodesicPath& path) { return boundary_angle(path.exit_point, path.exit_dir); }

bool is_nontangential(const GeodesicPath& path, const MetricChart& chart, double angle_tol) {
    if (!path.exits) return false;
    if (entry_angle_to_boundary(path) <= angle_tol || exit_angle_to_boundary(path) <= angle_tol) return false;
    for (std::size_t k = 0; k < path.size(); ++k) {
        const double t = path.time(k);
        if (t > 0 && t < path.length && !chart.inside(path.x[k])) return false;
    }
    return true;
}

// ------------------------------------------------------ parallel transport

Vec2 unit_normal(const MetricChart& chart, const Vec2& x, const Vec2& v) {
    Vec2 n(-v[1], v[0]);
    return n / chart.norm(x, n);
}

namespace {

Vec2 transport_rhs(const MetricChart& chart, const Vec2& x, const Vec2& v, const Vec2& e) {
    const Vec2 s = chart.grad_sigma(x);
    return -(s.dot(v) * e + s.dot(e) * v - v.dot(e) * s);
}

}  // namespace

Vec2 Frame::at(double t) const {
    const double u = (t - path->t_begin()) / path->h;
    long k = std::clamp(static_cast<long>(std::floor(u)), 0L, static_cast<long>(e.size()) - 2);
    const double s = u - static_cast<double>(k);
    return hermite3<Vec2>(e[k], de[k], e[k + 1], de[k + 1], path->h, s);
}

Frame parallel_transport(const MetricChart& chart, const GeodesicPath& path, const Vec2& w0) {
    const Vec2 x0 = path.x[path.k0], v0 = path.v[path.k0];
    if (std::fabs(chart.norm(x0, w0) - 1.0) > 1e-8 || std::fabs(chart.inner(x0, w0, v0)) > 1e-8)
        throw PreconditionError("transport seed must be g-unit and orthogonal to the velocity");
    const std::size_t n = path.size();
    Frame f;
    f.path = &path;
    f.e.assign(n, Vec2::Zero());
    f.de.assign(n, Vec2::Zero());
    f.e[path.k0] = w0;
    auto step = [&](std::size_t k, int dir) {
        const double h = dir * path.h;
        const double t = path.time(k);
        const Vec2& e = f.e[k];
        const Vec2 xm = path.position(t + 0.5 * h), vm = path.velocity(t + 0.5 * h);
        const std::size_t kn = k + dir;
        const Vec2 k1 = transport_rhs(chart, path.x[k], path.v[k], e);
        const Vec2 k2 = transport_rhs(chart, xm, vm, e + 0.5 * h * k1);
        const Vec2 k3 = transport_rhs(chart, xm, vm, e + 0.5 * h * k2);
        const Vec2 k4 = transport_rhs(chart, path.x[kn], path.v[kn], e + h * k3);
        f.e[kn] = e + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    };
    for (std::size_t k = path.k0; k + 1 < n; ++k) step(k, +1);
    for (std::size_t k = path.k0; k > 0; --k) step(k, -1);
    for (std::size_t k = 0; k < n; ++k) f.de[k] = transport_rhs(chart, path.x[k], path.v[k], f.e[k]);
    return f;
}

// ---------------------------------------------------- self-intersections

namespace {

double segment_distance(const Vec2& p0, const Vec2& p1, const Vec2& q0, const Vec2& q1) {
    auto point_seg = [](const Vec2& p, const Vec2& a, const Vec2& b) {
        const Vec2 d = b - a;
        const double l2 = d.squaredNorm();
        double u = l2 > 0 ? std::clamp((p - a).dot(d) / l2, 0.0, 1.0) : 0.0;
        return (a + u * d - p).norm();
    };
    // Proper crossing.
    const Vec2 r = p1 - p0, s = q1 - q0;
    const double den = r[0] * s[1] - r[1] * s[0];
    if (den != 0) {
        const Vec2 w = q0 - p0;
        const double u = (w[0] * s[1] - w[1] * s[0]) / den;
        const double v = (w[0] * r[1] - w[1] * r[0]) / den;
        if (u >= 0 && u <= 1 && v >= 0 && v <= 1) return 0.0;
    }
    return std::min({point_seg(p0, q0, q1), point_seg(p1, q0, q1), point_seg(q0, p0, p1), point_seg(q1, p0, p1)});
}

}  // namespace

std::vector<SelfIntersection> find_self_intersections(const GeodesicPath& path, double tol) {
    const std::size_t n = path.size();
    if (n < 2) return {};
    const double h = path.h;
    double max_step = 0, max_acc = 0;
    for (std::size_t k = 0; k + 1 < n; ++k) max_step = std::max(max_step, (path.x[k + 1] - path.x[k]).norm());
    for (const auto& a : path.a) max_acc = std::max(max_acc, a.norm());
    const double detect = tol + max_acc * h * h + 1e-12;
    const double cell = std::max(2 * max_step, 1e-9);
    const long min_gap = std::max<long>(20, static_cast<long>(std::ceil(2 * tol / h)) + 2);

    auto key = [&](long i, long j) { return (i * 73856093L) ^ (j * 19349663L); };
    std::unordered_multimap<long, std::size_t> grid;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const Vec2 c = 0.5 * (path.x[k] + path.x[k + 1]);
        grid.emplace(key(static_cast<long>(std::floor(c[0] / cell)), static_cast<long>(std::floor(c[1] / cell))), k);
    }

    std::vector<SelfIntersection> found;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Vec2 c = 0.5 * (path.x[i] + path.x[i + 1]);
        const long ci = static_cast<long>(std::floor(c[0] / cell)), cj = static_cast<long>(std::floor(c[1] / cell));
        for (long di = -1; di <= 1; ++di)
            for (long dj = -1; dj <= 1; ++dj) {
                auto range = grid.equal_range(key(ci + di, cj + dj));
                for (auto it = range.first; it != range.second; ++it) {
                    const std::size_t j = it->second;
                    if (static_cast<long>(j) - static_cast<long>(i) < min_gap) continue;
                    if (segment_distance(path.x[i], path.x[i + 1], path.x[j], path.x[j + 1]) > detect) continue;
                    // Gauss-Newton on X(s) - X(u) = 0.
                    double s = path.time(i) + 0.5 * h, u = path.time(j) + 0.5 * h;
                    Vec2 r = path.position(s) - path.position(u);
                    for (int it2 = 0; it2 < 30 && r.norm() > 1e-14; ++it2) {
                        Mat2 J;
                        J.col(0) = path.velocity(s);
                        J.col(1) = -path.velocity(u);
                        const Vec2 d = J.completeOrthogonalDecomposition().solve(-r);
                        s += d[0];
                        u += d[1];
                        r = path.position(s) - path.position(u);
                    }
                    if (r.norm() > tol || std::fabs(u - s) <= 2 * tol) continue;
                    if (s < path.t_begin() || u > path.t_end()) continue;
                    const Vec2 a = path.velocity(s).normalized(), b = path.velocity(u).normalized();
                    double ang = std::acos(std::min(1.0, std::fabs(a.dot(b))));
                    if (ang < 1e-4) ang = 0.0;
                    found.push_back({s, u, ang});
                }
            }
    }
    std::sort(found.begin(), found.end(), [](const auto& p, const auto& q) { return p.t1 < q.t1; });
    std::vector<SelfIntersection> out;
    for (const auto& f : found) {
        bool merged = false;
        for (auto& o : out) {
            // Chains of nearby solutions belong to one crossing or one retraced run.
            if (std::fabs(f.t2 - f.t1 - (o.t2 - o.t1)) <= 4 * h && f.t1 - o.t1 >= -4 * h) {
                if (o.angle == 0.0 || std::fabs(f.t1 - o.t1) <= 4 * h) {
                    merged = true;
                    break;
                }
            }
        }
        if (!merged) out.push_back(f);
    }
    return out;
}

}  // namespace beamlab
