#include "beamlab/fermi.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "beamlab/hermite.hpp"
#include "beamlab/series.hpp"

namespace beamlab {

using Vec3 = Eigen::Vector3d;

FermiTube::FermiTube(TubeKind kind, const MetricChart& chart, const GeodesicPath& path, double delta, int n_max,
                     double t_lo, double t_hi)
    : kind_(kind), chart_(&chart), path_(&path), delta_(delta), n_max_(n_max), t_lo_(t_lo), t_hi_(t_hi) {
    if (!(delta > 0)) throw TubeRadiusError("tube radius must be positive");
    if (!(t_hi > t_lo)) throw PreconditionError("empty tube interval");
}

double FermiTube::curvature_jet(double t) const {
    AxisJets j = jets(t, 2);
    return -j.g11[2];
}

NormalizationReport FermiTube::check_normalization(int samples, double step) const {
    NormalizationReport rep;
    auto inverse_metric = [&](double t, double y) {
        const Vec2 x = to_chart(t, y);
        const Vec2 jt = (to_chart(t + step, y) - to_chart(t - step, y)) / (2 * step);
        const Vec2 jy = (to_chart(t, y + step) - to_chart(t, y - step)) / (2 * step);
        Mat2 J;
        J.col(0) = jt;
        J.col(1) = jy;
        const Mat2 g = J.transpose() * chart_->metric(x) * J;
        return Mat2(g.inverse());
    };
    const double d = 1e-3;
    const double a = t_lo_ + 4 * d, b = t_hi_ - 4 * d;
    for (int i = 0; i < samples; ++i) {
        const double t = a + (b - a) * (i + 0.5) / samples;
        const Mat2 gi = inverse_metric(t, 0);
        rep.max_metric_dev = std::max(rep.max_metric_dev, (gi - Mat2::Identity()).cwiseAbs().maxCoeff());
        const Mat2 dt = (inverse_metric(t + d, 0) - inverse_metric(t - d, 0)) / (2 * d);
        const Mat2 dy = (inverse_metric(t, d) - inverse_metric(t, -d)) / (2 * d);
        rep.max_metric_deriv = std::max({rep.max_metric_deriv, dt.cwiseAbs().maxCoeff(), dy.cwiseAbs().maxCoeff()});
        ++rep.samples;
    }
    return rep;
}

void FermiTube::check_injectivity(int nt, int ny) const {
    const double Y = support_radius();
    std::vector<Vec2> pts(static_cast<std::size_t>(nt + 1) * (ny + 1));
    auto at = [&](int i, int j) -> Vec2& { return pts[static_cast<std::size_t>(i) * (ny + 1) + j]; };
    for (int i = 0; i <= nt; ++i)
        for (int j = 0; j <= ny; ++j) at(i, j) = to_chart(t_lo_ + (t_hi_ - t_lo_) * i / nt, -Y + 2 * Y * j / ny);
    double min_spacing = 1e300;
    int orient = 0;
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < ny; ++j) {
            const Vec2 a = at(i + 1, j) - at(i, j), b = at(i, j + 1) - at(i, j);
            min_spacing = std::min({min_spacing, a.norm(), b.norm()});
            const double det = a[0] * b[1] - a[1] * b[0];
            const int sg = det > 0 ? 1 : (det < 0 ? -1 : 0);
            if (sg == 0 || (orient != 0 && sg != orient))
                throw TubeRadiusError("Fermi map folds at delta' = " + std::to_string(delta_));
            orient = sg;
        }
    const double cell = 0.5 * min_spacing;
    auto key = [](long a, long b) { return (a * 73856093L) ^ (b * 19349663L); };
    std::unordered_multimap<long, int> grid;
    for (int i = 0; i <= nt; ++i)
        for (int j = 0; j <= ny; ++j) {
            const Vec2& p = at(i, j);
            const long ci = static_cast<long>(std::floor(p[0] / cell)), cj = static_cast<long>(std::floor(p[1] / cell));
            for (long di = -1; di <= 1; ++di)
                for (long dj = -1; dj <= 1; ++dj) {
                    auto range = grid.equal_range(key(ci + di, cj + dj));
                    for (auto it = range.first; it != range.second; ++it) {
                        const int i2 = it->second / (ny + 1), j2 = it->second % (ny + 1);
                        if (std::max(std::abs(i2 - i), std::abs(j2 - j)) <= 2) continue;
                        if ((at(i2, j2) - p).norm() < cell)
                            throw TubeRadiusError("tube slab is not injective at delta' = " + std::to_string(delta_));
                    }
                }
            grid.emplace(key(ci, cj), i * (ny + 1) + j);
        }
}

namespace {

// ------------------------------------------------------------------ flat

class FlatTube : public FermiTube {
  public:
    FlatTube(const MetricChart& c, const GeodesicPath& p, const Frame& f, double delta, int n, double lo, double hi)
        : FermiTube(TubeKind::Flat, c, p, delta, n, lo, hi) {
        p0_ = p.x[p.k0];
        d_ = p.v[p.k0].normalized();
        n_ = f.e[p.k0].normalized();
    }
    Vec2 to_chart(double t, double y) const override { return p0_ + t * d_ + y * n_; }
    std::optional<Vec2> from_chart(const Vec2& x) const override {
        const double t = (x - p0_).dot(d_), y = (x - p0_).dot(n_);
        if (t < t_lo_ || t > t_hi_ || std::fabs(y) >= support_radius()) return std::nullopt;
        return Vec2(t, y);
    }
    FermiMetric metric(double, double) const override { return {}; }
    AxisJets jets(double, int degree) const override {
        AxisJets j;
        j.g11.assign(degree + 1, 0.0);
        j.gt.assign(degree + 1, 0.0);
        j.gy.assign(degree + 1, 0.0);
        j.g11[0] = 1;
        return j;
    }

  private:
    Vec2 p0_, d_, n_;
};

// ---------------------------------------------------------------- sphere

Vec3 stereo(const Vec2& u) {
    const double q = 1 + u.squaredNorm();
    return Vec3(2 * u[0] / q, 2 * u[1] / q, (1 - u.squaredNorm()) / q);
}
Eigen::Matrix<double, 3, 2> stereo_jacobian(const Vec2& u) {
    const double q = 1 + u.squaredNorm();
    Eigen::Matrix<double, 3, 2> J;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) J(i, j) = (i == j ? 2 / q : 0.0) - 4 * u[i] * u[j] / (q * q);
    J(2, 0) = -4 * u[0] / (q * q);
    J(2, 1) = -4 * u[1] / (q * q);
    return J;
}
Vec2 stereo_inverse(const Vec3& X) { return Vec2(X[0], X[1]) / (1 + X[2]); }

class SphereTube : public FermiTube {
  public:
    SphereTube(const MetricChart& c, const GeodesicPath& p, const Frame& f, double delta, int n, double lo, double hi)
        : FermiTube(TubeKind::Sphere, c, p, delta, n, lo, hi) {
        const Vec2 u = p.x[p.k0];
        const auto J = stereo_jacobian(u);
        P_ = stereo(u);
        Q_ = (J * p.v[p.k0]).normalized();
        N_ = (J * f.e[p.k0]).normalized();
    }
    Vec2 to_chart(double t, double y) const override {
        return stereo_inverse(std::cos(y) * (std::cos(t) * P_ + std::sin(t) * Q_) + std::sin(y) * N_);
    }
    std::optional<Vec2> from_chart(const Vec2& x) const override {
        const Vec3 X = stereo(x);
        const double y = std::asin(std::clamp(X.dot(N_), -1.0, 1.0));
        if (std::fabs(y) >= support_radius()) return std::nullopt;
        double t = std::atan2(X.dot(Q_), X.dot(P_));
        const double two_pi = 2 * M_PI;
        t += two_pi * std::ceil((t_lo_ - t) / two_pi);
        if (t > t_hi_) return std::nullopt;
        return Vec2(t, y);
    }
    FermiMetric metric(double, double y) const override { return {std::cos(y), 0.0, -std::sin(y)}; }
    AxisJets jets(double, int degree) const override {
        const Series<double> y = Series<double>::variable(degree, 0.0);
        Series<double> s, c;
        sincos(y, s, c);
        const Series<double> one(degree, 1.0);
        AxisJets j;
        j.g11 = (one / (c * c)).coeffs();
        j.gy = (-(s / c)).coeffs();
        j.gt.assign(degree + 1, 0.0);
        return j;
    }

  private:
    Vec3 P_, Q_, N_;
};

// --------------------------------------------------------------- numeric

// Geodesic flow together with its linearization (a Jacobi field in chart
// coordinates): state (x, v, dx, dv).
struct VarState {
    Vec2 x, v, dx, dv;
};

VarState var_rhs(const MetricChart& c, const VarState& s) {
    const Vec2 gs = c.grad_sigma(s.x);
    const Mat2 H = c.hess_sigma(s.x);
    const Vec2 ds = H * s.dx;
    VarState r;
    r.x = s.v;
    r.v = -2 * gs.dot(s.v) * s.v + s.v.squaredNorm() * gs;
    r.dx = s.dv;
    r.dv = -2 * ds.dot(s.v) * s.v - 2 * gs.dot(s.dv) * s.v - 2 * gs.dot(s.v) * s.dv + 2 * s.v.dot(s.dv) * gs +
           s.v.squaredNorm() * ds;
    return r;
}

VarState axpy(const VarState& a, double h, const VarState& k) {
    return {a.x + h * k.x, a.v + h * k.v, a.dx + h * k.dx, a.dv + h * k.dv};
}

void var_step(const MetricChart& c, VarState& s, double h) {
    const VarState k1 = var_rhs(c, s);
    const VarState k2 = var_rhs(c, axpy(s, 0.5 * h, k1));
    const VarState k3 = var_rhs(c, axpy(s, 0.5 * h, k2));
    const VarState k4 = var_rhs(c, axpy(s, h, k3));
    s.x += h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    s.v += h / 6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
    s.dx += h / 6 * (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx);
    s.dv += h / 6 * (k1.dv + 2 * k2.dv + 2 * k3.dv + k4.dv);
}

struct Node {
    Vec2 x, xt, xy, xty;
    double G, Gy;
};

class NumericTube : public FermiTube {
  public:
    NumericTube(const MetricChart& c, const GeodesicPath& p, const Frame& f, double delta, int n, double lo, double hi)
        : FermiTube(TubeKind::Numeric, c, p, delta, n, lo, hi), frame_(&f) {
        const double Y = 1.05 * support_radius();
        nt_ = std::max(8, static_cast<int>(std::ceil((hi - lo) / 0.004)));
        ny_half_ = std::max(4, static_cast<int>(std::ceil(Y / 0.004)));
        dt_ = (hi - lo) / nt_;
        dy_ = Y / ny_half_;
        ny_ = 2 * ny_half_;
        nodes_.resize(static_cast<std::size_t>(nt_ + 1) * (ny_ + 1));
        for (int i = 0; i <= nt_; ++i) build_row(i);
        double spacing = 0;
        for (const auto& nd : nodes_) spacing = std::max({spacing, nd.xt.norm() * dt_, nd.xy.norm() * dy_});
        cell_ = std::max(spacing, 1e-9);
        for (int i = 0; i <= nt_; ++i)
            for (int j = 0; j <= ny_; ++j) {
                const Vec2& x = node(i, j).x;
                hash_.emplace(key(cell_of(x[0]), cell_of(x[1])), i * (ny_ + 1) + j);
            }
    }

    Vec2 to_chart(double t, double y) const override { return patch(t, y, nullptr, nullptr); }

    std::optional<Vec2> from_chart(const Vec2& x) const override {
        // Seed from the nearest tabulated node.
        const long ci = cell_of(x[0]), cj = cell_of(x[1]);
        double best = 1e300;
        int bi = -1;
        for (long di = -1; di <= 1; ++di)
            for (long dj = -1; dj <= 1; ++dj) {
                auto range = hash_.equal_range(key(ci + di, cj + dj));
                for (auto it = range.first; it != range.second; ++it) {
                    const double d = (nodes_[it->second].x - x).norm();
                    if (d < best) {
                        best = d;
                        bi = it->second;
                    }
                }
            }
        if (bi < 0) return std::nullopt;
        double t = t_lo_ + dt_ * (bi / (ny_ + 1)), y = -ny_half_ * dy_ + dy_ * (bi % (ny_ + 1));
        for (int it = 0; it < 40; ++it) {
            Vec2 xt, xy;
            const Vec2 r = patch(t, y, &xt, &xy) - x;
            if (r.norm() < 1e-13) break;
            Mat2 J;
            J.col(0) = xt;
            J.col(1) = xy;
            const Vec2 d = J.lu().solve(-r);
            t += d[0];
            y += d[1];
            t = std::clamp(t, t_lo_ - 4 * dt_, t_hi_ + 4 * dt_);
            y = std::clamp(y, -(ny_half_ + 4) * dy_, (ny_half_ + 4) * dy_);
        }
        if ((patch(t, y, nullptr, nullptr) - x).norm() > 1e-9) return std::nullopt;
        if (t < t_lo_ || t > t_hi_ || std::fabs(y) >= support_radius()) return std::nullopt;
        return Vec2(t, y);
    }

    FermiMetric metric(double t, double y) const override {
        // Cubic Hermite in y on four rows, Lagrange in t.
        const double u = (t - t_lo_) / dt_;
        int i = std::clamp(static_cast<int>(std::floor(u)), 1, nt_ - 2);
        const double s = u - i;
        const double w = (y + ny_half_ * dy_) / dy_;
        int j = std::clamp(static_cast<int>(std::floor(w)), 0, ny_ - 1);
        const double r = w - j;
        double g[4], gy[4];
        for (int a = 0; a < 4; ++a) {
            const Node& n0 = node(i - 1 + a, j);
            const Node& n1 = node(i - 1 + a, j + 1);
            g[a] = hermite3(n0.G, n0.Gy, n1.G, n1.Gy, dy_, r);
            const double r2 = r * r;
            gy[a] = (n0.G * (6 * r2 - 6 * r) + n0.Gy * dy_ * (3 * r2 - 4 * r + 1) + n1.G * (-6 * r2 + 6 * r) +
                     n1.Gy * dy_ * (3 * r2 - 2 * r)) /
                    dy_;
        }
        // Lagrange basis on nodes -1, 0, 1, 2 at local s.
        const double l[4] = {-s * (s - 1) * (s - 2) / 6, (s + 1) * (s - 1) * (s - 2) / 2, -(s + 1) * s * (s - 2) / 2,
                             (s + 1) * s * (s - 1) / 6};
        const double dl[4] = {-(3 * s * s - 6 * s + 2) / 6, (3 * s * s - 4 * s - 1) / 2, -(3 * s * s - 2 * s - 2) / 2,
                              (3 * s * s - 1) / 6};
        FermiMetric m{0, 0, 0};
        for (int a = 0; a < 4; ++a) {
            m.G += l[a] * g[a];
            m.G_y += l[a] * gy[a];
            m.G_t += dl[a] * g[a] / dt_;
        }
        return m;
    }

    AxisJets jets(double t, int degree) const override {
        const Series<double> G = g_series(t, degree + 1);
        const double d = 1e-3;
        const Series<double> Gt = (g_series(t - 2 * d, degree + 1) - 8.0 * g_series(t - d, degree + 1) +
                                   8.0 * g_series(t + d, degree + 1) - g_series(t + 2 * d, degree + 1)) *
                                  (1.0 / (12 * d));
        Series<double> Gy(degree + 1);
        for (int k = 0; k < degree + 1; ++k) Gy[k] = (k + 1) * G[k + 1];
        const Series<double> one(degree + 1, 1.0);
        const Series<double> g11 = one / (G * G);
        const Series<double> gt = -(Gt / (G * G * G));
        const Series<double> gy = Gy / G;
        AxisJets j;
        j.g11.assign(g11.coeffs().begin(), g11.coeffs().begin() + degree + 1);
        j.gt.assign(gt.coeffs().begin(), gt.coeffs().begin() + degree + 1);
        j.gy.assign(gy.coeffs().begin(), gy.coeffs().begin() + degree + 1);
        return j;
    }

  private:
    const Node& node(int i, int j) const { return nodes_[static_cast<std::size_t>(i) * (ny_ + 1) + j]; }
    Node& node(int i, int j) { return nodes_[static_cast<std::size_t>(i) * (ny_ + 1) + j]; }
    long cell_of(double v) const { return static_cast<long>(std::floor(v / cell_)); }
    static long key(long a, long b) { return (a * 73856093L) ^ (b * 19349663L); }

    Vec2 frame_at(double t) const {
        const Vec2 x = path_->position(t), v = path_->velocity(t);
        Vec2 e = frame_->at(t);
        e -= chart_->inner(x, e, v) / chart_->inner(x, v, v) * v;
        return e / chart_->norm(x, e);
    }

    void build_row(int i) {
        const double t = t_lo_ + dt_ * i;
        const Vec2 x0 = path_->position(t), v0 = path_->velocity(t), e0 = frame_at(t);
        const Vec2 gs = chart_->grad_sigma(x0);
        const Vec2 de0 = -(gs.dot(v0) * e0 + gs.dot(e0) * v0 - v0.dot(e0) * gs);
        const int sub = 2;
        for (int dir = -1; dir <= 1; dir += 2) {
            VarState s{x0, e0, v0, de0};
            for (int k = 0; k <= ny_half_; ++k) {
                if (k > 0)
                    for (int m = 0; m < sub; ++m) var_step(*chart_, s, dir * dy_ / sub);
                const int j = ny_half_ + dir * k;
                Node& nd = node(i, j);
                nd.x = s.x;
                nd.xy = s.v;
                nd.xt = s.dx;
                nd.xty = s.dv;
                const double es = std::exp(chart_->sigma(s.x));
                const double jn = s.dx.norm();
                nd.G = es * jn;
                nd.Gy = es * (chart_->grad_sigma(s.x).dot(s.v) * jn + s.dx.dot(s.dv) / jn);
            }
        }
    }

    // Bicubic Hermite patch of the tabulated map with its first derivatives.
    Vec2 patch(double t, double y, Vec2* xt, Vec2* xy) const {
        const double u = (t - t_lo_) / dt_;
        int i = std::clamp(static_cast<int>(std::floor(u)), 0, nt_ - 1);
        const double a = u - i;
        const double w = (y + ny_half_ * dy_) / dy_;
        int j = std::clamp(static_cast<int>(std::floor(w)), 0, ny_ - 1);
        const double b = w - j;
        auto basis = [](double s, double* H, double* Hd) {
            const double s2 = s * s, s3 = s2 * s;
            H[0] = 2 * s3 - 3 * s2 + 1;
            H[1] = -2 * s3 + 3 * s2;
            H[2] = s3 - 2 * s2 + s;
            H[3] = s3 - s2;
            Hd[0] = 6 * s2 - 6 * s;
            Hd[1] = -6 * s2 + 6 * s;
            Hd[2] = 3 * s2 - 4 * s + 1;
            Hd[3] = 3 * s2 - 2 * s;
        };
        double A[4], Ad[4], B[4], Bd[4];
        basis(a, A, Ad);
        basis(b, B, Bd);
        Vec2 x = Vec2::Zero(), dxt = Vec2::Zero(), dxy = Vec2::Zero();
        for (int p = 0; p < 2; ++p)
            for (int q = 0; q < 2; ++q) {
                const Node& n = node(i + p, j + q);
                const Vec2 vals[4] = {n.x, dt_ * n.xt, dy_ * n.xy, dt_ * dy_ * n.xty};
                const double ca[4] = {A[p], A[2 + p], A[p], A[2 + p]};
                const double cad[4] = {Ad[p], Ad[2 + p], Ad[p], Ad[2 + p]};
                const double cb[4] = {B[q], B[q], B[2 + q], B[2 + q]};
                const double cbd[4] = {Bd[q], Bd[q], Bd[2 + q], Bd[2 + q]};
                for (int k = 0; k < 4; ++k) {
                    x += ca[k] * cb[k] * vals[k];
                    dxt += cad[k] * cb[k] * vals[k];
                    dxy += ca[k] * cbd[k] * vals[k];
                }
            }
        if (xt) *xt = dxt / dt_;
        if (xy) *xy = dxy / dy_;
        return x;
    }

    // Taylor series in y of G(t, y) to the given degree, from the series of
    // the transversal geodesic and the Jacobi equation G'' = -K G.
    Series<double> g_series(double t, int degree) const {
        const int D = degree + 2;
        const Vec2 x0 = path_->position(t), e0 = frame_at(t);
        Series<double> X[2] = {Series<double>(D, x0[0]), Series<double>(D, x0[1])};
        X[0][1] = e0[0];
        X[1][1] = e0[1];
        const Series<double> zero(D, 0.0), tc(D, t);
        auto grad_at = [&](Series<double>* s) {
            const Series<double> vars[4] = {X[0], X[1], zero, tc};
            s[0] = chart_->sigma_derivative_expr(0).eval<Series<double>>(vars);
            s[1] = chart_->sigma_derivative_expr(1).eval<Series<double>>(vars);
        };
        auto deriv = [&](const Series<double>& a) {
            Series<double> r(D);
            for (int k = 0; k < D; ++k) r[k] = (k + 1) * a[k + 1];
            return r;
        };
        for (int k = 0; k + 2 <= D; ++k) {
            Series<double> s[2];
            grad_at(s);
            const Series<double> V[2] = {deriv(X[0]), deriv(X[1])};
            const Series<double> sv = s[0] * V[0] + s[1] * V[1];
            const Series<double> vv = V[0] * V[0] + V[1] * V[1];
            for (int c = 0; c < 2; ++c) {
                const Series<double> acc = -(2.0 * (sv * V[c])) + vv * s[c];
                X[c][k + 2] = acc[k] / ((k + 2.0) * (k + 1.0));
            }
        }
        const Series<double> vars[4] = {X[0], X[1], zero, tc};
        const Series<double> K = chart_->curvature_expr().eval<Series<double>>(vars);
        Series<double> G(degree, 1.0);
        for (int k = 0; k + 2 <= degree; ++k) {
            double acc = 0;
            for (int j = 0; j <= k; ++j) acc += K[j] * G[k - j];
            G[k + 2] = -acc / ((k + 2.0) * (k + 1.0));
        }
        return G;
    }

    const Frame* frame_;
    int nt_, ny_, ny_half_;
    double dt_, dy_, cell_;
    std::vector<Node> nodes_;
    std::unordered_multimap<long, int> hash_;
};

}  // namespace

std::shared_ptr<FermiTube> build_fermi_tube(const MetricChart& chart, const GeodesicPath& path, const Frame& frame,
                                            double delta, int n_max, double t_lo, double t_hi, bool force_numeric) {
    if (path.exits && !path.nontangential) throw PreconditionError("Fermi tubes need a nontangential geodesic");
    t_lo = std::max(t_lo, path.t_begin() + 2 * path.h);
    t_hi = std::min(t_hi, path.t_end() - 2 * path.h);
    std::shared_ptr<FermiTube> tube;
    if (!force_numeric && chart.kind() == ChartKind::EuclideanDisk)
        tube = std::make_shared<FlatTube>(chart, path, frame, delta, n_max, t_lo, t_hi);
    else if (!force_numeric && chart.kind() == ChartKind::SphereCap) {
        if (delta / 2 >= M_PI / 2) throw TubeRadiusError("sphere tube half-width must stay below pi/2");
        if (t_hi - t_lo >= 2 * M_PI) throw TubeRadiusError("sphere tube wraps the great circle");
        tube = std::make_shared<SphereTube>(chart, path, frame, delta, n_max, t_lo, t_hi);
    } else
        tube = std::make_shared<NumericTube>(chart, path, frame, delta, n_max, t_lo, t_hi);
    tube->check_injectivity();
    return tube;
}

std::shared_ptr<FermiTube> build_fermi_tube(const MetricChart& chart, const GeodesicPath& path, const Frame& frame,
                                            double delta, int n_max) {
    return build_fermi_tube(chart, path, frame, delta, n_max, path.t_begin(), path.t_end());
}

std::shared_ptr<FermiTube> build_fermi_tube_adaptive(const MetricChart& chart, const GeodesicPath& path,
                                                     const Frame& frame, double delta, int n_max, double t_lo,
                                                     double t_hi, int halvings) {
    for (int k = 0;; ++k) {
        try {
            return build_fermi_tube(chart, path, frame, delta, n_max, t_lo, t_hi);
        } catch (const TubeRadiusError&) {
            if (k >= halvings) throw;
            delta *= 0.5;
        }
    }
}

double default_tube_delta(const MetricChart& chart, const GeodesicPath& path) {
    switch (chart.kind()) {
        case ChartKind::EuclideanDisk: {
            // Cutoff identically 1 on the disk: support radius beyond the
            // farthest point of M0 from the axis line.
            const Vec2 d = path.entry_dir.normalized();
            const Vec2 n(-d[1], d[0]);
            const double p = std::fabs(path.entry_point.dot(n));
            return 4.4 * (chart.radius() + p);
        }
        case ChartKind::SphereCap:
            // Support half-width 1.5 < pi/2 keeps the closed-form map a diffeomorphism.
            return 3.0;
        default: return chart.radius();
    }
}

std::vector<TubeInterval> segment_intervals(const GeodesicPath& path, double t_lo, double t_hi, double overlap) {
    std::vector<double> times;
    for (const auto& si : path.self_intersections) {
        for (double t : {si.t1, si.t2})
            if (t > t_lo && t < t_hi) times.push_back(t);
    }
    std::sort(times.begin(), times.end());
    if (times.size() <= 1) return {{t_lo, t_hi}};
    double min_gap = 1e300;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) min_gap = std::min(min_gap, times[k + 1] - times[k]);
    const double ov = std::min(overlap, 0.25 * min_gap);
    std::vector<TubeInterval> out;
    double lo = t_lo;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double cut = 0.5 * (times[k] + times[k + 1]);
        out.push_back({lo, cut + ov});
        lo = cut - ov;
    }
    out.push_back({lo, t_hi});
    return out;
}

}  // namespace beamlab
