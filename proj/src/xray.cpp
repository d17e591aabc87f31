#include "beamlab/xray.hpp"

#include <algorithm>
#include <cmath>

#include "beamlab/parallel.hpp"
#include "beamlab/quadrature.hpp"

namespace beamlab {

RayRule ray_rule(const GeodesicPath& path, double panel_length) {
    if (!path.exits) throw PreconditionError("ray transform needs a boundary-to-boundary geodesic");
    const int panels = std::max(4, static_cast<int>(std::ceil(path.length / panel_length)));
    const QuadRule q = composite_gauss(panels, 16, 0.0, path.length);
    RayRule r;
    r.t = q.x;
    r.w = q.w;
    r.length = path.length;
    r.x.reserve(q.size());
    for (double t : q.x) r.x.push_back(path.position(t));
    return r;
}

std::vector<std::pair<int, double>> GridField::stencil(const Vec2& x) const {
    const double d = spacing();
    const double u = (x[0] + R) / d, v = (x[1] + R) / d;
    if (u < 0 || v < 0 || u > n - 1 || v > n - 1) return {};
    const int i = std::min(static_cast<int>(u), n - 2), j = std::min(static_cast<int>(v), n - 2);
    const double a = u - i, b = v - j;
    return {{index(i, j), (1 - a) * (1 - b)},
            {index(i + 1, j), a * (1 - b)},
            {index(i, j + 1), (1 - a) * b},
            {index(i + 1, j + 1), a * b}};
}

double GridField::operator()(const Vec2& x) const {
    double s = 0;
    for (const auto& [k, w] : stencil(x)) s += w * values[k];
    return s;
}

GridField GridField::sample(const Expression& f, int n, double R) {
    GridField g(n, R);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec2 x = g.node(i, j);
            g.values[g.index(i, j)] = f(x[0], x[1]);
        }
    return g;
}

double ray_transform(const Expression& f, const RayRule& rule) { return attenuated_transform(f, rule, 0.0); }

double ray_transform(const GridField& f, const RayRule& rule) {
    double s = 0;
    for (std::size_t k = 0; k < rule.size(); ++k) s += rule.w[k] * f(rule.x[k]);
    return s;
}

double ray_transform(const Expression& f, const GeodesicPath& path) { return ray_transform(f, ray_rule(path)); }

double attenuated_transform(const Expression& f, const RayRule& rule, double lambda) {
    double s = 0;
    for (std::size_t k = 0; k < rule.size(); ++k)
        s += rule.w[k] * (lambda == 0 ? 1.0 : std::exp(-2 * lambda * rule.t[k])) * f(rule.x[k][0], rule.x[k][1]);
    return s;
}

double attenuated_transform(const Expression& f, const GeodesicPath& path, double lambda) {
    return attenuated_transform(f, ray_rule(path), lambda);
}

GeodesicFan build_fan(const MetricChart& chart, int n_entry, int n_aim, double angle_tol, double h_ode) {
    if (n_entry < 2 || n_aim < 2) throw ConfigError("fan needs at least 2 entry and 2 aim angles");
    struct Slot {
        bool ok = false;
        FanMember m;
        FanReject r;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(n_entry) * n_aim);
    parallel_for(slots.size(), [&](std::size_t s) {
        const int i = static_cast<int>(s) / n_aim, j = static_cast<int>(s) % n_aim;
        const double entry = 2 * M_PI * i / n_entry, aim = -M_PI / 2 + M_PI * j / n_aim;
        Slot& out = slots[s];
        out.r = {entry, aim, ""};
        if (M_PI / 2 - std::fabs(aim) <= angle_tol) {
            out.r.reason = "tangential aim";
            return;
        }
        try {
            GeodesicOptions opt;
            opt.angle_tol = angle_tol;
            const GeodesicPath p = geodesic_from_angles(chart, entry, aim, h_ode, opt);
            if (!is_nontangential(p, chart, angle_tol)) {
                out.r.reason = "tangential at exit";
                return;
            }
            out.ok = true;
            out.m.entry_angle = entry;
            out.m.aim_angle = aim;
            out.m.entry_index = i;
            out.m.aim_index = j;
            out.m.rule = ray_rule(p);
            out.m.entry_point = p.entry_point;
            out.m.exit_point = p.exit_point;
        } catch (const TrappedGeodesicError&) {
            out.r.reason = "trapped";
        } catch (const NumericalError& e) {
            out.r.reason = e.what();
        }
    });
    GeodesicFan fan;
    fan.n_entry = n_entry;
    fan.n_aim = n_aim;
    for (auto& s : slots) {
        if (s.ok)
            fan.members.push_back(std::move(s.m));
        else
            fan.rejects.push_back(std::move(s.r));
    }
    if (fan.members.empty()) throw ConfigError("geodesic fan is empty");
    return fan;
}

Eigen::VectorXd TransformData::column(double lambda) const {
    for (std::size_t j = 0; j < lambdas.size(); ++j)
        if (lambdas[j] == lambda) return values.col(static_cast<Eigen::Index>(j));
    throw PreconditionError("lambda not on the data grid");
}

TransformData attenuated_data(const Expression& f, const GeodesicFan& fan, const std::vector<double>& lambdas) {
    TransformData d;
    d.lambdas = lambdas;
    d.values.resize(static_cast<Eigen::Index>(fan.size()), static_cast<Eigen::Index>(lambdas.size()));
    parallel_for(fan.size(), [&](std::size_t m) {
        for (std::size_t j = 0; j < lambdas.size(); ++j)
            d.values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) =
                attenuated_transform(f, fan.members[m].rule, lambdas[j]);
    });
    return d;
}

Eigen::MatrixXd ray_matrix(const GeodesicFan& fan, int n, double R) {
    const GridField g(n, R);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(fan.size()), n * n);
    parallel_for(fan.size(), [&](std::size_t m) {
        const RayRule& r = fan.members[m].rule;
        for (std::size_t k = 0; k < r.size(); ++k)
            for (const auto& [idx, w] : g.stencil(r.x[k])) A(static_cast<Eigen::Index>(m), idx) += r.w[k] * w;
    });
    return A;
}

GridField invert_ray_transform(const GeodesicFan& fan, const Eigen::VectorXd& data, int n, double R,
                               double reg_weight) {
    if (static_cast<std::size_t>(data.size()) != fan.size()) throw PreconditionError("data size differs from fan size");
    if (n < 2) throw ConfigError("inversion grid needs at least 2 nodes per axis");
    const Eigen::MatrixXd A = ray_matrix(fan, n, R);
    Eigen::MatrixXd N = A.transpose() * A;
    GridField g(n, R);
    // Dirichlet energy of the bilinear field, edge differences.
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            for (const auto& [di, dj] : {std::pair{1, 0}, std::pair{0, 1}}) {
                if (i + di >= n || j + dj >= n) continue;
                const int a = g.index(i, j), b = g.index(i + di, j + dj);
                N(a, a) += reg_weight;
                N(b, b) += reg_weight;
                N(a, b) -= reg_weight;
                N(b, a) -= reg_weight;
            }
    const Eigen::VectorXd rhs = A.transpose() * data;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(N);
    const Eigen::VectorXd D = ldlt.vectorD();
    const double dmax = D.cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !(dmax > 0) || D.minCoeff() <= 1e-13 * dmax)
        throw RegularizationError("normal equations are singular; increase reg_weight");
    g.values = ldlt.solve(rhs);
    return g;
}

double relative_l2_error(const GridField& got, const Expression& f, double disk_radius) {
    double num = 0, den = 0;
    for (int j = 0; j < got.n; ++j)
        for (int i = 0; i < got.n; ++i) {
            const Vec2 x = got.node(i, j);
            if (x.norm() > disk_radius) continue;
            const double e = f(x[0], x[1]);
            num += std::pow(got.values[got.index(i, j)] - e, 2);
            den += e * e;
        }
    return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

std::vector<double> finite_difference_weights(const std::vector<double>& nodes, double x0, int order) {
    // Fornberg's recursion.
    const int n = static_cast<int>(nodes.size());
    std::vector<std::vector<double>> c(n, std::vector<double>(order + 1, 0.0));
    double c1 = 1, c4 = nodes[0] - x0;
    c[0][0] = 1;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, order);
        double c2 = 1;
        const double c5 = c4;
        c4 = nodes[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][order];
    return w;
}

std::vector<double> moment_reduction(const std::vector<double>& lambdas, const std::vector<double>& data, int k_max,
                                     const std::vector<double>& profile) {
    if (lambdas.size() != data.size()) throw PreconditionError("lambda grid and data differ in size");
    if (k_max < 0 || k_max > 4 || k_max + 1 > static_cast<int>(lambdas.size()))
        throw PreconditionError("order limit: k_max must be <= 4 and below the number of lambda samples");
    std::vector<double> sorted = lambdas;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (std::fabs(sorted[i] + sorted[n - 1 - i]) > 1e-12) throw PreconditionError("lambda grid must be symmetric");
        if (i > 0 && sorted[i] - sorted[i - 1] > 1e-2 + 1e-15) throw PreconditionError("lambda step must be <= 1e-2");
    }
    std::vector<double> p = profile.empty() ? std::vector<double>{1.0} : profile;
    p.resize(static_cast<std::size_t>(k_max) + 1, 0.0);
    if (p[0] == 0) throw PreconditionError("profile must not vanish at lambda = 0");
    std::vector<double> M(static_cast<std::size_t>(k_max) + 1);
    double binom_row[5][5] = {{1}, {1, 1}, {1, 2, 1}, {1, 3, 3, 1}, {1, 4, 6, 4, 1}};
    for (int k = 0; k <= k_max; ++k) {
        const auto w = finite_difference_weights(lambdas, 0.0, k);
        double dk = 0;
        for (std::size_t i = 0; i < data.size(); ++i) dk += w[i] * data[i];
        double rest = 0;
        for (int j = 1; j <= k; ++j) rest += binom_row[k][j] * std::pow(-2.0, k - j) * p[j] * M[k - j];
        M[k] = (dk - rest) / (std::pow(-2.0, k) * p[0]);
    }
    return M;
}

}  // namespace beamlab
