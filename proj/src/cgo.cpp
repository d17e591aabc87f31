#include "beamlab/cgo.hpp"

#include <cmath>

#include "beamlab/parallel.hpp"

namespace beamlab {

namespace {

constexpr cplx I(0, 1);

}  // namespace

void check_cta_model(const CtaModel& model) {
    if (!model.chart) throw ConfigError("CTA model has no transversal chart");
    if (model.n != model.chart->dimension() + 1) throw ConfigError("CTA dimension must be dim M0 + 1");
    if (!(model.x1max > 0)) throw ConfigError("x1max must be positive");
    const double R = model.chart->radius();
    std::vector<std::string> errs;
    for (int i = 0; i <= 20; ++i)
        for (int j = 0; j <= 20; ++j)
            for (int k = 0; k <= 20; ++k) {
                const double x1 = model.x1max * (-1 + i / 10.0);
                const Vec2 xp = R * Vec2(-1 + j / 10.0, -1 + k / 10.0);
                if (xp.norm() > R) continue;
                const double c = model.c_at(x1, xp);
                if (!(c > 0) && errs.size() < 5)
                    errs.push_back("c = " + std::to_string(c) + " at x1 = " + std::to_string(x1));
                if (!model.truncate)
                    for (double s : {1.05, 1.5, 2.0}) {
                        const double d = model.dq(s * model.x1max * (i < 10 ? -1 : 1), xp);
                        if (d != 0 && errs.size() < 5) errs.push_back("q1 - q2 is nonzero beyond x1max");
                    }
            }
    if (!errs.empty()) throw ConfigError("invalid CTA model", errs);
}

double ReducedPotential::operator()(double x1, const Vec2& xp) const {
    const CtaModel& m = *model_;
    const double e = 1e-4;
    const double n = m.n, p = -(n - 2) / 4;
    auto c = [&](double a, double b, double d) {
        const double v = m.c(a, b, d);
        if (!(v > 0)) throw DomainError("conformal factor must be positive");
        return v;
    };
    auto w = [&](double a, double b, double d) { return std::pow(c(a, b, d), p); };
    const double x2 = xp[0], x3 = xp[1];
    const double c0 = c(x1, x2, x3), w0 = w(x1, x2, x3);
    // Central differences of w = c^p and c.
    const double w1 = (w(x1 + e, x2, x3) - w(x1 - e, x2, x3)) / (2 * e);
    const double w2 = (w(x1, x2 + e, x3) - w(x1, x2 - e, x3)) / (2 * e);
    const double w3 = (w(x1, x2, x3 + e) - w(x1, x2, x3 - e)) / (2 * e);
    const double w11 = (w(x1 + e, x2, x3) - 2 * w0 + w(x1 - e, x2, x3)) / (e * e);
    const double w22 = (w(x1, x2 + e, x3) - 2 * w0 + w(x1, x2 - e, x3)) / (e * e);
    const double w33 = (w(x1, x2, x3 + e) - 2 * w0 + w(x1, x2, x3 - e)) / (e * e);
    const double c1 = (c(x1 + e, x2, x3) - c(x1 - e, x2, x3)) / (2 * e);
    const double c2 = (c(x1, x2 + e, x3) - c(x1, x2 - e, x3)) / (2 * e);
    const double c3 = (c(x1, x2, x3 + e) - c(x1, x2, x3 - e)) / (2 * e);
    const double ts = std::exp(-2 * m.chart->sigma(xp));
    // Delta_g w for g = c (dx1^2 + e^{2 sigma} dx'^2), flux form expanded.
    const double lap = (w11 + ts * (w22 + w33)) / c0 + (n / 2 - 1) / (c0 * c0) * (c1 * w1 + ts * (c2 * w2 + c3 * w3));
    return c0 * (q_(x1, x2, x3) - std::pow(c0, (n - 2) / 4) * lap);
}

ReducedPotential conformal_reduce(const CtaModel& model, const Expression& q) {
    check_cta_model(model);
    return ReducedPotential(model, q);
}

QuadRule x1_rule(const CtaModel& model, int panels) { return composite_gauss(panels, 16, -model.x1max, model.x1max); }

cplx fourier_profile(const CtaModel& model, double lambda, const Vec2& xp, const QuadRule& q1rule) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < q1rule.size(); ++i) {
        const double x1 = q1rule.x[i];
        const double d = model.dq(x1, xp);
        if (d == 0) continue;
        s += q1rule.w[i] * std::exp(-2.0 * I * lambda * x1) * model.c_at(x1, xp) * d;
    }
    return s;
}

cplx fourier_ray_functional(const CtaModel& model, const RayRule& rule, double lambda) {
    const QuadRule qx = x1_rule(model);
    cplx s = 0.0;
    for (std::size_t k = 0; k < rule.size(); ++k)
        s += rule.w[k] * std::exp(-2 * lambda * rule.t[k]) * fourier_profile(model, lambda, rule.x[k], qx);
    return s;
}

cplx fourier_ray_functional(const CtaModel& model, const GeodesicPath& path, double lambda) {
    return fourier_ray_functional(model, ray_rule(path), lambda);
}

cplx cgo_pairing(const CtaModel& model, const Quasimode& qm_v, const Quasimode& qm_w, double lambda1, double lambda2,
                 double tau, const QuadratureSpec& q) {
    if (&qm_v != &qm_w) {
        bool same = qm_v.segments.size() == qm_w.segments.size();
        for (std::size_t j = 0; same && j < qm_v.segments.size(); ++j)
            same = qm_v.segments[j].tube == qm_w.segments[j].tube;
        if (!same) throw PreconditionError("paired quasimodes must be the same beam construction");
    }
    const QuadRule qx = x1_rule(model);
    const double n = model.n;
    // The x1 integral of (q1 - q2) e^{-i(l1+l2)x1} c^{-(n-2)/2} c^{n/2} at each point of M0.
    auto F = [&](const Vec2& xp) {
        cplx s = 0.0;
        for (std::size_t i = 0; i < qx.size(); ++i) {
            const double x1 = qx.x[i];
            const double d = model.dq(x1, xp);
            if (d == 0) continue;
            const double c = model.c_at(x1, xp);
            s += qx.w[i] * d * std::exp(-I * (lambda1 + lambda2) * x1) * std::pow(c, -(n - 2) / 2 + n / 2);
        }
        return s;
    };
    return beam_pairing(qm_v, Frequency(tau, lambda1), Frequency(tau, lambda2), F, q);
}

RecoveryResult recover_potential(const CtaModel& model, const GeodesicFan& fan, const std::vector<double>& lambdas,
                                 int grid_n, double reg_weight) {
    check_cta_model(model);
    bool has_zero = false;
    for (double l : lambdas) has_zero |= l == 0;
    if (!has_zero || lambdas.size() < 3) throw ConfigError("lambda grid must contain 0 and at least 3 points");
    RecoveryResult out;
    const auto m = static_cast<Eigen::Index>(fan.size()), nl = static_cast<Eigen::Index>(lambdas.size());
    out.functional_re = {lambdas, Eigen::MatrixXd(m, nl)};
    out.functional_im = {lambdas, Eigen::MatrixXd(m, nl)};
    parallel_for(fan.size(), [&](std::size_t k) {
        for (Eigen::Index j = 0; j < nl; ++j) {
            const cplx v = fourier_ray_functional(model, fan.members[k].rule, lambdas[static_cast<std::size_t>(j)]);
            out.functional_re.values(static_cast<Eigen::Index>(k), j) = v.real();
            out.functional_im.values(static_cast<Eigen::Index>(k), j) = v.imag();
        }
    });
    const double R = model.chart->radius();
    out.q0 = invert_ray_transform(fan, out.functional_re.column(0.0), grid_n, R, reg_weight);
    // D'(0) = int [d/dlambda qhat - 2 t qhat(0)] dt.
    const auto w = finite_difference_weights(lambdas, 0.0, 1);
    Eigen::VectorXd dre = out.functional_re.values * Eigen::Map<const Eigen::VectorXd>(w.data(), nl);
    const Eigen::VectorXd dim = out.functional_im.values * Eigen::Map<const Eigen::VectorXd>(w.data(), nl);
    for (Eigen::Index k = 0; k < m; ++k) {
        const RayRule& r = fan.members[static_cast<std::size_t>(k)].rule;
        double moment = 0;
        for (std::size_t i = 0; i < r.size(); ++i) moment += r.w[i] * r.t[i] * out.q0(r.x[i]);
        dre[k] += 2 * moment;
    }
    out.dq_re = invert_ray_transform(fan, dre, grid_n, R, reg_weight);
    out.dq_im = invert_ray_transform(fan, dim, grid_n, R, reg_weight);
    return out;
}

}  // namespace beamlab
