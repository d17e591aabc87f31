#include "beamlab/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include "beamlab/beam.hpp"
#include "beamlab/cgo.hpp"
#include "beamlab/csv.hpp"
#include "beamlab/cylinder.hpp"
#include "beamlab/xray.hpp"
#include "json.hpp"

namespace beamlab {

namespace {

namespace fs = std::filesystem;

struct Out {
    fs::path dir;
    ScenarioResult* result;
    std::string file(const std::string& name) const {
        const std::string p = (dir / name).string();
        result->files.push_back(p);
        return p;
    }
};

void require(ScenarioResult& r, bool gate, bool ok, const std::string& msg) {
    if (gate && !ok) {
        r.pass = false;
        r.failures.push_back(msg);
    }
}

std::string num(double x) { return format_number(x, 6); }

MetricChart make_chart(const RunConfig& c) {
    const std::string kind = c.text("manifold", "kind");
    if (kind == "sphere_cap") return MetricChart::sphere_cap(c.number("manifold", "cap_r0"));
    if (kind == "conformal_disk")
        return MetricChart::conformal_disk(c.expr("manifold", "phi"), c.number("manifold", "radius"));
    return MetricChart::euclidean_disk(c.number("manifold", "radius"));
}

// Chart, configured geodesic, frame and (optionally) the quasimode. Not movable:
// the quasimode points at the chart and the path.
struct BeamRun {
    MetricChart chart;
    GeodesicPath path;
    Frame frame;
    Quasimode qm;

    BeamRun(const RunConfig& c, bool build) : chart(make_chart(c)) {
        GeodesicOptions o;
        o.angle_tol = c.number("geodesic", "angle_tol");
        const double h = c.number("geodesic", "h_ode");
        path = geodesic_from_angles(chart, c.number("geodesic", "entry_angle"), c.number("geodesic", "aim_angle"), h,
                                    o);
        if (!path.nontangential)
            throw ConfigError("[geodesic] entry_angle, aim_angle: the geodesic meets the boundary tangentially");
        frame = parallel_transport(chart, path, unit_normal(chart, path.entry_point, path.entry_dir));
        if (build) {
            BeamOptions opt;
            opt.order = c.integer("beam", "order");
            opt.h = h;
            qm = build_quasimode(chart, path, frame, opt);
        }
    }
    BeamRun(const BeamRun&) = delete;
};

// ---- beam ----

const std::vector<std::pair<std::string, std::string>> kBeamColumns{
    {"tau", "real part of the frequency s = tau + i lambda"},
    {"lambda", "imaginary part of s"},
    {"N", "construction order"},
    {"residual_l2", "||(-Delta - s^2) v_s||_L2"},
    {"mass_l2", "||v_s||^2_L2"},
    {"psi_name", "test function"},
    {"value", "int |v_s|^2 psi dV"},
    {"limit", "int_0^L e^{-2 lambda t} psi(gamma(t)) dt"},
    {"rel_err", "|value - limit| / max(|limit|, conc_floor)"},
};

ScenarioResult beam_decay(const RunConfig& c, const Out& out, bool gate) {
    ScenarioResult& r = *out.result;
    BeamRun b(c, true);
    const auto taus = c.numbers("beam", "taus");
    const int N = c.integer("beam", "order");
    const double floor = c.number("beam", "conc_floor");
    const double limit = concentration_limit(b.path, Expression(1.0), 0.0);
    std::vector<double> res, mas;
    for (double tau : taus) {
        res.push_back(residual_norm(b.qm, Frequency(tau, 0)));
        mas.push_back(mass(b.qm, Frequency(tau, 0)));
    }
    const double slope = taus.size() >= 2 ? loglog_slope(taus, res) : std::nan("");
    auto cols = kBeamColumns;
    cols.push_back({"slope", "least-squares slope of log residual_l2 against log tau"});
    CsvWriter w(out.file("beam_decay.csv"), "beam-decay", c, cols);
    for (std::size_t i = 0; i < taus.size(); ++i) {
        w.row({taus[i], 0.0, long(N), res[i], mas[i], std::string("1"), mas[i], limit,
               std::fabs(mas[i] - limit) / std::max(std::fabs(limit), floor), slope});
        r.metrics["residual_tau_" + num(taus[i])] = res[i];
    }
    r.metrics["slope"] = slope;
    r.metrics["length"] = b.path.length;
    const double bound = -c.number("beam", "K") + c.number("beam", "slope_margin");
    require(r, gate, slope <= bound, "residual slope " + num(slope) + " > " + num(bound));
    return r;
}

ScenarioResult concentration_run(const RunConfig& c, const Out& out, bool gate) {
    ScenarioResult& r = *out.result;
    BeamRun b(c, true);
    const double tau = c.number("beam", "tau_limit"), floor = c.number("beam", "conc_floor");
    const double tol = c.number("beam", "conc_tol");
    const auto psis = c.exprs("beam", "psi");
    const auto names = c.items("beam", "psi");
    const int N = c.integer("beam", "order");
    CsvWriter w(out.file("concentration.csv"), "concentration", c, kBeamColumns);
    double worst = 0;
    for (double lam : c.numbers("beam", "lambdas")) {
        const Frequency f(tau, lam);
        const double m = mass(b.qm, f);
        for (std::size_t i = 0; i < psis.size(); ++i) {
            const double v = concentration(b.qm, psis[i], f);
            const double lim = concentration_limit(b.path, psis[i], lam);
            const double e = std::fabs(v - lim) / std::max(std::fabs(lim), floor);
            worst = std::max(worst, e);
            w.row({tau, lam, long(N), std::nan(""), m, names[i], v, lim, e});
            r.metrics["rel_err_" + names[i] + "_lambda_" + num(lam)] = e;
            require(r, gate, e <= tol,
                    "psi = " + names[i] + ", lambda = " + num(lam) + ": relative error " + num(e) + " > " + num(tol));
        }
    }
    r.metrics["max_rel_err"] = worst;
    // Interference between branches on self-intersecting geodesics.
    if (b.qm.segments.size() > 1) {
        const auto ct = c.numbers("beam", "cross_taus");
        CsvWriter x(out.file("concentration_cross.csv"), "concentration cross terms", c,
                    {{"tau", "frequency (lambda = 0)"}, {"cross_abs", "|int v^(0) conj(v^(1)) dV|"}});
        std::vector<double> mags;
        for (double t : ct) {
            mags.push_back(std::abs(cross_term(b.qm, 0, 1, Expression(1.0), Frequency(t, 0))));
            x.row({t, mags.back()});
        }
        if (ct.size() >= 2) {
            const double p = -loglog_slope(ct, mags);
            r.metrics["cross_exponent"] = p;
            const double pmin = c.number("beam", "cross_exponent");
            require(r, gate, p >= pmin, "cross-term decay exponent " + num(p) + " < " + num(pmin));
        }
    }
    return r;
}

ScenarioResult beam_build(const RunConfig& c, const Out& out) {
    ScenarioResult& r = *out.result;
    BeamRun b(c, true);
    CsvWriter w(out.file("beam_build.csv"), "beam build", c,
                {{"segment", "tube segment index"},
                 {"t_lo", "segment start on the axis"},
                 {"t_hi", "segment end on the axis"},
                 {"delta", "tube cutoff radius"},
                 {"min_im_H", "min Im H along the segment"},
                 {"det_residual", "determinant identity residual"}});
    for (std::size_t j = 0; j < b.qm.segments.size(); ++j) {
        const auto& s = b.qm.segments[j];
        w.row({long(j), s.tube->t_lo(), s.tube->t_hi(), s.tube->delta(), s.riccati.min_im(),
               s.riccati.determinant_identity_residual()});
    }
    r.metrics["length"] = b.path.length;
    r.metrics["segments"] = double(b.qm.segments.size());
    r.metrics["self_intersections"] = double(b.path.self_intersections.size());
    return r;
}

// ---- xray ----

GeodesicFan fan_for(const MetricChart& chart, const RunConfig& c, int ne, int na) {
    return build_fan(chart, ne, na, c.number("geodesic", "angle_tol"), c.number("geodesic", "h_ode"));
}

const std::vector<std::pair<std::string, std::string>> kDataColumns{
    {"entry_angle", "boundary angle of the entry point"},
    {"aim_angle", "direction relative to the inward normal"},
    {"lambda", "attenuation"},
    {"value", "int_0^L e^{-2 lambda t} f(gamma(t)) dt"},
};

double xray_error(const RunConfig& c, const MetricChart& chart, int ne, int na, GridField* rec) {
    const Expression f = c.expr("xray", "f");
    const GeodesicFan fan = fan_for(chart, c, ne, na);
    const Eigen::VectorXd data = attenuated_data(f, fan, {0.0}).column(0.0);
    GridField g = invert_ray_transform(fan, data, c.integer("xray", "grid_n"), chart.radius(), c.number("xray", "reg"));
    const double e = relative_l2_error(g, f, chart.radius());
    if (rec) *rec = std::move(g);
    return e;
}

ScenarioResult xray_invert(const RunConfig& c, const Out& out, bool gate) {
    ScenarioResult& r = *out.result;
    const MetricChart chart = make_chart(c);
    const Expression f = c.expr("xray", "f");
    const int ne = c.integer("xray", "n_entry"), na = c.integer("xray", "n_aim");
    GridField rec;
    const double e = xray_error(c, chart, ne, na, &rec);
    const double eh = xray_error(c, chart, std::max(2, ne / 2), std::max(2, na / 2), nullptr);
    CsvWriter w(out.file("xray_invert.csv"), "xray-invert", c,
                {{"x1", "chart coordinate"}, {"x2", "chart coordinate"}, {"f", "reconstruction"}, {"f_true", "input field"}});
    for (int j = 0; j < rec.n; ++j)
        for (int i = 0; i < rec.n; ++i) {
            const Vec2 x = rec.node(i, j);
            if (x.norm() > chart.radius()) continue;
            w.row({x[0], x[1], rec.values[rec.index(i, j)], f(x[0], x[1])});
        }
    CsvWriter s(out.file("xray_invert_summary.csv"), "xray-invert summary", c,
                {{"n_entry", "fan entry angles"}, {"n_aim", "fan aim angles"}, {"rel_err", "relative L2 error in the disk"}});
    s.row({long(ne), long(na), e});
    s.row({long(std::max(2, ne / 2)), long(std::max(2, na / 2)), eh});
    r.metrics["rel_err"] = e;
    r.metrics["rel_err_half"] = eh;
    const double tol = c.number("xray", "err_tol");
    require(r, gate, e <= tol, "inversion error " + num(e) + " > " + num(tol));
    require(r, gate, eh <= 2 * e, "half-density error " + num(eh) + " > 2 x " + num(e));
    return r;
}

ScenarioResult sphere_odd(const RunConfig& c, const Out& out, bool gate) {
    ScenarioResult& r = *out.result;
    const MetricChart cap = MetricChart::sphere_cap(c.number("xray", "odd_cap_r0"));
    const GeodesicFan fan = fan_for(cap, c, c.integer("xray", "n_entry"), c.integer("xray", "n_aim"));
    const Expression f = c.expr("xray", "odd_f");
    const Expression absf = Expression::parse("abs(" + c.text("xray", "odd_f") + ")");
    CsvWriter w(out.file("sphere_odd.csv"), "sphere-odd", c, kDataColumns);
    double worst = 0, scale = 0;
    for (const auto& m : fan.members) {
        const double v = ray_transform(f, m.rule);
        worst = std::max(worst, std::fabs(v));
        scale = std::max(scale, ray_transform(absf, m.rule));
        w.row({m.entry_angle, m.aim_angle, 0.0, v});
    }
    r.metrics["max_abs_transform"] = worst;
    r.metrics["max_transform_of_abs"] = scale;
    r.metrics["members"] = double(fan.size());
    r.metrics["rejects"] = double(fan.rejects.size());
    const double tol = c.number("xray", "odd_tol");
    require(r, gate, worst <= tol, "max |I f| = " + num(worst) + " > " + num(tol));
    return r;
}

ScenarioResult xray_transform(const RunConfig& c, const Out& out) {
    ScenarioResult& r = *out.result;
    const MetricChart chart = make_chart(c);
    const GeodesicFan fan = fan_for(chart, c, c.integer("xray", "n_entry"), c.integer("xray", "n_aim"));
    const auto lambdas = c.numbers("xray", "lambdas");
    const TransformData d = attenuated_data(c.expr("xray", "f"), fan, lambdas);
    CsvWriter w(out.file("xray_transform.csv"), "xray transform", c, kDataColumns);
    for (std::size_t i = 0; i < fan.size(); ++i)
        for (std::size_t j = 0; j < lambdas.size(); ++j)
            w.row({fan.members[i].entry_angle, fan.members[i].aim_angle, lambdas[j],
                   d.values(Eigen::Index(i), Eigen::Index(j))});
    r.metrics["members"] = double(fan.size());
    r.metrics["rejects"] = double(fan.rejects.size());
    return r;
}

ScenarioResult xray_moments(const RunConfig& c, const Out& out) {
    ScenarioResult& r = *out.result;
    const MetricChart chart = make_chart(c);
    const GeodesicFan fan = fan_for(chart, c, c.integer("xray", "n_entry"), c.integer("xray", "n_aim"));
    const auto lambdas = c.numbers("xray", "lambdas");
    const TransformData d = attenuated_data(c.expr("xray", "f"), fan, lambdas);
    const int kmax = std::min(2, int(lambdas.size()) - 1);
    CsvWriter w(out.file("xray_moments.csv"), "xray moments", c,
                {{"entry_angle", "boundary angle of the entry point"},
                 {"aim_angle", "direction relative to the inward normal"},
                 {"k", "moment order"},
                 {"moment", "int_0^L t^k f(gamma(t)) dt"}});
    for (std::size_t i = 0; i < fan.size(); ++i) {
        std::vector<double> row(lambdas.size());
        for (std::size_t j = 0; j < lambdas.size(); ++j) row[j] = d.values(Eigen::Index(i), Eigen::Index(j));
        const auto m = moment_reduction(lambdas, row, kmax);
        for (int k = 0; k <= kmax; ++k) w.row({fan.members[i].entry_angle, fan.members[i].aim_angle, long(k), m[k]});
    }
    return r;
}

// ---- cgo ----

CtaModel make_model(const RunConfig& c, const MetricChart& chart) {
    CtaModel m;
    m.chart = &chart;
    m.c = c.expr("cta", "c");
    m.n = c.integer("cta", "n");
    m.q1 = c.expr("potentials", "q1");
    m.q2 = c.expr("potentials", "q2");
    m.x1max = c.number("potentials", "x1max");
    check_cta_model(m);
    return m;
}

const std::vector<std::pair<std::string, std::string>> kCgoColumns{
    {"tau", "common real frequency"},        {"lambda", "lambda1 = lambda2"},
    {"pairing_re", "CGO pairing, real part"}, {"pairing_im", "CGO pairing, imaginary part"},
    {"target_re", "Fourier ray functional"},  {"target_im", "Fourier ray functional, imaginary part"},
};

ScenarioResult cgo_limit(const RunConfig& c, const Out& out, bool gate) {
    ScenarioResult& r = *out.result;
    BeamRun b(c, true);
    const CtaModel m = make_model(c, b.chart);
    const auto taus = c.numbers("cta", "taus");
    const auto lambdas = c.numbers("cta", "lambdas");
    const double tol = c.number("cta", "limit_tol");
    CsvWriter w(out.file("cgo_limit.csv"), "cgo-limit", c, kCgoColumns);
    for (double lam : lambdas) {
        const cplx target = fourier_ray_functional(m, b.path, lam);
        double e = 0;
        for (double tau : taus) {
            const cplx p = cgo_pairing(m, b.qm, b.qm, lam, lam, tau);
            e = std::abs(p - target) / std::abs(target);
            w.row({tau, lam, p.real(), p.imag(), target.real(), target.imag()});
        }
        r.metrics["rel_err_lambda_" + num(lam)] = e;
        require(r, gate, e <= tol,
                "lambda = " + num(lam) + ": pairing error " + num(e) + " > " + num(tol) + " at the largest tau");
    }
    CtaModel zero = m;
    zero.q2 = zero.q1;
    double z = 0;
    for (double tau : taus) z = std::max(z, std::abs(cgo_pairing(zero, b.qm, b.qm, lambdas.back(), lambdas.back(), tau)));
    r.metrics["zero_model"] = z;
    require(r, gate, z == 0.0, "q1 = q2 gives a nonzero pairing " + num(z));
    return r;
}

ScenarioResult cgo_functional(const RunConfig& c, const Out& out) {
    ScenarioResult& r = *out.result;
    const MetricChart chart = make_chart(c);
    const CtaModel m = make_model(c, chart);
    const GeodesicFan fan = fan_for(chart, c, c.integer("cta", "fan_entry"), c.integer("cta", "fan_aim"));
    CsvWriter w(out.file("cgo_functional.csv"), "cgo functional", c,
                {{"entry_angle", "boundary angle of the entry point"},
                 {"aim_angle", "direction relative to the inward normal"},
                 {"lambda", "frequency"},
                 {"value_re", "int_0^L e^{-2 lambda t} qhat(2 lambda, gamma(t)) dt, real part"},
                 {"value_im", "imaginary part"}});
    for (const auto& mem : fan.members)
        for (double lam : c.numbers("cta", "recover_lambdas")) {
            const cplx v = fourier_ray_functional(m, mem.rule, lam);
            w.row({mem.entry_angle, mem.aim_angle, lam, v.real(), v.imag()});
        }
    return r;
}

ScenarioResult cgo_recover(const RunConfig& c, const Out& out, bool gate) {
    ScenarioResult& r = *out.result;
    const MetricChart chart = make_chart(c);
    const CtaModel m = make_model(c, chart);
    const GeodesicFan fan = fan_for(chart, c, c.integer("cta", "fan_entry"), c.integer("cta", "fan_aim"));
    const auto lambdas = c.numbers("cta", "recover_lambdas");
    const int n = c.integer("cta", "grid_n");
    const double reg = c.number("cta", "reg");
    const RecoveryResult rec = recover_potential(m, fan, lambdas, n, reg);
    const QuadRule xr = x1_rule(m);
    CsvWriter w(out.file("cgo_recover.csv"), "cgo-recover", c,
                {{"x1", "chart coordinate 1 of M0 (model variable x2)"},
                 {"x2", "chart coordinate 2 of M0 (model variable x3)"},
                 {"f", "recovered qhat(0, x')"},
                 {"target", "int c (q1 - q2) dx1"},
                 {"dq_re", "recovered d/dlambda qhat(2 lambda, x') at 0, real part"},
                 {"dq_im", "imaginary part"}});
    double num2 = 0, den2 = 0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec2 x = rec.q0.node(i, j);
            if (x.norm() > chart.radius()) continue;
            const int k = rec.q0.index(i, j);
            const double t = fourier_profile(m, 0.0, x, xr).real();
            num2 += std::pow(rec.q0.values[k] - t, 2);
            den2 += t * t;
            w.row({x[0], x[1], rec.q0.values[k], t, rec.dq_re.values[k], rec.dq_im.values[k]});
        }
    const double e = den2 > 0 ? std::sqrt(num2 / den2) : std::sqrt(num2);
    r.metrics["rel_err"] = e;
    const double tol = c.number("cta", "recover_tol");
    require(r, gate, e <= tol, "recovery error " + num(e) + " > " + num(tol));
    if (gate) {
        CtaModel zero = m;
        zero.q2 = zero.q1;
        const RecoveryResult rz = recover_potential(zero, fan, lambdas, n, reg);
        const double z = rz.q0.values.cwiseAbs().maxCoeff();
        r.metrics["zero_model"] = z;
        require(r, gate, z == 0.0, "q1 = q2 recovers a nonzero potential " + num(z));
    }
    return r;
}

// ---- cylinder ----

TransversalSpectrum make_spectrum(const RunConfig& c) {
    const Expression q0 = c.expr("cylinder", "q0");
    TransversalGrid g = c.text("cylinder", "m0") == "disk"
                            ? disk_grid(c.integer("cylinder", "disk_nr"), c.integer("cylinder", "disk_ntheta"),
                                        c.number("cylinder", "disk_radius"), q0)
                            : interval_grid(c.integer("cylinder", "n"), q0);
    return solve_transversal_eigen(std::move(g), c.integer("cylinder", "lmax"));
}

// Interval: the values at x = 0 and pi. Disk: h = a + b cos(theta).
VecC boundary_data(const TransversalSpectrum& sp, const std::vector<double>& v, const std::string& key) {
    if (sp.grid.kind == TransversalKind::Interval) {
        if (v.size() != 2) throw ConfigError("[cylinder] " + key + ": the interval needs two boundary values");
        return VecC::Map(std::vector<cplx>{v[0], v[1]}.data(), 2);
    }
    if (v.empty() || v.size() > 2) throw ConfigError("[cylinder] " + key + ": the disk takes (a, b) for a + b cos(theta)");
    VecC h(Eigen::Index(sp.grid.boundary_size()));
    for (std::size_t i = 0; i < sp.grid.boundary_size(); ++i) {
        const auto& p = sp.grid.boundary_node[i];
        h[Eigen::Index(i)] = v[0] + (v.size() > 1 ? v[1] * std::cos(std::atan2(p[1], p[0])) : 0.0);
    }
    return h;
}

// Continuum DN matrix of -d_x^2 - mu on [0, pi] (q0 = 0), outward normals.
bool free_interval(const RunConfig& c) {
    const Expression q0 = c.expr("cylinder", "q0");
    return c.text("cylinder", "m0") == "interval" && q0.is_constant() && q0(0.0) == 0.0;
}

MatC interval_dn_exact(double mu) {
    const double s = std::sqrt(std::fabs(mu));
    double d = 1 / M_PI, o = -1 / M_PI;
    if (mu < 0) {
        d = s / std::tanh(s * M_PI);
        o = -s / std::sinh(s * M_PI);
    } else if (mu > 0) {
        d = s / std::tan(s * M_PI);
        o = -s / std::sin(s * M_PI);
    }
    MatC m(2, 2);
    m << d, o, o, d;
    return m;
}

double max_abs(const VecC& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

ScenarioResult cyl_dn_relation(const RunConfig& c, const Out& out, bool gate) {
    ScenarioResult& r = *out.result;
    const TransversalSpectrum sp = make_spectrum(c);
    const double lambda = c.number("cylinder", "dn_lambda");
    std::vector<std::pair<double, VecC>> cases;
    for (double k : c.numbers("cylinder", "dn_k"))
        for (const auto& h : c.vectors("cylinder", "dn_h")) cases.emplace_back(k, boundary_data(sp, h, "dn_h"));
    const bool oracle = sp.grid.kind == TransversalKind::Interval;
    std::vector<OracleValue> ov;
    if (oracle)
        ov = truncated_cylinder_dn(c.expr("cylinder", "q0"), lambda, cases, c.integer("cylinder", "oracle_nx"),
                                   c.number("cylinder", "oracle_T"));
    CsvWriter w(out.file("cyl_dn_relation.csv"), "cyl-dn-relation", c,
                {{"k", "frequency along the cylinder"},
                 {"case", "index of the boundary vector in dn_h"},
                 {"node", "boundary node"},
                 {"direct_re", "direct sparse solve at mu = lambda - k^2"},
                 {"direct_im", "imaginary part"},
                 {"modes_re", "mode expansion of u = E + w"},
                 {"modes_im", "imaginary part"},
                 {"oracle_re", "truncated-cylinder finite differences (nan for the disk)"},
                 {"oracle_im", "imaginary part"}});
    const std::size_t nh = c.vectors("cylinder", "dn_h").size();
    double shared = 0, worst = 0, gap = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& [k, h] = cases[i];
        const VecC a = cylinder_dn(sp, lambda, k, h), b = cylinder_dn_modes(sp, lambda, k, h);
        shared = std::max(shared, max_abs(a - b) / std::max(1.0, max_abs(a)));
        if (oracle) {
            worst = std::max(worst, max_abs(a - ov[i].dn) / max_abs(ov[i].dn));
            gap = std::max(gap, ov[i].gap);
        }
        for (Eigen::Index j = 0; j < a.size(); ++j) {
            const cplx o = oracle ? ov[i].dn[j] : cplx(std::nan(""), std::nan(""));
            w.row({k, long(i % nh), long(j), a[j].real(), a[j].imag(), b[j].real(), b[j].imag(), o.real(), o.imag()});
        }
    }
    r.metrics["shared_error"] = shared;
    const double ts = c.number("cylinder", "dn_tol_shared");
    require(r, gate, shared <= ts, "direct vs mode expansion " + num(shared) + " > " + num(ts));
    if (oracle) {
        r.metrics["oracle_error"] = worst;
        r.metrics["oracle_gap"] = gap;
        const double to = c.number("cylinder", "dn_tol_oracle");
        require(r, gate, worst <= to, "direct vs truncated cylinder " + num(worst) + " > " + num(to));
    }
    return r;
}

ScenarioResult cyl_average(const RunConfig& c, const Out& out, bool gate) {
    ScenarioResult& r = *out.result;
    const TransversalSpectrum sp = make_spectrum(c);
    const double lambda = c.number("cylinder", "lambda"), k = c.number("cylinder", "k");
    const VecC h = boundary_data(sp, c.numbers("cylinder", "h"), "h");
    const auto Rs = c.numbers("cylinder", "R");
    const auto pts = averaged_recovery(sp, lambda, k, h, Rs, cylinder_alpha(c));
    // The continuum value is the target when it exists, else the discrete DN map.
    const bool exact = free_interval(c);
    const VecC closed = exact ? VecC(interval_dn_exact(lambda - k * k) * h) : VecC();
    CsvWriter w(out.file("cyl_average.csv"), "cyl-average", c,
                {{"R", "cutoff radius (average over [1, R])"},
                 {"node", "boundary node"},
                 {"avg_re", "Cesaro average of the radiating DN map"},
                 {"avg_im", "imaginary part"},
                 {"target_re", "continuum DN map (interval, q0 = 0), else the discrete one"},
                 {"target_im", "imaginary part"},
                 {"err", "max over nodes of |avg - target|"},
                 {"discrete_err", "max over nodes of |avg - discrete DN map|"},
                 {"radiation", "outgoing-condition residual"}});
    double rad = 0;
    std::vector<double> errs;
    for (const auto& p : pts) {
        const VecC target = exact ? closed : p.target;
        errs.push_back(max_abs(p.average - target));
        for (Eigen::Index j = 0; j < p.average.size(); ++j)
            w.row({p.R, long(j), p.average[j].real(), p.average[j].imag(), target[j].real(), target[j].imag(),
                   errs.back(), p.error, p.radiation_residual});
        rad = std::max(rad, p.radiation_residual);
        r.metrics["error_R_" + num(p.R)] = errs.back();
        r.metrics["discrete_error_R_" + num(p.R)] = p.error;
    }
    r.metrics["radiation_residual"] = rad;
    if (errs.size() >= 2) {
        const double ratio = errs.back() / errs[errs.size() - 2];
        r.metrics["ratio"] = ratio;
        const double rmax = c.number("cylinder", "avg_ratio");
        require(r, gate, ratio <= rmax, "error ratio " + num(ratio) + " > " + num(rmax));
    }
    const double tol = c.number("cylinder", "avg_tol");
    require(r, gate, errs.back() <= tol, "error at the largest radius " + num(errs.back()) + " > " + num(tol));
    const double rtol = c.number("cylinder", "radiation_tol");
    require(r, gate, rad <= rtol, "radiation residual " + num(rad) + " > " + num(rtol));
    return r;
}

const std::vector<std::pair<std::string, std::string>> kDnColumns{
    {"mu", "spectral parameter"},
    {"entry_i", "boundary node of the normal derivative"},
    {"entry_j", "boundary node carrying the data"},
    {"value_re", "DN matrix entry"},
    {"value_im", "imaginary part"},
};

ScenarioResult cyl_continue(const RunConfig& c, const Out& out, bool gate) {
    ScenarioResult& r = *out.result;
    const TransversalSpectrum sp = make_spectrum(c);
    const int S = c.integer("cylinder", "samples");
    std::vector<DnSample> samples;
    for (int i = 1; i <= S; ++i) samples.push_back(transversal_dn_matrix(sp, -double(i)));
    std::vector<double> poles;
    for (int l = 0; l < sp.lmax && l < sp.lambda.size(); ++l) poles.push_back(sp.lambda[l]);
    {
        CsvWriter w(out.file("cyl_continue_samples.csv"), "cyl-continue samples", c, kDnColumns);
        for (const auto& s : samples)
            for (Eigen::Index j = 0; j < s.matrix.cols(); ++j)
                for (Eigen::Index i = 0; i < s.matrix.rows(); ++i)
                    w.row({s.mu.real(), long(i), long(j), s.matrix(i, j).real(), s.matrix(i, j).imag()});
    }
    auto cols = kDnColumns;
    cols.insert(cols.end(), {{"target_re", "continuum value (interval, q0 = 0), else the direct solve"},
                             {"target_im", "imaginary part"},
                             {"direct_re", "direct solve at mu, same discretization"},
                             {"direct_im", "imaginary part"}});
    CsvWriter w(out.file("cyl_continue.csv"), "cyl-continue", c, cols);
    const double tol = c.number("cylinder", "cont_tol");
    const bool exact = free_interval(c);
    for (double ms : c.numbers("cylinder", "mu_star")) {
        const DnSample got = meromorphic_continuation(samples, poles, ms);
        const MatC direct = transversal_dn_matrix(sp, ms).matrix;
        const MatC target = exact ? interval_dn_exact(ms) : direct;
        for (Eigen::Index j = 0; j < got.matrix.cols(); ++j)
            for (Eigen::Index i = 0; i < got.matrix.rows(); ++i)
                w.row({ms, long(i), long(j), got.matrix(i, j).real(), got.matrix(i, j).imag(), target(i, j).real(),
                       target(i, j).imag(), direct(i, j).real(), direct(i, j).imag()});
        const double e = (got.matrix - target).cwiseAbs().maxCoeff() / target.cwiseAbs().maxCoeff();
        const double ed = (got.matrix - direct).cwiseAbs().maxCoeff() / direct.cwiseAbs().maxCoeff();
        r.metrics["rel_err_mu_" + num(ms)] = e;
        r.metrics["discrete_rel_err_mu_" + num(ms)] = ed;
        require(r, gate, e <= tol, "continuation to mu = " + num(ms) + ": error " + num(e) + " > " + num(tol));
    }
    return r;
}

ScenarioResult cyl_eigen(const RunConfig& c, const Out& out) {
    ScenarioResult& r = *out.result;
    const TransversalSpectrum sp = make_spectrum(c);
    CsvWriter w(out.file("cyl_eigen.csv"), "cyl eigen", c,
                {{"l", "mode index (1-based)"}, {"lambda", "discrete eigenvalue"}, {"resolved", "1 when l <= lmax"}});
    for (Eigen::Index l = 0; l < sp.lambda.size(); ++l) w.row({long(l + 1), sp.lambda[l], long(l < sp.lmax)});
    r.metrics["lambda_1"] = sp.lambda[0];
    return r;
}

ScenarioResult cyl_dn(const RunConfig& c, const Out& out) {
    ScenarioResult& r = *out.result;
    const TransversalSpectrum sp = make_spectrum(c);
    const double k = c.number("cylinder", "k");
    const double mu = c.number("cylinder", "lambda") - k * k;
    const DnSample s = transversal_dn_matrix(sp, mu);
    CsvWriter w(out.file("cyl_dn.csv"), "cyl dn", c, kDnColumns);
    for (Eigen::Index j = 0; j < s.matrix.cols(); ++j)
        for (Eigen::Index i = 0; i < s.matrix.rows(); ++i)
            w.row({mu, long(i), long(j), s.matrix(i, j).real(), s.matrix(i, j).imag()});
    return r;
}

ScenarioResult cyl_radiate(const RunConfig& c, const Out& out) {
    ScenarioResult& r = *out.result;
    const TransversalSpectrum sp = make_spectrum(c);
    const double lambda = c.number("cylinder", "lambda"), k = c.number("cylinder", "k");
    const VecC h = boundary_data(sp, c.numbers("cylinder", "h"), "h");
    const double alpha = cylinder_alpha(c), tmax = c.number("cylinder", "tmax");
    CsvWriter w(out.file("cyl_radiate.csv"), "cyl radiate", c,
                {{"R", "cutoff radius"},
                 {"node", "boundary node"},
                 {"dn_re", "radiating DN map of e^{ikt} Psi_R h at t = 0"},
                 {"dn_im", "imaginary part"},
                 {"propagating_re", "contribution of the propagating modes"},
                 {"propagating_im", "imaginary part"},
                 {"evanescent_re", "contribution of the decaying modes"},
                 {"evanescent_im", "imaginary part"},
                 {"radiation", "outgoing-condition residual"}});
    double rad = 0;
    for (double R : c.numbers("cylinder", "R")) {
        const CutoffFamily cut{R, alpha};
        const RadiatingResult res = radiating_dn(sp, lambda, k, h, cut, 0.0, cut.support() + tmax);
        for (Eigen::Index j = 0; j < res.dn.size(); ++j)
            w.row({R, long(j), res.dn[j].real(), res.dn[j].imag(), res.propagating[j].real(),
                   res.propagating[j].imag(), res.evanescent[j].real(), res.evanescent[j].imag(),
                   res.radiation_residual});
        rad = std::max(rad, res.radiation_residual);
    }
    r.metrics["radiation_residual"] = rad;
    return r;
}

using Runner = ScenarioResult (*)(const RunConfig&, const Out&, bool);

const std::vector<std::pair<std::string, Runner>>& scenarios() {
    static const std::vector<std::pair<std::string, Runner>> s{
        {"beam-decay", beam_decay},         {"concentration", concentration_run}, {"xray-invert", xray_invert},
        {"sphere-odd", sphere_odd},         {"cgo-limit", cgo_limit},             {"cgo-recover", cgo_recover},
        {"cyl-dn-relation", cyl_dn_relation}, {"cyl-average", cyl_average},       {"cyl-continue", cyl_continue},
    };
    return s;
}

using Command = ScenarioResult (*)(const RunConfig&, const Out&);

const std::vector<std::pair<std::string, Command>>& commands() {
    static const std::vector<std::pair<std::string, Command>> s{
        {"beam build", beam_build},
        {"beam residual", [](const RunConfig& c, const Out& o) { return beam_decay(c, o, false); }},
        {"beam concentrate", [](const RunConfig& c, const Out& o) { return concentration_run(c, o, false); }},
        {"xray transform", xray_transform},
        {"xray invert", [](const RunConfig& c, const Out& o) { return xray_invert(c, o, false); }},
        {"xray moments", xray_moments},
        {"cgo pair", [](const RunConfig& c, const Out& o) { return cgo_limit(c, o, false); }},
        {"cgo functional", cgo_functional},
        {"cgo recover", [](const RunConfig& c, const Out& o) { return cgo_recover(c, o, false); }},
        {"cyl eigen", cyl_eigen},
        {"cyl dn", cyl_dn},
        {"cyl radiate", cyl_radiate},
        {"cyl average", [](const RunConfig& c, const Out& o) { return cyl_average(c, o, false); }},
        {"cyl continue", [](const RunConfig& c, const Out& o) { return cyl_continue(c, o, false); }},
    };
    return s;
}

void prepare(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
}

}  // namespace

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> n = [] {
        std::vector<std::string> v;
        for (const auto& [name, fn] : scenarios()) v.push_back(name);
        return v;
    }();
    return n;
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> n = [] {
        std::vector<std::string> v;
        for (const auto& [name, fn] : commands()) v.push_back(name);
        return v;
    }();
    return n;
}

std::string usage_text() {
    std::string s = "usage: beamlab <scenario | module subcommand> [--config <path>] [--out <dir>]\nscenarios:";
    for (const auto& n : scenario_names()) s += " " + n;
    s += "\nsubcommands:";
    for (const auto& n : command_names()) s += "\n  " + n;
    return s;
}

ScenarioResult run_scenario(const std::string& name, const RunConfig& cfg, const std::string& out_dir) {
    for (const auto& [n, fn] : scenarios())
        if (n == name) {
            prepare(out_dir);
            ScenarioResult r;
            r.name = name;
            fn(cfg, Out{out_dir, &r}, true);
            return r;
        }
    throw UsageError("unknown scenario '" + name + "'\n" + usage_text());
}

ScenarioResult run_command(const std::string& module, const std::string& sub, const RunConfig& cfg,
                           const std::string& out_dir) {
    const std::string key = module + " " + sub;
    for (const auto& [n, fn] : commands())
        if (n == key) {
            prepare(out_dir);
            ScenarioResult r;
            r.name = module + "-" + sub;
            fn(cfg, Out{out_dir, &r});
            return r;
        }
    throw UsageError("unknown subcommand '" + key + "'\n" + usage_text());
}

std::string write_result_record(const ScenarioResult& r, const std::string& out_dir) {
    nlohmann::json j;
    j["name"] = r.name;
    j["pass"] = r.pass;
    j["failures"] = r.failures;
    j["metrics"] = nlohmann::json::object();
    for (const auto& [k, v] : r.metrics) j["metrics"][k] = v;
    j["files"] = r.files;
    const std::string path = (fs::path(out_dir) / (r.name + ".result.json")).string();
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << j.dump(2) << "\n";
    return path;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace beamlab
