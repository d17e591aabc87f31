#include "beamlab/beam.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "beamlab/hermite.hpp"
#include "beamlab/parallel.hpp"

namespace beamlab {

namespace {

const cplx I(0.0, 1.0);

// Truncated product of y-series of length D + 1.
template <class A, class B>
VecC mul(const A& a, const B& b, int D) {
    VecC r = VecC::Zero(D + 1);
    for (int i = 0; i <= D; ++i)
        for (int j = 0; i + j <= D; ++j) r[i + j] += a[i] * b[j];
    return r;
}

VecC dy(const VecC& a) {
    const int D = static_cast<int>(a.size()) - 1;
    VecC r = VecC::Zero(D + 1);
    for (int m = 0; m < D; ++m) r[m] = static_cast<double>(m + 1) * a[m + 1];
    return r;
}

VecC to_vec(const std::vector<double>& v, int D) {
    VecC r = VecC::Zero(D + 1);
    for (int i = 0; i <= D && i < static_cast<int>(v.size()); ++i) r[i] = v[i];
    return r;
}

// Finite-difference weights for the first derivative on 7 consecutive nodes,
// evaluated at node r (0..6); sixth order.
const std::array<std::array<double, 7>, 7>& fd7_weights() {
    static const std::array<std::array<double, 7>, 7> W = [] {
        std::array<std::array<double, 7>, 7> w{};
        for (int r = 0; r < 7; ++r) {
            Eigen::Matrix<long double, 7, 7> V;
            Eigen::Matrix<long double, 7, 1> rhs = Eigen::Matrix<long double, 7, 1>::Zero();
            rhs[1] = 1;
            for (int q = 0; q < 7; ++q)
                for (int m = 0; m < 7; ++m) V(q, m) = std::pow(static_cast<long double>(m - r), q);
            Eigen::Matrix<long double, 7, 1> sol = V.fullPivLu().solve(rhs);
            for (int m = 0; m < 7; ++m) w[r][m] = static_cast<double>(sol[m]);
        }
        return w;
    }();
    return W;
}

template <class V>
std::vector<V> fd_derivative(const std::vector<V>& f, double h) {
    const int n = static_cast<int>(f.size());
    if (n < 7) throw PreconditionError("too few samples for differentiation");
    const auto& W = fd7_weights();
    std::vector<V> d(f.size());
    for (int i = 0; i < n; ++i) {
        const int start = std::clamp(i - 3, 0, n - 7);
        const int r = i - start;
        V acc = f[start] * W[r][0];
        for (int m = 1; m < 7; ++m) acc = acc + f[start + m] * W[r][m];
        d[i] = acc * (1.0 / h);
    }
    return d;
}

void locate(double t0, double h, std::size_t nodes, double t, std::size_t& i, double& s) {
    const double u = (t - t0) / h;
    const double fl = std::floor(u);
    const double top = static_cast<double>(nodes) - 2;
    const double k = std::clamp(fl, 0.0, top);
    i = static_cast<std::size_t>(k);
    s = u - k;
}

// Horner evaluation of sum c_p y^p with first and second y-derivatives.
struct Poly3 {
    cplx v, d, dd;
};
Poly3 poly_eval(const VecC& c, double y) {
    Poly3 r{0.0, 0.0, 0.0};
    for (int p = static_cast<int>(c.size()) - 1; p >= 0; --p) {
        r.dd = r.dd * y + 2.0 * r.d;
        r.d = r.d * y + r.v;
        r.v = r.v * y + c[p];
    }
    return r;
}

// d theta_p / dt from the eikonal equation order by order in y.
VecC phase_rhs(const VecC& th, const AxisJets& J, int D) {
    VecC d = VecC::Zero(D + 1);
    d[0] = 1.0;
    const VecC thy = dy(th);
    const VecC thy2 = mul(thy, thy, D);
    VecC dd = VecC::Zero(D + 1);  // (theta_t)^2, filled as d is known
    dd[0] = 1.0;
    const double g0 = J.g11[0];
    for (int p = 2; p <= D; ++p) {
        cplx rest = 0.0;
        for (int c = 1; c < p; ++c) rest += d[c] * d[p - c];
        cplx e = thy2[p] + g0 * rest;
        for (int a = 1; a <= p && a < static_cast<int>(J.g11.size()); ++a) e += J.g11[a] * dd[p - a];
        d[p] = -e / (2.0 * g0 * d[0]);
        dd[p] = 2.0 * d[p] + rest;
    }
    return d;
}

// d a / dt for one amplitude level given the phase and the previous level.
VecC amplitude_rhs(const VecC& a, const VecC& thv, const VecC& thd, const VecC& thdd, const VecC* pv, const VecC* pd,
                   const VecC* pdd, const AxisJets& J, int D) {
    const VecC g11 = to_vec(J.g11, D), gt = to_vec(J.gt, D), gy = to_vec(J.gy, D);
    const VecC thy = dy(thv);
    const VecC eta = mul(g11, thdd, D) + mul(gt, thd, D) + dy(thy) + mul(gy, thy, D);
    const VecC u = mul(g11, thd, D);
    VecC base = 2.0 * mul(thy, dy(a), D) + mul(eta, a, D);
    if (pv) {
        const VecC pvy = dy(*pv);
        base -= I * (mul(g11, *pdd, D) + mul(gt, *pd, D) + dy(pvy) + mul(gy, pvy, D));
    }
    VecC d = VecC::Zero(D + 1);
    for (int j = 0; j <= D; ++j) {
        cplx acc = base[j];
        for (int c = 0; c < j; ++c) acc += 2.0 * u[j - c] * d[c];
        d[j] = -acc / (2.0 * u[0]);
    }
    return d;
}

}  // namespace

double smoothstep(double u) {
    if (u <= 0) return 0;
    if (u >= 1) return 1;
    return u * u * u * (10 - 15 * u + 6 * u * u);
}
double smoothstep_d1(double u) {
    if (u <= 0 || u >= 1) return 0;
    return 30 * u * u * (1 - u) * (1 - u);
}
double smoothstep_d2(double u) {
    if (u <= 0 || u >= 1) return 0;
    return 60 * u * (1 - u) * (1 - 2 * u);
}

double cutoff(double r) { return 1 - smoothstep(4 * std::fabs(r) - 1); }
double cutoff_d1(double r) {
    const double sg = r < 0 ? -1.0 : 1.0;
    return -4 * sg * smoothstep_d1(4 * std::fabs(r) - 1);
}
double cutoff_d2(double r) { return -16 * smoothstep_d2(4 * std::fabs(r) - 1); }

JetTable::JetTable(const FermiTube& tube, double t0, double h, int n, int degree)
    : t0_(t0), h_(h), n_(n), degree_(degree), j_(static_cast<std::size_t>(2 * n + 1)) {
    parallel_for(j_.size(), [&](std::size_t k) {
        j_[k] = tube.jets(t0 + 0.5 * h * static_cast<double>(k), degree);
    });
}

cplx RiccatiSolution::at(double t) const {
    std::size_t i;
    double s;
    locate(t0, h, H.size(), t, i, s);
    return hermite5(H[i], dH[i], ddH[i], H[i + 1], dH[i + 1], ddH[i + 1], h, s).value;
}

double RiccatiSolution::determinant_identity_residual() const {
    double worst = 0;
    for (std::size_t k = 0; k < H.size(); ++k) {
        const double pred = H[0].imag() * std::exp(-2 * int_re_h[k]);
        worst = std::max(worst, std::fabs(H[k].imag() - pred) / H[k].imag());
    }
    return worst;
}

double RiccatiSolution::min_im() const {
    double m = 1e300;
    for (const auto& z : H) m = std::min(m, z.imag());
    return m;
}

RiccatiSolution solve_riccati(const JetTable& jets, cplx H0) {
    if (!(H0.imag() > 0)) throw PreconditionError("initial Hessian needs positive imaginary part");
    const int n = jets.steps();
    const double h = jets.h();
    RiccatiSolution r;
    r.t0 = jets.t0();
    r.h = h;
    r.H.resize(n + 1);
    r.F.resize(n + 1);
    r.H[0] = H0;
    auto F_node = [&](int k) { return -jets.node(k).g11[2]; };
    auto F_mid = [&](int k) { return -jets.mid(k).g11[2]; };
    for (int k = 0; k < n; ++k) {
        const cplx y = r.H[k];
        const double f0 = F_node(k), fm = F_mid(k), f1 = F_node(k + 1);
        const cplx k1 = f0 - y * y;
        const cplx y2 = y + 0.5 * h * k1;
        const cplx k2 = fm - y2 * y2;
        const cplx y3 = y + 0.5 * h * k2;
        const cplx k3 = fm - y3 * y3;
        const cplx y4 = y + h * k3;
        const cplx k4 = f1 - y4 * y4;
        r.H[k + 1] = y + h / 6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!(r.H[k + 1].imag() > 0) || !std::isfinite(r.H[k + 1].real()))
            throw IntegrationError("Riccati solution lost positive definiteness at t = " +
                                   std::to_string(r.t0 + h * (k + 1)));
    }
    for (int k = 0; k <= n; ++k) r.F[k] = F_node(k);
    r.dH.resize(n + 1);
    for (int k = 0; k <= n; ++k) r.dH[k] = r.F[k] - r.H[k] * r.H[k];
    std::vector<double> dF = fd_derivative(r.F, h);
    r.ddH.resize(n + 1);
    for (int k = 0; k <= n; ++k) r.ddH[k] = dF[k] - 2.0 * r.H[k] * r.dH[k];
    r.int_re_h.assign(n + 1, 0.0);
    for (int k = 0; k < n; ++k) {
        const cplx mid = hermite5(r.H[k], r.dH[k], r.ddH[k], r.H[k + 1], r.dH[k + 1], r.ddH[k + 1], h, 0.5).value;
        r.int_re_h[k + 1] = r.int_re_h[k] + h / 6 * (r.H[k].real() + 4 * mid.real() + r.H[k + 1].real());
    }
    return r;
}

RiccatiSolution solve_riccati(const FermiTube& tube, cplx H0, double h) {
    const int n = static_cast<int>(std::ceil((tube.t_hi() - tube.t_lo()) / h));
    JetTable jets(tube, tube.t_lo(), (tube.t_hi() - tube.t_lo()) / n, n, 2);
    return solve_riccati(jets, H0);
}

void PhaseJet::at(double t, VecC& v, VecC& d, VecC& dd) const {
    std::size_t i;
    double s;
    locate(t0, h, th.size(), t, i, s);
    auto r = hermite5(th[i], dth[i], ddth[i], th[i + 1], dth[i + 1], ddth[i + 1], h, s);
    v = r.value;
    d = r.d1;
    dd = r.d2;
}

PhaseJet build_phase(const JetTable& jets, const RiccatiSolution& ric, int order, const VecC* theta0) {
    const int D = order;
    if (D < 2) throw PreconditionError("phase order must be at least 2");
    if (jets.degree() < D) throw PreconditionError("jet table degree below the phase order");
    const int n = jets.steps();
    const double h = jets.h();
    PhaseJet p;
    p.t0 = jets.t0();
    p.h = h;
    p.order = D;
    p.th.assign(n + 1, VecC::Zero(D + 1));
    if (theta0) {
        p.th[0] = *theta0;
    } else {
        p.th[0][2] = 0.5 * ric.H[0];
    }
    p.th[0][0] = p.t0;
    p.th[0][1] = 0.0;
    for (int k = 0; k < n; ++k) {
        const VecC& y = p.th[k];
        const VecC k1 = phase_rhs(y, jets.node(k), D);
        const VecC k2 = phase_rhs(y + 0.5 * h * k1, jets.mid(k), D);
        const VecC k3 = phase_rhs(y + 0.5 * h * k2, jets.mid(k), D);
        const VecC k4 = phase_rhs(y + h * k3, jets.node(k + 1), D);
        p.th[k + 1] = y + h / 6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        // The quadratic coefficient is the Riccati solution itself.
        p.th[k + 1][2] = 0.5 * ric.H[k + 1];
        p.th[k + 1][0] = p.t0 + h * (k + 1);
        p.th[k + 1][1] = 0.0;
    }
    p.dth.resize(n + 1);
    for (int k = 0; k <= n; ++k) p.dth[k] = phase_rhs(p.th[k], jets.node(k), D);
    p.ddth = fd_derivative(p.dth, h);
    return p;
}

double beam_c0(cplx H0) { return std::pow(H0.imag() / M_PI, 0.25); }

void AmplitudeJet::at(double t, cplx s, int levels, VecC& v, VecC& d, VecC& dd) const {
    std::size_t i;
    double u;
    locate(t0, h, a[0].size(), t, i, u);
    const int D = order;
    VecC v0 = VecC::Zero(D + 1), m0 = v0, a0 = v0, v1 = v0, m1 = v0, a1 = v0;
    cplx w = 1.0;
    const cplx si = 1.0 / s;
    for (int k = 0; k < levels && k < static_cast<int>(a.size()); ++k) {
        v0 += w * a[k][i];
        m0 += w * da[k][i];
        a0 += w * dda[k][i];
        v1 += w * a[k][i + 1];
        m1 += w * da[k][i + 1];
        a1 += w * dda[k][i + 1];
        w *= si;
    }
    auto r = hermite5(v0, m0, a0, v1, m1, a1, h, u);
    v = r.value;
    d = r.d1;
    dd = r.d2;
}

AmplitudeJet build_amplitude(const JetTable& jets, const PhaseJet& phase, int order, double delta, double c0,
                             const std::vector<VecC>* initial) {
    const int D = order;
    const int n = jets.steps();
    const double h = jets.h();
    AmplitudeJet A;
    A.t0 = jets.t0();
    A.h = h;
    A.order = D;
    A.c0 = c0;
    A.delta = delta;

    // Phase coefficients at the midpoints.
    std::vector<VecC> mv(n), md(n), mdd(n);
    for (int k = 0; k < n; ++k) {
        auto r = hermite5(phase.th[k], phase.dth[k], phase.ddth[k], phase.th[k + 1], phase.dth[k + 1],
                          phase.ddth[k + 1], h, 0.5);
        mv[k] = r.value;
        md[k] = r.d1;
        mdd[k] = r.d2;
    }

    for (int lev = 0; lev <= D; ++lev) {
        std::vector<VecC> a(n + 1, VecC::Zero(D + 1));
        if (initial)
            a[0] = (*initial)[lev];
        else if (lev == 0)
            a[0][0] = c0;
        const bool has_prev = lev > 0;
        std::vector<VecC> pmv, pmd, pmdd;
        if (has_prev) {
            const auto &pv = A.a[lev - 1], &pd = A.da[lev - 1], &pdd = A.dda[lev - 1];
            pmv.resize(n);
            pmd.resize(n);
            pmdd.resize(n);
            for (int k = 0; k < n; ++k) {
                auto r = hermite5(pv[k], pd[k], pdd[k], pv[k + 1], pd[k + 1], pdd[k + 1], h, 0.5);
                pmv[k] = r.value;
                pmd[k] = r.d1;
                pmdd[k] = r.d2;
            }
        }
        auto rhs_node = [&](int k, const VecC& y) {
            if (has_prev)
                return amplitude_rhs(y, phase.th[k], phase.dth[k], phase.ddth[k], &A.a[lev - 1][k],
                                     &A.da[lev - 1][k], &A.dda[lev - 1][k], jets.node(k), D);
            return amplitude_rhs(y, phase.th[k], phase.dth[k], phase.ddth[k], nullptr, nullptr, nullptr,
                                 jets.node(k), D);
        };
        auto rhs_mid = [&](int k, const VecC& y) {
            if (has_prev)
                return amplitude_rhs(y, mv[k], md[k], mdd[k], &pmv[k], &pmd[k], &pmdd[k], jets.mid(k), D);
            return amplitude_rhs(y, mv[k], md[k], mdd[k], nullptr, nullptr, nullptr, jets.mid(k), D);
        };
        for (int k = 0; k < n; ++k) {
            const VecC& y = a[k];
            const VecC k1 = rhs_node(k, y);
            const VecC k2 = rhs_mid(k, y + 0.5 * h * k1);
            const VecC k3 = rhs_mid(k, y + 0.5 * h * k2);
            const VecC k4 = rhs_node(k + 1, y + h * k3);
            a[k + 1] = y + h / 6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        std::vector<VecC> d(n + 1);
        for (int k = 0; k <= n; ++k) d[k] = rhs_node(k, a[k]);
        A.dda.push_back(fd_derivative(d, h));
        A.da.push_back(std::move(d));
        A.a.push_back(std::move(a));
    }
    return A;
}

double BeamSegment::weight(double t) const {
    if (t < up_lo || t > down_hi) return 0;
    double w = 1;
    if (t < up_hi) w *= smoothstep((t - up_lo) / (up_hi - up_lo));
    if (t > down_lo) w *= 1 - smoothstep((t - down_lo) / (down_hi - down_lo));
    return w;
}

double BeamSegment::weight_d1(double t) const {
    if (t <= up_lo || t >= down_hi) return 0;
    if (t < up_hi) return smoothstep_d1((t - up_lo) / (up_hi - up_lo)) / (up_hi - up_lo);
    if (t > down_lo) return -smoothstep_d1((t - down_lo) / (down_hi - down_lo)) / (down_hi - down_lo);
    return 0;
}

double BeamSegment::weight_d2(double t) const {
    if (t <= up_lo || t >= down_hi) return 0;
    if (t < up_hi) {
        const double w = up_hi - up_lo;
        return smoothstep_d2((t - up_lo) / w) / (w * w);
    }
    if (t > down_lo) {
        const double w = down_hi - down_lo;
        return -smoothstep_d2((t - down_lo) / w) / (w * w);
    }
    return 0;
}

namespace {

double seg_begin(const BeamSegment& s) { return s.phase.t0; }
double seg_end(const BeamSegment& s) { return s.phase.t0 + s.phase.h * static_cast<double>(s.phase.size() - 1); }

// Phase and amplitude (including the transverse cutoff) with derivatives.
struct LocalJet {
    cplx th, th_t, th_tt, th_y, th_yy;
    cplx A, A_t, A_tt, A_y, A_yy;
};

LocalJet local_jet(const BeamSegment& seg, double t, double y, cplx s, int levels) {
    VecC pv, pd, pdd, av, ad, add;
    seg.phase.at(t, pv, pd, pdd);
    seg.amp.at(t, s, levels, av, ad, add);
    LocalJet L;
    const Poly3 th = poly_eval(pv, y), tht = poly_eval(pd, y), thtt = poly_eval(pdd, y);
    L.th = th.v;
    L.th_y = th.d;
    L.th_yy = th.dd;
    L.th_t = tht.v;
    L.th_tt = thtt.v;
    const Poly3 P = poly_eval(av, y), Pt = poly_eval(ad, y), Ptt = poly_eval(add, y);
    const double dl = seg.amp.delta;
    const double c = cutoff(y / dl), c1 = cutoff_d1(y / dl) / dl, c2 = cutoff_d2(y / dl) / (dl * dl);
    L.A = c * P.v;
    L.A_t = c * Pt.v;
    L.A_tt = c * Ptt.v;
    L.A_y = c1 * P.v + c * P.d;
    L.A_yy = c2 * P.v + 2.0 * c1 * P.d + c * P.dd;
    return L;
}

}  // namespace

cplx Quasimode::segment_value(std::size_t j, double t, double y, const Frequency& f) const {
    const BeamSegment& seg = segments.at(j);
    if (t < seg_begin(seg) || t > seg_end(seg)) return 0.0;
    if (std::fabs(y) >= 0.5 * seg.amp.delta) return 0.0;
    const double w = seg.weight(t);
    if (w == 0) return 0.0;
    const cplx s = f.s();
    VecC pv, pd, pdd, av, ad, add;
    seg.phase.at(t, pv, pd, pdd);
    seg.amp.at(t, s, order + 1, av, ad, add);
    const cplx th = poly_eval(pv, y).v;
    const cplx A = cutoff(y / seg.amp.delta) * poly_eval(av, y).v;
    return w * std::pow(f.tau, 0.25) * std::exp(I * s * th) * A;
}

cplx Quasimode::evaluate(const Vec2& x, const Frequency& f) const {
    cplx acc = 0.0;
    for (std::size_t j = 0; j < segments.size(); ++j) {
        const auto ty = segments[j].tube->from_chart(x);
        if (!ty) continue;
        acc += segment_value(j, (*ty)[0], (*ty)[1], f);
    }
    return acc;
}

cplx segment_residual(const Quasimode& qm, std::size_t j, double t, double y, const Frequency& f, cplx* value) {
    const BeamSegment& seg = qm.segments.at(j);
    if (value) *value = 0.0;
    if (t < seg_begin(seg) || t > seg_end(seg) || std::fabs(y) >= 0.5 * seg.amp.delta) return 0.0;
    const double W = seg.weight(t);
    const double Wt = seg.weight_d1(t), Wtt = seg.weight_d2(t);
    if (W == 0 && Wt == 0 && Wtt == 0) return 0.0;
    const cplx s = f.s();
    const LocalJet L = local_jet(seg, t, y, s, qm.order + 1);
    const FermiMetric m = seg.tube->metric(t, y);
    const double g11 = 1 / (m.G * m.G), gt = -m.G_t / (m.G * m.G * m.G), gy = m.G_y / m.G;
    const cplx E = g11 * L.th_t * L.th_t + L.th_y * L.th_y - 1.0;
    const cplx eta = g11 * L.th_tt + gt * L.th_t + L.th_yy + gy * L.th_y;
    const cplx dTdA = g11 * L.th_t * L.A_t + L.th_y * L.A_y;
    const cplx lapA = g11 * L.A_tt + gt * L.A_t + L.A_yy + gy * L.A_y;
    const cplx ph = std::pow(f.tau, 0.25) * std::exp(I * s * L.th);
    const cplx rV = ph * (s * s * E * L.A - I * s * (2.0 * dTdA + eta * L.A) - lapA);
    const cplx V = ph * L.A;
    const cplx Vt = ph * (I * s * L.th_t * L.A + L.A_t);
    if (value) *value = W * V;
    return W * rV - 2.0 * g11 * Wt * Vt - (g11 * Wtt + gt * Wt) * V;
}

Quasimode glue_quasimode(std::vector<BeamSegment> segments, const MetricChart& chart, const GeodesicPath& path,
                         int order) {
    if (segments.empty()) throw PreconditionError("no beam segments to glue");
    for (std::size_t j = 0; j + 1 < segments.size(); ++j) {
        const double a = seg_begin(segments[j + 1]), b = seg_end(segments[j]);
        if (!(a < b)) throw CoverageError(b, a);
        // Ramp over the middle half of the overlap.
        const double q = 0.25 * (b - a);
        segments[j].down_lo = a + q;
        segments[j].down_hi = b - q;
        segments[j + 1].up_lo = a + q;
        segments[j + 1].up_hi = b - q;
    }
    Quasimode qm;
    qm.segments = std::move(segments);
    qm.chart = &chart;
    qm.path = &path;
    qm.order = order;
    return qm;
}

Quasimode build_quasimode(const MetricChart& chart, const GeodesicPath& path, const Frame& frame,
                          const BeamOptions& opt) {
    const int D = opt.order;
    if (D < 2) throw PreconditionError("beam order must be at least 2");
    const double eps = 0.05 * path.length;
    const double t0 = std::max(-eps, path.t_begin() + 2 * path.h);
    const double t1 = std::min(path.length + eps, path.t_end() - 2 * path.h);
    std::vector<TubeInterval> iv;
    if (!opt.cuts.empty()) {
        double lo = t0;
        for (double c : opt.cuts) {
            if (!(c - opt.overlap > lo && c + opt.overlap < t1)) throw PreconditionError("segment cut out of range");
            iv.push_back({lo, c + opt.overlap});
            lo = c - opt.overlap;
        }
        iv.push_back({lo, t1});
    } else if (opt.single_segment) {
        iv.push_back({t0, t1});
    } else {
        iv = segment_intervals(path, t0, t1, opt.overlap);
    }

    double delta = opt.delta > 0 ? opt.delta : default_tube_delta(chart, path);
    std::vector<std::shared_ptr<FermiTube>> tubes;
    for (const auto& cur : iv) {
        auto tb = build_fermi_tube_adaptive(chart, path, frame, delta, D, cur.lo, cur.hi, opt.max_halvings);
        if (tb->delta() < delta) {
            // A narrower tube forces all segments to the same cutoff.
            delta = tb->delta();
            tubes.clear();
            for (const auto& J : iv) {
                if (&J == &cur) break;
                tubes.push_back(build_fermi_tube(chart, path, frame, delta, D, J.lo, J.hi));
            }
        }
        tubes.push_back(std::move(tb));
    }

    const double c0 = beam_c0(opt.H0);
    std::vector<BeamSegment> segs;
    for (std::size_t j = 0; j < iv.size(); ++j) {
        const auto& tube = tubes[j];
        const double lo = std::max(iv[j].lo, tube->t_lo()), hi = std::min(iv[j].hi, tube->t_hi());
        const int n = std::max(8, static_cast<int>(std::ceil((hi - lo) / opt.h)));
        const double h = (hi - lo) / n;
        JetTable jets(*tube, lo, h, n, D);
        BeamSegment seg;
        seg.tube = tube;
        if (j == 0) {
            seg.riccati = solve_riccati(jets, opt.H0);
            seg.phase = build_phase(jets, seg.riccati, D);
            seg.amp = build_amplitude(jets, seg.phase, D, delta, c0);
        } else {
            // Continue from the previous segment at the start of this one.
            const BeamSegment& prev = segs.back();
            const cplx H = prev.riccati.at(lo);
            VecC th, thd, thdd;
            prev.phase.at(lo, th, thd, thdd);
            std::vector<VecC> a0;
            for (int k = 0; k <= D; ++k) {
                std::size_t i;
                double u;
                locate(prev.amp.t0, prev.amp.h, prev.amp.a[k].size(), lo, i, u);
                a0.push_back(hermite5(prev.amp.a[k][i], prev.amp.da[k][i], prev.amp.dda[k][i], prev.amp.a[k][i + 1],
                                      prev.amp.da[k][i + 1], prev.amp.dda[k][i + 1], prev.amp.h, u)
                                 .value);
            }
            th[2] = 0.5 * H;
            seg.riccati = solve_riccati(jets, H);
            seg.phase = build_phase(jets, seg.riccati, D, &th);
            seg.amp = build_amplitude(jets, seg.phase, D, delta, c0, &a0);
        }
        segs.push_back(std::move(seg));
    }
    // The truncated phase must stay a Gaussian on the support: limit the
    // cutoff radius to where Im Theta >= Im H y^2 / 4.
    double ymax = 0.5 * delta;
    for (const auto& seg : segs) {
        const std::size_t n = seg.phase.size();
        for (std::size_t k = 0; k < n; k += std::max<std::size_t>(1, n / 400)) {
            const double imh = seg.phase.H(k).imag();
            for (int m = 1; m <= 400; ++m) {
                const double y = 0.5 * delta * m / 400;
                if (y >= ymax) break;
                bool bad = false;
                for (double sy : {-y, y})
                    if (poly_eval(seg.phase.th[k], sy).v.imag() < 0.25 * imh * sy * sy) bad = true;
                if (bad) {
                    ymax = 0.5 * delta * (m - 1) / 400;
                    break;
                }
            }
        }
    }
    if (!(ymax > 0)) throw TubeRadiusError("phase is not a Gaussian near the axis");
    const double dphase = 2 * ymax;
    for (auto& seg : segs) seg.amp.delta = dphase;
    return glue_quasimode(std::move(segs), chart, path, D);
}

}  // namespace beamlab
