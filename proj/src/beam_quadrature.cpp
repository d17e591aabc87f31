// Integrals of beam quantities over M0 in Fermi coordinates, dV = G dt dy.

#include <algorithm>
#include <cmath>

#include "beamlab/beam.hpp"
#include "beamlab/parallel.hpp"
#include "beamlab/quadrature.hpp"

namespace beamlab {

namespace {

double seg_begin(const BeamSegment& s) { return s.phase.t0; }
double seg_end(const BeamSegment& s) { return s.phase.t0 + s.phase.h * static_cast<double>(s.phase.size() - 1); }

// Segment whose partition weight dominates at t.
std::size_t owner(const Quasimode& qm, double t) {
    std::size_t best = 0;
    double bw = -1;
    for (std::size_t j = 0; j < qm.segments.size(); ++j) {
        const auto& s = qm.segments[j];
        if (t < seg_begin(s) || t > seg_end(s)) continue;
        const double w = s.weight(t);
        if (w > bw) {
            bw = w;
            best = j;
        }
    }
    return best;
}

QuadRule panel_rule(int nodes, double a, double b) {
    const int per = 16;
    const int panels = std::max(1, nodes / per);
    return composite_gauss(panels, per, a, b);
}

// Subintervals of [T0, T1] where the Fermi point (t, y) lies in M0.
std::vector<std::pair<double, double>> inside_intervals(const Quasimode& qm, double y, double T0, double T1) {
    const double R = qm.chart->radius();
    auto inside = [&](double t) { return R - qm.segments[owner(qm, t)].tube->to_chart(t, y).norm(); };
    const int M = 256;
    std::vector<std::pair<double, double>> out;
    double prev_t = T0, prev_f = inside(T0);
    double start = prev_f > 0 ? T0 : NAN;
    auto root = [&](double a, double fa, double b) {
        for (int it = 0; it < 60; ++it) {
            const double m = 0.5 * (a + b), fm = inside(m);
            if ((fm > 0) == (fa > 0)) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        return 0.5 * (a + b);
    };
    for (int k = 1; k <= M; ++k) {
        const double t = T0 + (T1 - T0) * k / M;
        const double f = inside(t);
        if ((f > 0) != (prev_f > 0)) {
            const double r = root(prev_t, prev_f, t);
            if (f > 0)
                start = r;
            else {
                out.emplace_back(start, r);
                start = NAN;
            }
        }
        prev_t = t;
        prev_f = f;
    }
    if (!std::isnan(start)) out.emplace_back(start, T1);
    return out;
}

double axis_begin(const Quasimode& qm) { return seg_begin(qm.segments.front()); }
double axis_end(const Quasimode& qm) { return seg_end(qm.segments.back()); }

double min_support(const Quasimode& qm) {
    double r = 1e300;
    for (const auto& s : qm.segments) r = std::min(r, 0.5 * s.amp.delta);
    return r;
}

double beam_width(const Quasimode& qm, const Frequency& f) {
    double m = 1e300;
    for (const auto& s : qm.segments) m = std::min(m, s.riccati.min_im());
    return 1 / std::sqrt(f.tau * m);
}

// sum over y nodes of w_y * sum over t nodes of w_t G fn(t, y, x).
template <class Fn>
auto axis_integral(const Quasimode& qm, double Y, int nt, int ny, Fn fn) {
    using T = decltype(fn(0.0, 0.0, Vec2()));
    const QuadRule qy = panel_rule(ny, -Y, Y);
    const double T0 = axis_begin(qm), T1 = axis_end(qm);
    std::vector<T> part(qy.size(), T(0));
    parallel_for(qy.size(), [&](std::size_t iy) {
        const double y = qy.x[iy];
        T acc = 0;
        for (const auto& [a, b] : inside_intervals(qm, y, T0, T1)) {
            const QuadRule qt = panel_rule(nt, a, b);
            for (std::size_t it = 0; it < qt.size(); ++it) {
                const double t = qt.x[it];
                const auto& tube = *qm.segments[owner(qm, t)].tube;
                acc += qt.w[it] * tube.metric(t, y).G * fn(t, y, tube.to_chart(t, y));
            }
        }
        part[iy] = qy.w[iy] * acc;
    });
    T total = 0;
    for (const T& p : part) total += p;
    return total;
}

cplx axis_field(const Quasimode& qm, double t, double y, const Frequency& f) {
    cplx v = 0.0;
    for (std::size_t j = 0; j < qm.segments.size(); ++j) v += qm.segment_value(j, t, y, f);
    return v;
}

template <class Fn>
auto checked_integral(const Quasimode& qm, const Frequency& f, const QuadratureSpec& q, const char* what, Fn fn) {
    const double Y = std::min(min_support(qm), q.width_factor * beam_width(qm, f));
    const auto v1 = axis_integral(qm, Y, q.axis_nodes, q.transverse_nodes, fn);
    if (!q.refine_check) return v1;
    const auto v2 = axis_integral(qm, Y, 2 * q.axis_nodes, 2 * q.transverse_nodes, fn);
    const double scale = std::max(std::abs(v1), std::abs(v2));
    if (scale > 0 && std::abs(v2 - v1) > 0.01 * scale)
        throw QuadratureError(std::string(what) + " quadrature changed by more than 1% under refinement");
    return v2;
}

bool has_crossings(const Quasimode& qm) {
    const double T0 = axis_begin(qm), T1 = axis_end(qm);
    for (const auto& si : qm.path->self_intersections)
        if (si.angle > 0 && si.t1 > T0 && si.t2 < T1) return true;
    return false;
}

}  // namespace

double residual_norm(const Quasimode& qm, const Frequency& f, const QuadratureSpec& q) {
    const double diag = checked_integral(qm, f, q, "residual", [&](double t, double y, const Vec2&) {
        cplx r = 0.0;
        for (std::size_t j = 0; j < qm.segments.size(); ++j) r += segment_residual(qm, j, t, y, f);
        return std::norm(r);
    });
    // Two branches meet at a crossing; Cauchy-Schwarz bounds their sum.
    return std::sqrt((has_crossings(qm) ? 2.0 : 1.0) * diag);
}

double concentration(const Quasimode& qm, const Expression& psi, const Frequency& f, const QuadratureSpec& q) {
    double v = checked_integral(qm, f, q, "concentration", [&](double t, double y, const Vec2& x) {
        return std::norm(axis_field(qm, t, y, f)) * psi(x[0], x[1]);
    });
    for (std::size_t l = 0; l < qm.segments.size(); ++l)
        for (std::size_t lp = l + 1; lp < qm.segments.size(); ++lp)
            v += 2 * cross_term(qm, l, lp, psi, f, q).real();
    return v;
}

double mass(const Quasimode& qm, const Frequency& f, const QuadratureSpec& q) {
    return concentration(qm, Expression(1.0), f, q);
}

double concentration_limit(const GeodesicPath& path, const Expression& psi, double lambda) {
    const QuadRule r = composite_gauss(64, 16, 0.0, path.length);
    return integrate(r, [&](double t) {
        const Vec2 x = path.position(t);
        return std::exp(-2 * lambda * t) * psi(x[0], x[1]);
    });
}

namespace {

// int over points reached by segment l (axis coordinates) and segment lp on a
// different branch of prod(x, l-field, lp-field) dV, near the crossings.
template <class Prod>
cplx branch_cross(const Quasimode& qm, std::size_t l, std::size_t lp, double tau, const QuadratureSpec& q,
                  double Y, Prod prod) {
    const BeamSegment& A = qm.segments.at(l);
    const BeamSegment& B = qm.segments.at(lp);
    if (l == lp) throw PreconditionError("cross term needs two distinct segments");
    // Crossings with one time in each segment.
    const double a0 = seg_begin(A), a1 = seg_end(A), b0 = seg_begin(B), b1 = seg_end(B);
    std::vector<SelfIntersection> hits;
    for (const auto& si : qm.path->self_intersections) {
        if (!(si.angle > 0)) continue;
        if (si.t1 > a0 && si.t1 < a1 && si.t2 > b0 && si.t2 < b1) hits.push_back(si);
        if (si.t2 > a0 && si.t2 < a1 && si.t1 > b0 && si.t1 < b1) hits.push_back({si.t2, si.t1, si.angle});
    }
    if (hits.empty()) return 0.0;
    const double R = qm.chart->radius();
    // Points reached on the same branch by both segments are excluded.
    const double same_branch = 0.1;
    cplx total = 0.0;
    for (const auto& si : hits) {
        const double sn = std::max(0.1, std::sin(si.angle));
        const double ta = std::max(a0, si.t1 - Y / sn - Y), tb = std::min(a1, si.t1 + Y / sn + Y);
        // The relative phase oscillates with wavenumber about tau (1 - cos a)
        // along the axis and tau sin a across it; eight nodes per wavelength.
        auto nodes = [&](double len, double k) {
            const int n = static_cast<int>(std::ceil(len * tau * k / (2 * M_PI) * 8 / 16)) * 16;
            return std::max(q.axis_nodes, n);
        };
        const double ca = std::cos(si.angle);
        const QuadRule qt = panel_rule(nodes(tb - ta, 1 - ca + 0.1), ta, tb);
        const QuadRule qy = panel_rule(nodes(2 * Y, sn + 0.1), -Y, Y);
        std::vector<cplx> part(qy.size(), 0.0);
        parallel_for(qy.size(), [&](std::size_t iy) {
            const double y = qy.x[iy];
            cplx acc = 0.0;
            for (std::size_t it = 0; it < qt.size(); ++it) {
                const double t = qt.x[it];
                const Vec2 x = A.tube->to_chart(t, y);
                if (x.norm() >= R) continue;
                const auto tyb = B.tube->from_chart(x);
                if (!tyb || std::fabs((*tyb)[0] - t) < same_branch) continue;
                const cplx v = prod(x, t, y, (*tyb)[0], (*tyb)[1]);
                if (v == 0.0) continue;
                acc += qt.w[it] * A.tube->metric(t, y).G * v;
            }
            part[iy] = qy.w[iy] * acc;
        });
        for (const auto& p : part) total += p;
    }
    return total;
}

double window(const Quasimode& qm, const Frequency& f, const QuadratureSpec& q) {
    return std::min(min_support(qm), q.width_factor * beam_width(qm, f));
}

}  // namespace

cplx cross_term(const Quasimode& qm, std::size_t l, std::size_t lp, const Expression& psi, const Frequency& f,
                const QuadratureSpec& q) {
    return branch_cross(qm, l, lp, f.tau, q, window(qm, f, q),
                        [&](const Vec2& x, double t, double y, double tb, double yb) -> cplx {
                            const cplx va = qm.segment_value(l, t, y, f);
                            if (va == 0.0) return 0.0;
                            return va * std::conj(qm.segment_value(lp, tb, yb, f)) * psi(x[0], x[1]);
                        });
}

cplx beam_pairing(const Quasimode& qm, const Frequency& fv, const Frequency& fw,
                  const std::function<cplx(const Vec2&)>& F, const QuadratureSpec& q) {
    if (fv.tau != fw.tau) throw PreconditionError("paired frequencies must share tau");
    cplx v = checked_integral(qm, fv, q, "pairing", [&](double t, double y, const Vec2& x) -> cplx {
        cplx a = 0.0, b = 0.0;
        for (std::size_t j = 0; j < qm.segments.size(); ++j) {
            a += qm.segment_value(j, t, y, fv);
            b += qm.segment_value(j, t, y, fw);
        }
        if (a == 0.0) return 0.0;
        return a * std::conj(b) * F(x);
    });
    const double Y = window(qm, fv, q);
    for (std::size_t l = 0; l < qm.segments.size(); ++l)
        for (std::size_t lp = 0; lp < qm.segments.size(); ++lp) {
            if (l == lp) continue;
            v += branch_cross(qm, l, lp, fv.tau, q, Y, [&](const Vec2& x, double t, double y, double tb, double yb) -> cplx {
                const cplx va = qm.segment_value(l, t, y, fv);
                if (va == 0.0) return 0.0;
                return va * std::conj(qm.segment_value(lp, tb, yb, fw)) * F(x);
            });
        }
    return v;
}

}  // namespace beamlab
