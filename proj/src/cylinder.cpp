#include "beamlab/cylinder.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>

#include "beamlab/beam.hpp"
#include "beamlab/errors.hpp"
#include "beamlab/parallel.hpp"
#include "beamlab/quadrature.hpp"

namespace beamlab {

namespace {

using Trip = Eigen::Triplet<double>;
using SpMat = Eigen::SparseMatrix<double>;
using SpMatC = Eigen::SparseMatrix<cplx>;
const cplx I(0, 1);

SpMat from_triplets(Eigen::Index rows, Eigen::Index cols, const std::vector<Trip>& t) {
    SpMat m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

// K + M (Q - mu), complex.
SpMatC shifted_operator(const TransversalGrid& g, cplx mu) {
    SpMatC A = g.K.cast<cplx>();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        A.coeffRef(ii, ii) += g.weight[i] * (g.q[i] - mu);
    }
    A.makeCompressed();
    return A;
}

void check_pole(const TransversalSpectrum& sp, cplx mu) {
    const auto [l, lam] = nearest_eigenvalue(sp, mu);
    if (std::abs(mu - lam) < 1e-6 * (1 + std::abs(mu)))
        throw PoleError("spectral parameter within 1e-6 (1 + |mu|) of eigenvalue " + std::to_string(l + 1) + " = " +
                            std::to_string(lam),
                        lam);
}

// Discrete harmonic extension: K H + Kb h = 0.
VecC harmonic_extension(const TransversalGrid& g, const VecC& h) {
    Eigen::SimplicialLDLT<SpMat> ldlt(g.K);
    if (ldlt.info() != Eigen::Success) throw NumericalError("stiffness matrix factorization failed");
    const VecC rhs = -(g.Kb.cast<cplx>() * h);
    VecC H(rhs.size());
    H.real() = ldlt.solve(rhs.real().eval());
    H.imag() = ldlt.solve(rhs.imag().eval());
    return H;
}

VecC normal_derivative(const TransversalGrid& g, const VecC& u, const VecC& h) {
    return g.S.cast<cplx>() * u + g.Sb.cast<cplx>() * h;
}

void check_boundary(const TransversalSpectrum& sp, const VecC& h) {
    if (static_cast<std::size_t>(h.size()) != sp.grid.boundary_size())
        throw PreconditionError("boundary data has " + std::to_string(h.size()) + " entries, expected " +
                                std::to_string(sp.grid.boundary_size()));
}

// int_a^b e^{i kappa |t - s|} e^{i k s} ds and its t-derivative, written with
// exponents e^{i kappa d}, d >= 0, so decaying kernels never overflow.
std::pair<cplx, cplx> exp_convolution(cplx kappa, double k, double t, double a, double b) {
    auto E = [](cplx z) { return std::exp(I * z); };
    const cplx km = I * (k - kappa), kp = I * (k + kappa);
    if (t >= b) {
        const cplx v = (E(k * b) * E(kappa * (t - b)) - E(k * a) * E(kappa * (t - a))) / km;
        return {v, I * kappa * v};
    }
    if (t <= a) {
        const cplx v = (E(k * b) * E(kappa * (b - t)) - E(k * a) * E(kappa * (a - t))) / kp;
        return {v, -I * kappa * v};
    }
    const cplx et = E(k * t), ea = E(k * a) * E(kappa * (t - a)), eb = E(k * b) * E(kappa * (b - t));
    const cplx v = (et - ea) / km + (eb - et) / kp;
    const cplx dv = (I * k * et - I * kappa * ea) / km + (-I * kappa * eb - I * k * et) / kp;
    return {v, dv};
}

cplx mode_kappa(double lambda, double lambda_l) {
    const double d = lambda - lambda_l;
    return d > 0 ? cplx(std::sqrt(d), 0) : cplx(0, std::sqrt(-d));
}

class Fft {
  public:
    explicit Fft(int n) : n_(n) {
        buf_ = fftw_alloc_complex(static_cast<std::size_t>(n));
        fwd_ = fftw_plan_dft_1d(n, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(n, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Fft() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    // Applies the Fourier multiplier m(omega) to a periodic sample vector.
    VecC apply(const VecC& f, double period, const std::function<cplx(double)>& m) {
        for (int j = 0; j < n_; ++j) {
            buf_[j][0] = f[j].real();
            buf_[j][1] = f[j].imag();
        }
        fftw_execute(fwd_);
        for (int j = 0; j < n_; ++j) {
            const int mj = j <= n_ / 2 ? j : j - n_;
            const cplx z = cplx(buf_[j][0], buf_[j][1]) * m(2 * M_PI * mj / period) / static_cast<double>(n_);
            buf_[j][0] = z.real();
            buf_[j][1] = z.imag();
        }
        fftw_execute(bwd_);
        VecC out(n_);
        for (int j = 0; j < n_; ++j) out[j] = cplx(buf_[j][0], buf_[j][1]);
        return out;
    }

  private:
    int n_;
    fftw_complex* buf_;
    fftw_plan fwd_, bwd_;
};

}  // namespace

TransversalGrid interval_grid(int n, const Expression& q0) {
    if (n < 4) throw ConfigError("interval grid needs at least 4 interior nodes");
    TransversalGrid g;
    g.kind = TransversalKind::Interval;
    const double h = M_PI / (n + 1);
    std::vector<Trip> k, kb, s, sb;
    for (int i = 0; i < n; ++i) {
        const double x = (i + 1) * h;
        g.node.push_back({x, 0});
        g.weight.push_back(h);
        g.q.push_back(q0(x));
        k.emplace_back(i, i, 2 / h);
        if (i > 0) k.emplace_back(i, i - 1, -1 / h);
        if (i + 1 < n) k.emplace_back(i, i + 1, -1 / h);
    }
    g.boundary_node = {{0, 0}, {M_PI, 0}};
    kb = {Trip(0, 0, -1 / h), Trip(n - 1, 1, -1 / h)};
    // One-sided second-order outward derivatives.
    s = {Trip(0, 0, -4 / (2 * h)), Trip(0, 1, 1 / (2 * h)), Trip(1, n - 1, -4 / (2 * h)), Trip(1, n - 2, 1 / (2 * h))};
    sb = {Trip(0, 0, 3 / (2 * h)), Trip(1, 1, 3 / (2 * h))};
    g.K = from_triplets(n, n, k);
    g.Kb = from_triplets(n, 2, kb);
    g.S = from_triplets(2, n, s);
    g.Sb = from_triplets(2, 2, sb);
    return g;
}

TransversalGrid disk_grid(int n_radial, int n_angular, double radius, const Expression& q0) {
    if (n_radial < 3 || n_angular < 4) throw ConfigError("disk grid needs n_radial >= 3 and n_angular >= 4");
    TransversalGrid g;
    g.kind = TransversalKind::Disk;
    g.n_radial = n_radial;
    g.n_angular = n_angular;
    g.radius = radius;
    // Cell-centred radii r_i = (i + 1/2) dr; the boundary sits at r = (N + 1/2) dr.
    const double dr = radius / (n_radial + 0.5), dth = 2 * M_PI / n_angular;
    auto idx = [&](int i, int j) { return i * n_angular + ((j % n_angular) + n_angular) % n_angular; };
    std::vector<Trip> k, kb, s, sb;
    for (int i = 0; i < n_radial; ++i) {
        const double r = (i + 0.5) * dr;
        const double c_out = (i + 1) * dr * dth / dr, c_in = i * dr * dth / dr, a = dr / (r * dth);
        for (int j = 0; j < n_angular; ++j) {
            const double th = j * dth;
            const int p = idx(i, j);
            g.node.push_back({r * std::cos(th), r * std::sin(th)});
            g.weight.push_back(r * dr * dth);
            g.q.push_back(q0(r * std::cos(th), r * std::sin(th)));
            k.emplace_back(p, p, c_out + c_in + 2 * a);
            if (i > 0) k.emplace_back(p, idx(i - 1, j), -c_in);
            if (i + 1 < n_radial)
                k.emplace_back(p, idx(i + 1, j), -c_out);
            else
                kb.emplace_back(p, j, -c_out);
            k.emplace_back(p, idx(i, j + 1), -a);
            k.emplace_back(p, idx(i, j - 1), -a);
        }
    }
    for (int j = 0; j < n_angular; ++j) {
        const double th = j * dth;
        g.boundary_node.push_back({radius * std::cos(th), radius * std::sin(th)});
        s.emplace_back(j, idx(n_radial - 1, j), -4 / (2 * dr));
        s.emplace_back(j, idx(n_radial - 2, j), 1 / (2 * dr));
        sb.emplace_back(j, j, 3 / (2 * dr));
    }
    const auto n = static_cast<Eigen::Index>(g.weight.size());
    g.K = from_triplets(n, n, k);
    g.Kb = from_triplets(n, n_angular, kb);
    g.S = from_triplets(n_angular, n, s);
    g.Sb = from_triplets(n_angular, n_angular, sb);
    g.boundary_weight = radius * dth;
    return g;
}

TransversalSpectrum solve_transversal_eigen(TransversalGrid grid, int lmax) {
    const auto n = static_cast<Eigen::Index>(grid.size());
    const int per_mode = grid.kind == TransversalKind::Interval ? 8 : 64;
    if (lmax < 1 || static_cast<long>(lmax) * per_mode > n)
        throw ConfigError("truncation: l_max = " + std::to_string(lmax) + " exceeds the resolvable modes of a " +
                          std::to_string(n) + "-node grid (need " + std::to_string(per_mode) + " nodes per mode)");
    Eigen::VectorXd sw(n);
    for (Eigen::Index i = 0; i < n; ++i) sw[i] = std::sqrt(grid.weight[static_cast<std::size_t>(i)]);
    Eigen::MatrixXd A = Eigen::MatrixXd(grid.K);
    for (Eigen::Index i = 0; i < n; ++i) A(i, i) += grid.weight[static_cast<std::size_t>(i)] * grid.q[static_cast<std::size_t>(i)];
    A = sw.cwiseInverse().asDiagonal() * A * sw.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw NumericalError("transversal eigensolve failed");
    TransversalSpectrum sp;
    sp.lambda = es.eigenvalues();
    sp.phi = sw.cwiseInverse().asDiagonal() * es.eigenvectors();
    sp.dphi = Eigen::MatrixXd(grid.S) * sp.phi;
    sp.lmax = lmax;
    sp.grid = std::move(grid);
    return sp;
}

int TransversalSpectrum::propagating(double lam) const {
    int c = 0;
    while (c < lambda.size() && lambda[c] < lam) ++c;
    return c;
}

VecC TransversalSpectrum::boundary_moments(const VecC& h) const {
    // Discrete flux: -phi_l^T Kb h approximates int h d_nu phi_l dS.
    return -(phi.transpose().cast<cplx>() * (grid.Kb.cast<cplx>() * h));
}

std::pair<int, double> nearest_eigenvalue(const TransversalSpectrum& sp, cplx mu) {
    int best = 0;
    for (int l = 1; l < sp.lambda.size(); ++l)
        if (std::abs(mu - sp.lambda[l]) < std::abs(mu - sp.lambda[best])) best = l;
    return {best, sp.lambda[best]};
}

VecC transversal_solution(const TransversalSpectrum& sp, cplx mu, const VecC& h) {
    check_boundary(sp, h);
    check_pole(sp, mu);
    Eigen::SparseLU<SpMatC> lu(shifted_operator(sp.grid, mu));
    if (lu.info() != Eigen::Success) throw NumericalError("transversal factorization failed");
    return lu.solve(-(sp.grid.Kb.cast<cplx>() * h));
}

VecC transversal_dn(const TransversalSpectrum& sp, cplx mu, const VecC& h) {
    return normal_derivative(sp.grid, transversal_solution(sp, mu, h), h);
}

DnSample transversal_dn_matrix(const TransversalSpectrum& sp, cplx mu) {
    check_pole(sp, mu);
    Eigen::SparseLU<SpMatC> lu(shifted_operator(sp.grid, mu));
    if (lu.info() != Eigen::Success) throw NumericalError("transversal factorization failed");
    const auto nb = static_cast<Eigen::Index>(sp.grid.boundary_size());
    const MatC Hb = MatC::Identity(nb, nb);
    const MatC V = lu.solve(-(sp.grid.Kb.cast<cplx>() * Hb));
    return {mu, sp.grid.S.cast<cplx>() * V + sp.grid.Sb.cast<cplx>() * Hb};
}

MatC cylinder_mode_solve(const TransversalSpectrum& sp, double lambda, const MatC& F, const TGrid& g) {
    if (F.rows() != g.n) throw PreconditionError("mode data must have one row per t sample");
    if (F.cols() > sp.lambda.size()) throw PreconditionError("more mode columns than discrete modes");
    if (!(lambda < sp.lambda[0])) throw PreconditionError("cylinder_mode_solve needs lambda below the spectrum");
    Fft fft(g.n);
    MatC U(F.rows(), F.cols());
    for (Eigen::Index l = 0; l < F.cols(); ++l) {
        const double gap = sp.lambda[l] - lambda;
        U.col(l) = fft.apply(F.col(l), 2 * g.T, [&](double w) { return cplx(1.0 / (w * w + gap)); });
        const double peak = U.col(l).cwiseAbs().maxCoeff();
        const double edge = std::max(std::abs(U(0, l)), std::abs(U(g.n - 1, l)));
        if (peak > 0 && edge > 1e-10 * peak)
            throw PreconditionError("domain size: mode " + std::to_string(l + 1) + " has |u(+-T)| / peak = " +
                                    std::to_string(edge / peak) + " > 1e-10; increase T");
    }
    return U;
}

double mode_residual(const TransversalSpectrum& sp, double lambda, const MatC& u, const MatC& F, const TGrid& g) {
    Fft fft(g.n);
    double worst = 0;
    for (Eigen::Index l = 0; l < u.cols(); ++l) {
        const VecC d2 = fft.apply(u.col(l), 2 * g.T, [](double w) { return cplx(-w * w); });
        const VecC r = -d2 + (sp.lambda[l] - lambda) * u.col(l) - F.col(l);
        const double s = F.col(l).norm();
        worst = std::max(worst, s > 0 ? r.norm() / s : r.norm());
    }
    return worst;
}

VecC cylinder_dn(const TransversalSpectrum& sp, double lambda, double k, const VecC& h, double t) {
    if (!(lambda < sp.lambda[0])) throw PreconditionError("cylinder_dn needs lambda below the continuous spectrum");
    return std::exp(I * k * t) * transversal_dn(sp, lambda - k * k, h);
}

VecC cylinder_dn_modes(const TransversalSpectrum& sp, double lambda, double k, const VecC& h, double t) {
    check_boundary(sp, h);
    if (!(lambda < sp.lambda[0])) throw PreconditionError("cylinder_dn needs lambda below the continuous spectrum");
    const double mu = lambda - k * k;
    const TransversalGrid& g = sp.grid;
    const VecC H = harmonic_extension(g, h);
    // (K + M(Q - mu)) W = -M (Q - mu) H, projected on the modes.
    VecC src(H.size());
    for (Eigen::Index i = 0; i < H.size(); ++i) {
        const auto s = static_cast<std::size_t>(i);
        src[i] = g.weight[s] * (g.q[s] - mu) * H[i];
    }
    const VecC B = sp.phi.transpose().cast<cplx>() * src;
    VecC dn = normal_derivative(g, H, h);
    for (Eigen::Index l = 0; l < sp.lambda.size(); ++l) dn += (-B[l] / (sp.lambda[l] - mu)) * sp.dphi.col(l).cast<cplx>();
    return std::exp(I * k * t) * dn;
}

OutgoingSolution outgoing_mode_solve(const TransversalSpectrum& sp, double lambda, int l,
                                     const std::function<cplx(double)>& source, double a, double b,
                                     const std::vector<double>& t_out) {
    if (l < 0 || l >= sp.lambda.size()) throw PreconditionError("mode index out of range");
    if (!(b > a)) throw PreconditionError("source support must be a nonempty interval");
    const double gap = lambda - sp.lambda[l];
    if (std::fabs(gap) < 1e-8) throw PreconditionError("threshold: lambda equals eigenvalue " + std::to_string(l + 1));
    const cplx kappa = mode_kappa(lambda, sp.lambda[l]);
    const cplx C = I / (2.0 * kappa);
    OutgoingSolution out;
    out.kappa = std::abs(kappa);
    out.t = t_out;
    out.u.resize(t_out.size());
    out.du.resize(t_out.size());
    const int panels = std::max(2, static_cast<int>(std::ceil((b - a) / 0.25)));
    parallel_for(t_out.size(), [&](std::size_t j) {
        const double t = t_out[j];
        std::vector<double> br;
        for (int p = 0; p <= panels; ++p) br.push_back(a + (b - a) * p / panels);
        if (t > a && t < b) {
            br.push_back(t);
            std::sort(br.begin(), br.end());
        }
        const QuadRule q = composite_gauss(br, 16);
        cplx u = 0, du = 0;
        for (std::size_t m = 0; m < q.size(); ++m) {
            const double d = t - q.x[m];
            const cplx e = std::exp(I * kappa * std::fabs(d)) * source(q.x[m]) * q.w[m];
            u += e;
            du += I * kappa * (d >= 0 ? 1.0 : -1.0) * e;
        }
        out.u[j] = C * u;
        out.du[j] = C * du;
    });
    double peak = 0;
    for (const cplx& v : out.u) peak = std::max(peak, std::abs(v));
    // The outgoing condition is checked at the first and last output points
    // that lie outside the source support.
    if (peak > 0)
        for (std::size_t j : {std::size_t{0}, t_out.size() - 1}) {
            if (t_out.empty() || (t_out[j] > a && t_out[j] < b)) continue;
            const double sg = t_out[j] < a ? -1 : 1;
            out.radiation_residual =
                std::max(out.radiation_residual, std::abs(out.du[j] - sg * I * kappa * out.u[j]) / peak);
        }
    if (gap > 0 && out.radiation_residual > 1e-6)
        throw NumericalError("radiation condition violated: residual " + std::to_string(out.radiation_residual));
    return out;
}

double CutoffFamily::operator()(double t) const {
    const double a = std::fabs(t);
    if (a <= R) return 1;
    return cutoff(0.5 * std::pow(R, alpha) * (a - R));
}

double CutoffFamily::d1(double t) const {
    const double a = std::fabs(t);
    if (a <= R) return 0;
    const double s = std::pow(R, alpha);
    return (t < 0 ? -1 : 1) * 0.5 * s * cutoff_d1(0.5 * s * (a - R));
}

double CutoffFamily::d2(double t) const {
    const double a = std::fabs(t);
    if (a <= R) return 0;
    const double s = std::pow(R, alpha);
    return 0.25 * s * s * cutoff_d2(0.5 * s * (a - R));
}

void CutoffFamily::check_constraint(double m_s, double alpha, double mu_w) {
    if (!(alpha > 0)) throw ConfigError("cutoff exponent alpha must be positive");
    if (!(m_s * alpha + mu_w + 0.5 < 0))
        throw ConfigError("cutoff exponent violates m_s * alpha + mu_w + 1/2 < 0: " + std::to_string(m_s) + " * " +
                          std::to_string(alpha) + " + " + std::to_string(mu_w) + " + 0.5 = " +
                          std::to_string(m_s * alpha + mu_w + 0.5));
}

namespace {

// Mode data of the radiating solve shared by every cutoff radius.
struct RadiatingSetup {
    double mu;
    int l0;
    VecC dH;    // d_nu of the harmonic extension
    VecC Hl;    // <H, phi_l>
    VecC B;     // <(q0 - mu) H, phi_l>
    std::vector<cplx> kappa;
};

RadiatingSetup radiating_setup(const TransversalSpectrum& sp, double lambda, double k, const VecC& h) {
    check_boundary(sp, h);
    RadiatingSetup s;
    s.mu = lambda - k * k;
    s.l0 = sp.propagating(lambda);
    for (Eigen::Index l = 0; l < sp.lambda.size(); ++l) {
        if (std::fabs(lambda - sp.lambda[l]) < 1e-8)
            throw PreconditionError("threshold: lambda equals eigenvalue " + std::to_string(l + 1));
        s.kappa.push_back(mode_kappa(lambda, sp.lambda[l]));
    }
    for (int l = 0; l < s.l0; ++l)
        if (std::fabs(k - s.kappa[static_cast<std::size_t>(l)].real()) < 1e-8 ||
            std::fabs(k + s.kappa[static_cast<std::size_t>(l)].real()) < 1e-8)
            throw PreconditionError("resonance: k = +-sqrt(lambda - lambda_" + std::to_string(l + 1) + ")");
    const TransversalGrid& g = sp.grid;
    const VecC H = harmonic_extension(g, h);
    s.dH = normal_derivative(g, H, h);
    VecC mh(H.size()), src(H.size());
    for (Eigen::Index i = 0; i < H.size(); ++i) {
        const auto j = static_cast<std::size_t>(i);
        mh[i] = g.weight[j] * H[i];
        src[i] = g.weight[j] * (g.q[j] - s.mu) * H[i];
    }
    s.Hl = sp.phi.transpose().cast<cplx>() * mh;
    s.B = sp.phi.transpose().cast<cplx>() * src;
    return s;
}

struct ModeValue {
    cplx u, du;
};

// w(t, l) = G_l * F(., l), F = e^{iks} [(Psi'' + 2 i k Psi') Hl - Psi B]:
// closed form on the plateau, Gauss-Legendre on the two ramps.
ModeValue mode_value(const RadiatingSetup& s, const CutoffFamily& cut, const QuadRule& ramp, double k, int l,
                     double t) {
    const auto li = static_cast<std::size_t>(l);
    const cplx kappa = s.kappa[li], C = I / (2.0 * kappa);
    const double R1 = cut.R + 0.5 * std::pow(cut.R, -cut.alpha);
    const auto [bu, bdu] = exp_convolution(kappa, k, t, -R1, R1);
    cplx u = -s.B[l] * bu, du = -s.B[l] * bdu;
    // Ramps sit at distance >= R1 - |t|; decaying modes negligible there are skipped.
    const double dist = std::max(0.0, R1 - std::fabs(t));
    if (kappa.imag() * dist < 40) {
        for (std::size_t m = 0; m < ramp.size(); ++m) {
            for (double sgn : {1.0, -1.0}) {
                const double sp = sgn * ramp.x[m];
                const double p = cut(sp), p1 = cut.d1(sp), p2 = cut.d2(sp);
                const cplx f = std::exp(I * k * sp) * ((p2 + 2.0 * I * k * p1) * s.Hl[l] - p * s.B[l]);
                const double d = t - sp;
                const cplx e = std::exp(I * kappa * std::fabs(d)) * f * ramp.w[m];
                u += e;
                du += I * kappa * (d >= 0 ? 1.0 : -1.0) * e;
            }
        }
    }
    return {C * u, C * du};
}

QuadRule ramp_rule(const CutoffFamily& cut) {
    const double w = std::pow(cut.R, -cut.alpha);
    return composite_gauss(2, 16, cut.R + 0.5 * w, cut.R + w);
}

RadiatingResult radiating_eval(const TransversalSpectrum& sp, const RadiatingSetup& s, double k,
                               const CutoffFamily& cut, double t, double t_rad, bool check_radiation) {
    const QuadRule ramp = ramp_rule(cut);
    const auto nb = static_cast<Eigen::Index>(sp.grid.boundary_size());
    RadiatingResult r;
    r.propagating = VecC::Zero(nb);
    r.evanescent = VecC::Zero(nb);
    r.extension = cut(t) * std::exp(I * k * t) * s.dH;
    for (Eigen::Index l = 0; l < sp.lambda.size(); ++l) {
        const ModeValue v = mode_value(s, cut, ramp, k, static_cast<int>(l), t);
        (l < s.l0 ? r.propagating : r.evanescent) += v.u * sp.dphi.col(l).cast<cplx>();
    }
    r.dn = r.extension + r.propagating + r.evanescent;
    if (check_radiation) {
        if (t_rad <= 0) t_rad = cut.support() + 1;
        for (int l = 0; l < s.l0; ++l) {
            const cplx kappa = s.kappa[static_cast<std::size_t>(l)];
            const ModeValue mid = mode_value(s, cut, ramp, k, l, t);
            for (double sgn : {1.0, -1.0}) {
                const ModeValue v = mode_value(s, cut, ramp, k, l, sgn * t_rad);
                const double scale = std::max({std::abs(v.u), std::abs(mid.u), 1e-300});
                r.radiation_residual = std::max(r.radiation_residual, std::abs(v.du - sgn * I * kappa * v.u) / scale);
            }
        }
        if (r.radiation_residual > 1e-6)
            throw NumericalError("radiation condition violated: residual " + std::to_string(r.radiation_residual));
    }
    return r;
}

}  // namespace

RadiatingResult radiating_dn(const TransversalSpectrum& sp, double lambda, double k, const VecC& h,
                             const CutoffFamily& cut, double t, double t_rad) {
    const RadiatingSetup s = radiating_setup(sp, lambda, k, h);
    return radiating_eval(sp, s, k, cut, t, t_rad, true);
}

cplx cesaro_average(const std::function<cplx(double)>& fn, double R, double panel) {
    if (!(R > 1)) throw PreconditionError("Cesaro average needs R > 1");
    const int panels = std::max(1, static_cast<int>(std::ceil((R - 1) / panel)));
    return integrate(composite_gauss(panels, 16, 1.0, R), fn) / (R - 1);
}

std::vector<AveragePoint> averaged_recovery(const TransversalSpectrum& sp, double lambda, double k, const VecC& h,
                                            const std::vector<double>& R_list, double alpha, double t) {
    if (R_list.empty()) throw PreconditionError("no cutoff radii given");
    for (std::size_t i = 0; i < R_list.size(); ++i)
        if (!(R_list[i] > 1) || (i > 0 && !(R_list[i] > R_list[i - 1])))
            throw PreconditionError("cutoff radii must be increasing and > 1");
    const RadiatingSetup s = radiating_setup(sp, lambda, k, h);
    const VecC target = std::exp(I * k * t) * transversal_dn(sp, s.mu, h);
    const auto nb = static_cast<Eigen::Index>(sp.grid.boundary_size());

    // Panels of length <= 0.5 between consecutive radii, accumulated.
    std::vector<double> br{1.0};
    for (double R : R_list) {
        const double a = br.back();
        const int p = std::max(1, static_cast<int>(std::ceil((R - a) / 0.5)));
        for (int j = 1; j <= p; ++j) br.push_back(a + (R - a) * j / p);
    }
    const QuadRule q = composite_gauss(br, 16);
    std::vector<VecC> vals(q.size());
    std::vector<double> rad(q.size(), 0.0);
    parallel_for(q.size(), [&](std::size_t m) {
        const CutoffFamily cut{q.x[m], alpha};
        // The radiation condition is checked on one node per panel.
        const bool check = m % 16 == 0;
        const RadiatingResult r = radiating_eval(sp, s, k, cut, t, -1, check);
        vals[m] = r.dn;
        rad[m] = r.radiation_residual;
    });
    std::vector<AveragePoint> out;
    VecC acc = VecC::Zero(nb);
    double worst_rad = 0;
    std::size_t m = 0;
    for (double R : R_list) {
        for (; m < q.size() && q.x[m] < R; ++m) {
            acc += q.w[m] * vals[m];
            worst_rad = std::max(worst_rad, rad[m]);
        }
        AveragePoint p;
        p.R = R;
        p.average = acc / (R - 1);
        p.target = target;
        p.error = (p.average - target).cwiseAbs().maxCoeff();
        p.radiation_residual = worst_rad;
        out.push_back(p);
    }
    return out;
}

}  // namespace beamlab
