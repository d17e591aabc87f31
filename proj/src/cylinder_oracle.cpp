#include <cmath>

#include "beamlab/cylinder.hpp"
#include "beamlab/errors.hpp"

namespace beamlab {

TruncatedCylinder::TruncatedCylinder(const Expression& q0, double lambda, int nx, double T) : nx_(nx) {
    if (nx < 4) throw ConfigError("truncated cylinder needs nx >= 4");
    dx_ = M_PI / (nx + 1);
    const int half = static_cast<int>(std::ceil(T / dx_));
    nt_ = 2 * half - 1;  // interior t nodes; t = 0 is node half - 1
    const int n = nx_ * nt_;
    std::vector<Eigen::Triplet<cplx>> tr;
    tr.reserve(static_cast<std::size_t>(n) * 5);
    const double c = 1 / (dx_ * dx_);
    for (int j = 0; j < nt_; ++j)
        for (int i = 0; i < nx_; ++i) {
            const int p = j * nx_ + i;
            tr.emplace_back(p, p, 4 * c + q0((i + 1) * dx_) - lambda);
            if (i > 0) tr.emplace_back(p, p - 1, -c);
            if (i + 1 < nx_) tr.emplace_back(p, p + 1, -c);
            if (j > 0) tr.emplace_back(p, p - nx_, -c);
            if (j + 1 < nt_) tr.emplace_back(p, p + nx_, -c);
        }
    Eigen::SparseMatrix<cplx> A(n, n);
    A.setFromTriplets(tr.begin(), tr.end());
    A.makeCompressed();
    lu_.compute(A);
    if (lu_.info() != Eigen::Success) throw NumericalError("truncated cylinder factorization failed");
}

VecC TruncatedCylinder::dn(double k, const VecC& h) const {
    if (h.size() != 2) throw PreconditionError("truncated cylinder oracle takes two boundary values");
    const int n = nx_ * nt_, half = (nt_ + 1) / 2;
    const double c = 1 / (dx_ * dx_);
    VecC rhs = VecC::Zero(n);
    for (int j = 0; j < nt_; ++j) {
        const cplx e = std::exp(cplx(0, k * (j + 1 - half) * dx_));
        rhs[j * nx_] += c * e * h[0];
        rhs[j * nx_ + nx_ - 1] += c * e * h[1];
    }
    const VecC u = lu_.solve(rhs);
    const int j0 = (half - 1) * nx_;
    VecC out(2);
    out[0] = (3.0 * h[0] - 4.0 * u[j0] + u[j0 + 1]) / (2 * dx_);
    out[1] = (3.0 * h[1] - 4.0 * u[j0 + nx_ - 1] + u[j0 + nx_ - 2]) / (2 * dx_);
    return out;
}

std::vector<OracleValue> truncated_cylinder_dn(const Expression& q0, double lambda,
                                               const std::vector<std::pair<double, VecC>>& cases, int nx, double T) {
    const TruncatedCylinder coarse(q0, lambda, nx, T);
    std::vector<VecC> vc;
    for (const auto& [k, h] : cases) vc.push_back(coarse.dn(k, h));
    const TruncatedCylinder fine(q0, lambda, 2 * nx + 1, T);
    std::vector<OracleValue> out;
    for (std::size_t m = 0; m < cases.size(); ++m) {
        const VecC vf = fine.dn(cases[m].first, cases[m].second);
        out.push_back({(4.0 * vf - vc[m]) / 3.0, (vf - vc[m]).cwiseAbs().maxCoeff()});
    }
    return out;
}

}  // namespace beamlab
