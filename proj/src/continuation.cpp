#include <cmath>
#include <limits>

#include "beamlab/cylinder.hpp"
#include "beamlab/errors.hpp"

namespace beamlab {

namespace {

MatC sample_matrix(const std::vector<DnSample>& samples) {
    const auto rows = static_cast<Eigen::Index>(samples.size());
    const Eigen::Index entries = samples.front().matrix.size();
    MatC Y(rows, entries);
    for (Eigen::Index s = 0; s < rows; ++s) {
        const MatC& m = samples[static_cast<std::size_t>(s)].matrix;
        if (m.size() != entries) throw PreconditionError("DN samples differ in size");
        Y.row(s) = Eigen::Map<const Eigen::RowVectorXcd>(m.data(), entries);
    }
    return Y;
}

MatC design(const std::vector<DnSample>& samples, const std::vector<double>& poles) {
    const auto P = static_cast<Eigen::Index>(poles.size());
    MatC A(static_cast<Eigen::Index>(samples.size()), P + 2);
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const cplx mu = samples[s].mu;
        const auto r = static_cast<Eigen::Index>(s);
        for (Eigen::Index l = 0; l < P; ++l) {
            if (std::abs(mu - poles[static_cast<std::size_t>(l)]) < 1e-12)
                throw PoleError("sample coincides with a prescribed pole", poles[static_cast<std::size_t>(l)]);
            A(r, l) = 1.0 / (mu - poles[static_cast<std::size_t>(l)]);
        }
        A(r, P) = 1.0;
        A(r, P + 1) = mu;
    }
    return A;
}

// Least squares with unit-norm columns; returns unscaled coefficients.
MatC solve_scaled(const MatC& A, const MatC& Y) {
    Eigen::VectorXd scale = A.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < scale.size(); ++j)
        if (scale[j] == 0) scale[j] = 1;
    const MatC As = A * scale.cwiseInverse().asDiagonal();
    Eigen::CompleteOrthogonalDecomposition<MatC> cod(As);
    return scale.cwiseInverse().asDiagonal() * cod.solve(Y);
}

double relative_residual(const MatC& A, const MatC& X, const MatC& Y) {
    double worst = 0;
    for (Eigen::Index j = 0; j < Y.cols(); ++j) {
        const double r = (A * X.col(j) - Y.col(j)).norm(), s = Y.col(j).norm();
        worst = std::max(worst, s > 0 ? r / s : r);
    }
    return worst;
}

}  // namespace

MatC ContinuationFit::evaluate(cplx mu) const {
    MatC v = c0 + mu * c1;
    for (std::size_t l = 0; l < poles.size(); ++l) v += residue(static_cast<int>(l)) / (mu - poles[l]);
    return v;
}

MatC ContinuationFit::residue(int pole) const {
    const Eigen::Index n = c0.rows();
    MatC r(n, n);
    Eigen::Map<Eigen::RowVectorXcd>(r.data(), n * n) = residues.row(pole);
    return r;
}

ContinuationFit meromorphic_fit(const std::vector<DnSample>& samples, const std::vector<double>& poles, double tol) {
    if (samples.empty()) throw PreconditionError("no DN samples");
    if (samples.size() < poles.size() + 2)
        throw PreconditionError("model order: " + std::to_string(poles.size()) + " poles need at least " +
                                std::to_string(poles.size() + 2) + " samples");
    const MatC Y = sample_matrix(samples), A = design(samples, poles);
    const MatC X = solve_scaled(A, Y);
    const auto P = static_cast<Eigen::Index>(poles.size());
    const Eigen::Index n = samples.front().matrix.rows();
    ContinuationFit f;
    f.poles = poles;
    f.residues = X.topRows(P);
    f.c0.resize(n, n);
    f.c1.resize(n, n);
    Eigen::Map<Eigen::RowVectorXcd>(f.c0.data(), n * n) = X.row(P);
    Eigen::Map<Eigen::RowVectorXcd>(f.c1.data(), n * n) = X.row(P + 1);
    f.fit_residual = relative_residual(A, X, Y);
    if (!(f.fit_residual <= tol))
        throw NumericalError("model order: relative fit residual " + std::to_string(f.fit_residual) + " exceeds " +
                             std::to_string(tol) + "; raise the pole count or sample more points");
    return f;
}

DnSample meromorphic_continuation(const std::vector<DnSample>& samples, const std::vector<double>& poles, cplx target,
                                  double tol) {
    const ContinuationFit f = meromorphic_fit(samples, poles, tol);
    for (double p : poles)
        if (std::abs(target - p) < 1e-6 * (1 + std::abs(target)))
            throw PoleError("continuation target sits on a pole", p);
    return {target, f.evaluate(target)};
}

ContinuationFit blind_fit(const std::vector<DnSample>& samples, std::vector<double> seeds, int iterations) {
    if (samples.size() < 2 * seeds.size() + 2) throw PreconditionError("blind fit needs 2 P + 2 samples");
    const MatC Y = sample_matrix(samples);
    auto residual = [&](const std::vector<double>& p) {
        const MatC A = design(samples, p);
        const MatC R = A * solve_scaled(A, Y) - Y;
        Eigen::VectorXd r(2 * R.size());
        for (Eigen::Index i = 0; i < R.size(); ++i) {
            r[2 * i] = R.data()[i].real();
            r[2 * i + 1] = R.data()[i].imag();
        }
        return r;
    };
    const auto P = static_cast<Eigen::Index>(seeds.size());
    double nu = 1e-3;
    Eigen::VectorXd r = residual(seeds);
    for (int it = 0; it < iterations; ++it) {
        Eigen::MatrixXd J(r.size(), P);
        for (Eigen::Index l = 0; l < P; ++l) {
            std::vector<double> q = seeds;
            const double e = 1e-7 * std::max(1.0, std::fabs(q[static_cast<std::size_t>(l)]));
            q[static_cast<std::size_t>(l)] += e;
            J.col(l) = (residual(q) - r) / e;
        }
        const Eigen::MatrixXd N = J.transpose() * J;
        bool improved = false;
        for (int tries = 0; tries < 10 && !improved; ++tries) {
            Eigen::MatrixXd Nd = N;
            Nd.diagonal() *= 1 + nu;
            const Eigen::VectorXd d = Nd.ldlt().solve(-J.transpose() * r);
            std::vector<double> q = seeds;
            for (Eigen::Index l = 0; l < P; ++l) q[static_cast<std::size_t>(l)] += d[l];
            Eigen::VectorXd rq;
            try {
                rq = residual(q);
            } catch (const PoleError&) {
                nu *= 10;
                continue;
            }
            if (rq.norm() < r.norm()) {
                seeds = q;
                r = rq;
                nu = std::max(1e-12, nu / 10);
                improved = true;
            } else {
                nu *= 10;
            }
        }
        if (!improved) break;
    }
    return meromorphic_fit(samples, seeds, std::numeric_limits<double>::infinity());
}

}  // namespace beamlab
