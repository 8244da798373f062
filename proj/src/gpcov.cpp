#include "ffq/gpcov.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace ffq {

void NuParams::validate() const {
    if (!(nu1 > 0.0) || !(nu2 > 0.0) || !(nu3 > 0.0) || !std::isfinite(nu1) ||
        !std::isfinite(nu2) || !std::isfinite(nu3))
        throw validation_error("nu parameters must be strictly positive and finite");
}

Eigen::Vector3d NuParams::log_vector() const {
    validate();
    return {std::log(nu1), std::log(nu2), std::log(nu3)};
}

NuParams NuParams::from_log(const Eigen::Vector3d& rho) {
    return NuParams{std::exp(rho[0]), std::exp(rho[1]), std::exp(rho[2])};
}

NuParams NuParams::from_vector(const Eigen::Vector3d& v) { return NuParams{v[0], v[1], v[2]}; }

double gp_kernel(double t, double tp, const NuParams& nu) {
    nu.validate();
    const double dt = t - tp;
    return nu.nu1 * std::exp(-0.5 * nu.nu2 * dt * dt);
}

double CovBundle::log_det() const {
    return 2.0 * chol.matrixLLT().diagonal().array().log().sum();
}

Eigen::MatrixXd CovBundle::inverse() const {
    return chol.solve(Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
}

CovBundle cov_matrix(const Eigen::VectorXd& times, const NuParams& nu, bool squared_noise) {
    nu.validate();
    if (!times.allFinite()) throw validation_error("cov_matrix: non-finite times");
    const Eigen::Index n = times.size();
    const double noise_var = squared_noise ? nu.nu3 * nu.nu3 : nu.nu3;

    CovBundle b;
    b.sigma.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double dt = times[i] - times[j];
            const double k = nu.nu1 * std::exp(-0.5 * nu.nu2 * dt * dt);
            b.sigma(i, j) = k;
            b.sigma(j, i) = k;
        }
        b.sigma(i, i) += noise_var;
    }

    b.chol.compute(b.sigma);
    if (b.chol.info() != Eigen::Success) {
        // one jitter retry, then give up with the eigenvalue estimate
        const double jitter = 1e-10 * b.sigma.diagonal().mean();
        b.sigma.diagonal().array() += jitter;
        b.chol.compute(b.sigma);
        if (b.chol.info() != Eigen::Success) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b.sigma, Eigen::EigenvaluesOnly);
            throw ill_conditioned_error("cov_matrix: covariance not positive definite",
                                        eig.eigenvalues().minCoeff());
        }
    }
    return b;
}

CovDerivatives cov_derivatives(const Eigen::VectorXd& times, const NuParams& nu) {
    nu.validate();
    const Eigen::Index n = times.size();
    CovDerivatives d;
    d.d_nu1.resize(n, n);
    d.d_nu2.resize(n, n);
    d.d_nu3 = Eigen::MatrixXd::Identity(n, n);
    d.d2_nu1nu2.resize(n, n);
    d.d2_nu2nu2.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double dt2 = (times[i] - times[j]) * (times[i] - times[j]);
            const double e = std::exp(-0.5 * nu.nu2 * dt2);
            d.d_nu1(i, j) = d.d_nu1(j, i) = e;
            d.d_nu2(i, j) = d.d_nu2(j, i) = -0.5 * nu.nu1 * dt2 * e;
            d.d2_nu1nu2(i, j) = d.d2_nu1nu2(j, i) = -0.5 * dt2 * e;
            d.d2_nu2nu2(i, j) = d.d2_nu2nu2(j, i) = 0.25 * nu.nu1 * dt2 * dt2 * e;
        }
    }
    return d;
}

}  // namespace ffq
