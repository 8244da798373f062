#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ffq/errors.hpp"

namespace ffq {

// Gaussian-process kernel parameters: variance, inverse squared length
// scale, and observation-noise variance. All strictly positive.
struct NuParams {
    double nu1 = 1.0;
    double nu2 = 1.0;
    double nu3 = 1.0;

    void validate() const;
    Eigen::Vector3d as_vector() const { return {nu1, nu2, nu3}; }
    Eigen::Vector3d log_vector() const;
    static NuParams from_log(const Eigen::Vector3d& rho);
    static NuParams from_vector(const Eigen::Vector3d& v);
};

// k(t, t') = nu1 exp{-nu2 (t - t')^2 / 2}
double gp_kernel(double t, double tp, const NuParams& nu);

// Per-subject covariance Sigma = K + nu3 I with nu3 the noise variance, and
// its cached Cholesky factor. The squared_noise toggle instead uses
// Sigma = K + nu3^2 I for comparison runs; derivatives are only provided for
// the default (variance) form.
struct CovBundle {
    Eigen::MatrixXd sigma;
    Eigen::LLT<Eigen::MatrixXd> chol;

    double log_det() const;
    Eigen::MatrixXd inverse() const;
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return chol.solve(rhs); }
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return chol.solve(rhs); }
};

// Throws ill_conditioned_error (with a min-eigenvalue estimate) if the
// Cholesky factorization fails even after one jitter retry.
CovBundle cov_matrix(const Eigen::VectorXd& times, const NuParams& nu,
                     bool squared_noise = false);

// The nonzero derivatives of Sigma with respect to nu; every other second
// derivative is identically zero.
struct CovDerivatives {
    Eigen::MatrixXd d_nu1;      // exp term
    Eigen::MatrixXd d_nu2;      // -(nu1/2) dt^2 exp term
    Eigen::MatrixXd d_nu3;      // identity
    Eigen::MatrixXd d2_nu1nu2;  // -(1/2) dt^2 exp term
    Eigen::MatrixXd d2_nu2nu2;  // +(nu1/4) dt^4 exp term
};

CovDerivatives cov_derivatives(const Eigen::VectorXd& times, const NuParams& nu);

}  // namespace ffq
