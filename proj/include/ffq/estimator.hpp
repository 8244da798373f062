#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <vector>

#include "ffq/design.hpp"
#include "ffq/gpcov.hpp"
#include "ffq/smoothing.hpp"

namespace ffq {

// Per-subject design quantities of the reduced parametric model
// y_i = Psi_i Theta z_i + eps_i = X_i vec(Theta) + eps_i.
struct SubjectData {
    Eigen::VectorXd times;  // response observation times (n_i)
    Eigen::VectorXd y;      // observed response values (n_i)
    Eigen::VectorXd z;      // covariate features (P)
    Eigen::MatrixXd psi;    // response basis rows (n_i x M_y)
    Eigen::MatrixXd X;      // z^T (x) psi (n_i x P M_y)
};

using SubjectSet = std::vector<SubjectData>;

// Pairs predictor curves with response subjects by index.
SubjectSet assemble_subjects(const std::vector<FunctionalCurve>& predictor_curves,
                             const LongitudinalDataset& response,
                             const BasisSystem& response_basis,
                             const Eigen::MatrixXd& predictor_gram, int order);

std::size_t total_observations(const SubjectSet& subjects);

// Kernel execution policy: `parallel` runs the OpenMP chunked kernels,
// `serial` the plain reference loops (ffq::ref). Both produce the same
// values up to floating-point reduction order.
enum class Exec { serial, parallel };

// sum_i X_i^T Sigma_i^{-1} X_i (lower triangle filled, symmetric on return)
// and sum_i X_i^T Sigma_i^{-1} y_i.
struct NormalEquations {
    Eigen::MatrixXd lhs;
    Eigen::VectorXd rhs;
};

NormalEquations accumulate_normal_equations(const SubjectSet& subjects, const NuParams& nu,
                                            Exec exec = Exec::parallel);

double log_likelihood(const SubjectSet& subjects, const ThetaMatrix& theta, const NuParams& nu,
                      Exec exec = Exec::parallel);

// l - (n lambda / 2) vec(Theta)^T Omega vec(Theta)
double penalized_log_likelihood(const SubjectSet& subjects, const ThetaMatrix& theta,
                                const NuParams& nu, double lambda,
                                const Eigen::MatrixXd& omega, Exec exec = Exec::parallel);

// Gradient and Hessian of the penalized log-likelihood in nu (the penalty is
// nu-free). Gradient entries are (1/2) sum_i tr{(a_i a_i^T - Sigma_i^{-1})
// dSigma_i/dnu_j} with a_i = Sigma_i^{-1}(y_i - X_i vec Theta).
struct NuDerivatives {
    Eigen::Vector3d gradient;
    Eigen::Matrix3d hessian;
};

NuDerivatives nu_derivatives(const SubjectSet& subjects, const ThetaMatrix& theta,
                             const NuParams& nu, Exec exec = Exec::parallel);

Eigen::Vector3d nu_gradient(const SubjectSet& subjects, const ThetaMatrix& theta,
                            const NuParams& nu, Exec exec = Exec::parallel);
Eigen::Matrix3d nu_hessian(const SubjectSet& subjects, const ThetaMatrix& theta,
                           const NuParams& nu, Exec exec = Exec::parallel);

// Closed-form Theta given nu: solves
//   {sum_i X_i^T Sigma_i^{-1} X_i + n lambda Omega} vec(Theta) = sum_i X_i^T Sigma_i^{-1} y_i
// by LDLT, falling back to the eigendecomposition pseudo-inverse (cutoff
// 1e-10 relative) when the system is numerically singular; the fallback is
// reported, not an error. extra_ridge, when given, is added to the diagonal.
struct ThetaSolve {
    Eigen::VectorXd vec_theta;
    bool rank_deficient = false;
};

ThetaSolve update_theta(const SubjectSet& subjects, const NuParams& nu, double lambda,
                        const Eigen::MatrixXd& omega, Exec exec = Exec::parallel,
                        const Eigen::VectorXd* extra_ridge = nullptr);

// One damped Newton step in log-nu coordinates: tries the Newton direction
// when the Hessian is negative definite, otherwise steepest ascent scaled by
// 1/||H||, then halves the step until the objective does not decrease
// (at most 30 halvings).
struct NuStep {
    Eigen::Vector3d log_nu;
    double objective = 0.0;
    bool accepted = false;
    int halvings = 0;
    bool used_newton = false;
};

NuStep newton_nu_step(const Eigen::Vector3d& log_nu, const Eigen::Vector3d& gradient,
                      const Eigen::Matrix3d& hessian,
                      const std::function<double(const Eigen::Vector3d&)>& objective,
                      double current_objective);

struct FitControls {
    int max_outer = 200;
    double tol = 1e-6;
    std::optional<NuParams> nu_init;
    Exec exec = Exec::parallel;
    // Extra ridge applied to the interaction-block coordinates only; used to
    // shrink the interaction term toward the linear model.
    double quad_block_ridge = 0.0;
};

struct FitDiagnostics {
    int iterations = 0;
    double penalized_loglik = 0.0;
    bool converged = false;
    bool rank_deficient = false;
    bool nu_step_failure = false;
    std::vector<double> objective_trace;  // non-decreasing per accepted iteration
};

struct FittedModel {
    ThetaMatrix theta;
    NuParams nu;
    QuadraticModelSpec spec;
    BasisSystem predictor_basis;
    BasisSystem response_basis;
    Eigen::MatrixXd predictor_gram;
    FitDiagnostics diagnostics;
};

// Alternates the closed-form Theta update with one damped Newton nu step per
// outer iteration until the relative objective change drops below tol.
FittedModel fit(const SubjectSet& subjects, const QuadraticModelSpec& spec,
                const BasisSystem& predictor_basis, const BasisSystem& response_basis,
                const Eigen::MatrixXd& predictor_gram, const FitControls& controls = {});

// Psi(times) Theta z(w_new); times must lie in the response basis domain.
Eigen::VectorXd predict(const FittedModel& model, const Eigen::VectorXd& w_new,
                        const Eigen::VectorXd& times);
Eigen::VectorXd predict(const FittedModel& model, const FunctionalCurve& curve,
                        const Eigen::VectorXd& times);

namespace detail {

// Single-subject contributions shared by the OpenMP kernels and the serial
// reference loops.
double loglik_one(const SubjectData& s, const ThetaMatrix& theta, const NuParams& nu);
void accumulate_one(const SubjectData& s, const NuParams& nu, Eigen::MatrixXd& lhs_lower,
                    Eigen::VectorXd& rhs);
void nu_derivs_one(const SubjectData& s, const ThetaMatrix& theta, const NuParams& nu,
                   Eigen::Vector3d& grad, Eigen::Matrix3d& hess);

}  // namespace detail

}  // namespace ffq
