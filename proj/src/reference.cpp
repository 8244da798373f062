#include "ffq/reference.hpp"

#include <Eigen/Dense>

namespace ffq::ref {

NormalEquations accumulate_normal_equations(const SubjectSet& subjects, const NuParams& nu) {
    if (subjects.empty()) throw validation_error("no subjects");
    const Eigen::Index q = subjects.front().X.cols();
    NormalEquations out;
    out.lhs = Eigen::MatrixXd::Zero(q, q);
    out.rhs = Eigen::VectorXd::Zero(q);
    for (const auto& s : subjects) detail::accumulate_one(s, nu, out.lhs, out.rhs);
    out.lhs = out.lhs.selfadjointView<Eigen::Lower>();
    return out;
}

double log_likelihood(const SubjectSet& subjects, const ThetaMatrix& theta, const NuParams& nu) {
    if (subjects.empty()) throw validation_error("no subjects");
    double total = 0.0;
    for (const auto& s : subjects) total += detail::loglik_one(s, theta, nu);
    return total;
}

NuDerivatives nu_derivatives(const SubjectSet& subjects, const ThetaMatrix& theta,
                             const NuParams& nu) {
    if (subjects.empty()) throw validation_error("no subjects");
    NuDerivatives out;
    out.gradient.setZero();
    out.hessian.setZero();
    for (const auto& s : subjects) detail::nu_derivs_one(s, theta, nu, out.gradient, out.hessian);
    return out;
}

}  // namespace ffq::ref
