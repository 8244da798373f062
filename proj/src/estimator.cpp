#include "ffq/estimator.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <exception>
#include <limits>

#include "ffq/parallel.hpp"
#include "ffq/reference.hpp"

namespace ffq {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Eigen::VectorXd residual(const SubjectData& s, const ThetaMatrix& theta) {
    return s.y - s.psi * (theta.matrix() * s.z);
}

}  // namespace

namespace detail {

double loglik_one(const SubjectData& s, const ThetaMatrix& theta, const NuParams& nu) {
    const CovBundle cov = cov_matrix(s.times, nu);
    const Eigen::VectorXd r = residual(s, theta);
    const Eigen::VectorXd a = cov.solve(r);
    return -0.5 * (s.times.size() * kLog2Pi + cov.log_det() + r.dot(a));
}

void accumulate_one(const SubjectData& s, const NuParams& nu, Eigen::MatrixXd& lhs_lower,
                    Eigen::VectorXd& rhs) {
    const CovBundle cov = cov_matrix(s.times, nu);
    // X^T Sigma^{-1} X = W^T W with W = L^{-1} X
    const Eigen::MatrixXd W = cov.chol.matrixL().solve(s.X);
    const Eigen::VectorXd u = cov.chol.matrixL().solve(s.y);
    lhs_lower.selfadjointView<Eigen::Lower>().rankUpdate(W.transpose());
    rhs.noalias() += W.transpose() * u;
}

void nu_derivs_one(const SubjectData& s, const ThetaMatrix& theta, const NuParams& nu,
                   Eigen::Vector3d& grad, Eigen::Matrix3d& hess) {
    const CovBundle cov = cov_matrix(s.times, nu);
    const CovDerivatives der = cov_derivatives(s.times, nu);
    const Eigen::MatrixXd sinv = cov.inverse();
    const Eigen::VectorXd r = residual(s, theta);
    const Eigen::VectorXd a = cov.solve(r);

    const Eigen::MatrixXd* d1[3] = {&der.d_nu1, &der.d_nu2, &der.d_nu3};
    Eigen::VectorXd Da[3];
    Eigen::MatrixXd M[3];
    for (int j = 0; j < 3; ++j) {
        Da[j] = (*d1[j]) * a;
        M[j] = sinv * (*d1[j]);
        grad[j] += 0.5 * (a.dot(Da[j]) - sinv.cwiseProduct(*d1[j]).sum());
    }

    for (int j = 0; j < 3; ++j) {
        for (int k = j; k < 3; ++k) {
            double h = 0.0;
            const Eigen::MatrixXd* d2 = nullptr;
            if (j == 0 && k == 1) d2 = &der.d2_nu1nu2;
            if (j == 1 && k == 1) d2 = &der.d2_nu2nu2;
            if (d2 != nullptr) {
                h += 0.5 * a.dot((*d2) * a);
                h -= 0.5 * sinv.cwiseProduct(*d2).sum();
            }
            // S^{(jk)} = dSigma_j Sigma^{-1} dSigma_k
            h -= Da[j].dot(cov.solve(Da[k]));
            h += 0.5 * M[j].cwiseProduct(M[k].transpose()).sum();
            hess(j, k) += h;
            if (k != j) hess(k, j) += h;
        }
    }
}

}  // namespace detail

SubjectSet assemble_subjects(const std::vector<FunctionalCurve>& predictor_curves,
                             const LongitudinalDataset& response,
                             const BasisSystem& response_basis,
                             const Eigen::MatrixXd& predictor_gram, int order) {
    response.validate();
    if (predictor_curves.size() != response.subjects.size())
        throw dimension_error("assemble_subjects: predictor/response subject counts differ");

    SubjectSet out(response.subjects.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& rs = response.subjects[i];
        SubjectData s;
        s.times = rs.times;
        s.y = rs.values;
        s.z = build_covariate(predictor_curves[i].coefficients, predictor_gram, order);
        s.psi = response_basis.eval_rows(rs.times);
        s.X = build_design_block(s.z, s.psi);
        out[i] = std::move(s);
    }
    return out;
}

std::size_t total_observations(const SubjectSet& subjects) {
    std::size_t n = 0;
    for (const auto& s : subjects) n += static_cast<std::size_t>(s.y.size());
    return n;
}

NormalEquations accumulate_normal_equations(const SubjectSet& subjects, const NuParams& nu,
                                            Exec exec) {
    if (subjects.empty()) throw validation_error("no subjects");
    if (exec == Exec::serial) return ref::accumulate_normal_equations(subjects, nu);

    const Eigen::Index q = subjects.front().X.cols();
    const auto ranges = parallel::chunk_ranges(subjects.size());
    std::vector<NormalEquations> partial(ranges.size());
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < static_cast<int>(ranges.size()); ++c) {
        try {
            NormalEquations& p = partial[c];
            p.lhs = Eigen::MatrixXd::Zero(q, q);
            p.rhs = Eigen::VectorXd::Zero(q);
            for (std::size_t i = ranges[c].first; i < ranges[c].second; ++i)
                detail::accumulate_one(subjects[i], nu, p.lhs, p.rhs);
        } catch (...) {
#pragma omp critical(ffq_est_err)
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);

    NormalEquations out;
    out.lhs = Eigen::MatrixXd::Zero(q, q);
    out.rhs = Eigen::VectorXd::Zero(q);
    for (const auto& p : partial) {  // fixed chunk order
        out.lhs += p.lhs;
        out.rhs += p.rhs;
    }
    out.lhs = out.lhs.selfadjointView<Eigen::Lower>();
    return out;
}

double log_likelihood(const SubjectSet& subjects, const ThetaMatrix& theta, const NuParams& nu,
                      Exec exec) {
    if (subjects.empty()) throw validation_error("no subjects");
    if (exec == Exec::serial) return ref::log_likelihood(subjects, theta, nu);

    const auto ranges = parallel::chunk_ranges(subjects.size());
    std::vector<double> partial(ranges.size(), 0.0);
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < static_cast<int>(ranges.size()); ++c) {
        try {
            double acc = 0.0;
            for (std::size_t i = ranges[c].first; i < ranges[c].second; ++i)
                acc += detail::loglik_one(subjects[i], theta, nu);
            partial[c] = acc;
        } catch (...) {
#pragma omp critical(ffq_est_err)
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);

    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

double penalized_log_likelihood(const SubjectSet& subjects, const ThetaMatrix& theta,
                                const NuParams& nu, double lambda,
                                const Eigen::MatrixXd& omega, Exec exec) {
    const double ll = log_likelihood(subjects, theta, nu, exec);
    if (lambda == 0.0) return ll;
    const Eigen::VectorXd v = theta.vec();
    return ll - 0.5 * static_cast<double>(subjects.size()) * lambda * v.dot(omega * v);
}

NuDerivatives nu_derivatives(const SubjectSet& subjects, const ThetaMatrix& theta,
                             const NuParams& nu, Exec exec) {
    if (subjects.empty()) throw validation_error("no subjects");
    if (exec == Exec::serial) return ref::nu_derivatives(subjects, theta, nu);

    const auto ranges = parallel::chunk_ranges(subjects.size());
    std::vector<NuDerivatives> partial(ranges.size());
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < static_cast<int>(ranges.size()); ++c) {
        try {
            partial[c].gradient.setZero();
            partial[c].hessian.setZero();
            for (std::size_t i = ranges[c].first; i < ranges[c].second; ++i)
                detail::nu_derivs_one(subjects[i], theta, nu, partial[c].gradient,
                                      partial[c].hessian);
        } catch (...) {
#pragma omp critical(ffq_est_err)
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);

    NuDerivatives out;
    out.gradient.setZero();
    out.hessian.setZero();
    for (const auto& p : partial) {
        out.gradient += p.gradient;
        out.hessian += p.hessian;
    }
    return out;
}

Eigen::Vector3d nu_gradient(const SubjectSet& subjects, const ThetaMatrix& theta,
                            const NuParams& nu, Exec exec) {
    return nu_derivatives(subjects, theta, nu, exec).gradient;
}

Eigen::Matrix3d nu_hessian(const SubjectSet& subjects, const ThetaMatrix& theta,
                           const NuParams& nu, Exec exec) {
    return nu_derivatives(subjects, theta, nu, exec).hessian;
}

namespace {

// Shared solve with pseudo-inverse fallback. Conditioning is judged after
// symmetric diagonal equilibration so that a huge but benign block ridge does
// not masquerade as ill-conditioning, while genuinely singular systems
// (duplicated design columns, lambda = 0 with more parameters than data)
// still fall through to the minimum-norm eigendecomposition solve.
ThetaSolve solve_penalized_system(Eigen::MatrixXd lhs, const Eigen::VectorXd& rhs) {
    ThetaSolve out;
    if (lhs.diagonal().minCoeff() > 0.0) {
        const Eigen::VectorXd s = lhs.diagonal().cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd scaled = s.asDiagonal() * lhs * s.asDiagonal();
        Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
        const Eigen::VectorXd d = ldlt.vectorD();
        const double dmax = d.cwiseAbs().maxCoeff();
        if (ldlt.info() == Eigen::Success && dmax > 0.0 && d.minCoeff() > 1e-14 * dmax) {
            const Eigen::VectorXd x =
                s.asDiagonal() * ldlt.solve(Eigen::VectorXd(s.asDiagonal() * rhs));
            if (x.allFinite()) {
                out.vec_theta = x;
                return out;
            }
        }
    }
    // minimum-norm solution through the eigendecomposition
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lhs);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const double cutoff = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > cutoff) inv[i] = 1.0 / ev[i];
    out.vec_theta = eig.eigenvectors() * inv.asDiagonal() *
                    (eig.eigenvectors().transpose() * rhs);
    out.rank_deficient = true;
    return out;
}

}  // namespace

ThetaSolve update_theta(const SubjectSet& subjects, const NuParams& nu, double lambda,
                        const Eigen::MatrixXd& omega, Exec exec,
                        const Eigen::VectorXd* extra_ridge) {
    NormalEquations ne = accumulate_normal_equations(subjects, nu, exec);
    if (lambda > 0.0) ne.lhs += static_cast<double>(subjects.size()) * lambda * omega;
    if (extra_ridge != nullptr) ne.lhs.diagonal() += *extra_ridge;
    return solve_penalized_system(std::move(ne.lhs), ne.rhs);
}

NuStep newton_nu_step(const Eigen::Vector3d& log_nu, const Eigen::Vector3d& gradient,
                      const Eigen::Matrix3d& hessian,
                      const std::function<double(const Eigen::Vector3d&)>& objective,
                      double current_objective) {
    NuStep out;
    out.log_nu = log_nu;
    out.objective = current_objective;
    if (gradient.norm() == 0.0) {
        out.accepted = true;
        out.used_newton = true;
        return out;
    }

    Eigen::Vector3d dir;
    Eigen::LLT<Eigen::Matrix3d> neg(Eigen::Matrix3d(-hessian));
    if (neg.info() == Eigen::Success) {
        dir = neg.solve(gradient);  // -H^{-1} g
        out.used_newton = true;
    } else {
        const double hnorm = std::max(hessian.norm(), 1e-300);
        dir = gradient / hnorm;
    }

    double s = 1.0;
    for (int h = 0; h <= 30; ++h) {
        const Eigen::Vector3d trial = log_nu + s * dir;
        double obj;
        try {
            obj = objective(trial);
        } catch (const std::exception&) {
            obj = -std::numeric_limits<double>::infinity();
        }
        if (std::isfinite(obj) && obj >= current_objective) {
            out.log_nu = trial;
            out.objective = obj;
            out.accepted = true;
            out.halvings = h;
            return out;
        }
        s *= 0.5;
    }
    out.halvings = 30;
    return out;  // step failure
}

namespace {

Eigen::VectorXd make_quad_ridge(const QuadraticModelSpec& spec, double value) {
    const int q = spec.P() * spec.M_y;
    Eigen::VectorXd ridge = Eigen::VectorXd::Zero(q);
    if (value <= 0.0 || spec.order < 2) return ridge;
    for (int j = 1 + spec.M_x; j < spec.P(); ++j)
        ridge.segment(static_cast<Eigen::Index>(j) * spec.M_y, spec.M_y).array() = value;
    return ridge;
}

NuParams default_nu_init(const SubjectSet& subjects, const Eigen::VectorXd& vec_theta,
                         int M_y, int M_x, int order) {
    const ThetaMatrix theta = ThetaMatrix::from_vec(vec_theta, M_y, M_x, order);
    double ss = 0.0;
    std::size_t count = 0;
    double tmin = std::numeric_limits<double>::infinity();
    double tmax = -std::numeric_limits<double>::infinity();
    for (const auto& s : subjects) {
        ss += residual(s, theta).squaredNorm();
        count += static_cast<std::size_t>(s.y.size());
        tmin = std::min(tmin, s.times.minCoeff());
        tmax = std::max(tmax, s.times.maxCoeff());
    }
    const double var = std::max(ss / static_cast<double>(count), 1e-8);
    const double range = std::max(tmax - tmin, 1e-8);
    return NuParams{0.5 * var, 1.0 / (range * range), 0.5 * var};
}

}  // namespace

FittedModel fit(const SubjectSet& subjects, const QuadraticModelSpec& spec,
                const BasisSystem& predictor_basis, const BasisSystem& response_basis,
                const Eigen::MatrixXd& predictor_gram, const FitControls& controls) {
    spec.validate();
    if (subjects.empty()) throw validation_error("fit: no subjects");
    const int q = spec.P() * spec.M_y;
    if (subjects.front().X.cols() != q)
        throw dimension_error("fit: subject design does not match the model spec");

    const Eigen::MatrixXd omega = build_penalty(spec);
    const Eigen::VectorXd quad_ridge = make_quad_ridge(spec, controls.quad_block_ridge);
    const Eigen::VectorXd* ridge_ptr =
        controls.quad_block_ridge > 0.0 ? &quad_ridge : nullptr;
    const Exec exec = controls.exec;

    FitDiagnostics diag;

    // OLS start (Sigma = I): gives scale-aware residuals for nu_init.
    NuParams nu;
    {
        Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(q, q);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(q);
        for (const auto& s : subjects) {
            lhs.selfadjointView<Eigen::Lower>().rankUpdate(s.X.transpose());
            rhs.noalias() += s.X.transpose() * s.y;
        }
        lhs = lhs.selfadjointView<Eigen::Lower>();
        if (spec.lambda > 0.0) lhs += static_cast<double>(subjects.size()) * spec.lambda * omega;
        if (ridge_ptr != nullptr) lhs.diagonal() += *ridge_ptr;
        ThetaSolve ols = solve_penalized_system(std::move(lhs), rhs);
        nu = controls.nu_init.value_or(
            default_nu_init(subjects, ols.vec_theta, spec.M_y, spec.M_x, spec.order));
    }
    nu.validate();

    ThetaSolve ts = update_theta(subjects, nu, spec.lambda, omega, exec, ridge_ptr);
    diag.rank_deficient = ts.rank_deficient;
    ThetaMatrix theta = ThetaMatrix::from_vec(ts.vec_theta, spec.M_y, spec.M_x, spec.order);

    double obj = penalized_log_likelihood(subjects, theta, nu, spec.lambda, omega, exec);
    diag.objective_trace.push_back(obj);

    Eigen::Vector3d rho = nu.log_vector();
    const auto objective_at = [&](const Eigen::Vector3d& trial_rho) {
        return penalized_log_likelihood(subjects, theta, NuParams::from_log(trial_rho),
                                        spec.lambda, omega, exec);
    };

    for (int iter = 1; iter <= controls.max_outer; ++iter) {
        diag.iterations = iter;
        const double prev_obj = obj;
        const Eigen::Vector3d prev_nu = nu.as_vector();

        // nu step at the current theta (theta is already the maximizer given nu)
        const NuDerivatives d = nu_derivatives(subjects, theta, nu, exec);
        Eigen::Vector3d g_log;
        Eigen::Matrix3d h_log;
        const Eigen::Vector3d nv = nu.as_vector();
        for (int j = 0; j < 3; ++j) {
            g_log[j] = nv[j] * d.gradient[j];
            for (int k = 0; k < 3; ++k) h_log(j, k) = nv[j] * nv[k] * d.hessian(j, k);
            h_log(j, j) += nv[j] * d.gradient[j];
        }
        const NuStep step = newton_nu_step(rho, g_log, h_log, objective_at, obj);
        if (step.accepted) {
            rho = step.log_nu;
            nu = NuParams::from_log(rho);
            obj = step.objective;
        }

        // theta update at the new nu
        ts = update_theta(subjects, nu, spec.lambda, omega, exec, ridge_ptr);
        diag.rank_deficient = diag.rank_deficient || ts.rank_deficient;
        theta = ThetaMatrix::from_vec(ts.vec_theta, spec.M_y, spec.M_x, spec.order);
        obj = penalized_log_likelihood(subjects, theta, nu, spec.lambda, omega, exec);
        diag.objective_trace.push_back(obj);

        const double rel = std::abs(obj - prev_obj) / (1.0 + std::abs(prev_obj));
        const double dnu = (nu.as_vector() - prev_nu).norm() / std::max(prev_nu.norm(), 1e-300);
        if (rel < controls.tol && dnu < std::sqrt(controls.tol)) {
            diag.converged = true;
            break;
        }
        if (!step.accepted) {
            diag.nu_step_failure = true;
            break;
        }
    }

    diag.penalized_loglik = obj;

    FittedModel model{std::move(theta), nu,  spec, predictor_basis, response_basis,
                      predictor_gram,   diag};
    return model;
}

Eigen::VectorXd predict(const FittedModel& model, const Eigen::VectorXd& w_new,
                        const Eigen::VectorXd& times) {
    if (w_new.size() != model.spec.M_x)
        throw dimension_error("predict: coefficient vector does not match the predictor basis");
    const Eigen::VectorXd z = build_covariate(w_new, model.predictor_gram, model.spec.order);
    const Eigen::MatrixXd psi = model.response_basis.eval_rows(times);
    return psi * (model.theta.matrix() * z);
}

Eigen::VectorXd predict(const FittedModel& model, const FunctionalCurve& curve,
                        const Eigen::VectorXd& times) {
    return predict(model, curve.coefficients, times);
}

}  // namespace ffq
