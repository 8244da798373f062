#include "ffq/selection.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>

namespace ffq {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kLog2Pi = 1.8378770664093453;

struct SolvedSystem {
    Eigen::MatrixXd G;    // sum X^T Sigma^{-1} X
    Eigen::MatrixXd A;    // G + n lambda Omega
    Eigen::MatrixXd omega;
    double df = 0.0;
    bool rank_deficient = false;
};

SolvedSystem solve_df(const SubjectSet& subjects, const FittedModel& model, Exec exec) {
    SolvedSystem s;
    NormalEquations ne = accumulate_normal_equations(subjects, model.nu, exec);
    s.G = std::move(ne.lhs);
    s.omega = build_penalty(model.spec);
    s.A = s.G;
    if (model.spec.lambda > 0.0)
        s.A += static_cast<double>(subjects.size()) * model.spec.lambda * s.omega;

    // conditioning judged after symmetric equilibration, as in update_theta
    if (s.A.diagonal().minCoeff() > 0.0) {
        const Eigen::VectorXd sc = s.A.diagonal().cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd scaled = sc.asDiagonal() * s.A * sc.asDiagonal();
        Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
        const Eigen::VectorXd d = ldlt.vectorD();
        const double dmax = d.cwiseAbs().maxCoeff();
        if (ldlt.info() == Eigen::Success && dmax > 0.0 && d.minCoeff() > 1e-14 * dmax) {
            const Eigen::MatrixXd x =
                sc.asDiagonal() *
                ldlt.solve(Eigen::MatrixXd(sc.asDiagonal() * s.G));
            if (x.allFinite()) {
                s.df = x.trace();
                return s;
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.A);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const double cutoff = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > cutoff) inv[i] = 1.0 / ev[i];
    s.df = (eig.eigenvectors() * inv.asDiagonal() * (eig.eigenvectors().transpose() * s.G))
               .trace();
    s.rank_deficient = true;
    return s;
}

}  // namespace

std::string to_string(Criterion c) {
    switch (c) {
        case Criterion::GCV: return "GCV";
        case Criterion::mAIC: return "mAIC";
        case Criterion::GIC: return "GIC";
        case Criterion::GBIC: return "GBIC";
    }
    return "?";
}

Criterion criterion_from_string(const std::string& s) {
    if (s == "GCV" || s == "gcv") return Criterion::GCV;
    if (s == "mAIC" || s == "maic" || s == "mAic") return Criterion::mAIC;
    if (s == "GIC" || s == "gic") return Criterion::GIC;
    if (s == "GBIC" || s == "gbic") return Criterion::GBIC;
    throw validation_error("unknown criterion '" + s + "'");
}

OmegaInfo omega_info(const Eigen::MatrixXd& omega) {
    OmegaInfo info;
    info.eta = static_cast<int>(omega.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const double cutoff = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] > cutoff) {
            ++info.zeta;
            info.logdet_plus += std::log(ev[i]);
        }
    }
    return info;
}

double effective_df(const SubjectSet& subjects, const FittedModel& model, Exec exec) {
    return solve_df(subjects, model, exec).df;
}

RQMatrices build_rq(const SubjectSet& subjects, const FittedModel& model,
                    QConvention convention, Exec exec) {
    const int n = static_cast<int>(subjects.size());
    const Eigen::Index q = subjects.front().X.cols();
    const double lambda = model.spec.lambda;

    const SolvedSystem sys = solve_df(subjects, model, exec);
    const Eigen::VectorXd vtheta = model.theta.vec();
    const Eigen::VectorXd omega_vtheta = sys.omega * vtheta;

    RQMatrices rq;
    rq.R = Eigen::MatrixXd::Zero(q + 3, q + 3);
    rq.Q = Eigen::MatrixXd::Zero(q + 3, q + 3);
    rq.R.topLeftCorner(q, q) = sys.A / n;

    Eigen::MatrixXd r_theta_nu = Eigen::MatrixXd::Zero(q, 3);
    Eigen::Vector3d grad_nu = Eigen::Vector3d::Zero();
    Eigen::Matrix3d hess_nu = Eigen::Matrix3d::Zero();

    Eigen::VectorXd score_theta_total = Eigen::VectorXd::Zero(q);
    Eigen::Vector3d score_nu_total = Eigen::Vector3d::Zero();

    for (const auto& s : subjects) {
        const CovBundle cov = cov_matrix(s.times, model.nu);
        const CovDerivatives der = cov_derivatives(s.times, model.nu);
        const Eigen::MatrixXd sinv = cov.inverse();
        const Eigen::VectorXd r = s.y - s.psi * (model.theta.matrix() * s.z);
        const Eigen::VectorXd a = cov.solve(r);

        detail::nu_derivs_one(s, model.theta, model.nu, grad_nu, hess_nu);

        const Eigen::MatrixXd* d1[3] = {&der.d_nu1, &der.d_nu2, &der.d_nu3};
        Eigen::Vector3d s_nu;
        for (int j = 0; j < 3; ++j) {
            const Eigen::VectorXd Da = (*d1[j]) * a;
            s_nu[j] = 0.5 * (a.dot(Da) - sinv.cwiseProduct(*d1[j]).sum());
            // -d2 l / dTheta dnu_j = X^T Sigma^{-1} dSigma_j a
            r_theta_nu.col(j).noalias() += s.X.transpose() * cov.solve(Da);
        }

        const Eigen::VectorXd score_theta = s.X.transpose() * a;
        score_theta_total += score_theta;
        score_nu_total += s_nu;

        if (convention == QConvention::per_subject) {
            Eigen::VectorXd g_pen(q + 3), g_unp(q + 3);
            g_pen.head(q) = score_theta - lambda * omega_vtheta;
            g_pen.tail(3) = s_nu;
            g_unp.head(q) = score_theta;
            g_unp.tail(3) = s_nu;
            rq.Q.noalias() += g_pen * g_unp.transpose();
        }
    }

    rq.R.topRightCorner(q, 3) = r_theta_nu / n;
    rq.R.bottomLeftCorner(3, q) = r_theta_nu.transpose() / n;
    rq.R.bottomRightCorner(3, 3) = -hess_nu / n;

    if (convention == QConvention::per_subject) {
        rq.Q /= n;
    } else {
        Eigen::VectorXd g_pen(q + 3), g_unp(q + 3);
        g_pen.head(q) = score_theta_total - n * lambda * omega_vtheta;
        g_pen.tail(3) = score_nu_total;
        g_unp.head(q) = score_theta_total;
        g_unp.tail(3) = score_nu_total;
        rq.Q = (g_pen * g_unp.transpose()) / n;
    }
    return rq;
}

double gic_penalty(const RQMatrices& rq) {
    Eigen::MatrixXd R = rq.R;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(R);
    Eigen::VectorXd d = ldlt.vectorD();
    double dmax = d.cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !(dmax > 0.0) || d.cwiseAbs().minCoeff() <= 1e-12 * dmax) {
        R.diagonal().array() += 1e-10 * std::max(1.0, R.diagonal().cwiseAbs().maxCoeff());
        ldlt.compute(R);
    }
    return 2.0 * ldlt.solve(rq.Q).trace();
}

double CriterionReport::value(Criterion c) const {
    switch (c) {
        case Criterion::GCV: return gcv;
        case Criterion::mAIC: return maic;
        case Criterion::GIC: return gic;
        case Criterion::GBIC: return gbic;
    }
    return kNan;
}

bool CriterionReport::defined(Criterion c) const {
    if (fit_failed) return false;
    switch (c) {
        case Criterion::GCV: return gcv_defined;
        case Criterion::GBIC: return gbic_defined;
        default: return true;
    }
}

CriterionReport evaluate_criteria(const SubjectSet& subjects, const FittedModel& model,
                                  QConvention convention, Exec exec,
                                  const OmegaInfo* cached_omega_info) {
    const int n = static_cast<int>(subjects.size());
    const double N = static_cast<double>(total_observations(subjects));

    CriterionReport rep;
    rep.M_y = model.spec.M_y;
    rep.lambda = model.spec.lambda;
    rep.converged = model.diagnostics.converged;

    double rss = 0.0;
    for (const auto& s : subjects)
        rss += (s.y - s.psi * (model.theta.matrix() * s.z)).squaredNorm();
    rep.rss = rss;
    rep.loglik = log_likelihood(subjects, model.theta, model.nu, exec);

    const SolvedSystem sys = solve_df(subjects, model, exec);
    rep.df = sys.df;

    // GCV normalizes by the total observation count: with irregular grids the
    // residual vector has N = sum n_i entries and df can exceed the number of
    // subjects.
    if (rep.df + 3.0 < N) {
        const double denom = 1.0 - (rep.df + 3.0) / N;
        rep.gcv = (rss / N) / (denom * denom);
        rep.gcv_defined = true;
    } else {
        rep.gcv = kNan;
    }

    rep.maic = -2.0 * rep.loglik + 2.0 * (rep.df + 3.0);

    const RQMatrices rq = build_rq(subjects, model, convention, exec);
    rep.gic = -2.0 * rep.loglik + gic_penalty(rq);

    const double lambda = model.spec.lambda;
    if (lambda > 0.0) {
        const OmegaInfo info = cached_omega_info ? *cached_omega_info : omega_info(sys.omega);
        Eigen::MatrixXd R = rq.R;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(R);
        bool ok = ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0;
        if (!ok) {
            R.diagonal().array() += 1e-10 * std::max(1.0, R.diagonal().cwiseAbs().maxCoeff());
            ldlt.compute(R);
            ok = ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0;
            rep.r_ridged = true;
        }
        if (ok) {
            const double logdet_r = ldlt.vectorD().array().log().sum();
            const Eigen::VectorXd vtheta = model.theta.vec();
            rep.gbic = -2.0 * rep.loglik + n * lambda * vtheta.dot(sys.omega * vtheta) -
                       (info.eta - info.zeta) * std::log(lambda) +
                       info.zeta * std::log(static_cast<double>(n)) + logdet_r -
                       info.logdet_plus - info.zeta * kLog2Pi;
            rep.gbic_defined = true;
        } else {
            rep.gbic = kNan;
        }
    } else {
        rep.gbic = kNan;
    }
    return rep;
}

double gcv_score(const SubjectSet& subjects, const FittedModel& model, Exec exec) {
    const CriterionReport rep = evaluate_criteria(subjects, model, QConvention::per_subject, exec);
    if (!rep.gcv_defined)
        throw undefined_criterion_error("GCV undefined: df + 3 >= total observations");
    return rep.gcv;
}

double maic_score(const SubjectSet& subjects, const FittedModel& model, Exec exec) {
    return evaluate_criteria(subjects, model, QConvention::per_subject, exec).maic;
}

double gic_score(const SubjectSet& subjects, const FittedModel& model, QConvention convention,
                 Exec exec) {
    return evaluate_criteria(subjects, model, convention, exec).gic;
}

double gbic_score(const SubjectSet& subjects, const FittedModel& model, QConvention convention,
                  Exec exec) {
    if (model.spec.lambda <= 0.0)
        throw undefined_criterion_error("GBIC undefined at lambda = 0; use a positive lambda grid");
    const CriterionReport rep = evaluate_criteria(subjects, model, convention, exec);
    if (!rep.gbic_defined)
        throw undefined_criterion_error("GBIC undefined: R not positive definite");
    return rep.gbic;
}

SelectionResult select_model(const LongitudinalDataset& response,
                             const std::vector<FunctionalCurve>& predictor_curves,
                             const BasisSystem& predictor_basis,
                             const Eigen::MatrixXd& predictor_gram, const SelectionGrid& grid,
                             const FitControls& fit_controls, QConvention convention) {
    if (grid.lambda_grid.empty() || grid.My_grid.empty())
        throw validation_error("select_model: empty grid");
    const int M_x = predictor_basis.size();

    struct ChainResult {
        std::vector<CriterionReport> reports;
        std::vector<std::optional<FittedModel>> fits;  // index-aligned with reports
    };
    std::vector<ChainResult> chains(grid.My_grid.size());
    std::exception_ptr err;

#pragma omp parallel for schedule(dynamic)
    for (int m = 0; m < static_cast<int>(grid.My_grid.size()); ++m) {
        try {
            const int My = grid.My_grid[m];
            const BasisSystem response_basis =
                grid.response_kind == BasisKind::bspline
                    ? BasisSystem::bspline(My, response.domain_lo, response.domain_hi,
                                           static_cast<int>(grid.response_degree_or_width))
                    : BasisSystem::gaussian_rbf(My, response.domain_lo, response.domain_hi,
                                                grid.response_degree_or_width);
            const SubjectSet subjects = assemble_subjects(
                predictor_curves, response, response_basis, predictor_gram,
                grid.interaction_order);

            QuadraticModelSpec spec;
            spec.M_x = M_x;
            spec.M_y = My;
            spec.order = grid.interaction_order;
            spec.omega_x = difference_penalty(M_x, grid.penalty_order);
            spec.omega_y = difference_penalty(My, grid.penalty_order);
            const OmegaInfo oinfo = [&] {
                QuadraticModelSpec s = spec;
                s.lambda = 1.0;
                return omega_info(build_penalty(s));
            }();

            FitControls controls = fit_controls;
            for (double lambda : grid.lambda_grid) {
                spec.lambda = lambda;
                CriterionReport rep;
                rep.M_y = My;
                rep.lambda = lambda;
                try {
                    FittedModel fitted = fit(subjects, spec, predictor_basis, response_basis,
                                             predictor_gram, controls);
                    controls.nu_init = fitted.nu;  // warm start along the lambda chain
                    rep = evaluate_criteria(subjects, fitted, convention, fit_controls.exec,
                                            &oinfo);
                    chains[m].fits.push_back(std::move(fitted));
                } catch (const std::exception&) {
                    rep.fit_failed = true;
                    rep.df = kNan;
                    rep.gcv = rep.maic = rep.gic = rep.gbic = kNan;
                    chains[m].fits.emplace_back(std::nullopt);
                }
                chains[m].reports.push_back(rep);
            }
        } catch (...) {
#pragma omp critical(ffq_select_err)
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);

    std::optional<FittedModel> best;
    CriterionReport best_report;
    std::vector<CriterionReport> table;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < chains.size(); ++m) {
        for (std::size_t l = 0; l < chains[m].reports.size(); ++l) {
            const CriterionReport& rep = chains[m].reports[l];
            table.push_back(rep);
            if (!rep.defined(grid.criterion) || !chains[m].fits[l].has_value()) continue;
            const double v = rep.value(grid.criterion);
            if (std::isfinite(v) && v < best_value) {
                best_value = v;
                best = chains[m].fits[l];
                best_report = rep;
            }
        }
    }
    if (!best) throw rank_error("select_model: no grid point produced a usable fit");
    return SelectionResult{std::move(*best), best_report, std::move(table)};
}

}  // namespace ffq
