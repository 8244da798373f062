#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "ffq/estimator.hpp"

namespace ffq {

enum class Criterion { GCV, mAIC, GIC, GBIC };

std::string to_string(Criterion c);
Criterion criterion_from_string(const std::string& s);

// The observed score products in the GIC/GBIC Q matrix can be summed per
// subject (outer products of per-subject scores, the estimating-function
// form) or pooled (outer product of total scores). Per-subject is the
// default; pooled is kept for comparison.
enum class QConvention { per_subject, pooled };

// Spectral summary of the composite penalty: eta is its size, zeta counts
// eigenvalues above 1e-10 relative, logdet_plus sums their logs.
struct OmegaInfo {
    int eta = 0;
    int zeta = 0;
    double logdet_plus = 0.0;
};

OmegaInfo omega_info(const Eigen::MatrixXd& omega);

// Effective degrees of freedom tr{S} with
// S = X {X^T Sigma^{-1} X + n lambda Omega}^{-1} X^T Sigma^{-1},
// computed as tr{A^{-1} G} without materializing S.
double effective_df(const SubjectSet& subjects, const FittedModel& model,
                    Exec exec = Exec::parallel);

// R = -(1/n) second-derivative matrix of the penalized log-likelihood over
// (vec Theta, nu); Q = (1/n) sum of products of penalized and unpenalized
// scores, both evaluated at the fitted parameters.
struct RQMatrices {
    Eigen::MatrixXd R;
    Eigen::MatrixXd Q;
};

RQMatrices build_rq(const SubjectSet& subjects, const FittedModel& model,
                    QConvention convention = QConvention::per_subject,
                    Exec exec = Exec::parallel);

// 2 tr{R^{-1} Q}; a 1e-10 relative ridge is applied to R if it is singular.
double gic_penalty(const RQMatrices& rq);

struct CriterionReport {
    int M_y = 0;
    double lambda = 0.0;
    double df = 0.0;
    double gcv = 0.0;
    double maic = 0.0;
    double gic = 0.0;
    double gbic = 0.0;
    bool gcv_defined = false;
    bool gbic_defined = false;
    bool converged = false;
    bool fit_failed = false;
    bool r_ridged = false;
    double loglik = 0.0;
    double rss = 0.0;

    double value(Criterion c) const;
    bool defined(Criterion c) const;
};

CriterionReport evaluate_criteria(const SubjectSet& subjects, const FittedModel& model,
                                  QConvention convention = QConvention::per_subject,
                                  Exec exec = Exec::parallel,
                                  const OmegaInfo* cached_omega_info = nullptr);

double gcv_score(const SubjectSet& subjects, const FittedModel& model,
                 Exec exec = Exec::parallel);
double maic_score(const SubjectSet& subjects, const FittedModel& model,
                  Exec exec = Exec::parallel);
double gic_score(const SubjectSet& subjects, const FittedModel& model,
                 QConvention convention = QConvention::per_subject,
                 Exec exec = Exec::parallel);
double gbic_score(const SubjectSet& subjects, const FittedModel& model,
                  QConvention convention = QConvention::per_subject,
                  Exec exec = Exec::parallel);

struct SelectionGrid {
    std::vector<double> lambda_grid;
    std::vector<int> My_grid;
    Criterion criterion = Criterion::GIC;
    BasisKind response_kind = BasisKind::bspline;
    double response_degree_or_width = 3.0;
    int penalty_order = 2;
    int interaction_order = 2;
};

struct SelectionResult {
    FittedModel best;
    CriterionReport best_report;
    std::vector<CriterionReport> table;  // sorted by (M_y, lambda)
};

// Fits every (M_y, lambda) grid point, warm-starting nu along each lambda
// chain; chains for different M_y run in parallel. Returns the argmin of the
// requested criterion plus the full table. Throws if every grid point failed.
SelectionResult select_model(const LongitudinalDataset& response,
                             const std::vector<FunctionalCurve>& predictor_curves,
                             const BasisSystem& predictor_basis,
                             const Eigen::MatrixXd& predictor_gram, const SelectionGrid& grid,
                             const FitControls& fit_controls = {},
                             QConvention convention = QConvention::per_subject);

}  // namespace ffq
