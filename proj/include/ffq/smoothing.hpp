#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "ffq/basis.hpp"

namespace ffq {

struct LongitudinalSubject {
    std::string id;
    Eigen::VectorXd times;   // strictly increasing, inside the declared domain
    Eigen::VectorXd values;
};

struct LongitudinalDataset {
    std::string variable;
    double domain_lo = 0.0;
    double domain_hi = 1.0;
    std::vector<LongitudinalSubject> subjects;

    std::size_t total_observations() const;
    // n_i >= 2, strictly increasing times inside the domain; throws validation_error.
    void validate() const;
};

// One subject's curve as a coefficient vector against a basis.
struct FunctionalCurve {
    Eigen::VectorXd coefficients;
    BasisSystem basis;
};

// Penalized least squares: w = (B^T B + roughness D^T D)^{-1} B^T values with
// B[j,k] = phi_k(times_j) and D the order-`penalty_order` difference operator.
// At roughness 0 the normal equations must be nonsingular; otherwise a
// rank_error tells the caller to use a positive roughness.
FunctionalCurve smooth_curve(const Eigen::VectorXd& times, const Eigen::VectorXd& values,
                             const BasisSystem& basis, double roughness,
                             int penalty_order = 2);

double eval_curve(const FunctionalCurve& c, double t);

std::vector<double> default_roughness_grid();  // log-spaced 1e-8 .. 1e2

struct RoughnessChoice {
    double roughness = 0.0;
    double gcv = 0.0;
};

// One roughness per variable, chosen by GCV pooled over subjects:
// GCV(r) = (RSS/N) / (1 - df/N)^2 with N the total observation count and
// df the summed hat-matrix traces.
RoughnessChoice choose_roughness_gcv(const LongitudinalDataset& data, const BasisSystem& basis,
                                     const std::vector<double>& grid = default_roughness_grid(),
                                     int penalty_order = 2);

// Smooths every subject with a shared roughness; subjects are independent and
// processed in parallel.
std::vector<FunctionalCurve> smooth_dataset(const LongitudinalDataset& data,
                                            const BasisSystem& basis, double roughness,
                                            int penalty_order = 2);

}  // namespace ffq
