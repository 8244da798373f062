#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "ffq/selection.hpp"

namespace ffq {

// Monte Carlo study configuration. Data are generated from an order-2
// functional regression: B-spline coefficient matrices drawn entrywise from
// a Wishart(wishart_df, Toeplitz) stream, subject scores from
// N(0, Toeplitz), GP-plus-white noise on the response grid, and white noise
// on the predictor grid.
struct SimConfig {
    int n = 50;
    int n_t = 21;
    double domain_lo = 0.0, domain_hi = 1.0;

    int gen_M_x = 7, gen_M_y = 7;  // generation bases (cubic B-splines)

    // Response noise; generation accepts zero components (no noise).
    double noise_nu1 = 0.1;
    double noise_nu2 = 10.0;
    double noise_nu3 = 0.3;
    // Predictor observation noise; negative means 0.1 x the sd of the clean
    // predictor values.
    double predictor_noise_sd = -1.0;

    double toeplitz_rho = 0.5;
    int wishart_df = 10;

    std::uint64_t seed = 1;
    int replications = 100;

    // Analysis settings: RBF predictor smoothing basis and B-spline response
    // basis, with the PMLE lambda grid searched by the criteria.
    int est_M_x = 7;
    int est_M_y = 6;
    std::vector<double> lambda_grid;  // default log-spaced 1e-8 .. 1e-2

    std::vector<double> effective_lambda_grid() const;
    void validate() const;
};

struct GeneratedData {
    Eigen::VectorXd times;  // shared equally spaced grid (n_t)
    Eigen::MatrixXd g;      // n x n_t true mean curves
    Eigen::MatrixXd x;      // n x n_t noisy predictor observations
    Eigen::MatrixXd y;      // n x n_t noisy response observations
};

// Deterministic under (cfg.seed, replication_index).
GeneratedData generate_dataset(const SimConfig& cfg, int replication_index);

// Average squared error against the true mean curves.
double ase(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predictions);

enum class Baseline { F_INTER, F_LIN, INTER, QUAD, LIN };

Baseline baseline_from_string(const std::string& s);
std::string to_string(Baseline b);

// Shared per-replication analysis state: smoothed predictor curves and the
// assembled designs for the functional fits.
struct AnalysisWorkspace {
    BasisSystem predictor_basis;
    BasisSystem response_basis;
    Eigen::MatrixXd predictor_gram;
    std::vector<FunctionalCurve> curves;
    LongitudinalDataset response;
    SubjectSet subjects_p2;  // interaction design
    SubjectSet subjects_p1;  // linear-only design
    QuadraticModelSpec spec_p2;
    QuadraticModelSpec spec_p1;
};

AnalysisWorkspace prepare_analysis(const GeneratedData& data, const SimConfig& cfg);

// Predictions of y_i(t_j) on the generation grid. Functional baselines run
// the full smoothing + likelihood pipeline at lambda = 0; the multivariate
// baselines regress each output time on the raw predictor values through the
// pseudo-inverse.
Eigen::MatrixXd fit_baseline(Baseline kind, const GeneratedData& data, const SimConfig& cfg);

struct SimCell {
    std::string estimator;
    int n = 0;
    double nu3 = 0.0;
    std::vector<double> ases;  // per replication; NaN marks a failed one
    int failures = 0;
    double mean = 0.0;  // over successful replications
    double sd = 0.0;

    void recompute_stats();
};

struct SimResultTable {
    std::vector<SimCell> cells;
    const SimCell* find(const std::string& estimator) const;
};

std::vector<std::string> default_estimators();  // five baselines + PMLE x criteria

// Runs every replication (in parallel when exec == parallel; per-replication
// random streams are independent and results are reduced in replication
// order, so the two modes agree bitwise).
SimResultTable run_study(const SimConfig& cfg, const std::vector<std::string>& estimators,
                         Exec exec = Exec::parallel);

struct BoxplotStats {
    double whisker_lo, q1, median, q3, whisker_hi;
};

BoxplotStats boxplot_stats(std::vector<double> values);

}  // namespace ffq
