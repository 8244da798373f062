#pragma once

#include <Eigen/Dense>
#include <random>

#include "ffq/estimator.hpp"

// Shared generators and independent oracles for the test suites. Oracles are
// deliberately written with naive dense formulas (explicit inverses, explicit
// summation) so they do not share code with the implementation they check.
namespace tsup {

inline Eigen::VectorXd random_vector(std::mt19937_64& eng, int n, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = u(eng);
    return v;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& eng, int r, int c, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = u(eng);
    return m;
}

inline Eigen::MatrixXd random_psd(std::mt19937_64& eng, int n, double scale = 1.0) {
    const Eigen::MatrixXd a = random_matrix(eng, n, n, scale);
    return a.transpose() * a;
}

inline Eigen::VectorXd sorted_random_times(std::mt19937_64& eng, int n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd t(n);
    for (int i = 0; i < n; ++i) t[i] = u(eng);
    std::sort(t.data(), t.data() + n);
    // enforce strict increase
    for (int i = 1; i < n; ++i)
        if (t[i] <= t[i - 1]) t[i] = t[i - 1] + 1e-6 * (hi - lo);
    return t;
}

inline Eigen::MatrixXd kron_oracle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

struct Problem {
    ffq::BasisSystem pbasis;
    ffq::BasisSystem rbasis;
    Eigen::MatrixXd gram;
    ffq::QuadraticModelSpec spec;
    ffq::SubjectSet subjects;
    std::vector<Eigen::VectorXd> w;  // predictor scores per subject
    ffq::ThetaMatrix theta_true;
    ffq::NuParams nu_true;
};

struct ProblemConfig {
    int n = 4;
    int n_i = 5;
    int M_x = 3;
    int M_y = 3;
    int order = 2;
    double lambda = 0.0;
    double theta_scale = 0.5;   // 0 disables the mean structure
    bool gp_noise = true;       // GP + white noise at nu_true, else noiseless
    // The design only identifies the r-s symmetrization of the interaction
    // block; set this when a test needs exact recovery of theta_true.
    bool symmetric_gamma = false;
    ffq::NuParams nu_true{0.5, 8.0, 0.4};
    unsigned seed = 1;
};

// Random regression problem with known truth. Responses are
// y_i = Psi_i Theta z_i + eps_i with eps_i drawn from the GP covariance.
inline Problem make_problem(const ProblemConfig& cfg) {
    std::mt19937_64 eng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    ffq::QuadraticModelSpec spec;
    spec.M_x = cfg.M_x;
    spec.M_y = cfg.M_y;
    spec.order = cfg.order;
    spec.omega_x = ffq::difference_penalty(cfg.M_x, 2);
    spec.omega_y = ffq::difference_penalty(cfg.M_y, 2);
    spec.lambda = cfg.lambda;

    Problem p{ffq::BasisSystem::gaussian_rbf(cfg.M_x, 0.0, 1.0),
              ffq::BasisSystem::bspline(cfg.M_y, 0.0, 1.0, std::min(3, cfg.M_y - 1)),
              {},
              spec,
              {},
              {},
              ffq::ThetaMatrix::zero(cfg.M_y, cfg.M_x, cfg.order),
              cfg.nu_true};
    p.gram = ffq::gram_matrix(p.pbasis);

    Eigen::MatrixXd theta_m = random_matrix(eng, cfg.M_y, spec.P(), cfg.theta_scale);
    if (cfg.theta_scale == 0.0) theta_m.setZero();
    if (cfg.symmetric_gamma && cfg.order >= 2) {
        const int Mx = cfg.M_x;
        for (int l = 0; l < cfg.M_y; ++l)
            for (int k = 0; k < Mx; ++k)
                for (int h = 0; h < k; ++h) {
                    const int c1 = 1 + Mx + k * Mx + h;
                    const int c2 = 1 + Mx + h * Mx + k;
                    const double avg = 0.5 * (theta_m(l, c1) + theta_m(l, c2));
                    theta_m(l, c1) = avg;
                    theta_m(l, c2) = avg;
                }
    }
    p.theta_true = ffq::ThetaMatrix(theta_m, cfg.M_x, cfg.order);

    for (int i = 0; i < cfg.n; ++i) {
        ffq::SubjectData s;
        s.times = sorted_random_times(eng, cfg.n_i, 0.0, 1.0);
        Eigen::VectorXd w = random_vector(eng, cfg.M_x, 1.0);
        p.w.push_back(w);
        s.z = ffq::build_covariate(w, p.gram, cfg.order);
        s.psi = p.rbasis.eval_rows(s.times);
        s.y = s.psi * (p.theta_true.matrix() * s.z);
        if (cfg.gp_noise) {
            Eigen::MatrixXd cov(cfg.n_i, cfg.n_i);
            for (int a = 0; a < cfg.n_i; ++a)
                for (int b = 0; b < cfg.n_i; ++b) {
                    const double dt = s.times[a] - s.times[b];
                    cov(a, b) = cfg.nu_true.nu1 * std::exp(-0.5 * cfg.nu_true.nu2 * dt * dt);
                }
            cov.diagonal().array() += cfg.nu_true.nu3;
            const Eigen::MatrixXd L = cov.llt().matrixL();
            Eigen::VectorXd xi(cfg.n_i);
            for (int j = 0; j < cfg.n_i; ++j) xi[j] = normal(eng);
            s.y += L * xi;
        }
        s.X = ffq::build_design_block(s.z, s.psi);
        p.subjects.push_back(std::move(s));
    }
    return p;
}

// Naive dense log-likelihood: explicit inverse and determinant per subject.
inline double loglik_oracle(const ffq::SubjectSet& subjects, const ffq::ThetaMatrix& theta,
                            const ffq::NuParams& nu) {
    double total = 0.0;
    for (const auto& s : subjects) {
        const int n = static_cast<int>(s.times.size());
        Eigen::MatrixXd sigma(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const double dt = s.times[a] - s.times[b];
                sigma(a, b) = nu.nu1 * std::exp(-0.5 * nu.nu2 * dt * dt);
            }
        sigma.diagonal().array() += nu.nu3;
        const Eigen::VectorXd r = s.y - s.psi * (theta.matrix() * s.z);
        total += -0.5 * (n * std::log(2.0 * M_PI) + std::log(sigma.determinant()) +
                         r.dot(sigma.inverse() * r));
    }
    return total;
}

inline void assert_trace_ascent(const ffq::FittedModel& model) {
    const auto& tr = model.diagnostics.objective_trace;
    for (std::size_t i = 1; i < tr.size(); ++i) {
        const double slack = 1e-8 * (1.0 + std::abs(tr[i - 1]));
        REQUIRE(tr[i] >= tr[i - 1] - slack);
    }
}

}  // namespace tsup
