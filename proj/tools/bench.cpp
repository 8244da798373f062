// Times the OpenMP chunked kernels against the plain serial reference loops
// on a synthetic problem, then a full fit under both execution policies.

#include <chrono>
#include <cstdio>
#include <random>

#include "ffq/estimator.hpp"
#include "ffq/parallel.hpp"
#include "ffq/reference.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

ffq::SubjectSet make_problem(int n, int n_i, int M_x, int M_y, unsigned seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    const ffq::BasisSystem pbasis = ffq::BasisSystem::gaussian_rbf(M_x, 0.0, 1.0);
    const ffq::BasisSystem rbasis = ffq::BasisSystem::bspline(M_y, 0.0, 1.0, 3);
    const Eigen::MatrixXd gram = ffq::gram_matrix(pbasis);

    ffq::SubjectSet subjects(n);
    for (int i = 0; i < n; ++i) {
        ffq::SubjectData s;
        s.times.resize(n_i);
        for (int j = 0; j < n_i; ++j) s.times[j] = static_cast<double>(j) / (n_i - 1);
        Eigen::VectorXd w(M_x);
        for (int k = 0; k < M_x; ++k) w[k] = normal(eng);
        s.z = ffq::build_covariate(w, gram, 2);
        s.psi = rbasis.eval_rows(s.times);
        s.X = ffq::build_design_block(s.z, s.psi);
        s.y.resize(n_i);
        for (int j = 0; j < n_i; ++j) s.y[j] = normal(eng);
        subjects[i] = std::move(s);
    }
    return subjects;
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        f();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::atoi(argv[1]) : 400;
    const int n_i = 21, M_x = 7, M_y = 6;

    std::printf("threads available: %d\n", ffq::parallel::max_threads());
    std::printf("problem: n=%d subjects, n_i=%d, M_x=%d, M_y=%d\n\n", n, n_i, M_x, M_y);

    const ffq::SubjectSet subjects = make_problem(n, n_i, M_x, M_y, 42);
    const ffq::ThetaMatrix theta = ffq::ThetaMatrix::zero(M_y, M_x, 2);
    const ffq::NuParams nu{0.5, 8.0, 0.4};

    struct Row {
        const char* name;
        double serial, parallel;
    };
    Row rows[3];

    rows[0] = {"normal equations",
               time_best_of(3, [&] { ffq::ref::accumulate_normal_equations(subjects, nu); }),
               time_best_of(3, [&] {
                   ffq::accumulate_normal_equations(subjects, nu, ffq::Exec::parallel);
               })};
    rows[1] = {"log-likelihood",
               time_best_of(3, [&] { ffq::ref::log_likelihood(subjects, theta, nu); }),
               time_best_of(3, [&] {
                   ffq::log_likelihood(subjects, theta, nu, ffq::Exec::parallel);
               })};
    rows[2] = {"nu grad+hess",
               time_best_of(3, [&] { ffq::ref::nu_derivatives(subjects, theta, nu); }),
               time_best_of(3, [&] {
                   ffq::nu_derivatives(subjects, theta, nu, ffq::Exec::parallel);
               })};

    std::printf("%-18s %12s %12s %9s\n", "kernel", "serial (s)", "parallel (s)", "speedup");
    for (const Row& r : rows)
        std::printf("%-18s %12.4f %12.4f %8.2fx\n", r.name, r.serial, r.parallel,
                    r.serial / r.parallel);

    // full fits under both policies
    ffq::QuadraticModelSpec spec;
    spec.M_x = M_x;
    spec.M_y = M_y;
    spec.order = 2;
    spec.omega_x = ffq::difference_penalty(M_x, 2);
    spec.omega_y = ffq::difference_penalty(M_y, 2);
    spec.lambda = 1e-4;

    const ffq::BasisSystem pbasis = ffq::BasisSystem::gaussian_rbf(M_x, 0.0, 1.0);
    const ffq::BasisSystem rbasis = ffq::BasisSystem::bspline(M_y, 0.0, 1.0, 3);
    const Eigen::MatrixXd gram = ffq::gram_matrix(pbasis);

    for (const ffq::Exec exec : {ffq::Exec::serial, ffq::Exec::parallel}) {
        ffq::FitControls controls;
        controls.exec = exec;
        controls.max_outer = 25;
        const auto t0 = Clock::now();
        const auto model = ffq::fit(subjects, spec, pbasis, rbasis, gram, controls);
        std::printf("full fit (%s): %.3f s, %d iterations, loglik %.6f\n",
                    exec == ffq::Exec::serial ? "serial" : "parallel", seconds_since(t0),
                    model.diagnostics.iterations, model.diagnostics.penalized_loglik);
    }
    return 0;
}
