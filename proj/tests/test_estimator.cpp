#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "ffq/estimator.hpp"
#include "ffq/reference.hpp"
#include "test_support.hpp"

using ffq::Exec;
using ffq::NuParams;
using ffq::ThetaMatrix;
using tsup::make_problem;
using tsup::ProblemConfig;

namespace {

Eigen::MatrixXd penalty_of(const tsup::Problem& p) { return ffq::build_penalty(p.spec); }

double pen_ll(const tsup::Problem& p, const ThetaMatrix& theta, const NuParams& nu) {
    return ffq::penalized_log_likelihood(p.subjects, theta, nu, p.spec.lambda, penalty_of(p));
}

}  // namespace

TEST_CASE("log-likelihood of a single standard-normal observation") {
    ProblemConfig cfg;
    cfg.n = 1;
    cfg.theta_scale = 0.0;
    cfg.gp_noise = false;
    tsup::Problem p = make_problem(cfg);
    // collapse to one observation with Sigma = [1]
    p.subjects[0].times = Eigen::VectorXd::Constant(1, 0.4);
    p.subjects[0].psi = p.rbasis.eval_rows(p.subjects[0].times);
    p.subjects[0].y = Eigen::VectorXd::Zero(1);
    p.subjects[0].X = ffq::build_design_block(p.subjects[0].z, p.subjects[0].psi);

    const NuParams nu{1e-300, 1.0, 1.0};
    const double ll =
        ffq::log_likelihood(p.subjects, ThetaMatrix::zero(3, 3, 2), nu);
    CHECK(ll == doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-14));
}

TEST_CASE("duplicating every subject doubles the log-likelihood") {
    tsup::Problem p = make_problem({});
    ffq::SubjectSet doubled = p.subjects;
    doubled.insert(doubled.end(), p.subjects.begin(), p.subjects.end());
    const double l1 = ffq::log_likelihood(p.subjects, p.theta_true, p.nu_true);
    const double l2 = ffq::log_likelihood(doubled, p.theta_true, p.nu_true);
    CHECK(l2 == doctest::Approx(2.0 * l1).epsilon(1e-12));
}

TEST_CASE("log-likelihood matches the naive dense-inverse oracle") {
    ProblemConfig cfg;
    cfg.n = 3;
    cfg.n_i = 4;
    cfg.seed = 21;
    tsup::Problem p = make_problem(cfg);
    const double got = ffq::log_likelihood(p.subjects, p.theta_true, p.nu_true);
    const double want = tsup::loglik_oracle(p.subjects, p.theta_true, p.nu_true);
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("penalized log-likelihood composition") {
    ProblemConfig cfg;
    cfg.lambda = 0.35;
    cfg.seed = 22;
    tsup::Problem p = make_problem(cfg);
    const Eigen::MatrixXd omega = penalty_of(p);

    SUBCASE("lambda = 0 equals the plain log-likelihood") {
        CHECK(ffq::penalized_log_likelihood(p.subjects, p.theta_true, p.nu_true, 0.0, omega) ==
              ffq::log_likelihood(p.subjects, p.theta_true, p.nu_true));
    }
    SUBCASE("zero parameters have zero penalty") {
        const ThetaMatrix zero = ThetaMatrix::zero(3, 3, 2);
        CHECK(ffq::penalized_log_likelihood(p.subjects, zero, p.nu_true, 0.35, omega) ==
              ffq::log_likelihood(p.subjects, zero, p.nu_true));
    }
    SUBCASE("sum of independently computed pieces") {
        const double ll = ffq::log_likelihood(p.subjects, p.theta_true, p.nu_true);
        const Eigen::VectorXd v = p.theta_true.vec();
        const double pen = 0.5 * p.subjects.size() * 0.35 * v.dot(omega * v);
        const double got =
            ffq::penalized_log_likelihood(p.subjects, p.theta_true, p.nu_true, 0.35, omega);
        CHECK(got == doctest::Approx(ll - pen).epsilon(1e-12));
    }
}

TEST_CASE("closed-form theta update") {
    SUBCASE("zero responses give zero estimates") {
        ProblemConfig cfg;
        cfg.theta_scale = 0.0;
        cfg.gp_noise = false;
        tsup::Problem p = make_problem(cfg);
        const auto ts = ffq::update_theta(p.subjects, p.nu_true, 0.0, penalty_of(p));
        CHECK(ts.vec_theta.cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("noiseless data recover the true parameters") {
        ProblemConfig cfg;
        cfg.n = 50;
        cfg.n_i = 9;
        cfg.M_x = 4;
        cfg.M_y = 4;
        cfg.gp_noise = false;
        cfg.symmetric_gamma = true;  // the design identifies gamma up to r-s symmetry
        cfg.seed = 23;
        tsup::Problem p = make_problem(cfg);
        const auto ts = ffq::update_theta(p.subjects, NuParams{0.3, 5.0, 0.2}, 0.0, penalty_of(p));
        CHECK((ts.vec_theta - p.theta_true.vec()).cwiseAbs().maxCoeff() < 1e-6);
    }
    SUBCASE("huge ridge wipes out the penalized components") {
        ProblemConfig cfg;
        cfg.seed = 24;
        tsup::Problem p = make_problem(cfg);
        const Eigen::MatrixXd omega = penalty_of(p);
        const auto ts = ffq::update_theta(p.subjects, p.nu_true, 1e12, omega);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega);
        Eigen::VectorXd in_range = Eigen::VectorXd::Zero(ts.vec_theta.size());
        const double cutoff = 1e-10 * eig.eigenvalues().maxCoeff();
        for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
            if (eig.eigenvalues()[i] > cutoff) {
                const Eigen::VectorXd u = eig.eigenvectors().col(i);
                in_range += u * u.dot(ts.vec_theta);
            }
        CHECK(in_range.norm() < 1e-4);
    }
    SUBCASE("singular design falls back to the minimum-norm solution") {
        ProblemConfig cfg;
        cfg.n = 1;
        cfg.n_i = 3;  // 3 observations, 39 parameters
        cfg.seed = 25;
        tsup::Problem p = make_problem(cfg);
        const auto ts = ffq::update_theta(p.subjects, p.nu_true, 0.0, penalty_of(p));
        CHECK(ts.rank_deficient);
        CHECK(ts.vec_theta.allFinite());
        // still reproduces the observations it can see
        const ThetaMatrix theta = ThetaMatrix::from_vec(ts.vec_theta, 3, 3, 2);
        const Eigen::VectorXd fitted =
            p.subjects[0].psi * (theta.matrix() * p.subjects[0].z);
        CHECK((fitted - p.subjects[0].y).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("nu gradient with zero residuals reduces to the log-det term") {
    ProblemConfig cfg;
    cfg.gp_noise = false;  // y lies exactly on the mean structure
    cfg.seed = 26;
    tsup::Problem p = make_problem(cfg);
    const Eigen::Vector3d g = ffq::nu_gradient(p.subjects, p.theta_true, p.nu_true);

    Eigen::Vector3d want = Eigen::Vector3d::Zero();
    for (const auto& s : p.subjects) {
        const auto cov = ffq::cov_matrix(s.times, p.nu_true);
        const auto der = ffq::cov_derivatives(s.times, p.nu_true);
        const Eigen::MatrixXd sinv = cov.sigma.inverse();
        want[0] -= 0.5 * (sinv * der.d_nu1).trace();
        want[1] -= 0.5 * (sinv * der.d_nu2).trace();
        want[2] -= 0.5 * sinv.trace();
    }
    CHECK((g - want).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, want.cwiseAbs().maxCoeff()));
}

TEST_CASE("nu gradient and hessian match finite differences of the objective") {
    std::mt19937_64 seeds(27);
    for (int rep = 0; rep < 5; ++rep) {
        ProblemConfig cfg;
        cfg.n = 4;
        cfg.n_i = 5;
        cfg.lambda = 0.2;
        cfg.seed = static_cast<unsigned>(seeds());
        tsup::Problem p = make_problem(cfg);
        const Eigen::MatrixXd omega = penalty_of(p);

        const auto d = ffq::nu_derivatives(p.subjects, p.theta_true, p.nu_true);
        CHECK((d.hessian - d.hessian.transpose()).cwiseAbs().maxCoeff() < 1e-10);

        const auto f = [&](const NuParams& nu) {
            return ffq::penalized_log_likelihood(p.subjects, p.theta_true, nu, 0.2, omega);
        };
        const auto nudge = [&](int j, double h) {
            NuParams nu = p.nu_true;
            (j == 0 ? nu.nu1 : j == 1 ? nu.nu2 : nu.nu3) += h;
            return nu;
        };
        for (int j = 0; j < 3; ++j) {
            const double vj = (j == 0   ? p.nu_true.nu1
                               : j == 1 ? p.nu_true.nu2
                                        : p.nu_true.nu3);
            const double h = 1e-5 * std::max(1.0, vj);
            const double fd = (f(nudge(j, h)) - f(nudge(j, -h))) / (2.0 * h);
            CHECK(std::abs(d.gradient[j] - fd) < 1e-5 * std::max(1.0, std::abs(fd)));
        }
        // hessian columns against differences of the analytic gradient
        for (int j = 0; j < 3; ++j) {
            const double vj = (j == 0   ? p.nu_true.nu1
                               : j == 1 ? p.nu_true.nu2
                                        : p.nu_true.nu3);
            const double h = 1e-5 * std::max(1.0, vj);
            const Eigen::Vector3d gplus =
                ffq::nu_gradient(p.subjects, p.theta_true, nudge(j, h));
            const Eigen::Vector3d gminus =
                ffq::nu_gradient(p.subjects, p.theta_true, nudge(j, -h));
            const Eigen::Vector3d fd = (gplus - gminus) / (2.0 * h);
            for (int k = 0; k < 3; ++k)
                CHECK(std::abs(d.hessian(k, j) - fd[k]) <
                      1e-4 * std::max(1.0, std::abs(fd[k])));
        }
    }
}

TEST_CASE("newton step") {
    SUBCASE("zero gradient keeps the point") {
        const Eigen::Vector3d rho(0.1, 0.2, 0.3);
        const auto step = ffq::newton_nu_step(
            rho, Eigen::Vector3d::Zero(), -Eigen::Matrix3d::Identity(),
            [](const Eigen::Vector3d&) { return 0.0; }, 0.0);
        CHECK(step.accepted);
        CHECK((step.log_nu - rho).norm() == 0.0);
    }
    SUBCASE("one step maximizes a quadratic surrogate") {
        Eigen::Matrix3d a;
        a << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
        const Eigen::Vector3d target(0.3, -0.7, 1.1);
        const auto f = [&](const Eigen::Vector3d& r) {
            return -0.5 * (r - target).dot(a * (r - target));
        };
        const Eigen::Vector3d rho(0.0, 0.0, 0.0);
        const Eigen::Vector3d grad = -a * (rho - target);
        const auto step = ffq::newton_nu_step(rho, grad, -a, f, f(rho));
        CHECK(step.accepted);
        CHECK(step.halvings == 0);
        CHECK((step.log_nu - target).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("accepted steps never decrease the objective") {
        ProblemConfig cfg;
        cfg.seed = 30;
        tsup::Problem p = make_problem(cfg);
        const Eigen::MatrixXd omega = penalty_of(p);
        NuParams nu{1.5, 1.0, 1.5};  // away from the optimum
        const auto objective = [&](const Eigen::Vector3d& rho) {
            return ffq::penalized_log_likelihood(p.subjects, p.theta_true,
                                                 NuParams::from_log(rho), 0.0, omega);
        };
        for (int it = 0; it < 10; ++it) {
            const auto d = ffq::nu_derivatives(p.subjects, p.theta_true, nu);
            const Eigen::Vector3d nv = nu.as_vector();
            Eigen::Vector3d g;
            Eigen::Matrix3d h;
            for (int j = 0; j < 3; ++j) {
                g[j] = nv[j] * d.gradient[j];
                for (int k = 0; k < 3; ++k) h(j, k) = nv[j] * nv[k] * d.hessian(j, k);
                h(j, j) += nv[j] * d.gradient[j];
            }
            const double cur = objective(nu.log_vector());
            const auto step = ffq::newton_nu_step(nu.log_vector(), g, h, objective, cur);
            if (!step.accepted) break;
            CHECK(step.objective >= cur);
            nu = NuParams::from_log(step.log_nu);
        }
    }
}

TEST_CASE("fit recovers a known model") {
    ProblemConfig cfg;
    cfg.n = 200;
    cfg.n_i = 15;
    cfg.M_x = 3;
    cfg.M_y = 3;
    cfg.theta_scale = 0.8;
    cfg.nu_true = NuParams{0.5, 8.0, 0.4};
    cfg.seed = 31;
    tsup::Problem p = make_problem(cfg);

    const auto model = ffq::fit(p.subjects, p.spec, p.pbasis, p.rbasis, p.gram, {});
    tsup::assert_trace_ascent(model);
    CHECK(model.diagnostics.converged);

    CHECK(std::abs(model.nu.nu1 - 0.5) < 0.2 * 0.5);
    CHECK(std::abs(model.nu.nu2 - 8.0) < 0.2 * 8.0);
    CHECK(std::abs(model.nu.nu3 - 0.4) < 0.2 * 0.4);

    // prediction error on the true mean structure stays below the noise floor
    double err = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < p.subjects.size(); ++i) {
        const Eigen::VectorXd truth =
            p.subjects[i].psi * (p.theta_true.matrix() * p.subjects[i].z);
        const Eigen::VectorXd pred = ffq::predict(model, p.w[i], p.subjects[i].times);
        err += (truth - pred).squaredNorm();
        count += truth.size();
    }
    CHECK(err / count < 0.5 + 0.4);  // nu1 + nu3
}

TEST_CASE("penalized components shrink monotonically in lambda") {
    ProblemConfig cfg;
    cfg.n = 12;
    cfg.n_i = 9;
    cfg.seed = 32;
    tsup::Problem p = make_problem(cfg);
    const Eigen::MatrixXd omega = penalty_of(p);

    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {1e-6, 1e-4, 1e-2, 1.0, 100.0}) {
        const auto ts = ffq::update_theta(p.subjects, p.nu_true, lambda, omega);
        const double seminorm = ts.vec_theta.dot(omega * ts.vec_theta);
        CHECK(seminorm <= prev * (1.0 + 1e-12));
        prev = seminorm;
    }
}

TEST_CASE("starting at the truth never decreases the objective") {
    ProblemConfig cfg;
    cfg.n = 30;
    cfg.n_i = 8;
    cfg.seed = 33;
    tsup::Problem p = make_problem(cfg);
    ffq::FitControls controls;
    controls.nu_init = p.nu_true;
    const auto model = ffq::fit(p.subjects, p.spec, p.pbasis, p.rbasis, p.gram, controls);
    tsup::assert_trace_ascent(model);
    REQUIRE(model.diagnostics.objective_trace.size() >= 2);
    CHECK(model.diagnostics.objective_trace[1] >=
          model.diagnostics.objective_trace[0] - 1e-8);
}

TEST_CASE("theta stationarity at convergence") {
    ProblemConfig cfg;
    cfg.n = 20;
    cfg.n_i = 10;
    cfg.lambda = 0.01;
    cfg.seed = 34;
    tsup::Problem p = make_problem(cfg);
    const Eigen::MatrixXd omega = penalty_of(p);

    const auto model = ffq::fit(p.subjects, p.spec, p.pbasis, p.rbasis, p.gram, {});
    const Eigen::VectorXd v = model.theta.vec();

    Eigen::VectorXd score = Eigen::VectorXd::Zero(v.size());
    double scale = 0.0;
    for (const auto& s : p.subjects) {
        const auto cov = ffq::cov_matrix(s.times, model.nu);
        score += s.X.transpose() * cov.solve(Eigen::VectorXd(s.y - s.X * v));
        scale = std::max(scale,
                         (s.X.transpose() * cov.solve(s.y)).cwiseAbs().maxCoeff());
    }
    score -= p.subjects.size() * 0.01 * (omega * v);
    CHECK(score.cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, scale));
}

TEST_CASE("prediction") {
    ProblemConfig cfg;
    cfg.n = 25;
    cfg.n_i = 12;
    cfg.seed = 35;
    tsup::Problem p = make_problem(cfg);
    const auto model = ffq::fit(p.subjects, p.spec, p.pbasis, p.rbasis, p.gram, {});

    SUBCASE("zero parameter matrix predicts zero") {
        ffq::FittedModel zero = model;
        zero.theta = ThetaMatrix::zero(p.spec.M_y, p.spec.M_x, 2);
        const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(7, 0.0, 1.0);
        CHECK(ffq::predict(zero, p.w[0], t).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("matches quadrature over the evaluated surfaces") {
        // alpha(t) + int x(s) beta(s,t) ds + int int x(r) x(s) gamma(r,s,t) dr ds
        // with x from the subject's score vector, via Simpson quadrature.
        const int ng = 201;  // odd, Simpson
        const Eigen::VectorXd gs = Eigen::VectorXd::LinSpaced(ng, 0.0, 1.0);
        const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(5, 0.1, 0.9);
        const auto surf = ffq::eval_surfaces(model.theta, p.pbasis, p.rbasis, gs, t, gs);

        Eigen::VectorXd simpson(ng);
        const double h = 1.0 / (ng - 1);
        for (int i = 0; i < ng; ++i)
            simpson[i] = (i == 0 || i == ng - 1) ? h / 3.0
                         : (i % 2 == 1)          ? 4.0 * h / 3.0
                                                 : 2.0 * h / 3.0;
        Eigen::VectorXd x(ng);
        const ffq::FunctionalCurve curve{p.w[0], p.pbasis};
        for (int i = 0; i < ng; ++i) x[i] = ffq::eval_curve(curve, gs[i]);

        const Eigen::VectorXd direct = ffq::predict(model, p.w[0], t);
        for (int it = 0; it < t.size(); ++it) {
            double linear = 0.0;
            for (int is = 0; is < ng; ++is)
                linear += simpson[is] * x[is] * surf.beta(is, it);
            double quad = 0.0;
            for (int ir = 0; ir < ng; ++ir)
                for (int is = 0; is < ng; ++is)
                    quad += simpson[ir] * simpson[is] * x[ir] * x[is] *
                            surf.gamma.at(ir, is, it);
            const double expected = surf.alpha[it] + linear + quad;
            CHECK(std::abs(direct[it] - expected) < 1e-6);
        }
    }
    SUBCASE("domain error for out-of-range times") {
        Eigen::VectorXd t(1);
        t << 1.4;
        CHECK_THROWS_AS((void)ffq::predict(model, p.w[0], t), ffq::domain_error);
    }
}

TEST_CASE("interaction block forced to zero reproduces the linear fit") {
    ProblemConfig cfg;
    cfg.n = 30;
    cfg.n_i = 10;
    cfg.seed = 36;
    tsup::Problem p = make_problem(cfg);

    // order-1 problem over the same data
    ffq::QuadraticModelSpec spec1 = p.spec;
    spec1.order = 1;
    ffq::SubjectSet subjects1 = p.subjects;
    for (auto& s : subjects1) {
        s.z = s.z.head(1 + p.spec.M_x).eval();
        s.X = ffq::build_design_block(s.z, s.psi);
    }

    SUBCASE("closed-form updates decouple exactly at a fixed nu") {
        const int q = p.spec.P() * p.spec.M_y;
        Eigen::VectorXd ridge = Eigen::VectorXd::Zero(q);
        for (int j = 1 + p.spec.M_x; j < p.spec.P(); ++j)
            ridge.segment(j * p.spec.M_y, p.spec.M_y).array() = 1e12;

        const auto constrained = ffq::update_theta(p.subjects, p.nu_true, 0.0, penalty_of(p),
                                                   ffq::Exec::parallel, &ridge);
        const auto linear =
            ffq::update_theta(subjects1, p.nu_true, 0.0, ffq::build_penalty(spec1));

        const int q1 = spec1.P() * p.spec.M_y;
        CHECK((constrained.vec_theta.head(q1) - linear.vec_theta).cwiseAbs().maxCoeff() <
              1e-7);
        CHECK(constrained.vec_theta.tail(q - q1).cwiseAbs().maxCoeff() < 1e-8);
    }

    SUBCASE("full fits agree after independent nu estimation") {
        ffq::FitControls ridge_controls;
        ridge_controls.quad_block_ridge = 1e12;
        ridge_controls.nu_init = p.nu_true;
        const auto constrained =
            ffq::fit(p.subjects, p.spec, p.pbasis, p.rbasis, p.gram, ridge_controls);

        ffq::FitControls controls1;
        controls1.nu_init = p.nu_true;
        const auto linear = ffq::fit(subjects1, spec1, p.pbasis, p.rbasis, p.gram, controls1);

        CHECK(constrained.theta.gamma_mode3().cwiseAbs().maxCoeff() < 1e-6);
        CHECK((constrained.theta.alpha() - linear.theta.alpha()).cwiseAbs().maxCoeff() < 1e-3);
        CHECK((constrained.theta.b_matrix() - linear.theta.b_matrix()).cwiseAbs().maxCoeff() <
              1e-3);

        const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(9, 0.0, 1.0);
        const Eigen::VectorXd pa = ffq::predict(constrained, p.w[2], t);
        const Eigen::VectorXd pb = ffq::predict(linear, p.w[2], t);
        CHECK((pa - pb).cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("non-convergence is reported, not thrown") {
    ProblemConfig cfg;
    cfg.n = 10;
    cfg.n_i = 6;
    cfg.seed = 37;
    tsup::Problem p = make_problem(cfg);
    ffq::FitControls controls;
    controls.max_outer = 1;  // force an early stop
    controls.tol = 1e-14;
    const auto model = ffq::fit(p.subjects, p.spec, p.pbasis, p.rbasis, p.gram, controls);
    CHECK_FALSE(model.diagnostics.converged);
    CHECK(model.diagnostics.iterations == 1);
}
