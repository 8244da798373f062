#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "ffq/basis.hpp"

using ffq::BasisSystem;

TEST_CASE("degree-0 bspline is the indicator basis") {
    const auto b = BasisSystem::bspline(2, 0.0, 1.0, 0);
    const Eigen::VectorXd v = b.eval(0.25);
    CHECK(v[0] == doctest::Approx(1.0));
    CHECK(v[1] == doctest::Approx(0.0));
    const Eigen::VectorXd w = b.eval(0.75);
    CHECK(w[0] == doctest::Approx(0.0));
    CHECK(w[1] == doctest::Approx(1.0));
    // right endpoint belongs to the last piece
    CHECK(b.eval(1.0)[1] == doctest::Approx(1.0));
}

TEST_CASE("bspline partition of unity") {
    const auto b = BasisSystem::bspline(7, 0.0, 1.0, 3);
    CHECK(std::abs(b.eval(0.5).sum() - 1.0) < 1e-12);

    std::mt19937_64 eng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const Eigen::VectorXd v = b.eval(u(eng));
        CHECK(std::abs(v.sum() - 1.0) < 1e-10);
        CHECK(v.minCoeff() >= 0.0);
    }
}

TEST_CASE("gaussian rbf evaluation matches the kernel formula") {
    const auto b = BasisSystem::gaussian_rbf(2, 0.0, 1.0, 1.0);
    const Eigen::VectorXd v = b.eval(0.0);
    CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(v[1] == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("default rbf width crosses adjacent kernels at height 1/2") {
    const auto b = BasisSystem::gaussian_rbf(5, 0.0, 1.0);
    const auto& centers = b.knots_or_centers();
    const double mid = 0.5 * (centers[1] + centers[2]);
    const Eigen::VectorXd v = b.eval(mid);
    CHECK(v[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(v[2] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("interior knot count invariant") {
    for (int degree : {0, 1, 2, 3}) {
        for (int M : {degree + 1, degree + 2, 7, 11}) {
            const auto b = BasisSystem::bspline(std::max(M, 2), 0.0, 2.0, degree);
            CHECK(static_cast<int>(b.knots_or_centers().size()) + degree + 1 == b.size());
        }
    }
}

TEST_CASE("gram matrix of the degree-0 basis") {
    const auto b = BasisSystem::bspline(2, 0.0, 1.0, 0);
    const Eigen::MatrixXd phi = ffq::gram_matrix(b);
    CHECK(std::abs(phi(0, 0) - 0.5) < 1e-13);
    CHECK(std::abs(phi(1, 1) - 0.5) < 1e-13);
    CHECK(std::abs(phi(0, 1)) < 1e-13);
}

TEST_CASE("gram matrix of linear hats") {
    const auto b = BasisSystem::bspline(2, 0.0, 1.0, 1);
    const Eigen::MatrixXd phi = ffq::gram_matrix(b);
    CHECK(std::abs(phi(0, 0) - 1.0 / 3.0) < 1e-12);
    CHECK(std::abs(phi(1, 1) - 1.0 / 3.0) < 1e-12);
    CHECK(std::abs(phi(0, 1) - 1.0 / 6.0) < 1e-12);
}

TEST_CASE("gram matrices are symmetric PSD") {
    std::mt19937_64 eng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (const auto& b :
         {BasisSystem::gaussian_rbf(5, -1.0, 2.0), BasisSystem::bspline(6, -1.0, 2.0, 3)}) {
        const Eigen::MatrixXd phi = ffq::gram_matrix(b);
        CHECK((phi - phi.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        for (int i = 0; i < 100; ++i) {
            Eigen::VectorXd x(b.size());
            for (int k = 0; k < b.size(); ++k) x[k] = u(eng);
            CHECK(x.dot(phi * x) >= -1e-10);
        }
    }
}

TEST_CASE("gram quadrature is converged at the default budget") {
    const auto b = BasisSystem::gaussian_rbf(5, 0.0, 1.0);
    const Eigen::MatrixXd a = ffq::gram_matrix(b, 8 * 5);
    const Eigen::MatrixXd c = ffq::gram_matrix(b, 16 * 5);
    CHECK((a - c).cwiseAbs().maxCoeff() < 1e-8);

    const auto bs = BasisSystem::bspline(7, 0.0, 1.0, 3);
    const Eigen::MatrixXd d = ffq::gram_matrix(bs, 8 * 7);
    const Eigen::MatrixXd e = ffq::gram_matrix(bs, 16 * 7);
    CHECK((d - e).cwiseAbs().maxCoeff() < 1e-14);  // exact per span
}

TEST_CASE("second difference penalty for M=3") {
    const auto p = ffq::difference_penalty(3, 2);
    Eigen::MatrixXd expect(3, 3);
    expect << 1, -2, 1, -2, 4, -2, 1, -2, 1;
    CHECK((p.matrix - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("difference penalty annihilates constant and linear sequences") {
    const auto p = ffq::difference_penalty(7, 2);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(7);
    Eigen::VectorXd ramp(7);
    for (int i = 0; i < 7; ++i) ramp[i] = i + 1;
    CHECK((p.matrix * ones).norm() < 1e-10);
    CHECK((p.matrix * ramp).norm() < 1e-10);
}

TEST_CASE("difference penalty nullity and rank") {
    // eigendecomposition oracle
    for (int M : {4, 5, 6, 9}) {
        const auto p = ffq::difference_penalty(M, 2);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p.matrix, Eigen::EigenvaluesOnly);
        const double tol = 1e-8 * p.matrix.norm();
        int zeros = 0;
        for (int i = 0; i < M; ++i)
            if (std::abs(eig.eigenvalues()[i]) < tol) ++zeros;
        CHECK(zeros == 2);
    }
}

TEST_CASE("basis domain errors") {
    const auto b = BasisSystem::bspline(5, 0.0, 1.0, 2);
    CHECK_THROWS_AS((void)b.eval(1.5), ffq::domain_error);
    CHECK_THROWS_AS((void)b.eval(-0.1), ffq::domain_error);
    CHECK_NOTHROW((void)b.eval(1.0 + 1e-10));  // endpoint tolerance
}

TEST_CASE("size and precondition errors") {
    CHECK_THROWS_AS((void)ffq::difference_penalty(2, 2), ffq::dimension_error);
    CHECK_THROWS_AS((void)BasisSystem::bspline(2, 0.0, 1.0, 3), ffq::dimension_error);
    CHECK_THROWS_AS((void)BasisSystem::bspline(5, 1.0, 0.0, 2), ffq::validation_error);
    const auto b = BasisSystem::gaussian_rbf(4, 0.0, 1.0);
    CHECK_THROWS_AS((void)ffq::gram_matrix(b, 7), ffq::validation_error);
}
