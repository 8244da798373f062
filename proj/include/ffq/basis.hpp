#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "ffq/errors.hpp"

namespace ffq {

enum class BasisKind { bspline, gaussian_rbf };

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& s);

// A family of M basis functions over a closed interval [lo, hi].
//
// B-splines are uniform: knots are equally spaced with spacing
// (hi-lo)/(M-degree) and extend past the domain, so every basis function is
// a shifted copy of the same bump and a coefficient sequence that is linear
// in its index represents an exactly linear function of t. That is what
// makes the order-2 coefficient difference penalty shrink fits toward the
// least-squares line.
//
// Gaussian RBFs phi_j(t) = exp(-(t - c_j)^2 / (2 width^2)) use equally
// spaced centers including both endpoints; when no width is given it is set
// so adjacent kernels cross at height 1/2.
//
// Immutable after construction; evaluation is reentrant.
class BasisSystem {
public:
    static BasisSystem bspline(int M, double lo, double hi, int degree = 3);
    // width <= 0 selects the half-height crossing rule.
    static BasisSystem gaussian_rbf(int M, double lo, double hi, double width = 0.0);

    BasisKind kind() const { return kind_; }
    int size() const { return M_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    int degree() const { return degree_; }
    double width() const { return width_; }
    // bspline: the M - degree - 1 interior knots; gaussian_rbf: the M centers.
    const std::vector<double>& knots_or_centers() const { return knots_or_centers_; }
    // spline degree for bsplines, kernel width for RBFs
    double degree_or_width() const;

    // Length-M vector of basis values; throws domain_error when t is outside
    // [lo, hi] beyond a small endpoint tolerance.
    Eigen::VectorXd eval(double t) const;
    // n x M design matrix with rows eval(times[i]).
    Eigen::MatrixXd eval_rows(const Eigen::VectorXd& times) const;

    bool operator==(const BasisSystem& other) const;

private:
    BasisSystem() = default;

    BasisKind kind_ = BasisKind::bspline;
    int M_ = 0;
    double lo_ = 0.0, hi_ = 1.0;
    int degree_ = 3;      // bspline only
    double width_ = 0.0;  // gaussian_rbf only
    std::vector<double> knots_or_centers_;

    double knot(int j) const;  // uniform knot tau_j = lo + (j - degree) * h
    Eigen::VectorXd eval_bspline(double t) const;
    Eigen::VectorXd eval_rbf(double t) const;
};

// Gram matrix Phi[j,k] = integral over [lo,hi] of phi_j(t) phi_k(t) dt,
// computed by composite 5-point Gauss-Legendre quadrature aligned with the
// knot spans (exact for products of splines up to degree 4). The
// quadrature_points budget controls the number of nodes; default 8M.
Eigen::MatrixXd gram_matrix(const BasisSystem& b, int quadrature_points = 0);

// Difference roughness penalty D^T D where D is the (M-order) x M
// finite-difference operator. Symmetric PSD with nullity == order.
struct PenaltyMatrix {
    int order = 2;
    Eigen::MatrixXd matrix;
};

PenaltyMatrix difference_penalty(int M, int order = 2);

}  // namespace ffq
