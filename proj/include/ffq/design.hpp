#pragma once

#include <Eigen/Core>
#include <vector>

#include "ffq/basis.hpp"

namespace ffq {

// Dimensions and penalties for the polynomial functional regression model.
// P = 1 + M_x + M_x^2 + ... + M_x^order covariate features per subject; the
// parameter matrix Theta is M_y x P.
struct QuadraticModelSpec {
    int M_x = 0;
    int M_y = 0;
    int order = 2;  // interaction order p; design assembly supports 1..3
    PenaltyMatrix omega_x;  // M_x x M_x PSD
    PenaltyMatrix omega_y;  // M_y x M_y PSD
    double lambda = 0.0;

    int P() const;
    void validate() const;
};

// Parameter matrix Theta (M_y x P). Column 0 holds the intercept-curve
// coefficients, columns 1..M_x the linear block B^T, and the remaining
// M_x^2 columns the mode-3 unfolding of the interaction tensor.
class ThetaMatrix {
public:
    ThetaMatrix(Eigen::MatrixXd m, int M_x, int order);
    static ThetaMatrix zero(int M_y, int M_x, int order);
    static ThetaMatrix from_vec(const Eigen::VectorXd& v, int M_y, int M_x, int order);

    const Eigen::MatrixXd& matrix() const { return m_; }
    int M_x() const { return M_x_; }
    int M_y() const { return static_cast<int>(m_.rows()); }
    int order() const { return order_; }
    int P() const { return static_cast<int>(m_.cols()); }

    Eigen::VectorXd alpha() const;        // M_y
    Eigen::MatrixXd b_matrix() const;     // M_x x M_y
    Eigen::MatrixXd gamma_mode3() const;  // M_y x M_x^2 (order >= 2)

    // Column-stacked vec, matching X_i = z_i^T (x) Psi_i.
    Eigen::VectorXd vec() const;

private:
    Eigen::MatrixXd m_;
    int M_x_;
    int order_;
};

// 3-way interaction coefficient array, M_x x M_x x M_y, entry (h, k, l).
class CoefficientTensor {
public:
    CoefficientTensor(int M_x, int M_y);
    int M_x() const { return M_x_; }
    int M_y() const { return M_y_; }
    double& at(int h, int k, int l);
    double at(int h, int k, int l) const;

private:
    int M_x_, M_y_;
    std::vector<double> data_;
};

// Mode-3 unfolding: out[l, k*M_x + h] = gamma(h, k, l); the first (mode-1)
// index varies fastest, matching the (left factor slowest) Kronecker
// convention used throughout.
Eigen::MatrixXd matricize_mode3(const CoefficientTensor& g);
CoefficientTensor tensorize_mode3(const Eigen::MatrixXd& m, int M_x, int M_y);

// z = (1, w^T Phi, (w (x) w)^T (Phi (x) Phi), ...) up to the requested order.
Eigen::VectorXd build_covariate(const Eigen::VectorXd& w, const Eigen::MatrixXd& phi_gram,
                                int order);

// X_i = z_i^T (x) Psi_i, an n_i x (P M_y) block with X_i vec(Theta) = Psi_i Theta z_i.
Eigen::MatrixXd build_design_block(const Eigen::VectorXd& z, const Eigen::MatrixXd& psi_rows);

// Composite penalty on vec(Theta):
//   Omega = Omega_x^* (x) I_{M_y} + I_P (x) Omega_y,
//   Omega_x^* = blockdiag{0, Omega_x, Omega_x (x) I + I (x) Omega_x, ...}
// so that vec(Theta)^T Omega vec(Theta) penalizes every coefficient block in
// each argument direction. Inputs must be PSD.
Eigen::MatrixXd build_penalty(const QuadraticModelSpec& spec);

struct Grid3 {
    int n_r = 0, n_s = 0, n_t = 0;
    std::vector<double> data;  // r fastest, then s, then t
    double& at(int ir, int is, int it) { return data[(it * n_s + is) * n_r + ir]; }
    double at(int ir, int is, int it) const { return data[(it * n_s + is) * n_r + ir]; }
};

struct SurfaceGrids {
    Eigen::VectorXd alpha;  // over grid_t
    Eigen::MatrixXd beta;   // grid_s x grid_t
    Grid3 gamma;            // grid_r x grid_s x grid_t
};

// Evaluates the intercept curve, the linear coefficient surface and the
// interaction coefficient hypersurface on the given grids (order-2 models).
SurfaceGrids eval_surfaces(const ThetaMatrix& theta, const BasisSystem& predictor_basis,
                           const BasisSystem& response_basis, const Eigen::VectorXd& grid_s,
                           const Eigen::VectorXd& grid_t, const Eigen::VectorXd& grid_r);

}  // namespace ffq
