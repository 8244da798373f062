#include "ffq/design.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace ffq {

namespace {

void require_psd(const Eigen::MatrixXd& m, const char* name) {
    if (m.rows() != m.cols()) throw validation_error(std::string(name) + " must be square");
    if (m.rows() == 0) return;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw validation_error(std::string(name) + " must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
        throw validation_error(std::string(name) + " must be positive semi-definite");
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Kronecker power of a vector, left factor's index varying slowest.
Eigen::VectorXd kron_power(const Eigen::VectorXd& v, int p) {
    Eigen::VectorXd out = v;
    for (int i = 1; i < p; ++i) {
        Eigen::VectorXd next(out.size() * v.size());
        for (Eigen::Index a = 0; a < out.size(); ++a)
            next.segment(a * v.size(), v.size()) = out[a] * v;
        out.swap(next);
    }
    return out;
}

}  // namespace

int QuadraticModelSpec::P() const {
    int p = 1, pow = 1;
    for (int k = 1; k <= order; ++k) {
        pow *= M_x;
        p += pow;
    }
    return p;
}

void QuadraticModelSpec::validate() const {
    if (M_x < 1 || M_y < 1) throw dimension_error("model spec needs M_x, M_y >= 1");
    if (order < 1 || order > 3)
        throw dimension_error("interaction order must be 1, 2 or 3");
    if (lambda < 0.0) throw validation_error("lambda must be >= 0");
    if (omega_x.matrix.rows() != M_x || omega_y.matrix.rows() != M_y)
        throw dimension_error("penalty matrix sizes must match M_x / M_y");
    require_psd(omega_x.matrix, "omega_x");
    require_psd(omega_y.matrix, "omega_y");
}

ThetaMatrix::ThetaMatrix(Eigen::MatrixXd m, int M_x, int order)
    : m_(std::move(m)), M_x_(M_x), order_(order) {
    QuadraticModelSpec s;
    s.M_x = M_x;
    s.M_y = static_cast<int>(m_.rows());
    s.order = order;
    if (m_.cols() != s.P()) throw dimension_error("ThetaMatrix: column count != P");
    if (!m_.allFinite()) throw validation_error("ThetaMatrix: non-finite entries");
}

ThetaMatrix ThetaMatrix::zero(int M_y, int M_x, int order) {
    QuadraticModelSpec s;
    s.M_x = M_x;
    s.M_y = M_y;
    s.order = order;
    return ThetaMatrix(Eigen::MatrixXd::Zero(M_y, s.P()), M_x, order);
}

ThetaMatrix ThetaMatrix::from_vec(const Eigen::VectorXd& v, int M_y, int M_x, int order) {
    QuadraticModelSpec s;
    s.M_x = M_x;
    s.M_y = M_y;
    s.order = order;
    const int P = s.P();
    if (v.size() != static_cast<Eigen::Index>(P) * M_y)
        throw dimension_error("ThetaMatrix::from_vec: wrong length");
    Eigen::MatrixXd m(M_y, P);
    for (int j = 0; j < P; ++j) m.col(j) = v.segment(static_cast<Eigen::Index>(j) * M_y, M_y);
    return ThetaMatrix(std::move(m), M_x, order);
}

Eigen::VectorXd ThetaMatrix::alpha() const { return m_.col(0); }

Eigen::MatrixXd ThetaMatrix::b_matrix() const {
    if (order_ < 1) throw dimension_error("no linear block");
    return m_.middleCols(1, M_x_).transpose();
}

Eigen::MatrixXd ThetaMatrix::gamma_mode3() const {
    if (order_ < 2) throw dimension_error("no interaction block");
    return m_.middleCols(1 + M_x_, M_x_ * M_x_);
}

Eigen::VectorXd ThetaMatrix::vec() const {
    Eigen::VectorXd v(m_.size());
    for (int j = 0; j < m_.cols(); ++j)
        v.segment(static_cast<Eigen::Index>(j) * m_.rows(), m_.rows()) = m_.col(j);
    return v;
}

CoefficientTensor::CoefficientTensor(int M_x, int M_y)
    : M_x_(M_x), M_y_(M_y), data_(static_cast<std::size_t>(M_x) * M_x * M_y, 0.0) {
    if (M_x < 1 || M_y < 1) throw dimension_error("CoefficientTensor: sizes must be >= 1");
}

double& CoefficientTensor::at(int h, int k, int l) {
    return data_[(static_cast<std::size_t>(l) * M_x_ + k) * M_x_ + h];
}

double CoefficientTensor::at(int h, int k, int l) const {
    return data_[(static_cast<std::size_t>(l) * M_x_ + k) * M_x_ + h];
}

Eigen::MatrixXd matricize_mode3(const CoefficientTensor& g) {
    const int M = g.M_x();
    Eigen::MatrixXd out(g.M_y(), M * M);
    for (int l = 0; l < g.M_y(); ++l)
        for (int k = 0; k < M; ++k)
            for (int h = 0; h < M; ++h) out(l, k * M + h) = g.at(h, k, l);
    return out;
}

CoefficientTensor tensorize_mode3(const Eigen::MatrixXd& m, int M_x, int M_y) {
    if (m.rows() != M_y || m.cols() != static_cast<Eigen::Index>(M_x) * M_x)
        throw dimension_error("tensorize_mode3: shape mismatch");
    CoefficientTensor g(M_x, M_y);
    for (int l = 0; l < M_y; ++l)
        for (int k = 0; k < M_x; ++k)
            for (int h = 0; h < M_x; ++h) g.at(h, k, l) = m(l, k * M_x + h);
    return g;
}

Eigen::VectorXd build_covariate(const Eigen::VectorXd& w, const Eigen::MatrixXd& phi_gram,
                                int order) {
    const int M = static_cast<int>(w.size());
    if (phi_gram.rows() != M || phi_gram.cols() != M)
        throw dimension_error("build_covariate: gram matrix must be M_x x M_x");
    if (order < 1 || order > 3) throw dimension_error("build_covariate: order must be 1..3");

    // (w (x) ... (x) w)^T (Phi (x) ... (x) Phi) = (Phi w) (x) ... (x) (Phi w)
    const Eigen::VectorXd u = phi_gram * w;

    int P = 1, pow = 1;
    for (int k = 1; k <= order; ++k) {
        pow *= M;
        P += pow;
    }
    Eigen::VectorXd z(P);
    z[0] = 1.0;
    int offset = 1;
    for (int k = 1; k <= order; ++k) {
        const Eigen::VectorXd uk = kron_power(u, k);
        z.segment(offset, uk.size()) = uk;
        offset += static_cast<int>(uk.size());
    }
    return z;
}

Eigen::MatrixXd build_design_block(const Eigen::VectorXd& z, const Eigen::MatrixXd& psi_rows) {
    const Eigen::Index n = psi_rows.rows();
    const Eigen::Index My = psi_rows.cols();
    Eigen::MatrixXd X(n, z.size() * My);
    for (Eigen::Index j = 0; j < z.size(); ++j) X.middleCols(j * My, My) = z[j] * psi_rows;
    return X;
}

Eigen::MatrixXd build_penalty(const QuadraticModelSpec& spec) {
    spec.validate();
    const int Mx = spec.M_x;
    const int My = spec.M_y;
    const int P = spec.P();
    const Eigen::MatrixXd& Ox = spec.omega_x.matrix;
    const Eigen::MatrixXd& Oy = spec.omega_y.matrix;
    const Eigen::MatrixXd Ix = Eigen::MatrixXd::Identity(Mx, Mx);

    // blockdiag{0, Omega_x, sum over slots of I (x) ... Omega_x ... (x) I, ...}
    Eigen::MatrixXd Oxstar = Eigen::MatrixXd::Zero(P, P);
    int offset = 1;
    for (int k = 1; k <= spec.order; ++k) {
        int dim = 1;
        for (int i = 0; i < k; ++i) dim *= Mx;
        Eigen::MatrixXd block = Eigen::MatrixXd::Zero(dim, dim);
        for (int slot = 0; slot < k; ++slot) {
            Eigen::MatrixXd term = (slot == 0) ? Ox : Ix;
            for (int i = 1; i < k; ++i) term = kron(term, (slot == i) ? Ox : Ix);
            block += term;
        }
        Oxstar.block(offset, offset, dim, dim) = block;
        offset += dim;
    }

    const Eigen::MatrixXd Iy = Eigen::MatrixXd::Identity(My, My);
    const Eigen::MatrixXd Ip = Eigen::MatrixXd::Identity(P, P);
    return kron(Oxstar, Iy) + kron(Ip, Oy);
}

SurfaceGrids eval_surfaces(const ThetaMatrix& theta, const BasisSystem& predictor_basis,
                           const BasisSystem& response_basis, const Eigen::VectorXd& grid_s,
                           const Eigen::VectorXd& grid_t, const Eigen::VectorXd& grid_r) {
    if (theta.order() != 2)
        throw dimension_error("eval_surfaces: surfaces defined for order-2 models");
    const int Mx = theta.M_x();

    const Eigen::MatrixXd phi_s = predictor_basis.eval_rows(grid_s);  // n_s x M_x
    const Eigen::MatrixXd phi_r = predictor_basis.eval_rows(grid_r);  // n_r x M_x
    const Eigen::MatrixXd psi_t = response_basis.eval_rows(grid_t);   // n_t x M_y

    SurfaceGrids out;
    out.alpha = psi_t * theta.alpha();
    out.beta = phi_s * theta.b_matrix() * psi_t.transpose();

    const Eigen::MatrixXd gpsi = theta.gamma_mode3().transpose() * psi_t.transpose();  // M_x^2 x n_t
    out.gamma.n_r = static_cast<int>(grid_r.size());
    out.gamma.n_s = static_cast<int>(grid_s.size());
    out.gamma.n_t = static_cast<int>(grid_t.size());
    out.gamma.data.assign(static_cast<std::size_t>(out.gamma.n_r) * out.gamma.n_s * out.gamma.n_t,
                          0.0);
    for (int it = 0; it < out.gamma.n_t; ++it) {
        for (int is = 0; is < out.gamma.n_s; ++is) {
            for (int ir = 0; ir < out.gamma.n_r; ++ir) {
                // {phi(s) (x) phi(r)}^T Gamma_(3)^T psi(t)
                double acc = 0.0;
                for (int k = 0; k < Mx; ++k)
                    for (int h = 0; h < Mx; ++h)
                        acc += phi_s(is, k) * phi_r(ir, h) * gpsi(k * Mx + h, it);
                out.gamma.at(ir, is, it) = acc;
            }
        }
    }
    return out;
}

}  // namespace ffq
