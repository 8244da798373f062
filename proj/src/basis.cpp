#include "ffq/basis.hpp"

#include <algorithm>
#include <cmath>

namespace ffq {

namespace {

// 5-point Gauss-Legendre rule on [-1, 1].
constexpr double kGlNode3 = 0.5384693101056831;   // sqrt(5 - 2 sqrt(10/7)) / 3
constexpr double kGlNode5 = 0.9061798459386640;   // sqrt(5 + 2 sqrt(10/7)) / 3
constexpr double kGlW0 = 128.0 / 225.0;
constexpr double kGlW3 = 0.4786286704993665;      // (322 + 13 sqrt(70)) / 900
constexpr double kGlW5 = 0.2369268850561891;      // (322 - 13 sqrt(70)) / 900
constexpr double kGlNodes[5] = {-kGlNode5, -kGlNode3, 0.0, kGlNode3, kGlNode5};
constexpr double kGlWeights[5] = {kGlW5, kGlW3, kGlW0, kGlW3, kGlW5};

double domain_tol(double lo, double hi) {
    return 1e-9 * std::max(1.0, hi - lo);
}

}  // namespace

std::string to_string(BasisKind kind) {
    return kind == BasisKind::bspline ? "bspline" : "gaussian_rbf";
}

BasisKind basis_kind_from_string(const std::string& s) {
    if (s == "bspline") return BasisKind::bspline;
    if (s == "gaussian_rbf") return BasisKind::gaussian_rbf;
    throw validation_error("unknown basis kind '" + s + "'");
}

BasisSystem BasisSystem::bspline(int M, double lo, double hi, int degree) {
    if (M < 2) throw dimension_error("bspline basis needs M >= 2");
    if (!(lo < hi)) throw validation_error("basis domain requires lo < hi");
    if (degree < 0) throw validation_error("bspline degree must be >= 0");
    if (M < degree + 1)
        throw dimension_error("bspline basis needs M >= degree + 1");
    BasisSystem b;
    b.kind_ = BasisKind::bspline;
    b.M_ = M;
    b.lo_ = lo;
    b.hi_ = hi;
    b.degree_ = degree;
    const double h = (hi - lo) / (M - degree);
    // interior knots + degree + 1 == M
    for (int j = 1; j < M - degree; ++j) b.knots_or_centers_.push_back(lo + j * h);
    return b;
}

BasisSystem BasisSystem::gaussian_rbf(int M, double lo, double hi, double width) {
    if (M < 2) throw dimension_error("gaussian_rbf basis needs M >= 2");
    if (!(lo < hi)) throw validation_error("basis domain requires lo < hi");
    BasisSystem b;
    b.kind_ = BasisKind::gaussian_rbf;
    b.M_ = M;
    b.lo_ = lo;
    b.hi_ = hi;
    b.degree_ = 0;
    const double spacing = (hi - lo) / (M - 1);
    if (width <= 0.0) {
        // adjacent kernels intersect at height 1/2:
        // exp(-(spacing/2)^2 / (2 w^2)) = 1/2
        width = spacing / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    }
    b.width_ = width;
    for (int j = 0; j < M; ++j) b.knots_or_centers_.push_back(lo + j * spacing);
    return b;
}

double BasisSystem::degree_or_width() const {
    return kind_ == BasisKind::bspline ? static_cast<double>(degree_) : width_;
}

bool BasisSystem::operator==(const BasisSystem& other) const {
    return kind_ == other.kind_ && M_ == other.M_ && lo_ == other.lo_ &&
           hi_ == other.hi_ && degree_ == other.degree_ && width_ == other.width_;
}

double BasisSystem::knot(int j) const {
    const double h = (hi_ - lo_) / (M_ - degree_);
    return lo_ + (j - degree_) * h;
}

Eigen::VectorXd BasisSystem::eval(double t) const {
    const double tol = domain_tol(lo_, hi_);
    if (t < lo_ - tol || t > hi_ + tol)
        throw domain_error("evaluation point outside basis domain");
    t = std::clamp(t, lo_, hi_);
    return kind_ == BasisKind::bspline ? eval_bspline(t) : eval_rbf(t);
}

// Cox-de Boor recursion on the uniform knot grid. Exactly degree+1 basis
// functions are nonzero at any t in the domain.
Eigen::VectorXd BasisSystem::eval_bspline(double t) const {
    const int d = degree_;
    const double h = (hi_ - lo_) / (M_ - d);
    int span = d + static_cast<int>(std::floor((t - lo_) / h));
    span = std::clamp(span, d, M_ - 1);

    Eigen::VectorXd N = Eigen::VectorXd::Zero(d + 1);
    std::vector<double> left(d + 1), right(d + 1);
    N[0] = 1.0;
    for (int j = 1; j <= d; ++j) {
        left[j] = t - knot(span + 1 - j);
        right[j] = knot(span + j) - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = N[r] / (right[r + 1] + left[j - r]);
            N[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        N[j] = saved;
    }

    Eigen::VectorXd out = Eigen::VectorXd::Zero(M_);
    out.segment(span - d, d + 1) = N;
    return out;
}

Eigen::VectorXd BasisSystem::eval_rbf(double t) const {
    Eigen::VectorXd out(M_);
    const double denom = 2.0 * width_ * width_;
    for (int j = 0; j < M_; ++j) {
        const double dt = t - knots_or_centers_[j];
        out[j] = std::exp(-dt * dt / denom);
    }
    return out;
}

Eigen::MatrixXd BasisSystem::eval_rows(const Eigen::VectorXd& times) const {
    Eigen::MatrixXd out(times.size(), M_);
    for (Eigen::Index i = 0; i < times.size(); ++i) out.row(i) = eval(times[i]).transpose();
    return out;
}

Eigen::MatrixXd gram_matrix(const BasisSystem& b, int quadrature_points) {
    const int M = b.size();
    if (quadrature_points == 0) quadrature_points = 8 * M;
    if (quadrature_points < 2 * M)
        throw validation_error("gram_matrix needs quadrature_points >= 2M");

    // Integration cells follow the knot spans for splines (the integrand is
    // polynomial per span) and the whole domain for RBFs.
    std::vector<double> edges;
    edges.push_back(b.lo());
    if (b.kind() == BasisKind::bspline)
        for (double k : b.knots_or_centers()) edges.push_back(k);
    edges.push_back(b.hi());

    const int n_cells = static_cast<int>(edges.size()) - 1;
    const int subdiv =
        std::max(1, (quadrature_points + 5 * n_cells - 1) / (5 * n_cells));

    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(M, M);
    for (int c = 0; c < n_cells; ++c) {
        const double cell_lo = edges[c];
        const double cell_h = (edges[c + 1] - edges[c]) / subdiv;
        for (int s = 0; s < subdiv; ++s) {
            const double a = cell_lo + s * cell_h;
            const double mid = a + 0.5 * cell_h;
            const double half = 0.5 * cell_h;
            for (int g = 0; g < 5; ++g) {
                const Eigen::VectorXd v = b.eval(mid + half * kGlNodes[g]);
                phi.selfadjointView<Eigen::Lower>().rankUpdate(v, half * kGlWeights[g]);
            }
        }
    }
    phi = phi.selfadjointView<Eigen::Lower>();
    return phi;
}

PenaltyMatrix difference_penalty(int M, int order) {
    if (M <= order) throw dimension_error("difference penalty needs M > order");
    // D row: order-th difference coefficients (-1)^(order-j) C(order, j)
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(M - order, M);
    std::vector<double> coef(order + 1);
    coef[0] = 1.0;
    for (int j = 1; j <= order; ++j)
        coef[j] = coef[j - 1] * static_cast<double>(order - j + 1) / j;
    for (int j = 0; j <= order; ++j)
        if ((order - j) % 2 != 0) coef[j] = -coef[j];
    for (int i = 0; i < M - order; ++i)
        for (int j = 0; j <= order; ++j) D(i, i + j) = coef[j];

    PenaltyMatrix p;
    p.order = order;
    p.matrix = D.transpose() * D;
    return p;
}

}  // namespace ffq
