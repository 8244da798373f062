#include "ffq/smoothing.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <exception>
#include <limits>

namespace ffq {

std::size_t LongitudinalDataset::total_observations() const {
    std::size_t n = 0;
    for (const auto& s : subjects) n += static_cast<std::size_t>(s.times.size());
    return n;
}

void LongitudinalDataset::validate() const {
    if (!(domain_lo < domain_hi))
        throw validation_error("dataset '" + variable + "': domain requires lo < hi");
    if (subjects.empty())
        throw validation_error("dataset '" + variable + "': no subjects");
    const double tol = 1e-9 * std::max(1.0, domain_hi - domain_lo);
    for (const auto& s : subjects) {
        if (s.times.size() != s.values.size())
            throw validation_error("subject '" + s.id + "': times/values length mismatch");
        if (s.times.size() < 2)
            throw validation_error("subject '" + s.id + "': needs at least 2 observations");
        for (Eigen::Index j = 0; j < s.times.size(); ++j) {
            if (!std::isfinite(s.times[j]) || !std::isfinite(s.values[j]))
                throw validation_error("subject '" + s.id + "': non-finite entry");
            if (s.times[j] < domain_lo - tol || s.times[j] > domain_hi + tol)
                throw validation_error("subject '" + s.id + "': time outside declared domain");
            if (j > 0 && !(s.times[j] > s.times[j - 1]))
                throw validation_error("subject '" + s.id + "': times not strictly increasing");
        }
    }
}

FunctionalCurve smooth_curve(const Eigen::VectorXd& times, const Eigen::VectorXd& values,
                             const BasisSystem& basis, double roughness, int penalty_order) {
    if (times.size() != values.size())
        throw dimension_error("smooth_curve: times/values length mismatch");
    if (roughness < 0.0) throw validation_error("smooth_curve: roughness must be >= 0");

    const int M = basis.size();
    const Eigen::MatrixXd B = basis.eval_rows(times);
    const Eigen::MatrixXd P = difference_penalty(M, penalty_order).matrix;

    Eigen::MatrixXd A = B.transpose() * B + roughness * P;
    const Eigen::VectorXd rhs = B.transpose() * values;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    const Eigen::VectorXd d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (!(dmax > 0.0) || d.minCoeff() <= 1e-12 * dmax) {
        if (roughness == 0.0)
            throw rank_error(
                "smooth_curve: normal equations singular at roughness 0 "
                "(n_i < M or degenerate design); use a positive roughness");
        throw rank_error("smooth_curve: normal equations numerically singular");
    }

    FunctionalCurve c{ldlt.solve(rhs), basis};
    if (!c.coefficients.allFinite()) throw rank_error("smooth_curve: non-finite solution");
    return c;
}

double eval_curve(const FunctionalCurve& c, double t) {
    return c.basis.eval(t).dot(c.coefficients);
}

std::vector<double> default_roughness_grid() {
    std::vector<double> g;
    for (int e = -8; e <= 2; ++e) g.push_back(std::pow(10.0, e));
    return g;
}

RoughnessChoice choose_roughness_gcv(const LongitudinalDataset& data, const BasisSystem& basis,
                                     const std::vector<double>& grid, int penalty_order) {
    if (grid.empty()) throw validation_error("choose_roughness_gcv: empty grid");
    data.validate();
    const int M = basis.size();
    const Eigen::MatrixXd P = difference_penalty(M, penalty_order).matrix;

    // Cache per-subject design pieces; the grid loop only refactorizes.
    struct Piece {
        Eigen::MatrixXd B, BtB;
        Eigen::VectorXd Btv, v;
    };
    std::vector<Piece> pieces;
    pieces.reserve(data.subjects.size());
    for (const auto& s : data.subjects) {
        Piece p;
        p.B = basis.eval_rows(s.times);
        p.BtB = p.B.transpose() * p.B;
        p.Btv = p.B.transpose() * s.values;
        p.v = s.values;
        pieces.push_back(std::move(p));
    }
    const double N = static_cast<double>(data.total_observations());

    RoughnessChoice best;
    double best_score = std::numeric_limits<double>::infinity();
    for (double r : grid) {
        double rss = 0.0, df = 0.0;
        bool ok = true;
        for (const auto& p : pieces) {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(p.BtB + r * P);
            const Eigen::VectorXd d = ldlt.vectorD();
            const double dmax = d.cwiseAbs().maxCoeff();
            if (!(dmax > 0.0) || d.minCoeff() <= 1e-12 * dmax) {
                ok = false;
                break;
            }
            const Eigen::VectorXd w = ldlt.solve(p.Btv);
            rss += (p.v - p.B * w).squaredNorm();
            df += ldlt.solve(p.BtB).trace();
        }
        if (!ok || df >= N) continue;
        const double denom = 1.0 - df / N;
        const double score = (rss / N) / (denom * denom);
        if (score < best_score) {
            best_score = score;
            best = {r, score};
        }
    }
    if (!std::isfinite(best_score))
        throw rank_error("choose_roughness_gcv: no grid point gave a nonsingular fit");
    return best;
}

std::vector<FunctionalCurve> smooth_dataset(const LongitudinalDataset& data,
                                            const BasisSystem& basis, double roughness,
                                            int penalty_order) {
    data.validate();
    const int n = static_cast<int>(data.subjects.size());
    std::vector<FunctionalCurve> out(n, FunctionalCurve{Eigen::VectorXd(), basis});
    std::exception_ptr err;  // exceptions must not cross the parallel region
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        try {
            out[i] = smooth_curve(data.subjects[i].times, data.subjects[i].values, basis,
                                  roughness, penalty_order);
        } catch (...) {
#pragma omp critical(ffq_smooth_err)
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return out;
}

}  // namespace ffq
