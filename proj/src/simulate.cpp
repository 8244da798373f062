#include "ffq/simulate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>

namespace ffq {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// splitmix64: decorrelates the per-replication stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Eigen::MatrixXd toeplitz(int m, double rho) {
    Eigen::MatrixXd t(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) t(i, j) = std::pow(rho, std::abs(i - j));
    return t;
}

// Wishart(df, scale) by the Bartlett decomposition.
class WishartStream {
public:
    WishartStream(int dim, int df, const Eigen::MatrixXd& scale, std::mt19937_64& eng)
        : dim_(dim), df_(df), chol_(scale.llt().matrixL()), eng_(eng) {}

    // next entry, consuming draws column-by-column
    double next() {
        if (pos_ >= static_cast<int>(dim_) * dim_) refill();
        const int j = pos_ / dim_;
        const int i = pos_ % dim_;
        ++pos_;
        return current_(i, j);
    }

private:
    void refill() {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim_, dim_);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int i = 0; i < dim_; ++i) {
            std::chi_squared_distribution<double> chi2(static_cast<double>(df_ - i));
            a(i, i) = std::sqrt(chi2(eng_));
            for (int j = 0; j < i; ++j) a(i, j) = normal(eng_);
        }
        const Eigen::MatrixXd la = chol_ * a;
        current_ = la * la.transpose();
        pos_ = 0;
    }

    int dim_, df_;
    Eigen::MatrixXd chol_;
    std::mt19937_64& eng_;
    Eigen::MatrixXd current_;
    int pos_ = std::numeric_limits<int>::max();
};

// PSD square root for sampling; tolerates singular covariances.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    return eig.eigenvectors() *
           eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

std::vector<double> SimConfig::effective_lambda_grid() const {
    if (!lambda_grid.empty()) return lambda_grid;
    std::vector<double> g;
    for (int e = -8; e <= -2; ++e) g.push_back(std::pow(10.0, e));
    return g;
}

void SimConfig::validate() const {
    if (n < 1 || n_t < 2 || replications < 1)
        throw validation_error("sim config: counts must be positive (n_t >= 2)");
    if (gen_M_x < 4 || gen_M_y < 4 || est_M_x < 2 || est_M_y < 4)
        throw validation_error("sim config: basis sizes too small");
    if (noise_nu1 < 0 || noise_nu2 < 0 || noise_nu3 < 0)
        throw validation_error("sim config: noise parameters must be >= 0");
    if (!(domain_lo < domain_hi)) throw validation_error("sim config: domain requires lo < hi");
    if (wishart_df < gen_M_x) throw validation_error("sim config: wishart_df must be >= gen_M_x");
}

GeneratedData generate_dataset(const SimConfig& cfg, int replication_index) {
    cfg.validate();
    std::mt19937_64 eng(mix_seed(cfg.seed, static_cast<std::uint64_t>(replication_index)));
    std::normal_distribution<double> normal(0.0, 1.0);

    const int n = cfg.n, nt = cfg.n_t, Mx = cfg.gen_M_x, My = cfg.gen_M_y;

    GeneratedData out;
    out.times.resize(nt);
    for (int j = 0; j < nt; ++j)
        out.times[j] = cfg.domain_lo + (cfg.domain_hi - cfg.domain_lo) * j / (nt - 1);

    const BasisSystem phi = BasisSystem::bspline(Mx, cfg.domain_lo, cfg.domain_hi, 3);
    const BasisSystem psi = BasisSystem::bspline(My, cfg.domain_lo, cfg.domain_hi, 3);
    const Eigen::MatrixXd phi_gram = gram_matrix(phi);
    const Eigen::MatrixXd psi_rows = psi.eval_rows(out.times);  // nt x My
    const Eigen::MatrixXd phi_rows = phi.eval_rows(out.times);  // nt x Mx

    // Coefficients: intercept 0; B and the interaction tensor filled
    // column-by-column from a stream of Wishart(df, Toeplitz) matrix entries.
    const Eigen::MatrixXd scale = toeplitz(Mx, cfg.toeplitz_rho);
    WishartStream wishart(Mx, cfg.wishart_df, scale, eng);
    Eigen::MatrixXd B(Mx, My);
    for (int c = 0; c < My; ++c)
        for (int r = 0; r < Mx; ++r) B(r, c) = wishart.next();
    CoefficientTensor gamma(Mx, My);
    for (int l = 0; l < My; ++l)
        for (int k = 0; k < Mx; ++k)
            for (int h = 0; h < Mx; ++h) gamma.at(h, k, l) = wishart.next();

    Eigen::MatrixXd theta_m(My, 1 + Mx + Mx * Mx);
    theta_m.col(0).setZero();
    theta_m.middleCols(1, Mx) = B.transpose();
    theta_m.rightCols(Mx * Mx) = matricize_mode3(gamma);
    const ThetaMatrix theta(theta_m, Mx, 2);

    // Subject scores w_i ~ N(0, Toeplitz)
    const Eigen::MatrixXd w_chol = toeplitz(Mx, cfg.toeplitz_rho).llt().matrixL();
    Eigen::MatrixXd w(n, Mx);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd xi(Mx);
        for (int k = 0; k < Mx; ++k) xi[k] = normal(eng);
        w.row(i) = (w_chol * xi).transpose();
    }

    // True mean curves g_i = Psi Theta z_i
    out.g.resize(n, nt);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd z = build_covariate(w.row(i).transpose(), phi_gram, 2);
        out.g.row(i) = (psi_rows * (theta.matrix() * z)).transpose();
    }

    // Response noise: one GP + white covariance shared by all subjects.
    Eigen::MatrixXd noise_cov(nt, nt);
    for (int a = 0; a < nt; ++a) {
        for (int b = 0; b <= a; ++b) {
            const double dt = out.times[a] - out.times[b];
            const double k = cfg.noise_nu1 * std::exp(-0.5 * cfg.noise_nu2 * dt * dt);
            noise_cov(a, b) = k;
            noise_cov(b, a) = k;
        }
        noise_cov(a, a) += cfg.noise_nu3;
    }
    const Eigen::MatrixXd noise_sqrt = psd_sqrt(noise_cov);
    out.y.resize(n, nt);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd xi(nt);
        for (int j = 0; j < nt; ++j) xi[j] = normal(eng);
        out.y.row(i) = out.g.row(i) + (noise_sqrt * xi).transpose();
    }

    // Predictor observations: clean curve values plus white noise.
    Eigen::MatrixXd x_clean = w * phi_rows.transpose();
    double sd = cfg.predictor_noise_sd;
    if (sd < 0.0) {
        const double mean = x_clean.mean();
        const double var =
            (x_clean.array() - mean).square().sum() / std::max(1, n * nt - 1);
        sd = 0.1 * std::sqrt(var);
    }
    out.x.resize(n, nt);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < nt; ++j) out.x(i, j) = x_clean(i, j) + sd * normal(eng);

    return out;
}

double ase(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predictions) {
    if (truth.rows() != predictions.rows() || truth.cols() != predictions.cols())
        throw dimension_error("ase: shape mismatch");
    return (truth - predictions).squaredNorm() /
           static_cast<double>(truth.rows() * truth.cols());
}

Baseline baseline_from_string(const std::string& s) {
    if (s == "F-INTER") return Baseline::F_INTER;
    if (s == "F-LIN") return Baseline::F_LIN;
    if (s == "INTER") return Baseline::INTER;
    if (s == "QUAD") return Baseline::QUAD;
    if (s == "LIN") return Baseline::LIN;
    throw validation_error("unknown baseline '" + s + "'");
}

std::string to_string(Baseline b) {
    switch (b) {
        case Baseline::F_INTER: return "F-INTER";
        case Baseline::F_LIN: return "F-LIN";
        case Baseline::INTER: return "INTER";
        case Baseline::QUAD: return "QUAD";
        case Baseline::LIN: return "LIN";
    }
    return "?";
}

AnalysisWorkspace prepare_analysis(const GeneratedData& data, const SimConfig& cfg) {
    const int n = static_cast<int>(data.x.rows());
    const int nt = static_cast<int>(data.x.cols());

    AnalysisWorkspace ws{
        BasisSystem::gaussian_rbf(cfg.est_M_x, cfg.domain_lo, cfg.domain_hi),
        BasisSystem::bspline(cfg.est_M_y, cfg.domain_lo, cfg.domain_hi, 3),
        {}, {}, {}, {}, {}, {}, {}};
    ws.predictor_gram = gram_matrix(ws.predictor_basis);

    LongitudinalDataset xset;
    xset.variable = "x";
    xset.domain_lo = cfg.domain_lo;
    xset.domain_hi = cfg.domain_hi;
    for (int i = 0; i < n; ++i)
        xset.subjects.push_back({std::to_string(i), data.times, data.x.row(i).transpose()});

    const RoughnessChoice rough = choose_roughness_gcv(xset, ws.predictor_basis);
    ws.curves = smooth_dataset(xset, ws.predictor_basis, rough.roughness);

    ws.response.variable = "y";
    ws.response.domain_lo = cfg.domain_lo;
    ws.response.domain_hi = cfg.domain_hi;
    for (int i = 0; i < n; ++i)
        ws.response.subjects.push_back(
            {std::to_string(i), data.times, data.y.row(i).transpose()});

    ws.subjects_p2 =
        assemble_subjects(ws.curves, ws.response, ws.response_basis, ws.predictor_gram, 2);
    ws.subjects_p1 =
        assemble_subjects(ws.curves, ws.response, ws.response_basis, ws.predictor_gram, 1);

    for (int order : {1, 2}) {
        QuadraticModelSpec spec;
        spec.M_x = cfg.est_M_x;
        spec.M_y = cfg.est_M_y;
        spec.order = order;
        spec.omega_x = difference_penalty(cfg.est_M_x, 2);
        spec.omega_y = difference_penalty(cfg.est_M_y, 2);
        spec.lambda = 0.0;
        (order == 2 ? ws.spec_p2 : ws.spec_p1) = spec;
    }
    (void)nt;
    return ws;
}

namespace {

Eigen::MatrixXd functional_predictions(const FittedModel& model,
                                       const std::vector<FunctionalCurve>& curves,
                                       const Eigen::VectorXd& times) {
    Eigen::MatrixXd pred(curves.size(), times.size());
    for (std::size_t i = 0; i < curves.size(); ++i)
        pred.row(i) = predict(model, curves[i], times).transpose();
    return pred;
}

// Minimum-norm least-squares fitted values for every output time at once:
// the projection of Y onto the column space of the feature matrix.
Eigen::MatrixXd projection_predictions(const Eigen::MatrixXd& features,
                                       const Eigen::MatrixXd& y) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(features, Eigen::ComputeThinU);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = 1e-10 * std::max(sv.maxCoeff(), 0.0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff) ++rank;
    const Eigen::MatrixXd u = svd.matrixU().leftCols(rank);
    return u * (u.transpose() * y);
}

Eigen::MatrixXd multivariate_features(const Eigen::MatrixXd& x, Baseline kind) {
    const int n = static_cast<int>(x.rows());
    const int nt = static_cast<int>(x.cols());
    if (kind == Baseline::LIN) return x;
    if (kind == Baseline::QUAD) {
        Eigen::MatrixXd f(n, 2 * nt);
        f.leftCols(nt) = x;
        f.rightCols(nt) = x.array().square();
        return f;
    }
    // INTER: raw values plus all unordered pairwise products
    Eigen::MatrixXd f(n, nt + nt * (nt + 1) / 2);
    f.leftCols(nt) = x;
    int c = nt;
    for (int j = 0; j < nt; ++j)
        for (int k = j; k < nt; ++k, ++c)
            f.col(c) = x.col(j).cwiseProduct(x.col(k));
    return f;
}

}  // namespace

Eigen::MatrixXd fit_baseline(Baseline kind, const GeneratedData& data, const SimConfig& cfg) {
    if (kind == Baseline::INTER || kind == Baseline::QUAD || kind == Baseline::LIN)
        return projection_predictions(multivariate_features(data.x, kind), data.y);

    AnalysisWorkspace ws = prepare_analysis(data, cfg);
    FitControls controls;
    controls.exec = Exec::serial;
    if (kind == Baseline::F_INTER) {
        const FittedModel model = fit(ws.subjects_p2, ws.spec_p2, ws.predictor_basis,
                                      ws.response_basis, ws.predictor_gram, controls);
        return functional_predictions(model, ws.curves, data.times);
    }
    const FittedModel model = fit(ws.subjects_p1, ws.spec_p1, ws.predictor_basis,
                                  ws.response_basis, ws.predictor_gram, controls);
    return functional_predictions(model, ws.curves, data.times);
}

void SimCell::recompute_stats() {
    double sum = 0.0;
    int count = 0;
    failures = 0;
    for (double a : ases) {
        if (std::isfinite(a)) {
            sum += a;
            ++count;
        } else {
            ++failures;
        }
    }
    mean = count > 0 ? sum / count : kNan;
    double ss = 0.0;
    for (double a : ases)
        if (std::isfinite(a)) ss += (a - mean) * (a - mean);
    sd = count > 1 ? std::sqrt(ss / (count - 1)) : kNan;
}

const SimCell* SimResultTable::find(const std::string& estimator) const {
    for (const auto& c : cells)
        if (c.estimator == estimator) return &c;
    return nullptr;
}

std::vector<std::string> default_estimators() {
    return {"F-INTER", "F-LIN",    "INTER",     "QUAD",     "LIN",
            "PMLE-GCV", "PMLE-mAIC", "PMLE-GIC", "PMLE-GBIC"};
}

SimResultTable run_study(const SimConfig& cfg, const std::vector<std::string>& estimators,
                         Exec exec) {
    cfg.validate();
    if (estimators.empty()) throw validation_error("run_study: no estimators requested");

    bool want_functional = false, want_pmle = false;
    std::vector<Criterion> pmle_criteria;
    for (const auto& e : estimators) {
        if (e == "F-INTER" || e == "F-LIN") want_functional = true;
        if (e.rfind("PMLE-", 0) == 0) {
            want_pmle = true;
            pmle_criteria.push_back(criterion_from_string(e.substr(5)));
        }
    }

    const int reps = cfg.replications;
    const int ne = static_cast<int>(estimators.size());
    Eigen::MatrixXd results = Eigen::MatrixXd::Constant(reps, ne, kNan);

    const std::vector<double> lgrid = cfg.effective_lambda_grid();

#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
    for (int rep = 0; rep < reps; ++rep) {
        try {
            const GeneratedData data = generate_dataset(cfg, rep);

            // Multivariate baselines straight from the raw grid values.
            for (int e = 0; e < ne; ++e) {
                const std::string& name = estimators[e];
                if (name == "INTER" || name == "QUAD" || name == "LIN") {
                    const Baseline kind = baseline_from_string(name);
                    results(rep, e) = ase(
                        data.g,
                        projection_predictions(multivariate_features(data.x, kind), data.y));
                }
            }

            if (!want_functional && !want_pmle) continue;
            const AnalysisWorkspace ws = prepare_analysis(data, cfg);
            FitControls controls;
            controls.exec = Exec::serial;  // replications are the parallel axis

            for (int e = 0; e < ne; ++e) {
                const std::string& name = estimators[e];
                try {
                    if (name == "F-INTER") {
                        const FittedModel model =
                            fit(ws.subjects_p2, ws.spec_p2, ws.predictor_basis,
                                ws.response_basis, ws.predictor_gram, controls);
                        results(rep, e) =
                            ase(data.g, functional_predictions(model, ws.curves, data.times));
                    } else if (name == "F-LIN") {
                        const FittedModel model =
                            fit(ws.subjects_p1, ws.spec_p1, ws.predictor_basis,
                                ws.response_basis, ws.predictor_gram, controls);
                        results(rep, e) =
                            ase(data.g, functional_predictions(model, ws.curves, data.times));
                    }
                } catch (const std::exception&) {
                    // recorded as a failed cell, not fatal
                }
            }

            if (want_pmle) {
                // One penalized fit per lambda, shared by every criterion.
                std::vector<FittedModel> fits;
                std::vector<CriterionReport> reports;
                FitControls pcontrols = controls;
                QuadraticModelSpec spec = ws.spec_p2;
                for (double lambda : lgrid) {
                    spec.lambda = lambda;
                    try {
                        FittedModel m = fit(ws.subjects_p2, spec, ws.predictor_basis,
                                            ws.response_basis, ws.predictor_gram, pcontrols);
                        pcontrols.nu_init = m.nu;
                        reports.push_back(evaluate_criteria(ws.subjects_p2, m,
                                                            QConvention::per_subject,
                                                            Exec::serial));
                        fits.push_back(std::move(m));
                    } catch (const std::exception&) {
                        // skip this grid point
                    }
                }
                for (int e = 0; e < ne; ++e) {
                    const std::string& name = estimators[e];
                    if (name.rfind("PMLE-", 0) != 0) continue;
                    const Criterion crit = criterion_from_string(name.substr(5));
                    double best_value = std::numeric_limits<double>::infinity();
                    int best_index = -1;
                    for (std::size_t k = 0; k < reports.size(); ++k) {
                        if (!reports[k].defined(crit)) continue;
                        const double v = reports[k].value(crit);
                        if (std::isfinite(v) && v < best_value) {
                            best_value = v;
                            best_index = static_cast<int>(k);
                        }
                    }
                    if (best_index >= 0)
                        results(rep, e) = ase(
                            data.g,
                            functional_predictions(fits[best_index], ws.curves, data.times));
                }
            }
        } catch (const std::exception&) {
            // whole replication failed; all its cells stay NaN
        }
    }

    SimResultTable table;
    for (int e = 0; e < ne; ++e) {
        SimCell cell;
        cell.estimator = estimators[e];
        cell.n = cfg.n;
        cell.nu3 = cfg.noise_nu3;
        cell.ases.assign(results.col(e).data(), results.col(e).data() + reps);
        cell.recompute_stats();
        table.cells.push_back(std::move(cell));
    }
    return table;
}

BoxplotStats boxplot_stats(std::vector<double> values) {
    values.erase(std::remove_if(values.begin(), values.end(),
                                [](double v) { return !std::isfinite(v); }),
                 values.end());
    if (values.empty()) return {kNan, kNan, kNan, kNan, kNan};
    std::sort(values.begin(), values.end());
    const auto quantile = [&](double p) {
        const double idx = p * (values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(idx));
        const std::size_t hi = static_cast<std::size_t>(std::ceil(idx));
        const double frac = idx - lo;
        return values[lo] * (1.0 - frac) + values[hi] * frac;
    };
    BoxplotStats s{};
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    const double iqr = s.q3 - s.q1;
    const double lo_fence = s.q1 - 1.5 * iqr;
    const double hi_fence = s.q3 + 1.5 * iqr;
    s.whisker_lo = values.front();
    s.whisker_hi = values.back();
    for (double v : values) {
        if (v >= lo_fence) {
            s.whisker_lo = v;
            break;
        }
    }
    for (auto it = values.rbegin(); it != values.rend(); ++it) {
        if (*it <= hi_fence) {
            s.whisker_hi = *it;
            break;
        }
    }
    return s;
}

}  // namespace ffq
