// Command-line surface for the functional quadratic regression library:
// ingestion, smoothing, fitting, model selection, prediction, surface export
// and the Monte Carlo study. JSON config in, CSV/JSON artifacts out.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>

#include "ffq/io.hpp"
#include "ffq/parallel.hpp"
#include "ffq/selection.hpp"
#include "ffq/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct CliError {
    int code;
    std::string kind;
    std::string message;
};

void check_keys(const json& cfg, const std::set<std::string>& allowed,
                const std::string& where) {
    for (auto it = cfg.begin(); it != cfg.end(); ++it)
        if (allowed.find(it.key()) == allowed.end())
            throw ffq::validation_error("unknown key '" + it.key() + "' in " + where + " config");
}

std::string fmt(double v) { return ffq::io::format_double(v); }

// tool version, config hash and seed ride along in every artifact
json meta_json(const ffq::io::MetaHeader& meta) {
    return {{"tool_version", ffq::io::version()},
            {"config_hash", meta.config_hash},
            {"seed", meta.seed}};
}

void write_model(const fs::path& path, const ffq::FittedModel& model,
                 const ffq::io::MetaHeader& meta) {
    json doc = ffq::io::model_to_json(model);
    doc["meta"] = meta_json(meta);
    ffq::io::write_text(path.string(), doc.dump(2) + "\n");
}

ffq::BasisSystem basis_from_config(const json& j, double default_lo, double default_hi,
                                   const std::string& where) {
    check_keys(j, {"kind", "M", "domain", "degree_or_width"}, where);
    json full = j;
    if (!full.contains("domain")) full["domain"] = {default_lo, default_hi};
    return ffq::io::basis_from_json(full);
}

Eigen::VectorXd linspace(double lo, double hi, int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return v;
}

// Smooths one variable with a fixed roughness or a pooled GCV choice.
std::vector<ffq::FunctionalCurve> smooth_with_config(const ffq::LongitudinalDataset& data,
                                                     const ffq::BasisSystem& basis,
                                                     const json& cfg, double& roughness_used) {
    if (cfg.contains("smoothing_roughness") && !cfg.at("smoothing_roughness").is_null()) {
        roughness_used = cfg.at("smoothing_roughness").get<double>();
    } else {
        roughness_used = ffq::choose_roughness_gcv(data, basis).roughness;
    }
    return ffq::smooth_dataset(data, basis, roughness_used);
}

void write_surfaces(const ffq::FittedModel& model, const fs::path& out_dir,
                    const ffq::io::MetaHeader& meta, int grid_points, bool emit_json) {
    const auto& pb = model.predictor_basis;
    const auto& rb = model.response_basis;
    const Eigen::VectorXd gs = linspace(pb.lo(), pb.hi(), grid_points);
    const Eigen::VectorXd gt = linspace(rb.lo(), rb.hi(), grid_points);
    const ffq::SurfaceGrids surf = ffq::eval_surfaces(model.theta, pb, rb, gs, gt, gs);

    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < gt.size(); ++i) rows.push_back({fmt(gt[i]), fmt(surf.alpha[i])});
    ffq::io::write_csv((out_dir / "alpha.csv").string(), meta, {"t", "value"}, rows);

    rows.clear();
    for (int is = 0; is < gs.size(); ++is)
        for (int it = 0; it < gt.size(); ++it)
            rows.push_back({fmt(gs[is]), fmt(gt[it]), fmt(surf.beta(is, it))});
    ffq::io::write_csv((out_dir / "beta_grid.csv").string(), meta, {"s", "t", "value"}, rows);

    rows.clear();
    for (int ir = 0; ir < gs.size(); ++ir)
        for (int is = 0; is < gs.size(); ++is)
            for (int it = 0; it < gt.size(); ++it)
                rows.push_back(
                    {fmt(gs[ir]), fmt(gs[is]), fmt(gt[it]), fmt(surf.gamma.at(ir, is, it))});
    ffq::io::write_csv((out_dir / "gamma_grid.csv").string(), meta, {"r", "s", "t", "value"},
                       rows);

    if (emit_json) {
        json jalpha = {{"t", json::array()}, {"value", json::array()}};
        for (int i = 0; i < gt.size(); ++i) {
            jalpha["t"].push_back(gt[i]);
            jalpha["value"].push_back(surf.alpha[i]);
        }
        json jbeta = {{"s", json::array()}, {"t", json::array()}, {"value", json::array()}};
        for (int i = 0; i < gs.size(); ++i) jbeta["s"].push_back(gs[i]);
        for (int i = 0; i < gt.size(); ++i) jbeta["t"].push_back(gt[i]);
        for (int is = 0; is < gs.size(); ++is) {
            json row = json::array();
            for (int it = 0; it < gt.size(); ++it) row.push_back(surf.beta(is, it));
            jbeta["value"].push_back(row);
        }
        json jgamma = {{"r", jbeta["s"]}, {"s", jbeta["s"]}, {"t", jbeta["t"]},
                       {"value", json::array()}};
        for (int ir = 0; ir < gs.size(); ++ir) {
            json slice = json::array();
            for (int is = 0; is < gs.size(); ++is) {
                json row = json::array();
                for (int it = 0; it < gt.size(); ++it) row.push_back(surf.gamma.at(ir, is, it));
                slice.push_back(row);
            }
            jgamma["value"].push_back(slice);
        }
        json doc = {{"meta", meta_json(meta)},
                    {"alpha", jalpha},
                    {"beta", jbeta},
                    {"gamma", jgamma}};
        ffq::io::write_text((out_dir / "surfaces.json").string(), doc.dump(2) + "\n");
    }
}

struct FitArtifacts {
    ffq::FittedModel model;
    ffq::SubjectSet subjects;
    std::vector<ffq::FunctionalCurve> curves;
};

FitArtifacts run_fit_pipeline(const json& cfg) {
    double lo = 0.0, hi = 1.0;
    if (cfg.contains("domain")) {
        lo = cfg.at("domain").at(0).get<double>();
        hi = cfg.at("domain").at(1).get<double>();
    }
    const bool map_months = cfg.value("map_months_to_unit", false);

    const auto predictor = ffq::io::read_long_csv(cfg.at("predictor_csv").get<std::string>(),
                                                  "predictor", lo, hi, map_months);
    const auto response = ffq::io::read_long_csv(cfg.at("response_csv").get<std::string>(),
                                                 "response", lo, hi, map_months);
    if (predictor.subjects.size() != response.subjects.size())
        throw ffq::validation_error("predictor and response files disagree on subjects");

    const auto pbasis = cfg.contains("predictor_basis")
                            ? basis_from_config(cfg.at("predictor_basis"), lo, hi, "predictor_basis")
                            : ffq::BasisSystem::gaussian_rbf(7, lo, hi);
    const auto rbasis = cfg.contains("response_basis")
                            ? basis_from_config(cfg.at("response_basis"), lo, hi, "response_basis")
                            : ffq::BasisSystem::bspline(6, lo, hi, 3);

    double roughness = 0.0;
    auto curves = smooth_with_config(predictor, pbasis, cfg, roughness);
    const Eigen::MatrixXd gram = ffq::gram_matrix(pbasis);

    const int order = cfg.value("interaction_order", 2);
    const int penalty_order = cfg.value("penalty_order", 2);
    auto subjects = ffq::assemble_subjects(curves, response, rbasis, gram, order);

    ffq::QuadraticModelSpec spec;
    spec.M_x = pbasis.size();
    spec.M_y = rbasis.size();
    spec.order = order;
    spec.omega_x = ffq::difference_penalty(spec.M_x, penalty_order);
    spec.omega_y = ffq::difference_penalty(spec.M_y, penalty_order);
    spec.lambda = cfg.value("lambda", 0.0);

    ffq::FitControls controls;
    controls.max_outer = cfg.value("max_outer", 200);
    controls.tol = cfg.value("tol", 1e-6);

    auto model = ffq::fit(subjects, spec, pbasis, rbasis, gram, controls);
    return {std::move(model), std::move(subjects), std::move(curves)};
}

const std::set<std::string> kFitKeys = {
    "predictor_csv", "response_csv", "domain",          "map_months_to_unit",
    "predictor_basis", "response_basis", "lambda",      "interaction_order",
    "penalty_order", "smoothing_roughness", "surface_grid_points",
    "emit_surface_json", "seed", "max_outer", "tol"};

int cmd_fit(const json& cfg, const fs::path& out_dir, std::uint64_t seed) {
    check_keys(cfg, kFitKeys, "fit");
    FitArtifacts art = run_fit_pipeline(cfg);

    const ffq::io::MetaHeader meta{ffq::io::config_hash(cfg), seed};
    write_model(out_dir / "model.json", art.model, meta);

    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < art.subjects.size(); ++i) {
        const auto& s = art.subjects[i];
        const Eigen::VectorXd r = s.y - s.psi * (art.model.theta.matrix() * s.z);
        rows.push_back({std::to_string(i), std::to_string(s.y.size()), fmt(r.squaredNorm()),
                        fmt(std::sqrt(r.squaredNorm() / s.y.size()))});
    }
    ffq::io::write_csv((out_dir / "fit_report.csv").string(), meta,
                       {"subject", "n_obs", "rss", "rmse"}, rows);

    write_surfaces(art.model, out_dir, meta, cfg.value("surface_grid_points", 41),
                   cfg.value("emit_surface_json", false));

    std::cout << "fit: converged=" << (art.model.diagnostics.converged ? "true" : "false")
              << " iterations=" << art.model.diagnostics.iterations
              << " penalized_loglik=" << fmt(art.model.diagnostics.penalized_loglik) << "\n";
    return art.model.diagnostics.converged ? kExitOk : kExitNumerical;
}

int cmd_select(const json& cfg, const fs::path& out_dir, std::uint64_t seed) {
    std::set<std::string> keys = kFitKeys;
    keys.insert({"lambda_grid", "My_grid", "criterion", "q_convention"});
    keys.erase("lambda");
    check_keys(cfg, keys, "select");

    double lo = 0.0, hi = 1.0;
    if (cfg.contains("domain")) {
        lo = cfg.at("domain").at(0).get<double>();
        hi = cfg.at("domain").at(1).get<double>();
    }
    const bool map_months = cfg.value("map_months_to_unit", false);
    const auto predictor = ffq::io::read_long_csv(cfg.at("predictor_csv").get<std::string>(),
                                                  "predictor", lo, hi, map_months);
    const auto response = ffq::io::read_long_csv(cfg.at("response_csv").get<std::string>(),
                                                 "response", lo, hi, map_months);
    if (predictor.subjects.size() != response.subjects.size())
        throw ffq::validation_error("predictor and response files disagree on subjects");

    const auto pbasis = cfg.contains("predictor_basis")
                            ? basis_from_config(cfg.at("predictor_basis"), lo, hi, "predictor_basis")
                            : ffq::BasisSystem::gaussian_rbf(7, lo, hi);

    double roughness = 0.0;
    auto curves = smooth_with_config(predictor, pbasis, cfg, roughness);
    const Eigen::MatrixXd gram = ffq::gram_matrix(pbasis);

    ffq::SelectionGrid grid;
    grid.lambda_grid = cfg.at("lambda_grid").get<std::vector<double>>();
    grid.My_grid = cfg.at("My_grid").get<std::vector<int>>();
    grid.criterion = ffq::criterion_from_string(cfg.value("criterion", "GIC"));
    grid.penalty_order = cfg.value("penalty_order", 2);
    grid.interaction_order = cfg.value("interaction_order", 2);
    if (cfg.contains("response_basis")) {
        const auto& jb = cfg.at("response_basis");
        check_keys(jb, {"kind", "degree_or_width"}, "response_basis (select)");
        grid.response_kind = ffq::basis_kind_from_string(jb.value("kind", "bspline"));
        grid.response_degree_or_width =
            jb.value("degree_or_width", grid.response_kind == ffq::BasisKind::bspline ? 3.0 : 0.0);
    }
    const ffq::QConvention conv = cfg.value("q_convention", std::string("per_subject")) == "pooled"
                                      ? ffq::QConvention::pooled
                                      : ffq::QConvention::per_subject;

    ffq::FitControls controls;
    controls.max_outer = cfg.value("max_outer", 200);
    controls.tol = cfg.value("tol", 1e-6);

    const auto result =
        ffq::select_model(response, curves, pbasis, gram, grid, controls, conv);

    const ffq::io::MetaHeader meta{ffq::io::config_hash(cfg), seed};
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : result.table)
        rows.push_back({std::to_string(r.M_y), fmt(r.lambda), fmt(r.df), fmt(r.gcv),
                        fmt(r.maic), fmt(r.gic), fmt(r.gbic), r.converged ? "true" : "false"});
    ffq::io::write_csv((out_dir / "selection_report.csv").string(), meta,
                       {"M_y", "lambda", "df", "GCV", "mAIC", "GIC", "GBIC", "converged"}, rows);
    write_model(out_dir / "model.json", result.best, meta);

    std::cout << "select: best M_y=" << result.best_report.M_y
              << " lambda=" << fmt(result.best_report.lambda) << " "
              << to_string(grid.criterion) << "="
              << fmt(result.best_report.value(grid.criterion)) << "\n";
    return kExitOk;
}

int cmd_predict(const json& cfg, const fs::path& out_dir, std::uint64_t seed) {
    check_keys(cfg,
               {"model_json", "predictor_csv", "times", "grid_points", "map_months_to_unit",
                "smoothing_roughness", "seed"},
               "predict");
    const auto model =
        ffq::io::model_from_json(json::parse(ffq::io::read_text(cfg.at("model_json"))));

    const auto& pb = model.predictor_basis;
    const bool map_months = cfg.value("map_months_to_unit", false);
    const auto predictor = ffq::io::read_long_csv(cfg.at("predictor_csv").get<std::string>(),
                                                  "predictor", pb.lo(), pb.hi(), map_months);
    double roughness = 0.0;
    const auto curves = smooth_with_config(predictor, pb, cfg, roughness);

    Eigen::VectorXd times;
    if (cfg.contains("times")) {
        const auto tv = cfg.at("times").get<std::vector<double>>();
        times = Eigen::Map<const Eigen::VectorXd>(tv.data(), tv.size());
    } else {
        times = linspace(model.response_basis.lo(), model.response_basis.hi(),
                         cfg.value("grid_points", 21));
    }

    const ffq::io::MetaHeader meta{ffq::io::config_hash(cfg), seed};
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const Eigen::VectorXd yhat = ffq::predict(model, curves[i], times);
        for (int j = 0; j < times.size(); ++j)
            rows.push_back({predictor.subjects[i].id, fmt(times[j]), fmt(yhat[j])});
    }
    ffq::io::write_csv((out_dir / "predictions.csv").string(), meta,
                       {"subject_id", "time", "value"}, rows);
    std::cout << "predict: " << curves.size() << " subjects x " << times.size() << " times\n";
    return kExitOk;
}

int cmd_simulate(const json& cfg, const fs::path& out_dir, std::uint64_t seed) {
    check_keys(cfg,
               {"n", "nu3", "n_t", "replications", "seed", "estimators", "nu1", "nu2",
                "predictor_noise_sd", "toeplitz_rho", "wishart_df", "gen_M_x", "gen_M_y",
                "est_M_x", "est_M_y", "lambda_grid", "domain"},
               "simulate");

    const auto as_list = [](const json& v) {
        std::vector<double> out;
        if (v.is_array())
            for (const auto& e : v) out.push_back(e.get<double>());
        else
            out.push_back(v.get<double>());
        return out;
    };
    const std::vector<double> n_list = cfg.contains("n") ? as_list(cfg.at("n")) : std::vector<double>{50};
    const std::vector<double> nu3_list =
        cfg.contains("nu3") ? as_list(cfg.at("nu3")) : std::vector<double>{0.3};

    std::vector<std::string> estimators =
        cfg.contains("estimators") ? cfg.at("estimators").get<std::vector<std::string>>()
                                   : ffq::default_estimators();

    ffq::SimConfig base;
    base.seed = seed;
    base.n_t = cfg.value("n_t", 21);
    base.replications = cfg.value("replications", 100);
    base.noise_nu1 = cfg.value("nu1", 0.1);
    base.noise_nu2 = cfg.value("nu2", 10.0);
    base.predictor_noise_sd = cfg.value("predictor_noise_sd", -1.0);
    base.toeplitz_rho = cfg.value("toeplitz_rho", 0.5);
    base.wishart_df = cfg.value("wishart_df", 10);
    base.gen_M_x = cfg.value("gen_M_x", 7);
    base.gen_M_y = cfg.value("gen_M_y", 7);
    base.est_M_x = cfg.value("est_M_x", 7);
    base.est_M_y = cfg.value("est_M_y", 6);
    if (cfg.contains("lambda_grid"))
        base.lambda_grid = cfg.at("lambda_grid").get<std::vector<double>>();
    if (cfg.contains("domain")) {
        base.domain_lo = cfg.at("domain").at(0).get<double>();
        base.domain_hi = cfg.at("domain").at(1).get<double>();
    }

    ffq::SimResultTable merged;
    for (double nd : n_list) {
        for (double nu3 : nu3_list) {
            ffq::SimConfig c = base;
            c.n = static_cast<int>(nd);
            c.noise_nu3 = nu3;
            // distinct cells get distinct streams
            c.seed = seed + static_cast<std::uint64_t>(c.n) * 1000003ULL +
                     static_cast<std::uint64_t>(nu3 * 1e6);
            auto table = ffq::run_study(c, estimators);
            for (auto& cell : table.cells) merged.cells.push_back(std::move(cell));
        }
    }

    const ffq::io::MetaHeader meta{ffq::io::config_hash(cfg), seed};
    const std::vector<std::string> cols = {"estimator",    "n",     "nu3",
                                           "mean_ase_x10", "sd_x10", "replications",
                                           "failures"};
    std::vector<std::vector<std::string>> t1, t2, box;
    for (const auto& c : merged.cells) {
        const std::vector<std::string> row = {
            c.estimator,        std::to_string(c.n),           fmt(c.nu3),
            fmt(10.0 * c.mean), fmt(10.0 * c.sd),
            std::to_string(static_cast<int>(c.ases.size())),   std::to_string(c.failures)};
        if (c.estimator.rfind("PMLE-", 0) == 0)
            t2.push_back(row);
        else
            t1.push_back(row);
        const auto bs = ffq::boxplot_stats(c.ases);
        box.push_back({c.estimator, std::to_string(c.n), fmt(c.nu3), fmt(bs.whisker_lo),
                       fmt(bs.q1), fmt(bs.median), fmt(bs.q3), fmt(bs.whisker_hi)});
    }
    if (!t1.empty()) ffq::io::write_csv((out_dir / "table1.csv").string(), meta, cols, t1);
    if (!t2.empty()) ffq::io::write_csv((out_dir / "table2.csv").string(), meta, cols, t2);
    ffq::io::write_csv((out_dir / "boxplots.csv").string(), meta,
                       {"estimator", "n", "nu3", "whisker_lo", "q1", "median", "q3",
                        "whisker_hi"},
                       box);
    std::cout << "simulate: " << merged.cells.size() << " cells x " << base.replications
              << " replications\n";
    return kExitOk;
}

int cmd_smooth(const json& cfg, const fs::path& out_dir, std::uint64_t seed) {
    check_keys(cfg,
               {"input_csv", "variable", "domain", "map_months_to_unit", "basis",
                "smoothing_roughness", "grid_points", "seed"},
               "smooth");
    double lo = 0.0, hi = 1.0;
    if (cfg.contains("domain")) {
        lo = cfg.at("domain").at(0).get<double>();
        hi = cfg.at("domain").at(1).get<double>();
    }
    const auto data =
        ffq::io::read_long_csv(cfg.at("input_csv").get<std::string>(),
                               cfg.value("variable", "x"), lo, hi,
                               cfg.value("map_months_to_unit", false));
    const auto basis = cfg.contains("basis")
                           ? basis_from_config(cfg.at("basis"), lo, hi, "basis")
                           : ffq::BasisSystem::gaussian_rbf(7, lo, hi);
    double roughness = 0.0;
    const auto curves = smooth_with_config(data, basis, cfg, roughness);

    const ffq::io::MetaHeader meta{ffq::io::config_hash(cfg), seed};
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < curves.size(); ++i)
        for (int k = 0; k < curves[i].coefficients.size(); ++k)
            rows.push_back(
                {data.subjects[i].id, std::to_string(k), fmt(curves[i].coefficients[k])});
    ffq::io::write_csv((out_dir / "coefficients.csv").string(), meta,
                       {"subject_id", "coefficient", "value"}, rows);

    const int gp = cfg.value("grid_points", 0);
    if (gp > 0) {
        const Eigen::VectorXd grid = linspace(lo, hi, gp);
        std::vector<std::vector<std::string>> crows;
        for (std::size_t i = 0; i < curves.size(); ++i)
            for (int j = 0; j < grid.size(); ++j)
                crows.push_back({data.subjects[i].id, fmt(grid[j]),
                                 fmt(ffq::eval_curve(curves[i], grid[j]))});
        ffq::io::write_csv((out_dir / "curves.csv").string(), meta,
                           {"subject_id", "time", "value"}, crows);
    }
    std::cout << "smooth: " << curves.size() << " subjects, roughness=" << fmt(roughness)
              << "\n";
    return kExitOk;
}

CliError classify_error(const std::exception& e) {
    const std::string msg = e.what();
    if (dynamic_cast<const ffq::validation_error*>(&e) != nullptr) {
        if (msg.rfind("empty_dataset:", 0) == 0) return {kExitInput, "empty_dataset", msg};
        return {kExitInput, "validation", msg};
    }
    if (dynamic_cast<const ffq::domain_error*>(&e)) return {kExitInput, "domain", msg};
    if (dynamic_cast<const ffq::dimension_error*>(&e)) return {kExitInput, "dimension", msg};
    if (dynamic_cast<const ffq::rank_error*>(&e)) return {kExitNumerical, "rank", msg};
    if (dynamic_cast<const ffq::ill_conditioned_error*>(&e))
        return {kExitNumerical, "ill_conditioned", msg};
    if (dynamic_cast<const ffq::undefined_criterion_error*>(&e))
        return {kExitNumerical, "undefined_criterion", msg};
    if (dynamic_cast<const nlohmann::json::exception*>(&e))
        return {kExitInput, "config_parse", msg};
    return {kExitNumerical, "internal", msg};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"function-on-function quadratic regression"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed_flag = 0;
    bool seed_given = false;
    int threads = 0;

    for (const auto& name : {"fit", "select", "predict", "simulate", "smooth"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed_flag, "seed override")->each([&](const std::string&) {
            seed_given = true;
        });
        sub->add_option("--threads", threads, "worker thread count");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (threads > 0) ffq::parallel::set_threads(threads);
        const json cfg = json::parse(ffq::io::read_text(config_path));
        if (!cfg.is_object()) throw ffq::validation_error("config must be a JSON object");
        const std::uint64_t seed = seed_given ? seed_flag : cfg.value("seed", 1ULL);

        fs::path out(out_dir);
        fs::create_directories(out);

        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "fit") return cmd_fit(cfg, out, seed);
        if (cmd == "select") return cmd_select(cfg, out, seed);
        if (cmd == "predict") return cmd_predict(cfg, out, seed);
        if (cmd == "simulate") return cmd_simulate(cfg, out, seed);
        if (cmd == "smooth") return cmd_smooth(cfg, out, seed);
        return kExitInput;
    } catch (const std::exception& e) {
        const CliError err = classify_error(e);
        const json doc = {{"error", {{"kind", err.kind}, {"message", err.message}}}};
        std::cerr << doc.dump() << "\n";
        return err.code;
    }
}
