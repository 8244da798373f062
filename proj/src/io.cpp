#include "ffq/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace ffq::io {

std::string version() { return "0.1.0"; }

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const nlohmann::json& config) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(config.dump())));
    return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    for (auto& f : fields) {
        const auto begin = f.find_first_not_of(" \t");
        const auto end = f.find_last_not_of(" \t");
        f = begin == std::string::npos ? "" : f.substr(begin, end - begin + 1);
    }
    return fields;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

}  // namespace

LongitudinalDataset read_long_csv(const std::string& path, const std::string& variable,
                                  double domain_lo, double domain_hi, bool map_months) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open input file '" + path + "'");

    struct Obs {
        double t, v;
    };
    std::vector<std::string> order;
    std::map<std::string, std::vector<Obs>> by_subject;

    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < 3) {
            if (first) {
                first = false;
                continue;
            }
            throw validation_error("malformed CSV row in '" + path + "': " + line);
        }
        double t, v;
        if (!parse_number(fields[1], t) || !parse_number(fields[2], v)) {
            if (first) {  // header row
                first = false;
                continue;
            }
            throw validation_error("non-numeric CSV row in '" + path + "': " + line);
        }
        first = false;
        if (map_months) t = domain_lo + (domain_hi - domain_lo) * (t - 1.0) / 11.0;
        auto it = by_subject.find(fields[0]);
        if (it == by_subject.end()) {
            order.push_back(fields[0]);
            it = by_subject.emplace(fields[0], std::vector<Obs>{}).first;
        }
        it->second.push_back({t, v});
    }
    if (order.empty())
        throw validation_error("empty_dataset: no data rows in '" + path + "'");

    LongitudinalDataset out;
    out.variable = variable;
    out.domain_lo = domain_lo;
    out.domain_hi = domain_hi;
    for (const auto& id : order) {
        auto obs = by_subject[id];
        std::stable_sort(obs.begin(), obs.end(),
                         [](const Obs& a, const Obs& b) { return a.t < b.t; });
        LongitudinalSubject s;
        s.id = id;
        s.times.resize(obs.size());
        s.values.resize(obs.size());
        for (std::size_t j = 0; j < obs.size(); ++j) {
            s.times[j] = obs[j].t;
            s.values[j] = obs[j].v;
        }
        out.subjects.push_back(std::move(s));
    }
    out.validate();
    return out;
}

void write_csv(const std::string& path, const MetaHeader& meta,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream os;
    os << "# ffq " << version() << "\n";
    os << "# config_hash: " << meta.config_hash << "\n";
    os << "# seed: " << meta.seed << "\n";
    for (std::size_t c = 0; c < columns.size(); ++c)
        os << columns[c] << (c + 1 < columns.size() ? "," : "\n");
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c)
            os << row[c] << (c + 1 < row.size() ? "," : "\n");
    write_text(path, os.str());
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot open file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot write file '" + path + "'");
    out << content;
}

nlohmann::json basis_to_json(const BasisSystem& basis) {
    return {{"kind", to_string(basis.kind())},
            {"M", basis.size()},
            {"domain", {basis.lo(), basis.hi()}},
            {"degree_or_width", basis.degree_or_width()}};
}

BasisSystem basis_from_json(const nlohmann::json& j) {
    const BasisKind kind = basis_kind_from_string(j.at("kind").get<std::string>());
    const int M = j.at("M").get<int>();
    const auto domain = j.at("domain");
    const double lo = domain.at(0).get<double>();
    const double hi = domain.at(1).get<double>();
    const double dw = j.value("degree_or_width", kind == BasisKind::bspline ? 3.0 : 0.0);
    return kind == BasisKind::bspline ? BasisSystem::bspline(M, lo, hi, static_cast<int>(dw))
                                      : BasisSystem::gaussian_rbf(M, lo, hi, dw);
}

nlohmann::json model_to_json(const FittedModel& model) {
    nlohmann::json theta = nlohmann::json::array();
    const Eigen::MatrixXd& m = model.theta.matrix();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        theta.push_back(row);
    }
    nlohmann::json trace = nlohmann::json::array();
    for (double v : model.diagnostics.objective_trace) trace.push_back(v);

    return {{"format", "ffq-model"},
            {"format_version", 1},
            {"predictor_basis", basis_to_json(model.predictor_basis)},
            {"response_basis", basis_to_json(model.response_basis)},
            {"spec",
             {{"M_x", model.spec.M_x},
              {"M_y", model.spec.M_y},
              {"interaction_order", model.spec.order},
              {"lambda", model.spec.lambda},
              {"penalty_order_x", model.spec.omega_x.order},
              {"penalty_order_y", model.spec.omega_y.order}}},
            {"theta", theta},
            {"nu", {{"nu1", model.nu.nu1}, {"nu2", model.nu.nu2}, {"nu3", model.nu.nu3}}},
            {"diagnostics",
             {{"iterations", model.diagnostics.iterations},
              {"penalized_loglik", model.diagnostics.penalized_loglik},
              {"converged", model.diagnostics.converged},
              {"rank_deficient", model.diagnostics.rank_deficient},
              {"nu_step_failure", model.diagnostics.nu_step_failure},
              {"objective_trace", trace}}}};
}

FittedModel model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "ffq-model")
        throw validation_error("not a model document (missing format marker)");
    const BasisSystem predictor = basis_from_json(j.at("predictor_basis"));
    const BasisSystem response = basis_from_json(j.at("response_basis"));

    QuadraticModelSpec spec;
    const auto& js = j.at("spec");
    spec.M_x = js.at("M_x").get<int>();
    spec.M_y = js.at("M_y").get<int>();
    spec.order = js.at("interaction_order").get<int>();
    spec.lambda = js.at("lambda").get<double>();
    spec.omega_x = difference_penalty(spec.M_x, js.value("penalty_order_x", 2));
    spec.omega_y = difference_penalty(spec.M_y, js.value("penalty_order_y", 2));

    const auto& jt = j.at("theta");
    Eigen::MatrixXd m(jt.size(), jt.at(0).size());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = jt.at(r).at(c).get<double>();

    NuParams nu{j.at("nu").at("nu1").get<double>(), j.at("nu").at("nu2").get<double>(),
                j.at("nu").at("nu3").get<double>()};

    FitDiagnostics diag;
    if (j.contains("diagnostics")) {
        const auto& jd = j.at("diagnostics");
        diag.iterations = jd.value("iterations", 0);
        diag.penalized_loglik = jd.value("penalized_loglik", 0.0);
        diag.converged = jd.value("converged", false);
        diag.rank_deficient = jd.value("rank_deficient", false);
        diag.nu_step_failure = jd.value("nu_step_failure", false);
        if (jd.contains("objective_trace"))
            for (const auto& v : jd.at("objective_trace"))
                diag.objective_trace.push_back(v.get<double>());
    }

    return FittedModel{ThetaMatrix(std::move(m), spec.M_x, spec.order),
                       nu,
                       spec,
                       predictor,
                       response,
                       gram_matrix(predictor),
                       diag};
}

}  // namespace ffq::io
