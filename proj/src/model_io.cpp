#include "riskmix/model_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace riskmix {

namespace {

constexpr const char* kToolVersion = "riskmix 1.0.0";

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::isnan(v[i]))
            arr.push_back(nullptr);  // absent error bars and alike
        else
            arr.push_back(v[i]);
    }
    return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& arr, const std::string& what) {
    if (!arr.is_array()) throw std::invalid_argument("model file: '" + what + "' must be an array");
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i)
        v[i] = arr[i].is_null() ? std::numeric_limits<double>::quiet_NaN()
                                : arr[i].get<double>();
    return v;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        rows.push_back(vector_to_json(m.row(r).transpose()));
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows, const std::string& what) {
    if (!rows.is_array() || rows.empty())
        throw std::invalid_argument("model file: '" + what + "' must be a nonempty array");
    const Eigen::Index nc = static_cast<Eigen::Index>(rows[0].size());
    Eigen::MatrixXd m(rows.size(), nc);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Eigen::VectorXd row = vector_from_json(rows[r], what);
        if (row.size() != nc) throw std::invalid_argument("model file: ragged '" + what + "'");
        m.row(r) = row.transpose();
    }
    return m;
}

nlohmann::json normalization_to_json(const std::optional<Normalization>& normalization) {
    if (!normalization) return nullptr;
    return nlohmann::json{{"mean", vector_to_json(normalization->mean)},
                          {"sd", vector_to_json(normalization->sd)}};
}

std::optional<Normalization> normalization_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    Normalization norm;
    norm.mean = vector_from_json(j.at("mean"), "normalization.mean");
    norm.sd = vector_from_json(j.at("sd"), "normalization.sd");
    return norm;
}

nlohmann::json hazard_to_json(const HazardGrid& grid, const Eigen::MatrixXd& knots) {
    return nlohmann::json{{"t_min", grid.t_min},
                          {"t_max", grid.t_max},
                          {"resolution", grid.resolution},
                          {"knots", matrix_to_json(knots)}};
}

void hazard_from_json(const nlohmann::json& j, HazardGrid& grid, Eigen::MatrixXd& knots) {
    grid.t_min = j.at("t_min").get<double>();
    grid.t_max = j.at("t_max").get<double>();
    grid.resolution = j.at("resolution").get<int>();
    knots = matrix_from_json(j.at("knots"), "hazard.knots");
}

}  // namespace

nlohmann::json latent_model_to_json(const LatentClassModel& model,
                                    const std::optional<Normalization>& normalization) {
    nlohmann::json coef = nlohmann::json::array();
    for (const auto& m : model.coef) coef.push_back(matrix_to_json(m));
    return nlohmann::json{{"kind", "latent"},
                          {"dims",
                           {{"n_classes", model.n_classes},
                            {"n_risks", model.n_risks},
                            {"n_covariates", model.n_covariates},
                            {"resolution", model.grid.resolution}}},
                          {"weights", vector_to_json(model.weights)},
                          {"coefficients", coef},
                          {"free_censoring", model.free_censoring},
                          {"hazard", hazard_to_json(model.grid, model.knots)},
                          {"normalization", normalization_to_json(normalization)},
                          {"tool_version", kToolVersion}};
}

LatentClassModel latent_model_from_json(const nlohmann::json& j,
                                        std::optional<Normalization>* normalization) {
    if (j.at("kind").get<std::string>() != "latent")
        throw std::invalid_argument("model file: expected kind 'latent'");
    LatentClassModel model;
    const auto& dims = j.at("dims");
    model.n_classes = dims.at("n_classes").get<int>();
    model.n_risks = dims.at("n_risks").get<int>();
    model.n_covariates = dims.at("n_covariates").get<int>();
    model.weights = vector_from_json(j.at("weights"), "weights");
    model.free_censoring = j.at("free_censoring").get<bool>();
    const auto& coef = j.at("coefficients");
    if (!coef.is_array() || static_cast<int>(coef.size()) != model.n_risks + 1)
        throw std::invalid_argument("model file: expected R+1 coefficient matrices");
    for (const auto& m : coef) model.coef.push_back(matrix_from_json(m, "coefficients"));
    hazard_from_json(j.at("hazard"), model.grid, model.knots);
    if (model.grid.resolution != dims.at("resolution").get<int>())
        throw std::invalid_argument("model file: dims.resolution disagrees with hazard");
    if (normalization) *normalization = normalization_from_json(j.at("normalization"));
    model.validate();
    return model;
}

nlohmann::json gaussian_model_to_json(const GaussianFrailtyModel& model,
                                      const std::optional<Normalization>& normalization) {
    return nlohmann::json{{"kind", "gaussian"},
                          {"dims",
                           {{"n_risks", model.n_risks},
                            {"n_covariates", model.n_covariates},
                            {"resolution", model.grid.resolution}}},
                          {"means", matrix_to_json(model.means)},
                          {"covariance", matrix_to_json(model.covariance)},
                          {"mc_samples", model.mc_samples},
                          {"use_lower_bound", model.use_lower_bound},
                          {"hazard", hazard_to_json(model.grid, model.knots)},
                          {"normalization", normalization_to_json(normalization)},
                          {"tool_version", kToolVersion}};
}

GaussianFrailtyModel gaussian_model_from_json(const nlohmann::json& j,
                                              std::optional<Normalization>* normalization) {
    if (j.at("kind").get<std::string>() != "gaussian")
        throw std::invalid_argument("model file: expected kind 'gaussian'");
    GaussianFrailtyModel model;
    const auto& dims = j.at("dims");
    model.n_risks = dims.at("n_risks").get<int>();
    model.n_covariates = dims.at("n_covariates").get<int>();
    model.means = matrix_from_json(j.at("means"), "means");
    model.covariance = matrix_from_json(j.at("covariance"), "covariance");
    model.mc_samples = j.at("mc_samples").get<int>();
    model.use_lower_bound = j.at("use_lower_bound").get<bool>();
    hazard_from_json(j.at("hazard"), model.grid, model.knots);
    if (normalization) *normalization = normalization_from_json(j.at("normalization"));
    model.validate();
    return model;
}

ModelKind model_kind_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "latent") return ModelKind::latent;
    if (kind == "gaussian") return ModelKind::gaussian;
    throw std::invalid_argument("model file: unknown kind '" + kind + "'");
}

nlohmann::json error_bars_to_json(const ErrorBarReport& report) {
    return nlohmann::json{{"parameter_names", report.parameter_names},
                          {"sigma", vector_to_json(report.sigma)},
                          {"variance_diag", vector_to_json(report.variance_diag)},
                          {"condition_number",
                           std::isfinite(report.condition_number)
                               ? nlohmann::json(report.condition_number)
                               : nlohmann::json(nullptr)}};
}

nlohmann::json fit_report_to_json(const FitReport& report, std::uint64_t seed,
                                  const std::optional<Normalization>& normalization) {
    nlohmann::json j{{"psi", report.psi},
                     {"loglik", report.loglik},
                     {"n_par", report.n_par},
                     {"per_restart_psis", report.per_restart_psis},
                     {"effective_classes",
                      std::exp(-(report.model.weights.array() *
                                 report.model.weights.array().log()).sum())},
                     {"max_censoring_coef", report.max_censoring_coef},
                     {"wall_time_seconds", report.wall_time_seconds},
                     {"seed", seed},
                     {"model", latent_model_to_json(report.model, normalization)},
                     {"tool_version", kToolVersion}};
    j["error_bars"] = report.error_bars ? error_bars_to_json(*report.error_bars)
                                        : nlohmann::json(nullptr);
    return j;
}

nlohmann::json selection_report_to_json(const SelectionReport& report, std::uint64_t seed,
                                        const std::optional<Normalization>& normalization) {
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& cell : report.grid) {
        grid.push_back(nlohmann::json{{"n_classes", cell.n_classes},
                                      {"resolution", cell.resolution},
                                      {"psi", cell.ok ? nlohmann::json(cell.psi)
                                                      : nlohmann::json(nullptr)},
                                      {"effective_classes",
                                       cell.ok ? nlohmann::json(cell.effective_classes)
                                               : nlohmann::json(nullptr)},
                                      {"error", cell.ok ? nlohmann::json(nullptr)
                                                        : nlohmann::json(cell.error)}});
    }
    return nlohmann::json{{"grid", grid},
                          {"chosen", {{"n_classes", report.best_classes},
                                      {"resolution", report.best_resolution}}},
                          {"delta_psi", report.delta_psi},
                          {"delta_psi_per_n", report.delta_psi_per_n},
                          {"likelihood_ratio", report.likelihood_ratio},
                          {"best_fit", fit_report_to_json(report.best_fit, seed, normalization)},
                          {"tool_version", kToolVersion}};
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::string model_hash(const nlohmann::json& j) {
    const std::string s = dump_json(j);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

void atomic_write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
        out << content;
        if (!out) throw std::runtime_error("write failure on '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("cannot move '" + tmp + "' to '" + path + "'");
    }
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& err) {
        throw std::invalid_argument("'" + path + "': " + err.what());
    }
    return j;
}

}  // namespace riskmix
