#include "riskmix/cohort.hpp"

#include "riskmix/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace riskmix {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace
        const auto begin = field.find_first_not_of(" \t\r");
        const auto end = field.find_last_not_of(" \t\r");
        fields.push_back(begin == std::string::npos ? std::string()
                                                    : field.substr(begin, end - begin + 1));
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& s, int line_no, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("line " + std::to_string(line_no) + ": non-numeric " + what +
                                    " value '" + s + "'");
    }
}

}  // namespace

void Cohort::validate() const {
    const Eigen::Index n = times.size();
    if (labels.size() != n || covariates.rows() != n)
        throw std::invalid_argument("cohort: inconsistent row counts");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(times[i]) || times[i] < 0.0)
            throw std::invalid_argument("cohort: invalid event time at row " + std::to_string(i));
        if (labels[i] < 0 || labels[i] > n_risks)
            throw std::invalid_argument("cohort: event label out of range at row " +
                                        std::to_string(i));
    }
    if (!covariates.allFinite())
        throw std::invalid_argument("cohort: non-finite covariate value");
    if (normalization) {
        for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
            const double mean = covariates.col(j).mean();
            const double var = covariates.col(j).squaredNorm() / static_cast<double>(n) - mean * mean;
            if (std::abs(mean) > 1e-9 || std::abs(var - 1.0) > 1e-9)
                throw std::invalid_argument("cohort: column " + std::to_string(j) +
                                            " marked normalized but is not");
        }
    }
}

Cohort load_cohort(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("no records in '" + path + "'");
    const auto header = split_csv_line(line);

    int time_col = -1, event_col = -1;
    std::vector<int> covariate_cols;
    std::vector<std::string> covariate_names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& name = header[c];
        if (name == schema.time_column) {
            time_col = static_cast<int>(c);
        } else if (name == schema.event_column) {
            event_col = static_cast<int>(c);
        } else if (std::find(schema.exclude.begin(), schema.exclude.end(), name) ==
                   schema.exclude.end()) {
            covariate_cols.push_back(static_cast<int>(c));
            covariate_names.push_back(name);
        }
    }
    if (time_col < 0)
        throw std::invalid_argument("missing required column '" + schema.time_column + "'");
    if (event_col < 0)
        throw std::invalid_argument("missing required column '" + schema.event_column + "'");

    std::vector<double> times;
    std::vector<int> labels;
    std::vector<double> covariates;  // row-major
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " +
                                        std::to_string(fields.size()));
        const double t = parse_double(fields[time_col], line_no, "time");
        if (!std::isfinite(t) || t < 0.0)
            throw std::invalid_argument("line " + std::to_string(line_no) + ": negative time");
        const double ev = parse_double(fields[event_col], line_no, "event");
        const int r = static_cast<int>(std::llround(ev));
        if (static_cast<double>(r) != ev || r < 0)
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": event label must be an integer in {0,...,R}, got '" +
                                        fields[event_col] + "'");
        times.push_back(t);
        labels.push_back(r);
        for (int c : covariate_cols)
            covariates.push_back(parse_double(fields[c], line_no, "covariate '" + header[c] + "'"));
    }
    if (times.empty()) throw std::invalid_argument("no records in '" + path + "'");

    Cohort cohort;
    const Eigen::Index n = static_cast<Eigen::Index>(times.size());
    const Eigen::Index p = static_cast<Eigen::Index>(covariate_cols.size());
    cohort.times = Eigen::Map<Eigen::VectorXd>(times.data(), n);
    cohort.labels = Eigen::Map<Eigen::VectorXi>(labels.data(), n);
    cohort.covariates =
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            covariates.data(), n, p);
    cohort.covariate_names = covariate_names;
    cohort.n_risks = schema.n_risks_override.value_or(labels.empty() ? 0
                                                                     : *std::max_element(
                                                                           labels.begin(),
                                                                           labels.end()));
    if (cohort.n_risks < 1)
        throw std::invalid_argument("'" + path + "' contains no true-risk events");
    cohort.validate();
    return cohort;
}

void save_cohort_csv(const Cohort& cohort, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "time,event";
    for (Eigen::Index j = 0; j < cohort.n_covariates(); ++j) {
        if (j < static_cast<Eigen::Index>(cohort.covariate_names.size()))
            out << ',' << cohort.covariate_names[j];
        else
            out << ",z" << (j + 1);
    }
    out << '\n';
    out.precision(17);
    for (Eigen::Index i = 0; i < cohort.size(); ++i) {
        out << cohort.times[i] << ',' << cohort.labels[i];
        for (Eigen::Index j = 0; j < cohort.n_covariates(); ++j) out << ',' << cohort.covariates(i, j);
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failure on '" + path + "'");
}

Cohort normalize_covariates(const Cohort& cohort) {
    const Eigen::Index n = cohort.size();
    const Eigen::Index p = cohort.n_covariates();
    if (n == 0) throw std::invalid_argument("normalize_covariates: empty cohort");
    Cohort out = cohort;
    Normalization norm;
    norm.mean.resize(p);
    norm.sd.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double mean = cohort.covariates.col(j).mean();
        const double var =
            (cohort.covariates.col(j).array() - mean).square().sum() / static_cast<double>(n);
        if (var <= 0.0) {
            const std::string name = j < static_cast<Eigen::Index>(cohort.covariate_names.size())
                                         ? cohort.covariate_names[j]
                                         : "z" + std::to_string(j + 1);
            throw std::invalid_argument("covariate column '" + name + "' is constant");
        }
        const double sd = std::sqrt(var);
        out.covariates.col(j) = (cohort.covariates.col(j).array() - mean) / sd;
        norm.mean[j] = mean;
        norm.sd[j] = sd;
    }
    out.normalization = norm;
    return out;
}

void SyntheticSpec::validate() const {
    const int L = n_classes();
    const int R = n_risks();
    if (L < 1) throw std::invalid_argument("synthetic spec: need at least one class");
    if (R < 1) throw std::invalid_argument("synthetic spec: need at least one risk");
    if (n_individuals < 1) throw std::invalid_argument("synthetic spec: n_individuals must be >= 1");
    if (n_covariates < 0) throw std::invalid_argument("synthetic spec: negative covariate count");
    if (std::abs(class_weights.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("synthetic spec: class weights must sum to 1");
    if ((class_weights.array() < 0.0).any())
        throw std::invalid_argument("synthetic spec: negative class weight");
    if ((base_rates.array() <= 0.0).any())
        throw std::invalid_argument("synthetic spec: base rates must be positive");
    if (static_cast<int>(betas.size()) != L)
        throw std::invalid_argument("synthetic spec: betas must have one matrix per class");
    for (const auto& b : betas)
        if (b.rows() != R || b.cols() != n_covariates + 1)
            throw std::invalid_argument("synthetic spec: beta matrix must be R x (p+1)");
    if (censor_time && !(*censor_time > 0.0))
        throw std::invalid_argument("synthetic spec: censor_time must be positive");
}

SyntheticResult generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const int n = spec.n_individuals;
    const int p = spec.n_covariates;
    const int L = spec.n_classes();
    const int R = spec.n_risks();

    Rng rng(spec.rng_seed);
    SyntheticResult result;
    result.cohort.covariates.resize(n, p);
    result.cohort.times.resize(n);
    result.cohort.labels.resize(n);
    result.cohort.n_risks = R;
    result.true_class.resize(n);

    Eigen::VectorXd cumulative(L);
    double acc = 0.0;
    for (int l = 0; l < L; ++l) {
        acc += spec.class_weights[l];
        cumulative[l] = acc;
    }
    cumulative[L - 1] = 1.0;

    Eigen::VectorXd zaug(p + 1);
    zaug[0] = 1.0;
    for (int i = 0; i < n; ++i) {
        const double u_class = rng.uniform01();
        int cls = 0;
        while (cls < L - 1 && u_class >= cumulative[cls]) ++cls;
        result.true_class[i] = cls + 1;

        for (int j = 0; j < p; ++j) {
            const double z = rng.normal();
            result.cohort.covariates(i, j) = z;
            zaug[j + 1] = z;
        }

        double best_time = std::numeric_limits<double>::infinity();
        int best_risk = 0;
        for (int r = 0; r < R; ++r) {
            const double u = rng.uniform_pos();
            const double tau = std::exp(-spec.betas[cls].row(r).dot(zaug)) / spec.base_rates[r];
            const double t = -tau * std::log(u);
            if (t < best_time) {
                best_time = t;
                best_risk = r + 1;
            }
        }
        if (spec.censor_time && *spec.censor_time < best_time) {
            result.cohort.times[i] = *spec.censor_time;
            result.cohort.labels[i] = 0;
        } else {
            result.cohort.times[i] = best_time;
            result.cohort.labels[i] = best_risk;
        }
    }
    return result;
}

}  // namespace riskmix
