#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace riskmix {

// Per-covariate linear rescaling that was applied to a cohort.
struct Normalization {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;  // population (1/N) standard deviation
};

// Survival data: one row per individual, event label 0 means end-of-trial
// censoring, labels 1..n_risks are true risks.
struct Cohort {
    Eigen::MatrixXd covariates;  // N x p
    Eigen::VectorXd times;       // N, nonnegative event/censoring times
    Eigen::VectorXi labels;      // N, values in {0,...,n_risks}
    int n_risks = 0;
    std::vector<std::string> covariate_names;
    std::optional<Normalization> normalization;

    Eigen::Index size() const { return times.size(); }
    Eigen::Index n_covariates() const { return covariates.cols(); }

    // Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

struct CsvSchema {
    std::string time_column = "time";
    std::string event_column = "event";
    std::vector<std::string> exclude;       // columns to skip entirely
    std::optional<int> n_risks_override;    // default: max observed label
};

Cohort load_cohort(const std::string& path, const CsvSchema& schema = {});
void save_cohort_csv(const Cohort& cohort, const std::string& path);

// Rescale every covariate column to zero mean and unit (population) variance.
// The applied (mean, sd) pairs are stored on the result. Throws on a constant
// column, naming it.
Cohort normalize_covariates(const Cohort& cohort);

// Generator for latent-class proportional-hazards cohorts with constant base
// rates: per individual, class ~ class_weights, covariates i.i.d. standard
// normal, latent time per risk t = -tau log u with
// tau = exp(-beta . (1,z)) / rate; the observed pair is the earliest latent
// time, replaced by (censor_time, 0) when the horizon comes first.
struct SyntheticSpec {
    Eigen::VectorXd class_weights;          // L, sums to 1
    std::vector<Eigen::MatrixXd> betas;     // per class: R x (p+1), column 0 = frailty
    Eigen::VectorXd base_rates;             // R, all > 0
    std::optional<double> censor_time;
    int n_individuals = 0;
    int n_covariates = 0;
    std::uint64_t rng_seed = 0;

    int n_classes() const { return static_cast<int>(class_weights.size()); }
    int n_risks() const { return static_cast<int>(base_rates.size()); }
    void validate() const;
};

struct SyntheticResult {
    Cohort cohort;
    std::vector<int> true_class;  // 1-based class labels
};

// Deterministic under spec.rng_seed. Draw order per individual: one uniform
// for the class, p normals for covariates, R uniforms for latent times.
SyntheticResult generate_synthetic(const SyntheticSpec& spec);

}  // namespace riskmix
