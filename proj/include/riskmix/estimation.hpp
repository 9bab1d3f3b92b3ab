#pragma once

#include "riskmix/likelihood.hpp"
#include "riskmix/optimizer.hpp"

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace riskmix {

struct FitConfig {
    int restarts = 16;
    int simplex_max_iter = 20000;
    double simplex_tolerance = 1e-8;
    std::vector<double> randomization_schedule = {0.5,      0.25,      0.125,     0.0625,
                                                  0.03125,  0.015625,  0.0078125, 0.00390625};
    double init_coefficient_noise = 0.05;
    std::uint64_t rng_seed = 0;
    int threads = 1;
    bool free_censoring = false;
    bool compute_error_bars = true;
    bool verbose = true;  // per-round progress lines on stderr
    PenaltyConfig penalty;

    void validate() const;
};

// Map between a latent-class model and the transformed optimization vector:
// raw coefficient entries (class-1 frailties pinned at zero), L-1 weight
// logits against a fixed last logit, and log knot values. Knot rows of risks
// without observed events stay fixed at their initialization floor.
class LatentPacking {
public:
    LatentPacking(const LatentClassModel& shape, const Cohort& cohort);

    int dim() const { return dim_; }
    Eigen::VectorXd pack(const LatentClassModel& model) const;
    void unpack(const Eigen::VectorXd& x, LatentClassModel& model) const;
    std::vector<std::string> parameter_names() const;

private:
    int L_, R_, p_, K_;
    bool free_censoring_;
    std::vector<bool> knot_row_free_;
    int dim_;
};

struct ErrorBarReport {
    Eigen::VectorXd sigma;          // sqrt of the diagonal of C; NaN where flagged absent
    Eigen::VectorXd variance_diag;  // C_ii itself (the paper text reads "sigma_i ~ C_ii";
                                    // we report sqrt(C_ii) as the error bar and expose both)
    Eigen::MatrixXd covariance;
    double condition_number = 0.0;  // of the probe-built inverse covariance
    std::vector<std::string> parameter_names;
};

struct FitReport {
    LatentClassModel model;
    double psi = 0.0;
    double loglik = 0.0;
    long n_par = 0;
    std::vector<double> per_restart_psis;
    std::optional<ErrorBarReport> error_bars;
    double wall_time_seconds = 0.0;
    double max_censoring_coef = 0.0;  // diagnostic for --free-censoring runs
};

struct SelectionCell {
    int n_classes = 0;
    int resolution = 0;
    double psi = 0.0;
    double effective_classes = 0.0;
    bool ok = false;
    std::string error;
};

struct SelectionReport {
    std::vector<SelectionCell> grid;
    int best_classes = 0;
    int best_resolution = 0;
    FitReport best_fit;
    double delta_psi = 0.0;         // second best minus best
    double delta_psi_per_n = 0.0;
    double likelihood_ratio = 0.0;  // exp(delta_psi), clamped at DBL_MAX
};

// Stationary-rate initialization: every knot of risk r starts at
// (#events of type r)/(sum of times), coefficients get small symmetry-breaking
// Gaussian noise, weights are uniform.
LatentClassModel init_model(const Cohort& cohort, int n_classes, int resolution,
                            std::uint64_t noise_seed, double coefficient_noise = 0.05,
                            bool free_censoring = false);

FitReport fit_map(const Cohort& cohort, int n_classes, int resolution, const FitConfig& config);

SelectionReport select_model(const Cohort& cohort, const std::vector<int>& class_grid,
                             const std::vector<int>& resolution_grid, const FitConfig& config);

// Curvature of an objective at a minimum from forward probes at 10 epsilon
// values 1e-3 * 2^-(j-1), inverted to a covariance. Directions of vanishing
// or negative curvature are excluded; parameters loading on them get an
// absent (NaN) error bar.
ErrorBarReport curvature_error_bars(const Objective& objective, const Eigen::VectorXd& minimum,
                                    std::vector<std::string> parameter_names = {});

ErrorBarReport error_bars(const LatentClassModel& model_at_minimum, const Cohort& cohort,
                          const PenaltyConfig& penalty = {});

struct GaussianFitReport {
    GaussianFrailtyModel model;
    double psi = 0.0;
    double loglik = 0.0;  // Jensen lower bound
    long n_par = 0;
    std::vector<double> per_restart_psis;
    double wall_time_seconds = 0.0;
};

GaussianFitReport fit_map_gaussian(const Cohort& cohort, int resolution, const FitConfig& config);

}  // namespace riskmix
