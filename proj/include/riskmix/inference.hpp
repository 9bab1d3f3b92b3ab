#pragma once

#include "riskmix/cohort.hpp"
#include "riskmix/model.hpp"

#include <Eigen/Dense>
#include <vector>

namespace riskmix {

// All covariate vectors z here are raw (length p); the frailty column of
// ones is appended internally.

// Survival of risk r with every other risk disabled:
//   S~_r(t|z) = sum_l w_l exp(-e^{beta_r^l . z} Lambda_r(t))
double decontaminated_survival(const LatentClassModel& model, int risk,
                               const Eigen::VectorXd& z, double t);

// -d/dt log S~_r, in closed form (class-weighted filtering of the rate).
double decontaminated_hazard(const LatentClassModel& model, int risk, const Eigen::VectorXd& z,
                             double t);

// Observed cause-specific rate among survivors, all risks active.
double crude_hazard(const LatentClassModel& model, int risk, const Eigen::VectorXd& z, double t);

// exp(-int_0^t crude_hazard), integrated with the 11-point/20-panel rule.
double crude_survival(const LatentClassModel& model, int risk, const Eigen::VectorXd& z, double t);

// Probability that the type-r event is the first observed by time t.
double cumulative_incidence(const LatentClassModel& model, int risk, const Eigen::VectorXd& z,
                            double t);

struct ClassPosterior {
    Eigen::MatrixXd probabilities;  // N x L rows on the simplex
    std::vector<int> assignment;    // 1-based argmax per individual
};

// Retrospective class membership from (t, r, z) per individual.
ClassPosterior class_posterior(const LatentClassModel& model, const Cohort& cohort);

// exp of the Shannon entropy of the class weights; zero weights contribute 0.
double effective_classes(const Eigen::VectorXd& weights);

// Fraction of individuals whose hard assignment matches their true label,
// maximized over relabelings of the fitted classes.
double correct_fraction(const ClassPosterior& posterior, const std::vector<int>& true_labels);

enum class Band { lower_quartile, upper_quartile, inter_quartile };
enum class CurveKind { decontaminated, crude, cumulative_incidence };

// z_Q with P(Z > z_Q) = 1/4 for a standard normal.
double quartile_point();

// Average of the requested curve over the standard-normal law of one
// covariate restricted to a quartile band (64-node Gauss-Legendre on the
// band, upper tail truncated at z=8); the remaining covariates sit at their
// normalized mean 0. Intended for models fit on normalized covariates.
std::vector<double> quantile_band_curve(const LatentClassModel& model, int risk,
                                        int covariate_index, Band band,
                                        const std::vector<double>& t_grid,
                                        CurveKind kind = CurveKind::decontaminated);

// Empirical alternative: average over the cohort members whose covariate
// falls in the band (band edges from empirical quartiles).
std::vector<double> band_curve_empirical(const LatentClassModel& model, int risk,
                                         int covariate_index, Band band,
                                         const std::vector<double>& t_grid, const Cohort& cohort,
                                         CurveKind kind = CurveKind::decontaminated);

// Whole-cohort curve: average of the per-member curves.
std::vector<double> cohort_average_curve(const LatentClassModel& model, int risk,
                                         const Cohort& cohort, const std::vector<double>& t_grid,
                                         CurveKind kind = CurveKind::decontaminated);

// Single-z curve on a time grid.
std::vector<double> point_curve(const LatentClassModel& model, int risk, const Eigen::VectorXd& z,
                                const std::vector<double>& t_grid,
                                CurveKind kind = CurveKind::decontaminated);

}  // namespace riskmix
