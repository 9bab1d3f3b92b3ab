#pragma once

#include "riskmix/cohort.hpp"
#include "riskmix/model.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskmix {

class LikelihoodError : public std::runtime_error {
public:
    LikelihoodError(const std::string& what, Eigen::Index individual)
        : std::runtime_error(what + " (individual " + std::to_string(individual) + ")"),
          individual_(individual) {}
    Eigen::Index individual() const { return individual_; }

private:
    Eigen::Index individual_;
};

// Latent-class data log-likelihood evaluator. Construction precomputes the
// hazard-basis rows for all observed times (rates and cumulative rates are
// linear in the knot values), so repeated evaluations during optimization
// cost one pass over the cohort.
class LatentLikelihood {
public:
    LatentLikelihood(const Cohort& cohort, const HazardGrid& grid);

    // L_0 + L_risks with log-sum-exp stabilization of the class mixture.
    // Throws LikelihoodError when a per-individual term is NaN.
    double value(const LatentClassModel& model) const;

    // N x L matrix of log w_l + E_l(i), the unnormalized class log-joints;
    // row-wise normalization gives the retrospective class posterior.
    Eigen::MatrixXd class_log_joint(const LatentClassModel& model) const;

    const Cohort& cohort() const { return *cohort_; }
    const HazardGrid& grid() const { return grid_; }

private:
    const Cohort* cohort_;
    HazardGrid grid_;
    HazardBasisCache cache_;
    Eigen::MatrixXd zaug_;                       // N x (p+1), leading column of ones
    std::vector<std::vector<Eigen::Index>> by_label_;  // individuals per event label

    void accumulate(const LatentClassModel& model, Eigen::MatrixXd& joint) const;
};

double loglik_latent(const LatentClassModel& model, const Cohort& cohort);

// Closed-form Jensen lower bound on the Gaussian-frailty log-likelihood;
// equals the exact value when the covariance vanishes. Throws on an
// indefinite covariance.
double loglik_gaussian_lb(const GaussianFrailtyModel& model, const Cohort& cohort);

// Monte-Carlo evaluation of the R-dimensional Gaussian integral with common
// random numbers across individuals; deterministic under seed.
double loglik_gaussian_mc(const GaussianFrailtyModel& model, const Cohort& cohort,
                          std::uint64_t seed);

struct PenaltyConfig {
    bool gaussian_coefficient_prior = true;  // unit-variance zero-mean prior on coefficients
    bool aic_term = true;                    // n_par added to the negative objective
};

// -log prior up to a constant: 0.5 * sum of squared regression/frailty
// coefficients (flat priors on knots and weights contribute nothing).
double coefficient_penalty(const LatentClassModel& model);
double coefficient_penalty(const GaussianFrailtyModel& model);

// Psi = n_par - loglik - log prior; smaller is better.
double psi_objective(const LatentClassModel& model, const Cohort& cohort,
                     const PenaltyConfig& penalty = {});
double psi_objective(const LatentClassModel& model, const LatentLikelihood& evaluator,
                     const PenaltyConfig& penalty = {});
double psi_objective(const GaussianFrailtyModel& model, const Cohort& cohort,
                     const PenaltyConfig& penalty = {});

}  // namespace riskmix
