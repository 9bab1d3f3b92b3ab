#pragma once

#include "riskmix/cohort.hpp"
#include "riskmix/hazard.hpp"

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace riskmix {

// Right-continuous step function, value(t) = values[j] for the largest j
// with times[j] <= t, and initial_value before the first jump.
struct StepFunction {
    double initial_value = 1.0;
    std::vector<double> times;
    std::vector<double> values;

    double at(double t) const;
};

// Product-limit estimator for risk r; every other event type censors.
// Deaths are processed before censorings at tied times. A cohort without
// type-r events yields the constant 1 (flagged by an empty jump list).
StepFunction kaplan_meier(const Cohort& cohort, int risk);

struct CoxFit {
    Eigen::VectorXd coefficients;                          // length p, no intercept
    std::vector<std::pair<double, double>> baseline;       // (time, increment) at event times
    double partial_loglik = 0.0;
    bool converged = false;
    bool monotone_likelihood = false;  // perfect-separation flag
    Eigen::MatrixXd covariance;        // inverse observed information
};

// Partial-likelihood maximization (Newton with step halving, Breslow ties)
// plus the Breslow baseline increments.
CoxFit cox_fit(const Cohort& cohort, int primary_risk);

// Closed-form primary-risk log-likelihood of the gamma-frailty model:
// frailty exp(b0) with b0 log-gamma distributed, shape alpha, normalized so
// E[exp(b0)] = 1. Coefficients exclude the intercept.
double gamma_frailty_loglik(double alpha, const Eigen::VectorXd& coefficients,
                            const BaseHazard& base, const Cohort& cohort, int primary_risk = 1);

// Decontaminated survival and hazard of the gamma-frailty model.
double gamma_frailty_survival(double alpha, const Eigen::VectorXd& coefficients,
                              const BaseHazard& base, const Eigen::VectorXd& z, double t);
double gamma_frailty_hazard(double alpha, const Eigen::VectorXd& coefficients,
                            const BaseHazard& base, const Eigen::VectorXd& z, double t);

struct GammaFrailtyFit {
    double alpha = 1.0;
    Eigen::VectorXd coefficients;
    BaseHazard base;
    double loglik = 0.0;
};

// Simplex fit of (log alpha, coefficients, log knots); primarily a test
// fixture for the closed-form identities.
GammaFrailtyFit fit_gamma_frailty(const Cohort& cohort, int primary_risk, int resolution,
                                  std::uint64_t seed = 0);

}  // namespace riskmix
