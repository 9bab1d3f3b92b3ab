#pragma once

#include "riskmix/hazard.hpp"

#include <Eigen/Dense>
#include <vector>

namespace riskmix {

enum class ModelKind { latent, gaussian };

// Number of free parameters entering the AIC term:
//   latent:   R L (p+1) + K R + L - 1
//   gaussian: (p+1)^2 R^2 / 2 + 3 (p+1) R / 2 + K R
long n_params(ModelKind kind, long n_classes, long resolution, long n_risks, long n_covariates);

// Finite mixture of proportional-hazards sub-cohorts. Class l has one
// coefficient vector (frailty first, then p regression entries) per risk;
// base hazards are shared across classes, one per risk including the
// end-of-trial risk r=0. Identifiability: the class-1 frailty of every risk
// is pinned at zero. Censoring coefficients are structurally zero unless
// free_censoring is set.
struct LatentClassModel {
    int n_classes = 1;     // L
    int n_risks = 1;       // R (true risks)
    int n_covariates = 0;  // p

    Eigen::VectorXd weights;             // L, on the simplex
    std::vector<Eigen::MatrixXd> coef;   // size R+1; coef[r] is L x (p+1), row l = beta_r^l
    bool free_censoring = false;         // when false, coef[0] must be all zero

    HazardGrid grid;
    Eigen::MatrixXd knots;  // (R+1) x (K+1), row r = knot values of risk r

    BaseHazard base_hazard(int r) const;
    void validate() const;
};

// Sort classes by descending weight (ties: lexicographic coefficients) so
// repeated fits compare equal. Does not touch the frailty pinning, which is
// a property of the packed parametrization, not of the model value.
void canonicalize_classes(LatentClassModel& model);

// Unimodal alternative: coefficients of all risks jointly Gaussian with mean
// rows means.row(r-1) and (p+1)R x (p+1)R covariance C; block (r,r') of C
// couples risks r and r'.
struct GaussianFrailtyModel {
    int n_risks = 1;
    int n_covariates = 0;

    Eigen::MatrixXd means;       // R x (p+1)
    Eigen::MatrixXd covariance;  // (p+1)R square, symmetric PSD

    HazardGrid grid;
    Eigen::MatrixXd knots;  // (R+1) x (K+1)

    int mc_samples = 100000;
    bool use_lower_bound = true;

    int block_dim() const { return n_covariates + 1; }
    // C^{rr'} with 1-based risk indices
    Eigen::Block<const Eigen::MatrixXd> block(int r, int r2) const;
    BaseHazard base_hazard(int r) const;
    void validate() const;
};

}  // namespace riskmix
