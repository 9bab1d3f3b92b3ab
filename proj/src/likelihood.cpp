#include "riskmix/likelihood.hpp"

#include "riskmix/rng.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

namespace riskmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Compensated (Kahan) accumulator; the likelihood sums thousands of terms
// and the curvature probes difference Psi at the 1e-12 level.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

double log_sum_exp_row(const Eigen::RowVectorXd& row) {
    const double m = row.maxCoeff();
    if (!std::isfinite(m)) return m;  // all -inf stays -inf
    double s = 0.0;
    for (Eigen::Index l = 0; l < row.size(); ++l) s += std::exp(row[l] - m);
    return m + std::log(s);
}

Eigen::MatrixXd augmented_covariates(const Cohort& cohort) {
    Eigen::MatrixXd z(cohort.size(), cohort.n_covariates() + 1);
    z.col(0).setOnes();
    z.rightCols(cohort.n_covariates()) = cohort.covariates;
    return z;
}

}  // namespace

LatentLikelihood::LatentLikelihood(const Cohort& cohort, const HazardGrid& grid)
    : cohort_(&cohort), grid_(grid) {
    cohort.validate();
    cache_ = make_basis_cache(grid, cohort.times);
    zaug_ = augmented_covariates(cohort);
    by_label_.resize(cohort.n_risks + 1);
    for (Eigen::Index i = 0; i < cohort.size(); ++i)
        by_label_[cohort.labels[i]].push_back(i);
}

void LatentLikelihood::accumulate(const LatentClassModel& model, Eigen::MatrixXd& joint) const {
    const Cohort& co = *cohort_;
    if (model.n_risks != co.n_risks || model.n_covariates != co.n_covariates())
        throw std::invalid_argument("latent likelihood: model dimensions do not match cohort");
    const Eigen::Index n = co.size();
    const int L = model.n_classes;

    joint.setZero(n, L);
    Eigen::MatrixXd eta;
    for (int r = 0; r <= model.n_risks; ++r) {
        const Eigen::VectorXd lam_cum = cache_.cumulative * model.knots.row(r).transpose();
        if (model.coef[r].cwiseAbs().maxCoeff() == 0.0) {
            joint.colwise() -= lam_cum;  // class-independent survival factor, zero leading term
            continue;
        }
        eta.noalias() = zaug_ * model.coef[r].transpose();  // N x L
        joint.array() -= eta.array().exp().colwise() * lam_cum.array();
        for (const Eigen::Index i : by_label_[r])
            joint.row(i) += eta.row(i);  // leading coefficient term
    }
    const Eigen::RowVectorXd log_w = model.weights.array().log().matrix().transpose();
    joint.rowwise() += log_w;
}

double LatentLikelihood::value(const LatentClassModel& model) const {
    Eigen::MatrixXd joint;
    accumulate(model, joint);
    const Eigen::Index n = joint.rows();

    Eigen::VectorXd rate(n);
    for (Eigen::Index i = 0; i < n; ++i)
        rate[i] = cache_.rate.row(i).dot(model.knots.row(cohort_->labels[i]));
    rate = rate.array().log();

    const Eigen::VectorXd shift = joint.rowwise().maxCoeff();
    if (shift.allFinite()) {
        Eigen::ArrayXd acc = (joint.col(0) - shift).array().exp();
        for (Eigen::Index l = 1; l < joint.cols(); ++l)
            acc += (joint.col(l) - shift).array().exp();
        rate.array() += acc.log() + shift.array();
    } else {
        for (Eigen::Index i = 0; i < n; ++i) rate[i] += log_sum_exp_row(joint.row(i));
    }
    KahanSum total;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(rate[i]))
            throw LikelihoodError("latent likelihood: non-finite term", i);
        total.add(rate[i]);
    }
    return total.sum;
}

Eigen::MatrixXd LatentLikelihood::class_log_joint(const LatentClassModel& model) const {
    Eigen::MatrixXd joint;
    accumulate(model, joint);
    return joint;
}

double loglik_latent(const LatentClassModel& model, const Cohort& cohort) {
    model.validate();
    return LatentLikelihood(cohort, model.grid).value(model);
}

double loglik_gaussian_lb(const GaussianFrailtyModel& model, const Cohort& cohort) {
    model.validate();
    if (model.n_risks != cohort.n_risks || model.n_covariates != cohort.n_covariates())
        throw std::invalid_argument("gaussian likelihood: model dimensions do not match cohort");
    const Eigen::Index n = cohort.size();
    const int R = model.n_risks;
    const HazardBasisCache cache = make_basis_cache(model.grid, cohort.times);
    const Eigen::MatrixXd zaug = augmented_covariates(cohort);

    KahanSum total;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int ri = cohort.labels[i];
        const Eigen::VectorXd z = zaug.row(i).transpose();
        double term = std::log(cache.rate.row(i).dot(model.knots.row(ri)));
        term -= cache.cumulative.row(i).dot(model.knots.row(0));  // censoring survival
        if (ri > 0)
            term += model.means.row(ri - 1).dot(z) + 0.5 * z.dot(model.block(ri, ri) * z);
        for (int r2 = 1; r2 <= R; ++r2) {
            double expo = model.means.row(r2 - 1).dot(z) + 0.5 * z.dot(model.block(r2, r2) * z);
            if (ri > 0) expo += z.dot(model.block(ri, r2) * z);
            term -= cache.cumulative.row(i).dot(model.knots.row(r2)) * std::exp(expo);
        }
        if (!std::isfinite(term)) throw LikelihoodError("gaussian lower bound: non-finite term", i);
        total.add(term);
    }
    return total.sum;
}

double loglik_gaussian_mc(const GaussianFrailtyModel& model, const Cohort& cohort,
                          std::uint64_t seed) {
    model.validate();
    if (model.mc_samples < 100)
        throw std::invalid_argument("gaussian likelihood: mc_samples must be >= 100");
    if (model.n_risks != cohort.n_risks || model.n_covariates != cohort.n_covariates())
        throw std::invalid_argument("gaussian likelihood: model dimensions do not match cohort");
    const Eigen::Index n = cohort.size();
    const int R = model.n_risks;
    const int S = model.mc_samples;
    const HazardBasisCache cache = make_basis_cache(model.grid, cohort.times);
    const Eigen::MatrixXd zaug = augmented_covariates(cohort);

    // common random numbers: one S x R block shared by every individual
    Eigen::MatrixXd y(S, R);
    Rng rng(seed);
    for (int s = 0; s < S; ++s)
        for (int r = 0; r < R; ++r) y(s, r) = rng.normal();

    KahanSum total;
    Eigen::VectorXd scaled_cum(R), shift(R);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int ri = cohort.labels[i];
        const Eigen::VectorXd z = zaug.row(i).transpose();

        Eigen::MatrixXd kmat(R, R);
        for (int r = 1; r <= R; ++r)
            for (int r2 = 1; r2 <= R; ++r2) kmat(r - 1, r2 - 1) = z.dot(model.block(r, r2) * z);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kmat);
        if (es.info() != Eigen::Success)
            throw LikelihoodError("gaussian likelihood: eigendecomposition failed", i);
        const Eigen::MatrixXd sqrt_k = es.eigenvectors() *
                                       es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                                       es.eigenvectors().transpose();

        double term = std::log(cache.rate.row(i).dot(model.knots.row(ri)));
        term -= cache.cumulative.row(i).dot(model.knots.row(0));
        if (ri > 0) term += model.means.row(ri - 1).dot(z) + 0.5 * kmat(ri - 1, ri - 1);

        for (int r2 = 1; r2 <= R; ++r2) {
            double expo = model.means.row(r2 - 1).dot(z);
            if (ri > 0) expo += kmat(ri - 1, r2 - 1);
            scaled_cum[r2 - 1] = cache.cumulative.row(i).dot(model.knots.row(r2)) * std::exp(expo);
        }
        // log mean over samples of exp(-sum_r scaled_cum[r] e^{(K^{1/2} y)_r})
        double max_expo = kNegInf;
        Eigen::VectorXd expos(S);
        for (int s = 0; s < S; ++s) {
            shift.noalias() = sqrt_k * y.row(s).transpose();
            double e = 0.0;
            for (int r = 0; r < R; ++r) e -= scaled_cum[r] * std::exp(shift[r]);
            expos[s] = e;
            max_expo = std::max(max_expo, e);
        }
        double mean = 0.0;
        for (int s = 0; s < S; ++s) mean += std::exp(expos[s] - max_expo);
        term += max_expo + std::log(mean / S);
        if (!std::isfinite(term)) throw LikelihoodError("gaussian likelihood: non-finite term", i);
        total.add(term);
    }
    return total.sum;
}

double coefficient_penalty(const LatentClassModel& model) {
    double ss = 0.0;
    for (int r = 1; r <= model.n_risks; ++r) ss += model.coef[r].squaredNorm();
    if (model.free_censoring) ss += model.coef[0].squaredNorm();
    return 0.5 * ss;
}

double coefficient_penalty(const GaussianFrailtyModel& model) {
    return 0.5 * model.means.squaredNorm();
}

double psi_objective(const LatentClassModel& model, const Cohort& cohort,
                     const PenaltyConfig& penalty) {
    LatentLikelihood evaluator(cohort, model.grid);
    return psi_objective(model, evaluator, penalty);
}

double psi_objective(const LatentClassModel& model, const LatentLikelihood& evaluator,
                     const PenaltyConfig& penalty) {
    const long npar = n_params(ModelKind::latent, model.n_classes, model.grid.resolution,
                               model.n_risks, model.n_covariates);
    double psi = -evaluator.value(model);
    if (penalty.aic_term) psi += static_cast<double>(npar);
    if (penalty.gaussian_coefficient_prior) psi += coefficient_penalty(model);
    return psi;
}

double psi_objective(const GaussianFrailtyModel& model, const Cohort& cohort,
                     const PenaltyConfig& penalty) {
    const long npar = n_params(ModelKind::gaussian, 1, model.grid.resolution, model.n_risks,
                               model.n_covariates);
    double psi = -loglik_gaussian_lb(model, cohort);
    if (penalty.aic_term) psi += static_cast<double>(npar);
    if (penalty.gaussian_coefficient_prior) psi += coefficient_penalty(model);
    return psi;
}

}  // namespace riskmix
