#include "riskmix/baselines.hpp"

#include "riskmix/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

namespace riskmix {

double StepFunction::at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return initial_value;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

StepFunction kaplan_meier(const Cohort& cohort, int risk) {
    if (risk < 1 || risk > cohort.n_risks)
        throw std::invalid_argument("kaplan_meier: risk index out of range");
    const Eigen::Index n = cohort.size();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&cohort](Eigen::Index a, Eigen::Index b) {
        return cohort.times[a] < cohort.times[b];
    });

    StepFunction surv;
    double value = 1.0;
    long at_risk = n;
    std::size_t j = 0;
    bool any_event = false;
    while (j < order.size()) {
        const double t = cohort.times[order[j]];
        long deaths = 0, leaving = 0;
        while (j < order.size() && cohort.times[order[j]] == t) {
            if (cohort.labels[order[j]] == risk) ++deaths;
            ++leaving;
            ++j;
        }
        if (deaths > 0) {
            // deaths see the full risk set; tied censorings leave afterwards
            value *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
            surv.times.push_back(t);
            surv.values.push_back(value);
            any_event = true;
        }
        at_risk -= leaving;
    }
    if (!any_event)
        std::cerr << "kaplan_meier: no events of type " << risk << ", estimator is constant 1\n";
    return surv;
}

namespace {

struct PartialLikelihood {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;  // negative observed information
};

// Breslow partial likelihood over risk sets {k : t_k >= t_i}, summed over
// primary events i.
PartialLikelihood partial_loglik(const Cohort& cohort, int primary_risk,
                                 const Eigen::VectorXd& beta,
                                 const std::vector<Eigen::Index>& by_time_desc) {
    const Eigen::Index p = cohort.n_covariates();
    PartialLikelihood out;
    out.gradient = Eigen::VectorXd::Zero(p);
    out.hessian = Eigen::MatrixXd::Zero(p, p);

    double denom = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

    std::size_t j = 0;
    while (j < by_time_desc.size()) {
        const double t = cohort.times[by_time_desc[j]];
        // extend the risk set by everyone with this time
        std::size_t j2 = j;
        while (j2 < by_time_desc.size() && cohort.times[by_time_desc[j2]] == t) {
            const Eigen::Index k = by_time_desc[j2];
            const Eigen::VectorXd zk = cohort.covariates.row(k).transpose();
            const double ek = std::exp(beta.dot(zk));
            denom += ek;
            s1 += ek * zk;
            s2 += ek * (zk * zk.transpose());
            ++j2;
        }
        // events at this time against the full risk set (Breslow)
        for (std::size_t jj = j; jj < j2; ++jj) {
            const Eigen::Index i = by_time_desc[jj];
            if (cohort.labels[i] != primary_risk) continue;
            const Eigen::VectorXd zi = cohort.covariates.row(i).transpose();
            const Eigen::VectorXd zbar = s1 / denom;
            out.value += beta.dot(zi) - std::log(denom);
            out.gradient += zi - zbar;
            out.hessian -= s2 / denom - zbar * zbar.transpose();
        }
        j = j2;
    }
    return out;
}

}  // namespace

CoxFit cox_fit(const Cohort& cohort, int primary_risk) {
    if (primary_risk < 1 || primary_risk > cohort.n_risks)
        throw std::invalid_argument("cox_fit: risk index out of range");
    const Eigen::Index p = cohort.n_covariates();
    if ((cohort.labels.array() == primary_risk).count() == 0)
        throw std::invalid_argument("cox_fit: no events of the primary risk");
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = a + 1; b < p; ++b)
            if ((cohort.covariates.col(a) - cohort.covariates.col(b)).cwiseAbs().maxCoeff() == 0.0)
                throw std::invalid_argument("cox_fit: identical covariate columns " +
                                            std::to_string(a + 1) + " and " + std::to_string(b + 1));

    std::vector<Eigen::Index> order(cohort.size());
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&cohort](Eigen::Index a, Eigen::Index b) {
        return cohort.times[a] > cohort.times[b];
    });

    CoxFit fit;
    fit.coefficients = Eigen::VectorXd::Zero(p);
    PartialLikelihood current = partial_loglik(cohort, primary_risk, fit.coefficients, order);
    for (int iter = 0; iter < 100; ++iter) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(-current.hessian);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            fit.monotone_likelihood = true;
            break;
        }
        Eigen::VectorXd step = ldlt.solve(current.gradient);
        if (!step.allFinite()) {
            fit.monotone_likelihood = true;
            break;
        }
        // step halving until the likelihood improves
        double scale = 1.0;
        PartialLikelihood next;
        for (int h = 0; h < 30; ++h) {
            next = partial_loglik(cohort, primary_risk, fit.coefficients + scale * step, order);
            if (next.value >= current.value) break;
            scale *= 0.5;
        }
        fit.coefficients += scale * step;
        const double gain = next.value - current.value;
        current = next;
        if (fit.coefficients.cwiseAbs().maxCoeff() > 15.0) {
            fit.monotone_likelihood = true;
            break;
        }
        if (std::abs(gain) < 1e-12 && current.gradient.cwiseAbs().maxCoeff() < 1e-8) {
            fit.converged = true;
            break;
        }
    }
    fit.partial_loglik = current.value;
    {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(-current.hessian);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive())
            fit.covariance = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    }

    // Breslow increments lambda(t_j) = d_j / sum_{t_k >= t_j} exp(beta . z_k)
    double denom = 0.0;
    std::size_t j = 0;
    std::vector<std::pair<double, double>> reversed;
    while (j < order.size()) {
        const double t = cohort.times[order[j]];
        long deaths = 0;
        std::size_t j2 = j;
        while (j2 < order.size() && cohort.times[order[j2]] == t) {
            denom += std::exp(fit.coefficients.dot(cohort.covariates.row(order[j2])));
            if (cohort.labels[order[j2]] == primary_risk) ++deaths;
            ++j2;
        }
        if (deaths > 0) reversed.emplace_back(t, static_cast<double>(deaths) / denom);
        j = j2;
    }
    fit.baseline.assign(reversed.rbegin(), reversed.rend());
    return fit;
}

double gamma_frailty_loglik(double alpha, const Eigen::VectorXd& coefficients,
                            const BaseHazard& base, const Cohort& cohort, int primary_risk) {
    if (!(alpha > 0.0)) throw std::invalid_argument("gamma_frailty_loglik: alpha must be > 0");
    if (coefficients.size() != cohort.n_covariates())
        throw std::invalid_argument("gamma_frailty_loglik: coefficient size mismatch");
    double total = 0.0;
    for (Eigen::Index i = 0; i < cohort.size(); ++i) {
        const double link = coefficients.dot(cohort.covariates.row(i));
        const double y = base.cumulative(cohort.times[i]) * std::exp(link);
        const bool event = cohort.labels[i] == primary_risk;
        if (event) total += std::log(base.eval(cohort.times[i])) + link;
        total -= (alpha + (event ? 1.0 : 0.0)) * std::log1p(y / alpha);
    }
    return total;
}

double gamma_frailty_survival(double alpha, const Eigen::VectorXd& coefficients,
                              const BaseHazard& base, const Eigen::VectorXd& z, double t) {
    const double y = base.cumulative(t) * std::exp(coefficients.dot(z));
    return std::pow(1.0 + y / alpha, -alpha);
}

double gamma_frailty_hazard(double alpha, const Eigen::VectorXd& coefficients,
                            const BaseHazard& base, const Eigen::VectorXd& z, double t) {
    const double rel = std::exp(coefficients.dot(z));
    const double y = base.cumulative(t) * rel;
    return base.eval(t) * rel / (1.0 + y / alpha);
}

GammaFrailtyFit fit_gamma_frailty(const Cohort& cohort, int primary_risk, int resolution,
                                  std::uint64_t seed) {
    const Eigen::Index p = cohort.n_covariates();
    const auto [t_min, t_max] = infer_time_bounds(cohort);
    const HazardGrid grid{t_min, t_max, resolution};
    const long events = (cohort.labels.array() == primary_risk).count();
    if (events == 0) throw std::invalid_argument("fit_gamma_frailty: no primary events");
    const double rate0 = static_cast<double>(events) / cohort.times.sum();

    const Eigen::Index dim = 1 + p + grid.n_knots();
    const Objective objective = [&](const Eigen::VectorXd& x) {
        const double alpha = std::exp(x[0]);
        const Eigen::VectorXd beta = x.segment(1, p);
        const BaseHazard base(grid, x.tail(grid.n_knots()).array().exp());
        return -gamma_frailty_loglik(alpha, beta, base, cohort, primary_risk) +
               0.5 * beta.squaredNorm();
    };
    Eigen::VectorXd x0(dim);
    Rng rng(seed);
    x0[0] = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) x0[1 + j] = 0.05 * rng.normal();
    x0.tail(grid.n_knots()).setConstant(std::log(rate0));

    RandomizedOptions opts;
    opts.amplitudes = {0.5, 0.25, 0.125, 0.0625};
    opts.simplex.tolerance = 1e-9;
    const SimplexResult run = randomized_minimize(objective, x0, opts, rng);

    GammaFrailtyFit fit;
    fit.alpha = std::exp(run.x[0]);
    fit.coefficients = run.x.segment(1, p);
    fit.base = BaseHazard(grid, run.x.tail(grid.n_knots()).array().exp());
    fit.loglik = gamma_frailty_loglik(fit.alpha, fit.coefficients, fit.base, cohort, primary_risk);
    return fit;
}

}  // namespace riskmix
