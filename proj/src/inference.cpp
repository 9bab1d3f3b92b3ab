#include "riskmix/inference.hpp"

#include "riskmix/likelihood.hpp"
#include "riskmix/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace riskmix {

namespace {

Eigen::VectorXd augment(const Eigen::VectorXd& z) {
    Eigen::VectorXd zaug(z.size() + 1);
    zaug[0] = 1.0;
    zaug.tail(z.size()) = z;
    return zaug;
}

void check_risk(const LatentClassModel& model, int risk) {
    if (risk < 1 || risk > model.n_risks)
        throw std::invalid_argument("inference: risk index out of range");
}

double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (Eigen::Index l = 0; l < v.size(); ++l) s += std::exp(v[l] - m);
    return m + std::log(s);
}

// log w_l - sum_{r'=0..R} Lambda_{r'} e^{eta_{r'}^l}, the class log-weights
// after survival filtering by every listed risk. Exponents are combined as
// eta + log(Lambda) so that Lambda = 0 and large eta are both safe.
Eigen::VectorXd filtered_log_weights(const LatentClassModel& model,
                                     const Eigen::VectorXd& zaug,
                                     const Eigen::VectorXd& cum_all) {
    const int L = model.n_classes;
    Eigen::VectorXd a = model.weights.array().log();
    for (int r2 = 0; r2 <= model.n_risks; ++r2) {
        const double log_cum = std::log(cum_all[r2]);
        for (int l = 0; l < L; ++l)
            a[l] -= std::exp(model.coef[r2].row(l).dot(zaug) + log_cum);
    }
    return a;
}

// per-node data for integrals over [0,t]: 11-point rule on 20 equal panels
struct CumulativeNodes {
    Eigen::VectorXd s;                     // node times
    Eigen::VectorXd w;                     // node weights
    Eigen::MatrixXd rate;                  // node x (R+1): lambda_r(s)
    Eigen::MatrixXd cum;                   // node x (R+1): Lambda_r(s)
};

CumulativeNodes make_nodes(const LatentClassModel& model, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("inference: time must be >= 0");
    const auto& rule = gauss_legendre_11();
    const int n_panels = 20;
    const int nq = static_cast<int>(rule.nodes.size());
    CumulativeNodes nodes;
    nodes.s.resize(n_panels * nq);
    nodes.w.resize(n_panels * nq);
    const double panel = t / n_panels;
    for (int j = 0; j < n_panels; ++j) {
        const double mid = (j + 0.5) * panel;
        const double half = 0.5 * panel;
        for (int q = 0; q < nq; ++q) {
            nodes.s[j * nq + q] = mid + half * rule.nodes[q];
            nodes.w[j * nq + q] = half * rule.weights[q];
        }
    }
    const int R = model.n_risks;
    nodes.rate.resize(nodes.s.size(), R + 1);
    nodes.cum.resize(nodes.s.size(), R + 1);
    for (Eigen::Index q = 0; q < nodes.s.size(); ++q) {
        const Eigen::VectorXd phi = hazard_basis_at(model.grid, nodes.s[q]);
        const Eigen::VectorXd cum_basis = cumulative_basis_at(model.grid, nodes.s[q]);
        nodes.rate.row(q) = (model.knots * phi).transpose();
        nodes.cum.row(q) = (model.knots * cum_basis).transpose();
    }
    return nodes;
}

double crude_hazard_at(const LatentClassModel& model, int risk, const Eigen::VectorXd& zaug,
                       double rate_r, const Eigen::VectorXd& cum_all) {
    const Eigen::VectorXd a = filtered_log_weights(model, zaug, cum_all);
    Eigen::VectorXd b = a;
    for (int l = 0; l < model.n_classes; ++l) b[l] += model.coef[risk].row(l).dot(zaug);
    return rate_r * std::exp(log_sum_exp(b) - log_sum_exp(a));
}

double incidence_integrand(const LatentClassModel& model, int risk, const Eigen::VectorXd& zaug,
                           double rate_r, const Eigen::VectorXd& cum_all) {
    Eigen::VectorXd b = filtered_log_weights(model, zaug, cum_all);
    for (int l = 0; l < model.n_classes; ++l) b[l] += model.coef[risk].row(l).dot(zaug);
    return rate_r * std::exp(log_sum_exp(b));
}

Eigen::VectorXd all_cumulative(const LatentClassModel& model, double t) {
    const Eigen::VectorXd basis = cumulative_basis_at(model.grid, t);
    return model.knots * basis;
}

}  // namespace

double decontaminated_survival(const LatentClassModel& model, int risk, const Eigen::VectorXd& z,
                               double t) {
    check_risk(model, risk);
    const Eigen::VectorXd zaug = augment(z);
    const double log_cum = std::log(model.base_hazard(risk).cumulative(t));
    double value = 0.0;
    for (int l = 0; l < model.n_classes; ++l)
        value += model.weights[l] *
                 std::exp(-std::exp(model.coef[risk].row(l).dot(zaug) + log_cum));
    return value;
}

double decontaminated_hazard(const LatentClassModel& model, int risk, const Eigen::VectorXd& z,
                             double t) {
    check_risk(model, risk);
    const Eigen::VectorXd zaug = augment(z);
    const double rate = model.base_hazard(risk).eval(t);
    const double log_cum = std::log(model.base_hazard(risk).cumulative(t));
    const int L = model.n_classes;
    Eigen::VectorXd a(L), b(L);
    for (int l = 0; l < L; ++l) {
        const double eta = model.coef[risk].row(l).dot(zaug);
        a[l] = std::log(model.weights[l]) - std::exp(eta + log_cum);
        b[l] = a[l] + eta;
    }
    return rate * std::exp(log_sum_exp(b) - log_sum_exp(a));
}

double crude_hazard(const LatentClassModel& model, int risk, const Eigen::VectorXd& z, double t) {
    check_risk(model, risk);
    const Eigen::VectorXd zaug = augment(z);
    const double rate = model.base_hazard(risk).eval(t);
    return crude_hazard_at(model, risk, zaug, rate, all_cumulative(model, t));
}

double crude_survival(const LatentClassModel& model, int risk, const Eigen::VectorXd& z,
                      double t) {
    check_risk(model, risk);
    if (t == 0.0) return 1.0;
    const Eigen::VectorXd zaug = augment(z);
    const CumulativeNodes nodes = make_nodes(model, t);
    double integral = 0.0;
    for (Eigen::Index q = 0; q < nodes.s.size(); ++q)
        integral += nodes.w[q] * crude_hazard_at(model, risk, zaug, nodes.rate(q, risk),
                                                 nodes.cum.row(q).transpose());
    return std::exp(-integral);
}

double cumulative_incidence(const LatentClassModel& model, int risk, const Eigen::VectorXd& z,
                            double t) {
    if (risk < 0 || risk > model.n_risks)
        throw std::invalid_argument("inference: risk index out of range");
    if (t == 0.0) return 0.0;
    const Eigen::VectorXd zaug = augment(z);
    const CumulativeNodes nodes = make_nodes(model, t);
    double integral = 0.0;
    for (Eigen::Index q = 0; q < nodes.s.size(); ++q)
        integral += nodes.w[q] * incidence_integrand(model, risk, zaug, nodes.rate(q, risk),
                                                     nodes.cum.row(q).transpose());
    return integral;
}

ClassPosterior class_posterior(const LatentClassModel& model, const Cohort& cohort) {
    model.validate();
    const LatentLikelihood evaluator(cohort, model.grid);
    const Eigen::MatrixXd joint = evaluator.class_log_joint(model);
    ClassPosterior posterior;
    posterior.probabilities.resize(joint.rows(), joint.cols());
    posterior.assignment.resize(joint.rows());
    for (Eigen::Index i = 0; i < joint.rows(); ++i) {
        const double lse = log_sum_exp(joint.row(i).transpose());
        posterior.probabilities.row(i) = (joint.row(i).array() - lse).exp();
        Eigen::Index arg = 0;
        posterior.probabilities.row(i).maxCoeff(&arg);
        posterior.assignment[i] = static_cast<int>(arg) + 1;
    }
    return posterior;
}

double effective_classes(const Eigen::VectorXd& weights) {
    if (weights.size() == 0) throw std::invalid_argument("effective_classes: empty weights");
    if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-10)
        throw std::invalid_argument("effective_classes: weights must lie on the simplex");
    double entropy = 0.0;
    for (Eigen::Index l = 0; l < weights.size(); ++l)
        if (weights[l] > 0.0) entropy -= weights[l] * std::log(weights[l]);
    return std::exp(entropy);
}

double correct_fraction(const ClassPosterior& posterior, const std::vector<int>& true_labels) {
    const Eigen::Index n = posterior.probabilities.rows();
    if (static_cast<Eigen::Index>(true_labels.size()) != n)
        throw std::invalid_argument("correct_fraction: label count mismatch");
    const int L = static_cast<int>(posterior.probabilities.cols());
    std::vector<int> perm(L);
    std::iota(perm.begin(), perm.end(), 1);
    double best = 0.0;
    do {
        long hits = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (perm[posterior.assignment[i] - 1] == true_labels[i]) ++hits;
        best = std::max(best, static_cast<double>(hits) / static_cast<double>(n));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double quartile_point() {
    // solve erfc(z / sqrt(2)) = 1/2 by bisection + Newton polish
    double lo = 0.5, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (0.5 * std::erfc(mid / std::sqrt(2.0)) > 0.25 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

std::vector<double> weighted_average_curve(const LatentClassModel& model, int risk,
                                           const std::vector<Eigen::VectorXd>& zaugs,
                                           const Eigen::VectorXd& weights,
                                           const std::vector<double>& t_grid, CurveKind kind) {
    check_risk(model, risk);
    const double norm = weights.sum();
    if (!(norm > 0.0)) throw std::invalid_argument("band curve: empty conditioning set");
    std::vector<double> out(t_grid.size(), 0.0);
    const int L = model.n_classes;

    for (std::size_t j = 0; j < t_grid.size(); ++j) {
        const double t = t_grid[j];
        if (t < 0.0) throw std::invalid_argument("band curve: negative grid time");
        double acc = 0.0;
        if (kind == CurveKind::decontaminated) {
            const double log_cum = std::log(model.base_hazard(risk).cumulative(t));
            for (std::size_t m = 0; m < zaugs.size(); ++m) {
                double value = 0.0;
                for (int l = 0; l < L; ++l)
                    value += model.weights[l] *
                             std::exp(-std::exp(model.coef[risk].row(l).dot(zaugs[m]) + log_cum));
                acc += weights[m] * value;
            }
        } else if (t == 0.0) {
            acc = kind == CurveKind::crude ? norm : 0.0;
        } else {
            const CumulativeNodes nodes = make_nodes(model, t);
            for (std::size_t m = 0; m < zaugs.size(); ++m) {
                double integral = 0.0;
                for (Eigen::Index q = 0; q < nodes.s.size(); ++q) {
                    const Eigen::VectorXd cum = nodes.cum.row(q).transpose();
                    integral += nodes.w[q] *
                                (kind == CurveKind::crude
                                     ? crude_hazard_at(model, risk, zaugs[m], nodes.rate(q, risk), cum)
                                     : incidence_integrand(model, risk, zaugs[m],
                                                           nodes.rate(q, risk), cum));
                }
                acc += weights[m] * (kind == CurveKind::crude ? std::exp(-integral) : integral);
            }
        }
        out[j] = acc / norm;
    }
    return out;
}

}  // namespace

std::vector<double> quantile_band_curve(const LatentClassModel& model, int risk,
                                        int covariate_index, Band band,
                                        const std::vector<double>& t_grid, CurveKind kind) {
    if (covariate_index < 1 || covariate_index > model.n_covariates)
        throw std::invalid_argument("band curve: covariate index out of range");
    const double zq = quartile_point();
    double lo, hi;
    switch (band) {
        case Band::upper_quartile: lo = zq; hi = 8.0; break;
        case Band::lower_quartile: lo = -8.0; hi = -zq; break;
        case Band::inter_quartile: lo = -zq; hi = zq; break;
        default: throw std::invalid_argument("band curve: unknown band");
    }
    static const QuadratureRule rule = gauss_legendre(64);
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    std::vector<Eigen::VectorXd> zaugs;
    Eigen::VectorXd weights(rule.nodes.size());
    Eigen::VectorXd z = Eigen::VectorXd::Zero(model.n_covariates);
    for (Eigen::Index q = 0; q < rule.nodes.size(); ++q) {
        const double zq_node = mid + half * rule.nodes[q];
        z[covariate_index - 1] = zq_node;
        zaugs.push_back(augment(z));
        weights[q] = half * rule.weights[q] *
                     std::exp(-0.5 * zq_node * zq_node) / std::sqrt(2.0 * M_PI);
    }
    return weighted_average_curve(model, risk, zaugs, weights, t_grid, kind);
}

std::vector<double> band_curve_empirical(const LatentClassModel& model, int risk,
                                         int covariate_index, Band band,
                                         const std::vector<double>& t_grid, const Cohort& cohort,
                                         CurveKind kind) {
    if (covariate_index < 1 || covariate_index > model.n_covariates)
        throw std::invalid_argument("band curve: covariate index out of range");
    std::vector<double> column(cohort.size());
    for (Eigen::Index i = 0; i < cohort.size(); ++i)
        column[i] = cohort.covariates(i, covariate_index - 1);
    std::vector<double> sorted = column;
    std::sort(sorted.begin(), sorted.end());
    const auto quantile = [&sorted](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        return lo + 1 < sorted.size() ? sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
                                      : sorted[lo];
    };
    const double q1 = quantile(0.25), q3 = quantile(0.75);

    std::vector<Eigen::VectorXd> zaugs;
    for (Eigen::Index i = 0; i < cohort.size(); ++i) {
        const double v = column[i];
        const bool in_band = band == Band::upper_quartile  ? v >= q3
                             : band == Band::lower_quartile ? v <= q1
                                                            : (v >= q1 && v <= q3);
        if (in_band) zaugs.push_back(augment(cohort.covariates.row(i).transpose()));
    }
    return weighted_average_curve(model, risk, zaugs,
                                  Eigen::VectorXd::Ones(static_cast<Eigen::Index>(zaugs.size())),
                                  t_grid, kind);
}

std::vector<double> cohort_average_curve(const LatentClassModel& model, int risk,
                                         const Cohort& cohort, const std::vector<double>& t_grid,
                                         CurveKind kind) {
    std::vector<Eigen::VectorXd> zaugs;
    zaugs.reserve(cohort.size());
    for (Eigen::Index i = 0; i < cohort.size(); ++i)
        zaugs.push_back(augment(cohort.covariates.row(i).transpose()));
    return weighted_average_curve(model, risk, zaugs,
                                  Eigen::VectorXd::Ones(cohort.size()), t_grid, kind);
}

std::vector<double> point_curve(const LatentClassModel& model, int risk, const Eigen::VectorXd& z,
                                const std::vector<double>& t_grid, CurveKind kind) {
    return weighted_average_curve(model, risk, {augment(z)}, Eigen::VectorXd::Ones(1), t_grid,
                                  kind);
}

}  // namespace riskmix
