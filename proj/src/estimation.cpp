#include "riskmix/estimation.hpp"

#include <atomic>
#include <cfloat>
#include <chrono>
#include <cmath>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace riskmix {

namespace {

std::mutex g_progress_mutex;

void progress_line(const std::string& line) {
    std::lock_guard<std::mutex> lock(g_progress_mutex);
    std::cerr << line << '\n';
}

Eigen::VectorXd softmax_from_logits(const Eigen::VectorXd& logits) {
    // last logit fixed at zero
    const Eigen::Index L = logits.size() + 1;
    Eigen::VectorXd full(L);
    full.head(L - 1) = logits;
    full[L - 1] = 0.0;
    const double m = full.maxCoeff();
    Eigen::VectorXd w = (full.array() - m).exp();
    return w / w.sum();
}

}  // namespace

void FitConfig::validate() const {
    if (restarts < 1) throw std::invalid_argument("fit config: restarts must be >= 1");
    if (simplex_max_iter < 1) throw std::invalid_argument("fit config: max_iter must be >= 1");
    if (!(simplex_tolerance > 0)) throw std::invalid_argument("fit config: tolerance must be > 0");
    if (threads < 1) throw std::invalid_argument("fit config: threads must be >= 1");
    for (std::size_t j = 1; j < randomization_schedule.size(); ++j)
        if (!(randomization_schedule[j] < randomization_schedule[j - 1]))
            throw std::invalid_argument("fit config: amplitudes must strictly decrease");
}

LatentPacking::LatentPacking(const LatentClassModel& shape, const Cohort& cohort)
    : L_(shape.n_classes),
      R_(shape.n_risks),
      p_(shape.n_covariates),
      K_(shape.grid.resolution),
      free_censoring_(shape.free_censoring) {
    knot_row_free_.assign(R_ + 1, false);
    for (Eigen::Index i = 0; i < cohort.size(); ++i) knot_row_free_[cohort.labels[i]] = true;
    int free_rows = 0;
    for (bool f : knot_row_free_)
        if (f) ++free_rows;
    const int coef_risks = R_ + (free_censoring_ ? 1 : 0);
    dim_ = coef_risks * (L_ * (p_ + 1) - 1) + (L_ - 1) + free_rows * (K_ + 1);
}

Eigen::VectorXd LatentPacking::pack(const LatentClassModel& model) const {
    Eigen::VectorXd x(dim_);
    int j = 0;
    auto pack_risk = [&](int r) {
        for (int l = 0; l < L_; ++l)
            for (int mu = 0; mu <= p_; ++mu) {
                if (l == 0 && mu == 0) continue;  // pinned class-1 frailty
                x[j++] = model.coef[r](l, mu);
            }
    };
    for (int r = 1; r <= R_; ++r) pack_risk(r);
    if (free_censoring_) pack_risk(0);
    for (int l = 0; l < L_ - 1; ++l) x[j++] = std::log(model.weights[l] / model.weights[L_ - 1]);
    for (int r = 0; r <= R_; ++r) {
        if (!knot_row_free_[r]) continue;
        for (int k = 0; k <= K_; ++k) x[j++] = std::log(model.knots(r, k));
    }
    return x;
}

void LatentPacking::unpack(const Eigen::VectorXd& x, LatentClassModel& model) const {
    if (x.size() != dim_) throw std::invalid_argument("packing: wrong parameter vector size");
    int j = 0;
    auto unpack_risk = [&](int r) {
        for (int l = 0; l < L_; ++l)
            for (int mu = 0; mu <= p_; ++mu) {
                if (l == 0 && mu == 0) {
                    model.coef[r](l, mu) = 0.0;
                    continue;
                }
                model.coef[r](l, mu) = x[j++];
            }
    };
    for (int r = 1; r <= R_; ++r) unpack_risk(r);
    if (free_censoring_) unpack_risk(0);
    model.weights = softmax_from_logits(x.segment(j, L_ - 1));
    j += L_ - 1;
    for (int r = 0; r <= R_; ++r) {
        if (!knot_row_free_[r]) continue;
        for (int k = 0; k <= K_; ++k) model.knots(r, k) = std::exp(x[j++]);
    }
}

std::vector<std::string> LatentPacking::parameter_names() const {
    std::vector<std::string> names;
    names.reserve(dim_);
    auto name_risk = [&](int r) {
        for (int l = 0; l < L_; ++l)
            for (int mu = 0; mu <= p_; ++mu) {
                if (l == 0 && mu == 0) continue;
                names.push_back("beta[r=" + std::to_string(r) + "][class=" + std::to_string(l + 1) +
                                "][mu=" + std::to_string(mu) + "]");
            }
    };
    for (int r = 1; r <= R_; ++r) name_risk(r);
    if (free_censoring_) name_risk(0);
    for (int l = 0; l < L_ - 1; ++l) names.push_back("logit[class=" + std::to_string(l + 1) + "]");
    for (int r = 0; r <= R_; ++r) {
        if (!knot_row_free_[r]) continue;
        for (int k = 0; k <= K_; ++k)
            names.push_back("log_knot[r=" + std::to_string(r) + "][k=" + std::to_string(k) + "]");
    }
    return names;
}

LatentClassModel init_model(const Cohort& cohort, int n_classes, int resolution,
                            std::uint64_t noise_seed, double coefficient_noise,
                            bool free_censoring) {
    if (n_classes < 1) throw std::invalid_argument("init_model: need at least one class");
    if (resolution < 1) throw std::invalid_argument("init_model: resolution must be >= 1");
    cohort.validate();
    if (cohort.size() == 0) throw std::invalid_argument("init_model: empty cohort");

    LatentClassModel model;
    model.n_classes = n_classes;
    model.n_risks = cohort.n_risks;
    model.n_covariates = static_cast<int>(cohort.n_covariates());
    model.free_censoring = free_censoring;
    const auto [t_min, t_max] = infer_time_bounds(cohort);
    model.grid = HazardGrid{t_min, t_max, resolution};

    const double total_time = cohort.times.sum();
    const double mean_time = total_time / static_cast<double>(cohort.size());
    model.knots.resize(model.n_risks + 1, resolution + 1);
    for (int r = 0; r <= model.n_risks; ++r) {
        const long events = (cohort.labels.array() == r).count();
        double rate = static_cast<double>(events) / total_time;
        if (events == 0) {
            rate = 1e-8 / mean_time;
            progress_line("init_model: no events of type " + std::to_string(r) +
                          ", rate floored at " + std::to_string(rate));
        }
        model.knots.row(r).setConstant(rate);
    }

    Rng rng(noise_seed);
    model.coef.assign(model.n_risks + 1,
                      Eigen::MatrixXd::Zero(n_classes, model.n_covariates + 1));
    auto fill_risk = [&](int r) {
        for (int l = 0; l < n_classes; ++l)
            for (int mu = 0; mu <= model.n_covariates; ++mu) {
                const double noise = coefficient_noise * rng.normal();
                if (l == 0 && mu == 0) continue;  // pinned
                model.coef[r](l, mu) = noise;
            }
    };
    for (int r = 1; r <= model.n_risks; ++r) fill_risk(r);
    if (free_censoring) fill_risk(0);

    model.weights = Eigen::VectorXd::Constant(n_classes, 1.0 / n_classes);
    return model;
}

FitReport fit_map(const Cohort& cohort, int n_classes, int resolution, const FitConfig& config) {
    config.validate();
    cohort.validate();
    if (cohort.size() == 0) throw std::invalid_argument("fit_map: empty cohort");
    if ((cohort.labels.array() > 0).count() == 0)
        throw std::invalid_argument("fit_map: no non-censoring events");

    const auto start = std::chrono::steady_clock::now();
    const LatentClassModel shape =
        init_model(cohort, n_classes, resolution, config.rng_seed,
                   config.init_coefficient_noise, config.free_censoring);
    const LatentPacking packing(shape, cohort);
    const LatentLikelihood evaluator(cohort, shape.grid);

    struct RestartOutcome {
        Eigen::VectorXd x;
        double psi = std::numeric_limits<double>::infinity();
    };
    std::vector<RestartOutcome> outcomes(config.restarts);

    RandomizedOptions opts;
    opts.amplitudes = config.randomization_schedule;
    opts.simplex.max_iter = config.simplex_max_iter;
    opts.simplex.tolerance = config.simplex_tolerance;

    std::atomic<int> next_restart{0};
    auto worker = [&]() {
        LatentClassModel scratch = shape;
        const Objective objective = [&](const Eigen::VectorXd& x) {
            packing.unpack(x, scratch);
            return psi_objective(scratch, evaluator, config.penalty);
        };
        for (;;) {
            const int s = next_restart.fetch_add(1);
            if (s >= config.restarts) break;
            try {
                const LatentClassModel start_model =
                    init_model(cohort, n_classes, resolution, mix_seed(config.rng_seed, s),
                               config.init_coefficient_noise, config.free_censoring);
                Rng rng(mix_seed(config.rng_seed, s, 0x726e64));
                double last = std::numeric_limits<double>::infinity();
                auto on_round = [&](int round, double best) {
                    if (best > last + 1e-12)
                        throw std::logic_error("fit_map: best-so-far psi increased");
                    last = best;
                    if (config.verbose)
                        progress_line("fit L=" + std::to_string(n_classes) +
                                      " K=" + std::to_string(resolution) + " restart " +
                                      std::to_string(s) + " round " + std::to_string(round) +
                                      " psi=" + std::to_string(best));
                };
                const SimplexResult run =
                    randomized_minimize(objective, packing.pack(start_model), opts, rng, on_round);
                outcomes[s] = RestartOutcome{run.x, run.value};
            } catch (const std::exception& err) {
                progress_line("fit restart " + std::to_string(s) + " failed: " + err.what());
            }
        }
    };

    const int n_threads = std::min(config.threads, config.restarts);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    int best = -1;
    for (int s = 0; s < config.restarts; ++s)
        if (best < 0 || outcomes[s].psi < outcomes[best].psi) best = s;
    if (best < 0 || !std::isfinite(outcomes[best].psi)) {
        std::ostringstream diag;
        diag << "fit_map: every restart produced a non-finite objective (L=" << n_classes
             << ", K=" << resolution << ", restarts=" << config.restarts << ")";
        throw std::runtime_error(diag.str());
    }

    FitReport report;
    report.model = shape;
    packing.unpack(outcomes[best].x, report.model);
    canonicalize_classes(report.model);
    report.psi = outcomes[best].psi;
    report.loglik = evaluator.value(report.model);
    report.n_par = n_params(ModelKind::latent, n_classes, resolution, cohort.n_risks,
                            static_cast<int>(cohort.n_covariates()));
    report.per_restart_psis.reserve(config.restarts);
    for (const auto& o : outcomes) report.per_restart_psis.push_back(o.psi);
    report.max_censoring_coef = report.model.coef[0].cwiseAbs().maxCoeff();
    if (config.compute_error_bars)
        report.error_bars = error_bars(report.model, cohort, config.penalty);
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

SelectionReport select_model(const Cohort& cohort, const std::vector<int>& class_grid,
                             const std::vector<int>& resolution_grid, const FitConfig& config) {
    if (class_grid.empty() || resolution_grid.empty())
        throw std::invalid_argument("select_model: empty grid");

    SelectionReport report;
    std::vector<FitReport> fits;
    int cell_index = 0;
    for (int L : class_grid) {
        for (int K : resolution_grid) {
            SelectionCell cell;
            cell.n_classes = L;
            cell.resolution = K;
            FitConfig cell_config = config;
            cell_config.rng_seed = mix_seed(config.rng_seed, 0xce11, cell_index);
            cell_config.compute_error_bars = false;
            try {
                FitReport fit = fit_map(cohort, L, K, cell_config);
                cell.psi = fit.psi;
                cell.effective_classes = std::exp(
                    -(fit.model.weights.array() * fit.model.weights.array().log()).sum());
                cell.ok = true;
                fits.push_back(std::move(fit));
            } catch (const std::exception& err) {
                cell.error = err.what();
                fits.emplace_back();
            }
            report.grid.push_back(cell);
            ++cell_index;
        }
    }

    int best = -1, second = -1;
    for (std::size_t c = 0; c < report.grid.size(); ++c) {
        if (!report.grid[c].ok) continue;
        if (best < 0 || report.grid[c].psi < report.grid[best].psi) {
            second = best;
            best = static_cast<int>(c);
        } else if (second < 0 || report.grid[c].psi < report.grid[second].psi) {
            second = static_cast<int>(c);
        }
    }
    if (best < 0) throw std::runtime_error("select_model: every grid cell failed");
    report.best_classes = report.grid[best].n_classes;
    report.best_resolution = report.grid[best].resolution;
    report.best_fit = std::move(fits[best]);
    if (config.compute_error_bars)
        report.best_fit.error_bars = error_bars(report.best_fit.model, cohort, config.penalty);
    if (second >= 0) {
        report.delta_psi = report.grid[second].psi - report.grid[best].psi;
        report.delta_psi_per_n = report.delta_psi / static_cast<double>(cohort.size());
        report.likelihood_ratio =
            report.delta_psi > 700.0 ? DBL_MAX : std::exp(report.delta_psi);
    }
    return report;
}

ErrorBarReport curvature_error_bars(const Objective& objective, const Eigen::VectorXd& minimum,
                                    std::vector<std::string> parameter_names) {
    const Eigen::Index n = minimum.size();
    const double psi_hat = objective(minimum);
    if (!std::isfinite(psi_hat))
        throw std::invalid_argument("error_bars: objective not finite at the minimum");

    Eigen::MatrixXd cinv = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd probe = minimum;
    constexpr int n_eps = 10;
    for (int lam = 1; lam <= n_eps; ++lam) {
        const double eps = 1e-3 * std::pow(0.5, lam - 1);
        const double inv_eps2 = 1.0 / (eps * eps);
        Eigen::VectorXd dpsi(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            probe = minimum;
            probe[k] += eps;
            dpsi[k] = objective(probe) - psi_hat;
            cinv(k, k) += 2.0 * inv_eps2 * dpsi[k];
        }
        for (Eigen::Index k = 0; k < n; ++k)
            for (Eigen::Index l = k + 1; l < n; ++l) {
                probe = minimum;
                probe[k] += eps;
                probe[l] += eps;
                const double dpsi_kl = objective(probe) - psi_hat;
                const double off = inv_eps2 * (dpsi_kl - dpsi[k] - dpsi[l]);
                cinv(k, l) += off;
                cinv(l, k) += off;
            }
    }
    cinv /= static_cast<double>(n_eps);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cinv);
    if (es.info() != Eigen::Success) throw std::runtime_error("error_bars: eigensolver failed");
    const Eigen::VectorXd eig = es.eigenvalues();
    const Eigen::MatrixXd vecs = es.eigenvectors();
    const double eig_max = eig.cwiseAbs().maxCoeff();
    const double threshold = std::max(eig_max * 1e-12, 0.0);

    ErrorBarReport report;
    report.parameter_names = std::move(parameter_names);
    report.covariance = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd flat_weight = Eigen::VectorXd::Zero(n);  // loading on excluded directions
    double eig_min_kept = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (eig[j] <= threshold) {
            flat_weight += vecs.col(j).cwiseAbs2();
            continue;
        }
        report.covariance += (vecs.col(j) * vecs.col(j).transpose()) / eig[j];
        eig_min_kept = std::min(eig_min_kept, eig[j]);
    }
    report.condition_number =
        std::isfinite(eig_min_kept) && eig_min_kept > 0
            ? eig_max / eig_min_kept
            : std::numeric_limits<double>::infinity();
    report.sigma.resize(n);
    report.variance_diag = report.covariance.diagonal();
    for (Eigen::Index i = 0; i < n; ++i)
        report.sigma[i] = flat_weight[i] > 1e-8
                              ? std::numeric_limits<double>::quiet_NaN()
                              : std::sqrt(std::max(report.variance_diag[i], 0.0));
    return report;
}

ErrorBarReport error_bars(const LatentClassModel& model_at_minimum, const Cohort& cohort,
                          const PenaltyConfig& penalty) {
    const LatentPacking packing(model_at_minimum, cohort);
    const LatentLikelihood evaluator(cohort, model_at_minimum.grid);
    LatentClassModel scratch = model_at_minimum;
    const Objective objective = [&](const Eigen::VectorXd& x) {
        packing.unpack(x, scratch);
        try {
            return psi_objective(scratch, evaluator, penalty);
        } catch (const LikelihoodError&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    return curvature_error_bars(objective, packing.pack(model_at_minimum),
                                packing.parameter_names());
}

GaussianFitReport fit_map_gaussian(const Cohort& cohort, int resolution, const FitConfig& config) {
    config.validate();
    cohort.validate();
    if (cohort.size() == 0) throw std::invalid_argument("fit_map_gaussian: empty cohort");
    const auto start = std::chrono::steady_clock::now();

    const int R = cohort.n_risks;
    const int p = static_cast<int>(cohort.n_covariates());
    const int m = (p + 1) * R;
    const auto [t_min, t_max] = infer_time_bounds(cohort);

    GaussianFrailtyModel shape;
    shape.n_risks = R;
    shape.n_covariates = p;
    shape.grid = HazardGrid{t_min, t_max, resolution};
    shape.means = Eigen::MatrixXd::Zero(R, p + 1);
    shape.covariance = Eigen::MatrixXd::Zero(m, m);
    shape.knots.resize(R + 1, resolution + 1);

    const double total_time = cohort.times.sum();
    std::vector<bool> row_free(R + 1, false);
    for (int r = 0; r <= R; ++r) {
        const long events = (cohort.labels.array() == r).count();
        row_free[r] = events > 0;
        shape.knots.row(r).setConstant(events > 0
                                           ? static_cast<double>(events) / total_time
                                           : 1e-8 * cohort.size() / total_time);
    }
    int free_rows = 0;
    for (bool f : row_free)
        if (f) ++free_rows;

    // parameters: means, lower-triangular factor A with C = A A^T, log knots
    const int dim = R * (p + 1) + m * (m + 1) / 2 + free_rows * (resolution + 1);

    auto unpack = [&](const Eigen::VectorXd& x, GaussianFrailtyModel& model) {
        int j = 0;
        for (int r = 0; r < R; ++r)
            for (int mu = 0; mu <= p; ++mu) model.means(r, mu) = x[j++];
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
        for (int row = 0; row < m; ++row)
            for (int col = 0; col <= row; ++col) a(row, col) = x[j++];
        model.covariance = a * a.transpose();
        for (int r = 0; r <= R; ++r) {
            if (!row_free[r]) continue;
            for (int k = 0; k <= resolution; ++k) model.knots(r, k) = std::exp(x[j++]);
        }
    };

    struct Outcome {
        Eigen::VectorXd x;
        double psi = std::numeric_limits<double>::infinity();
    };
    std::vector<Outcome> outcomes(config.restarts);

    RandomizedOptions opts;
    opts.amplitudes = config.randomization_schedule;
    opts.simplex.max_iter = config.simplex_max_iter;
    opts.simplex.tolerance = config.simplex_tolerance;

    std::atomic<int> next_restart{0};
    auto worker = [&]() {
        GaussianFrailtyModel scratch = shape;
        const Objective objective = [&](const Eigen::VectorXd& x) {
            unpack(x, scratch);
            return psi_objective(scratch, cohort, config.penalty);
        };
        for (;;) {
            const int s = next_restart.fetch_add(1);
            if (s >= config.restarts) break;
            Rng init_rng(mix_seed(config.rng_seed, s));
            Eigen::VectorXd x0(dim);
            int j = 0;
            for (int r = 0; r < R * (p + 1); ++r)
                x0[j++] = config.init_coefficient_noise * init_rng.normal();
            for (int e = 0; e < m * (m + 1) / 2; ++e)
                x0[j++] = config.init_coefficient_noise * init_rng.normal();
            for (int r = 0; r <= R; ++r) {
                if (!row_free[r]) continue;
                for (int k = 0; k <= resolution; ++k) x0[j++] = std::log(shape.knots(r, 0));
            }
            Rng rng(mix_seed(config.rng_seed, s, 0x726e64));
            auto on_round = [&](int round, double best) {
                if (config.verbose)
                    progress_line("fit gaussian K=" + std::to_string(resolution) + " restart " +
                                  std::to_string(s) + " round " + std::to_string(round) +
                                  " psi=" + std::to_string(best));
            };
            const SimplexResult run = randomized_minimize(objective, x0, opts, rng, on_round);
            outcomes[s] = Outcome{run.x, run.value};
        }
    };

    const int n_threads = std::min(config.threads, config.restarts);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    int best = -1;
    for (int s = 0; s < config.restarts; ++s)
        if (best < 0 || outcomes[s].psi < outcomes[best].psi) best = s;
    if (best < 0 || !std::isfinite(outcomes[best].psi))
        throw std::runtime_error("fit_map_gaussian: every restart produced a non-finite objective");

    GaussianFitReport report;
    report.model = shape;
    unpack(outcomes[best].x, report.model);
    report.psi = outcomes[best].psi;
    report.loglik = loglik_gaussian_lb(report.model, cohort);
    report.n_par = n_params(ModelKind::gaussian, 1, resolution, R, p);
    for (const auto& o : outcomes) report.per_restart_psis.push_back(o.psi);
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace riskmix
