#include "riskmix/likelihood.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace riskmix;

namespace {

Cohort small_cohort(Rng& rng, int n, int n_risks, int p, double horizon,
                    bool with_censoring = true) {
    Cohort cohort;
    cohort.n_risks = n_risks;
    cohort.times.resize(n);
    cohort.labels.resize(n);
    cohort.covariates.resize(n, p);
    for (int i = 0; i < n; ++i) {
        cohort.times[i] = horizon * (0.05 + 0.95 * rng.uniform01());
        cohort.labels[i] =
            static_cast<int>(rng.uniform01() * (n_risks + (with_censoring ? 1 : 0))) +
            (with_censoring ? 0 : 1);
        if (cohort.labels[i] > n_risks) cohort.labels[i] = n_risks;
        for (int j = 0; j < p; ++j) cohort.covariates(i, j) = rng.normal();
    }
    return cohort;
}

// Direct evaluation of the generic mixture likelihood: per individual,
// P = lambda_{r_i}(t_i) * sum_l w_l exp(lead - sum_r Lambda_r(t_i) e^{beta_r^l . z}),
// with Lambda from a high-resolution Simpson reference.
double mixture_oracle(const LatentClassModel& model, const Cohort& cohort) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < cohort.size(); ++i) {
        const int ri = cohort.labels[i];
        const double t = cohort.times[i];
        Eigen::VectorXd zaug(model.n_covariates + 1);
        zaug[0] = 1.0;
        zaug.tail(model.n_covariates) = cohort.covariates.row(i).transpose();
        std::vector<double> cum(model.n_risks + 1);
        for (int r = 0; r <= model.n_risks; ++r) {
            const BaseHazard h = model.base_hazard(r);
            cum[r] = oracle::simpson([&h](double s) { return h.eval(s); }, 0.0, t, 20000);
        }
        double mix = 0.0;
        for (int l = 0; l < model.n_classes; ++l) {
            double expo = ri > 0 ? model.coef[ri].row(l).dot(zaug) : model.coef[0].row(l).dot(zaug);
            for (int r = 0; r <= model.n_risks; ++r)
                expo -= cum[r] * std::exp(model.coef[r].row(l).dot(zaug));
            mix += model.weights[l] * std::exp(expo);
        }
        total += std::log(model.base_hazard(ri).eval(t)) + std::log(mix);
    }
    return total;
}

}  // namespace

TEST_CASE("single-class single-risk exponential log-density") {
    LatentClassModel model;
    model.n_classes = 1;
    model.n_risks = 1;
    model.n_covariates = 0;
    model.weights = Eigen::VectorXd::Constant(1, 1.0);
    model.coef = {Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1)};
    model.grid = HazardGrid{0.0, 4.0, 1};
    model.knots.resize(2, 2);
    model.knots.row(0).setZero();
    model.knots.row(1).setConstant(0.3);

    Cohort cohort;
    cohort.n_risks = 1;
    cohort.times = Eigen::VectorXd::Constant(1, 2.5);
    cohort.labels = Eigen::VectorXi::Constant(1, 1);
    cohort.covariates.resize(1, 0);

    CHECK(loglik_latent(model, cohort) ==
          doctest::Approx(std::log(0.3) - 0.3 * 2.5).epsilon(1e-10));
}

TEST_CASE("latent likelihood matches the direct mixture oracle") {
    Rng rng(101);
    const Cohort cohort = small_cohort(rng, 5, 2, 2, 6.0);
    const LatentClassModel model = oracle::random_latent_model(rng, 2, 2, 2, 2, 6.0);
    const double value = loglik_latent(model, cohort);
    const double reference = mixture_oracle(model, cohort);
    CHECK(value == doctest::Approx(reference).epsilon(1e-6));
}

TEST_CASE("merging two identical classes reproduces the single-class value") {
    Rng rng(7);
    const Cohort cohort = small_cohort(rng, 12, 1, 2, 5.0);
    LatentClassModel one = oracle::random_latent_model(rng, 1, 1, 2, 1, 5.0);

    LatentClassModel two = one;
    two.n_classes = 2;
    two.weights = Eigen::Vector2d(0.3, 0.7);
    for (auto& m : two.coef) {
        Eigen::MatrixXd doubled(2, m.cols());
        doubled.row(0) = m.row(0);
        doubled.row(1) = m.row(0);
        m = doubled;
    }
    CHECK(loglik_latent(two, cohort) ==
          doctest::Approx(loglik_latent(one, cohort)).epsilon(1e-12));
}

TEST_CASE("relabeling classes leaves the likelihood unchanged") {
    Rng rng(13);
    const Cohort cohort = small_cohort(rng, 15, 2, 3, 7.0);
    LatentClassModel model = oracle::random_latent_model(rng, 3, 2, 3, 1, 7.0);
    const double base = loglik_latent(model, cohort);

    LatentClassModel permuted = model;
    const int perm[3] = {2, 0, 1};
    for (int l = 0; l < 3; ++l) {
        permuted.weights[l] = model.weights[perm[l]];
        for (std::size_t r = 0; r < model.coef.size(); ++r)
            permuted.coef[r].row(l) = model.coef[r].row(perm[l]);
    }
    CHECK(loglik_latent(permuted, cohort) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("rate-scale redundancy: lambda -> lambda e^-z, frailties += z") {
    Rng rng(19);
    const Cohort cohort = small_cohort(rng, 10, 2, 2, 5.0);
    LatentClassModel model = oracle::random_latent_model(rng, 2, 2, 2, 1, 5.0);
    const double base = loglik_latent(model, cohort);

    const double zeta = 0.7;
    LatentClassModel shifted = model;  // constraint released: all frailties move
    shifted.knots.row(1) *= std::exp(-zeta);
    shifted.coef[1].col(0).array() += zeta;
    CHECK(loglik_latent(shifted, cohort) == doctest::Approx(base).epsilon(1e-11));
}

TEST_CASE("log-sum-exp keeps extreme linear predictors finite") {
    Cohort cohort;
    cohort.n_risks = 1;
    cohort.times = Eigen::Vector2d(1.0, 3.0);
    cohort.labels = Eigen::Vector2i(1, 0);
    cohort.covariates = Eigen::Vector2d(1.0, -1.0);

    LatentClassModel model;
    model.n_classes = 2;
    model.n_risks = 1;
    model.n_covariates = 1;
    model.weights = Eigen::Vector2d(0.5, 0.5);
    model.coef = {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)};
    model.coef[1] << 0.0, 30.0, 0.0, -30.0;  // |beta . z| up to 30
    model.grid = HazardGrid{0.0, 4.0, 1};
    model.knots.resize(2, 2);
    model.knots.row(0).setConstant(0.01);
    model.knots.row(1).setConstant(0.05);

    const double value = loglik_latent(model, cohort);
    CHECK(std::isfinite(value));
}

TEST_CASE("finite-difference gradient is step-size consistent in every coefficient") {
    Rng rng(23);
    const Cohort cohort = small_cohort(rng, 20, 2, 2, 6.0);
    LatentClassModel model = oracle::random_latent_model(rng, 2, 2, 2, 1, 6.0, 0.4);
    const LatentLikelihood evaluator(cohort, model.grid);

    for (int r = 1; r <= 2; ++r)
        for (int l = 0; l < 2; ++l)
            for (int mu = 0; mu <= 2; ++mu) {
                auto central = [&](double h) {
                    LatentClassModel plus = model, minus = model;
                    plus.coef[r](l, mu) += h;
                    minus.coef[r](l, mu) -= h;
                    return (evaluator.value(plus) - evaluator.value(minus)) / (2.0 * h);
                };
                const double g1 = central(1e-4);
                const double g2 = central(5e-5);
                CHECK(g1 == doctest::Approx(g2).epsilon(1e-5));
            }
}

TEST_CASE("parameter counts follow the two closed formulas") {
    CHECK(n_params(ModelKind::latent, 2, 3, 2, 3) == 23);
    CHECK(n_params(ModelKind::latent, 1, 2, 3, 4) == 3 * 1 * 5 + 2 * 3);  // no free weights
    CHECK(n_params(ModelKind::gaussian, 1, 1, 1, 1) == 6);
    CHECK_THROWS_AS(n_params(ModelKind::latent, 0, 1, 1, 1), std::invalid_argument);
}

TEST_CASE("psi is the parameter count minus log-likelihood minus log-prior") {
    Rng rng(29);
    const Cohort cohort = small_cohort(rng, 10, 1, 2, 5.0);
    LatentClassModel model = oracle::random_latent_model(rng, 1, 1, 2, 1, 5.0);
    for (auto& m : model.coef) m.setZero();

    SUBCASE("zero coefficients leave only n_par - loglik") {
        const double psi = psi_objective(model, cohort);
        const double expected =
            static_cast<double>(n_params(ModelKind::latent, 1, 1, 1, 2)) -
            loglik_latent(model, cohort);
        CHECK(psi == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("a duplicated class costs its parameter-count increment plus prior mass") {
        Rng rng2(31);
        LatentClassModel base = oracle::random_latent_model(rng2, 1, 1, 2, 1, 5.0);
        LatentClassModel dup = base;
        dup.n_classes = 2;
        dup.weights = Eigen::Vector2d(0.4, 0.6);
        for (auto& m : dup.coef) {
            Eigen::MatrixXd d(2, m.cols());
            d.row(0) = m.row(0);
            d.row(1) = m.row(0);
            m = d;
        }
        const double psi_base = psi_objective(base, cohort);
        const double psi_dup = psi_objective(dup, cohort);
        const double npar_gain =
            static_cast<double>(n_params(ModelKind::latent, 2, 1, 1, 2) -
                                n_params(ModelKind::latent, 1, 1, 1, 2));
        const double prior_gain = 0.5 * base.coef[1].row(0).squaredNorm();
        CHECK(psi_dup > psi_base);
        CHECK(psi_dup - psi_base == doctest::Approx(npar_gain + prior_gain).epsilon(1e-10));
    }
}

TEST_CASE("non-finite likelihood names the offending individual") {
    Cohort cohort;
    cohort.n_risks = 1;
    cohort.times = Eigen::Vector2d(1.0, 2.0);
    cohort.labels = Eigen::Vector2i(1, 1);
    cohort.covariates.resize(2, 0);

    LatentClassModel model;
    model.n_classes = 1;
    model.n_risks = 1;
    model.n_covariates = 0;
    model.weights = Eigen::VectorXd::Constant(1, 1.0);
    model.coef = {Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1)};
    model.grid = HazardGrid{0.0, 2.0, 1};
    model.knots = Eigen::MatrixXd::Zero(2, 2);  // zero event rate -> log 0

    try {
        loglik_latent(model, cohort);
        FAIL("expected a LikelihoodError");
    } catch (const LikelihoodError& err) {
        CHECK(err.individual() == 0);
    }
}
