#include "riskmix/cohort.hpp"
#include "riskmix/inference.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

using namespace riskmix;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& content) {
        static int counter = 0;
        path = "riskmix_test_" + std::to_string(counter++) + ".csv";
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("csv loading parses rows in order and infers the risk count") {
    TempFile file("t,r,z1\n1.0,1,0.5\n2.0,0,-0.5\n0.5,2,1.0\n");
    CsvSchema schema;
    schema.time_column = "t";
    schema.event_column = "r";
    const Cohort cohort = load_cohort(file.path, schema);
    CHECK(cohort.size() == 3);
    CHECK(cohort.n_risks == 2);
    CHECK(cohort.n_covariates() == 1);
    CHECK(cohort.times[0] == 1.0);
    CHECK(cohort.labels[1] == 0);
    CHECK(cohort.covariates(2, 0) == 1.0);
}

TEST_CASE("csv loading rejects malformed input with line numbers") {
    SUBCASE("empty file") {
        TempFile file("");
        CHECK_THROWS_WITH_AS(load_cohort(file.path), doctest::Contains("no records"),
                             std::invalid_argument);
    }
    SUBCASE("header only") {
        TempFile file("time,event,z1\n");
        CHECK_THROWS_WITH_AS(load_cohort(file.path), doctest::Contains("no records"),
                             std::invalid_argument);
    }
    SUBCASE("negative event label") {
        TempFile file("time,event,z1\n1.0,1,0.2\n2.0,-1,0.3\n");
        CHECK_THROWS_WITH_AS(load_cohort(file.path), doctest::Contains("line 3"),
                             std::invalid_argument);
    }
    SUBCASE("negative time") {
        TempFile file("time,event,z1\n-1.0,1,0.2\n");
        CHECK_THROWS_WITH_AS(load_cohort(file.path), doctest::Contains("negative time"),
                             std::invalid_argument);
    }
    SUBCASE("non-numeric covariate") {
        TempFile file("time,event,z1\n1.0,1,oops\n");
        CHECK_THROWS_WITH_AS(load_cohort(file.path), doctest::Contains("non-numeric"),
                             std::invalid_argument);
    }
    SUBCASE("missing required column") {
        TempFile file("time,z1\n1.0,0.2\n");
        CHECK_THROWS_AS(load_cohort(file.path), std::invalid_argument);
    }
}

TEST_CASE("normalization rescales to zero mean and unit population variance") {
    Cohort cohort;
    cohort.times = Eigen::Vector3d(1.0, 2.0, 3.0);
    cohort.labels = Eigen::Vector3i(1, 1, 1);
    cohort.covariates = Eigen::Vector3d(1.0, 2.0, 3.0);
    cohort.n_risks = 1;

    const Cohort normalized = normalize_covariates(cohort);
    const double expected = 1.0 / std::sqrt(2.0 / 3.0);  // (3-2)/sd with sd = sqrt(2/3)
    CHECK(normalized.covariates(0, 0) == doctest::Approx(-expected).epsilon(1e-12));
    CHECK(normalized.covariates(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(normalized.covariates(2, 0) == doctest::Approx(expected).epsilon(1e-12));
    REQUIRE(normalized.normalization.has_value());
    CHECK(normalized.normalization->mean[0] == doctest::Approx(2.0));
    CHECK(normalized.normalization->sd[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));

    SUBCASE("idempotent on already-normalized data") {
        const Cohort again = normalize_covariates(normalized);
        CHECK((again.covariates - normalized.covariates).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("constant column is rejected by name") {
        Cohort bad = cohort;
        bad.covariates.setConstant(5.0);
        bad.covariate_names = {"age"};
        CHECK_THROWS_WITH_AS(normalize_covariates(bad), doctest::Contains("age"),
                             std::invalid_argument);
    }
}

namespace {

SyntheticSpec table1_spec_a(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.class_weights = Eigen::Vector2d(0.5, 0.5);
    spec.base_rates = Eigen::VectorXd::Constant(1, 0.05);
    spec.betas = {Eigen::MatrixXd(1, 4), Eigen::MatrixXd(1, 4)};
    spec.betas[0] << 0.0, 2.0, 0.0, 0.0;
    spec.betas[1] << 0.0, -2.0, 0.0, 0.0;
    spec.censor_time = 50.0;
    spec.n_individuals = 1600;
    spec.n_covariates = 3;
    spec.rng_seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("synthetic generation is bit-reproducible under a fixed seed") {
    const auto a = generate_synthetic(table1_spec_a(11));
    const auto b = generate_synthetic(table1_spec_a(11));
    CHECK(a.cohort.times == b.cohort.times);
    CHECK(a.cohort.labels == b.cohort.labels);
    CHECK(a.cohort.covariates == b.cohort.covariates);
    CHECK(a.true_class == b.true_class);
    const auto c = generate_synthetic(table1_spec_a(12));
    CHECK(a.cohort.times != c.cohort.times);
}

TEST_CASE("table-1 data set A produces about 1194 primary events") {
    for (std::uint64_t seed : {2ull, 3ull, 4ull}) {
        const auto data = generate_synthetic(table1_spec_a(seed));
        const long events = (data.cohort.labels.array() == 1).count();
        CHECK(std::abs(events - 1194) <= 48);  // within 3% of N
    }
}

TEST_CASE("unit-rate exponential cohort has mean event time 1") {
    SyntheticSpec spec;
    spec.class_weights = Eigen::VectorXd::Constant(1, 1.0);
    spec.base_rates = Eigen::VectorXd::Constant(1, 1.0);
    spec.betas = {Eigen::MatrixXd::Zero(1, 1)};
    spec.n_individuals = 20000;
    spec.n_covariates = 0;
    spec.rng_seed = 5;
    const auto data = generate_synthetic(spec);
    const double mean = data.cohort.times.mean();
    CHECK(std::abs(mean - 1.0) < 3.0 / std::sqrt(20000.0));
    CHECK((data.cohort.labels.array() == 1).all());
}

namespace {

SyntheticSpec synthetic2_spec(double rho, int n, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.class_weights = Eigen::Vector3d(1.0, 1.0, 1.0) / 3.0;
    spec.base_rates.resize(3);
    spec.base_rates << 0.1, 0.05, 1.0 / 30.0;
    Eigen::MatrixXd b1 = Eigen::MatrixXd::Zero(3, 4);
    Eigen::MatrixXd b2 = b1, b3 = b1;
    b1.row(0) << 0.0, 0.5 + rho, 0.5, 0.5 + rho;
    b2.row(0) << 0.0, 0.5 - rho, 0.5 - rho, 0.5;
    b3.row(0) << 0.0, 0.5, 0.5 + rho, 0.5 - rho;
    spec.betas = {b1, b2, b3};
    spec.n_individuals = n;
    spec.n_covariates = 3;
    spec.rng_seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("three-risk synthetic cohorts have about 4968 primary events at rho=4") {
    const auto data = generate_synthetic(synthetic2_spec(4.0, 9600, 21));
    const long events = (data.cohort.labels.array() == 1).count();
    CHECK(std::abs(events - 4968) <= 288);  // within 3% of N
}

TEST_CASE("homogeneous-cohort crude hazard matches the individual rate near z=0") {
    // In a homogeneous cohort crude and individual rates coincide; the
    // empirical cause-specific rate in a covariate bin is events / exposure.
    SyntheticSpec spec;
    spec.class_weights = Eigen::VectorXd::Constant(1, 1.0);
    spec.base_rates.resize(2);
    spec.base_rates << 1.0, 0.5;
    spec.betas = {Eigen::MatrixXd::Zero(2, 2)};
    spec.betas[0](0, 1) = 0.5;
    spec.betas[0](1, 1) = -0.3;
    spec.n_individuals = 100000;
    spec.n_covariates = 1;
    spec.rng_seed = 31;
    const auto data = generate_synthetic(spec);

    for (double z0 : {-0.2, 0.0, 0.2}) {
        for (int r = 1; r <= 2; ++r) {
            double exposure = 0.0;
            long events = 0;
            for (Eigen::Index i = 0; i < data.cohort.size(); ++i) {
                if (std::abs(data.cohort.covariates(i, 0) - z0) > 0.1) continue;
                exposure += data.cohort.times[i];
                if (data.cohort.labels[i] == r) ++events;
            }
            const double expected = spec.base_rates[r - 1] * std::exp(spec.betas[0](r - 1, 1) * z0);
            CHECK(events / exposure == doctest::Approx(expected).epsilon(0.05));
        }
    }
}

TEST_CASE("correlated risks push the empirical crude hazard away from the decontaminated one") {
    // data-set-B construction: secondary risk removes high-primary-risk
    // individuals, so the observed primary rate falls below the
    // decontaminated rate late in the trial (false protectivity).
    SyntheticSpec spec;
    spec.class_weights = Eigen::Vector2d(0.5, 0.5);
    spec.base_rates.resize(2);
    spec.base_rates << 0.05, 0.1;
    spec.betas = {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)};
    spec.betas[0].row(0) << 0.0, 2.0;
    spec.betas[0].row(1) << 0.0, 3.0;
    spec.betas[1].row(0) << 0.0, -2.0;
    spec.n_individuals = 200000;
    spec.n_covariates = 1;
    spec.rng_seed = 77;
    const auto data = generate_synthetic(spec);

    LatentClassModel model;
    model.n_classes = 2;
    model.n_risks = 2;
    model.n_covariates = 1;
    model.weights = spec.class_weights;
    model.grid = HazardGrid{0.0, 60.0, 1};
    model.coef = {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2),
                  Eigen::MatrixXd::Zero(2, 2)};
    model.coef[1].row(0) << 0.0, 2.0;
    model.coef[1].row(1) << 0.0, -2.0;
    model.coef[2].row(0) << 0.0, 3.0;
    model.knots.setZero(3, 2);
    model.knots.row(1).setConstant(0.05);
    model.knots.row(2).setConstant(0.1);

    // empirical crude primary hazard in a window around t=25, conditioned on
    // z in a band around 0.8
    const double z0 = 0.8, t_lo = 20.0, t_hi = 30.0;
    double exposure = 0.0;
    long events = 0;
    for (Eigen::Index i = 0; i < data.cohort.size(); ++i) {
        if (std::abs(data.cohort.covariates(i, 0) - z0) > 0.1) continue;
        const double t = data.cohort.times[i];
        if (t <= t_lo) continue;
        exposure += std::min(t, t_hi) - t_lo;
        if (data.cohort.labels[i] == 1 && t <= t_hi) ++events;
    }
    REQUIRE(exposure > 0.0);
    const double empirical_crude = events / exposure;
    Eigen::VectorXd z(1);
    z << z0;
    const double decont = decontaminated_hazard(model, 1, z, 25.0);
    CHECK(empirical_crude < decont);
    // and the model's own crude rate agrees with the deviation direction
    CHECK(crude_hazard(model, 1, z, 25.0) < decont);
}
