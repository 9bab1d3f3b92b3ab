#include "riskmix/hazard.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace riskmix;

TEST_CASE("interpolated rate is a convex combination of knot values") {
    const HazardGrid grid{0.0, 3.0, 3};
    SUBCASE("constant knots give a constant rate") {
        const BaseHazard h(grid, Eigen::Vector4d::Constant(0.7));
        for (double t : {0.0, 0.4, 1.5, 2.9, 3.7, 10.0})
            CHECK(h.eval(t) == doctest::Approx(0.7).epsilon(1e-13));
    }
    SUBCASE("symmetric knots give a symmetric rate") {
        const BaseHazard h(grid, Eigen::Vector4d(1.0, 0.0, 0.0, 1.0));
        CHECK(h.eval(0.5) == doctest::Approx(h.eval(2.5)).epsilon(1e-12));
        CHECK(h.eval(1.5) == doctest::Approx(h.eval(1.5)));
    }
    SUBCASE("values stay within the knot range") {
        Rng rng(3);
        Eigen::VectorXd knots(4);
        for (int k = 0; k < 4; ++k) knots[k] = rng.uniform01();
        const BaseHazard h(grid, knots);
        for (double t = 0.0; t <= 4.0; t += 0.05) {
            CHECK(h.eval(t) >= knots.minCoeff() - 1e-12);
            CHECK(h.eval(t) <= knots.maxCoeff() + 1e-12);
        }
    }
    SUBCASE("value at a knot tracks the knot value, exactly per the kernel-sum oracle") {
        const HazardGrid fine{0.0, 10.0, 20};
        Eigen::VectorXd knots(21);
        for (int k = 0; k <= 20; ++k) knots[k] = 0.5 + 0.3 * std::sin(k / 3.0);
        const BaseHazard h(fine, knots);
        const int j = 7;
        const double t = fine.knot_time(j);
        // direct kernel-sum oracle at the knot
        long double num = 0.0L, den = 0.0L;
        const long double sig = fine.sigma();
        for (int k = 0; k <= 20; ++k) {
            const long double d = (t - fine.knot_time(k)) / sig;
            const long double w = std::exp(-0.5L * d * d);
            num += knots[k] * w;
            den += w;
        }
        CHECK(h.eval(t) == doctest::Approx(static_cast<double>(num / den)).epsilon(1e-12));
        CHECK(std::abs(h.eval(t) - knots[j]) < 0.05);
    }
    SUBCASE("NaN times are rejected") {
        const BaseHazard h(grid, Eigen::Vector4d::Constant(0.7));
        CHECK_THROWS_AS(h.eval(std::nan("")), std::invalid_argument);
        CHECK_THROWS_AS(h.cumulative(std::nan("")), std::invalid_argument);
    }
    SUBCASE("a single knot acts as a constant rate") {
        const BaseHazard h(HazardGrid{1.0, 1.0, 0}, Eigen::VectorXd::Constant(1, 0.3));
        CHECK(h.eval(0.2) == doctest::Approx(0.3));
        CHECK(h.cumulative(2.0) == doctest::Approx(0.6));
    }
}

TEST_CASE("cumulative hazard matches independent integration") {
    SUBCASE("constant rate integrates to c*t") {
        const BaseHazard h(HazardGrid{0.0, 5.0, 2}, Eigen::Vector3d::Constant(0.31));
        for (double t : {0.5, 1.7, 5.0, 9.0})
            CHECK(h.cumulative(t) == doctest::Approx(0.31 * t).epsilon(1e-10));
        CHECK(h.cumulative(0.0) == 0.0);
    }
    SUBCASE("random knots against a high-resolution Simpson reference") {
        Rng rng(17);
        for (int rep = 0; rep < 3; ++rep) {
            const HazardGrid grid{0.0, 8.0, 4};
            Eigen::VectorXd knots(5);
            for (int k = 0; k < 5; ++k) knots[k] = rng.uniform01();
            const BaseHazard h(grid, knots);
            for (double t : {2.3, 8.0}) {
                const double ref =
                    oracle::simpson([&h](double s) { return h.eval(s); }, 0.0, t, 100000);
                CHECK(h.cumulative(t) == doctest::Approx(ref).epsilon(1e-8));
            }
        }
    }
    SUBCASE("doubling the panel count barely moves the result") {
        Rng rng(23);
        const HazardGrid grid{0.5, 6.5, 3};
        Eigen::VectorXd knots(4);
        for (int k = 0; k < 4; ++k) knots[k] = 0.05 + rng.uniform01();
        const BaseHazard h(grid, knots);
        for (double t : {1.0, 4.2, 7.7}) {
            const double a = h.cumulative(t, 20);
            const double b = h.cumulative(t, 40);
            CHECK(std::abs(a - b) <= 1e-9 * std::abs(b));
        }
    }
    SUBCASE("monotone and bounded by the knot range") {
        Rng rng(29);
        const HazardGrid grid{0.0, 4.0, 5};
        Eigen::VectorXd knots(6);
        for (int k = 0; k < 6; ++k) knots[k] = rng.uniform01();
        const BaseHazard h(grid, knots);
        double prev = 0.0;
        for (int j = 1; j <= 40; ++j) {
            const double t = 0.1 * j;
            const double cur = h.cumulative(t);
            CHECK(cur >= prev - 1e-12);
            CHECK(cur >= knots.minCoeff() * t - 1e-10);
            CHECK(cur <= knots.maxCoeff() * t + 1e-10);
            prev = cur;
        }
    }
}

TEST_CASE("time bounds come from the observed times") {
    Cohort cohort;
    cohort.times = Eigen::Vector3d(0.5, 2.0, 1.0);
    cohort.labels = Eigen::Vector3i(1, 1, 1);
    cohort.covariates.resize(3, 0);
    cohort.n_risks = 1;
    const auto [lo, hi] = infer_time_bounds(cohort);
    CHECK(lo == 0.5);
    CHECK(hi == 2.0);

    SUBCASE("degenerate single-record interval is handled by the sigma floor") {
        Cohort single;
        single.times = Eigen::VectorXd::Constant(1, 3.0);
        single.labels = Eigen::VectorXi::Constant(1, 1);
        single.covariates.resize(1, 0);
        single.n_risks = 1;
        const auto [a, b] = infer_time_bounds(single);
        CHECK(a == 3.0);
        CHECK(b == 3.0);
        const HazardGrid grid{a, b, 2};
        CHECK(grid.sigma() == doctest::Approx(3e-3));
        const BaseHazard h(grid, Eigen::Vector3d::Constant(0.2));
        CHECK(std::isfinite(h.eval(3.0)));
    }
    SUBCASE("empty cohort is rejected") {
        Cohort empty;
        empty.covariates.resize(0, 0);
        CHECK_THROWS_AS(infer_time_bounds(empty), std::invalid_argument);
    }
}

TEST_CASE("basis cache reproduces direct rate and cumulative evaluation") {
    Rng rng(41);
    const HazardGrid grid{0.2, 9.0, 3};
    Eigen::VectorXd knots(4);
    for (int k = 0; k < 4; ++k) knots[k] = 0.02 + rng.uniform01();
    const BaseHazard h(grid, knots);
    Eigen::VectorXd times(5);
    times << 0.0, 0.7, 3.3, 9.0, 12.0;
    const HazardBasisCache cache = make_basis_cache(grid, times);
    for (Eigen::Index i = 0; i < times.size(); ++i) {
        CHECK(cache.rate.row(i).dot(knots) == doctest::Approx(h.eval(times[i])).epsilon(1e-12));
        CHECK(cache.cumulative.row(i).dot(knots) ==
              doctest::Approx(h.cumulative(times[i])).epsilon(1e-12));
    }
}
