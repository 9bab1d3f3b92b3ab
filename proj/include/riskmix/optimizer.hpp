#pragma once

#include "riskmix/rng.hpp"

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace riskmix {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct SimplexOptions {
    int max_iter = 20000;
    double tolerance = 1e-8;    // absolute spread of simplex values
    double initial_step = 0.1;  // edge length of the initial simplex
};

struct SimplexResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
    long evaluations = 0;
    bool converged = false;
};

// Downhill simplex with standard coefficients (reflection 1, expansion 2,
// contraction 0.5, shrink 0.5). Non-finite objective values are treated as
// +inf; the returned value never exceeds f(x0).
SimplexResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                          const SimplexOptions& options = {});

struct RandomizedOptions {
    SimplexOptions simplex;
    // perturbation amplitudes between simplex passes, strictly decreasing
    std::vector<double> amplitudes = {0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625};
};

// Alternate simplex passes with full-parameter Gaussian perturbations of
// decreasing amplitude, keeping the best point seen. The per-round callback
// (round index, best value) reports progress; best values are nonincreasing.
SimplexResult randomized_minimize(
    const Objective& f, const Eigen::VectorXd& x0, const RandomizedOptions& options, Rng& rng,
    const std::function<void(int, double)>& on_round = nullptr);

}  // namespace riskmix
