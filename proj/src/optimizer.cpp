#include "riskmix/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace riskmix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double guarded(const Objective& f, const Eigen::VectorXd& x, long& evaluations) {
    ++evaluations;
    double v;
    try {
        v = f(x);
    } catch (const std::exception&) {
        return kInf;
    }
    return std::isnan(v) ? kInf : v;
}

}  // namespace

SimplexResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                          const SimplexOptions& options) {
    const Eigen::Index n = x0.size();
    if (n == 0) throw std::invalid_argument("nelder_mead: empty parameter vector");

    SimplexResult result;
    std::vector<Eigen::VectorXd> verts(n + 1, x0);
    Eigen::VectorXd fvals(n + 1);
    for (Eigen::Index j = 0; j < n; ++j) verts[j + 1][j] += options.initial_step;
    for (Eigen::Index v = 0; v <= n; ++v) fvals[v] = guarded(f, verts[v], result.evaluations);

    std::vector<Eigen::Index> order(n + 1);
    Eigen::VectorXd centroid(n), xr(n), xe(n), xc(n);
    for (result.iterations = 0; result.iterations < options.max_iter; ++result.iterations) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::sort(order.begin(), order.end(),
                  [&fvals](Eigen::Index a, Eigen::Index b) { return fvals[a] < fvals[b]; });
        const Eigen::Index best = order.front(), worst = order.back(), second = order[n - 1];

        const double spread = fvals[worst] - fvals[best];
        if (spread < options.tolerance && std::isfinite(fvals[worst])) {
            result.converged = true;
            break;
        }

        centroid.setZero();
        for (Eigen::Index v = 0; v <= n; ++v)
            if (v != worst) centroid += verts[v];
        centroid /= static_cast<double>(n);

        xr = centroid + (centroid - verts[worst]);  // reflection
        const double fr = guarded(f, xr, result.evaluations);
        if (fr < fvals[best]) {
            xe = centroid + 2.0 * (centroid - verts[worst]);  // expansion
            const double fe = guarded(f, xe, result.evaluations);
            if (fe < fr) {
                verts[worst] = xe;
                fvals[worst] = fe;
            } else {
                verts[worst] = xr;
                fvals[worst] = fr;
            }
        } else if (fr < fvals[second]) {
            verts[worst] = xr;
            fvals[worst] = fr;
        } else {
            if (fr < fvals[worst]) {
                xc = centroid + 0.5 * (xr - centroid);  // outside contraction
            } else {
                xc = centroid + 0.5 * (verts[worst] - centroid);  // inside contraction
            }
            const double fc = guarded(f, xc, result.evaluations);
            if (fc < std::min(fr, fvals[worst])) {
                verts[worst] = xc;
                fvals[worst] = fc;
            } else {  // shrink toward the best vertex
                for (Eigen::Index v = 0; v <= n; ++v) {
                    if (v == best) continue;
                    verts[v] = verts[best] + 0.5 * (verts[v] - verts[best]);
                    fvals[v] = guarded(f, verts[v], result.evaluations);
                }
            }
        }
    }

    Eigen::Index best = 0;
    for (Eigen::Index v = 1; v <= n; ++v)
        if (fvals[v] < fvals[best]) best = v;
    result.x = verts[best];
    result.value = fvals[best];
    return result;
}

SimplexResult randomized_minimize(const Objective& f, const Eigen::VectorXd& x0,
                                  const RandomizedOptions& options, Rng& rng,
                                  const std::function<void(int, double)>& on_round) {
    for (std::size_t j = 1; j < options.amplitudes.size(); ++j)
        if (!(options.amplitudes[j] < options.amplitudes[j - 1]))
            throw std::invalid_argument("randomized_minimize: amplitudes must strictly decrease");

    SimplexResult best = nelder_mead(f, x0, options.simplex);
    if (on_round) on_round(0, best.value);

    Eigen::VectorXd x(x0.size());
    for (std::size_t round = 0; round < options.amplitudes.size(); ++round) {
        for (Eigen::Index j = 0; j < x.size(); ++j)
            x[j] = best.x[j] + options.amplitudes[round] * rng.normal();
        SimplexResult attempt = nelder_mead(f, x, options.simplex);
        best.evaluations += attempt.evaluations;
        best.iterations += attempt.iterations;
        if (attempt.value < best.value) {
            best.value = attempt.value;
            best.x = attempt.x;
            best.converged = attempt.converged;
        }
        if (on_round) on_round(static_cast<int>(round) + 1, best.value);
    }
    return best;
}

}  // namespace riskmix
