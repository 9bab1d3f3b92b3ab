#include "riskmix/hazard.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace riskmix {

double HazardGrid::knot_time(int k) const {
    if (resolution == 0) return t_min;
    return t_min + (static_cast<double>(k) / resolution) * (t_max - t_min);
}

double HazardGrid::sigma() const {
    const double raw = resolution > 0 ? (t_max - t_min) / (2.0 * resolution) : 0.0;
    const double floor = std::max(1e-6, 1e-3 * t_max);
    return std::max(raw, floor);
}

BaseHazard::BaseHazard(HazardGrid grid, Eigen::VectorXd knot_values)
    : grid_(grid), knots_(std::move(knot_values)) {
    if (grid_.resolution < 0) throw std::invalid_argument("base hazard: negative resolution");
    if (knots_.size() != grid_.n_knots())
        throw std::invalid_argument("base hazard: expected K+1 knot values");
    if (!knots_.allFinite() || (knots_.array() < 0.0).any())
        throw std::invalid_argument("base hazard: knot values must be finite and >= 0");
    if (!(grid_.t_max >= grid_.t_min))
        throw std::invalid_argument("base hazard: t_max < t_min");
}

double BaseHazard::eval(double t) const {
    if (std::isnan(t)) throw std::invalid_argument("base hazard: NaN evaluation time");
    return knots_.dot(hazard_basis_at(grid_, t));
}

double BaseHazard::cumulative(double t, int n_panels) const {
    if (std::isnan(t)) throw std::invalid_argument("base hazard: NaN evaluation time");
    if (t == 0.0) return 0.0;
    if (grid_.resolution == 0) return knots_[0] * t;  // constant rate
    return integrate_panels([this](double s) { return eval(s); }, 0.0, t, n_panels);
}

std::pair<double, double> infer_time_bounds(const Cohort& cohort) {
    if (cohort.size() == 0) throw std::invalid_argument("infer_time_bounds: empty cohort");
    return {cohort.times.minCoeff(), cohort.times.maxCoeff()};
}

Eigen::VectorXd hazard_basis_at(const HazardGrid& grid, double t) {
    const int m = grid.n_knots();
    Eigen::VectorXd w(m);
    if (m == 1) {
        w[0] = 1.0;
        return w;
    }
    const double inv_two_sigma2 = 1.0 / (2.0 * grid.sigma() * grid.sigma());
    // exponents shifted by their minimum so the normalization never underflows
    double dmin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < m; ++k) {
        const double d = t - grid.knot_time(k);
        w[k] = d * d * inv_two_sigma2;
        dmin = std::min(dmin, w[k]);
    }
    double total = 0.0;
    for (int k = 0; k < m; ++k) {
        w[k] = std::exp(dmin - w[k]);
        total += w[k];
    }
    w /= total;
    return w;
}

Eigen::VectorXd cumulative_basis_at(const HazardGrid& grid, double t) {
    const int m = grid.n_knots();
    if (t == 0.0) return Eigen::VectorXd::Zero(m);
    if (m == 1) {
        Eigen::VectorXd one(1);
        one[0] = t;
        return one;
    }
    const auto& rule = gauss_legendre_11();
    const int n_panels = 20;
    const double panel = t / n_panels;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
    for (int j = 0; j < n_panels; ++j) {
        const double mid = (j + 0.5) * panel;
        const double half = 0.5 * panel;
        for (int q = 0; q < rule.nodes.size(); ++q)
            acc += (half * rule.weights[q]) * hazard_basis_at(grid, mid + half * rule.nodes[q]);
    }
    return acc;
}

HazardBasisCache make_basis_cache(const HazardGrid& grid, const Eigen::VectorXd& times) {
    HazardBasisCache cache;
    const Eigen::Index n = times.size();
    cache.rate.resize(n, grid.n_knots());
    cache.cumulative.resize(n, grid.n_knots());
    for (Eigen::Index i = 0; i < n; ++i) {
        cache.rate.row(i) = hazard_basis_at(grid, times[i]).transpose();
        cache.cumulative.row(i) = cumulative_basis_at(grid, times[i]).transpose();
    }
    return cache;
}

}  // namespace riskmix
