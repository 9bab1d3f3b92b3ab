#pragma once

#include "riskmix/cohort.hpp"
#include "riskmix/quadrature.hpp"

#include <Eigen/Dense>
#include <utility>

namespace riskmix {

// Equidistant knot-time layout shared by all base hazards of a model.
// Knot k sits at t_min + (k/K)(t_max - t_min); the Gaussian kernel width is
// half a knot spacing, floored when the data interval degenerates.
struct HazardGrid {
    double t_min = 0.0;
    double t_max = 1.0;
    int resolution = 1;  // K, number of intervals; K+1 knots

    int n_knots() const { return resolution + 1; }
    double knot_time(int k) const;
    double sigma() const;
};

// Base hazard: normalized Gaussian-kernel interpolation of nonnegative knot
// values. Rates stay within [min knot, max knot] for every t; the cumulative
// integral uses the 11-point Gauss-Legendre rule on 20 equal panels of [0,t].
class BaseHazard {
public:
    BaseHazard() = default;
    BaseHazard(HazardGrid grid, Eigen::VectorXd knot_values);

    const HazardGrid& grid() const { return grid_; }
    const Eigen::VectorXd& knots() const { return knots_; }

    double eval(double t) const;
    double cumulative(double t) const { return cumulative(t, 20); }
    double cumulative(double t, int n_panels) const;

private:
    HazardGrid grid_;
    Eigen::VectorXd knots_;
};

// (min, max) of observed times; throws on an empty cohort.
std::pair<double, double> infer_time_bounds(const Cohort& cohort);

// The interpolated rate is linear in the knot values:
//   lambda(t|xi) = xi . phi(t),   Lambda(t|xi) = xi . Phi(t)
// with phi the normalized kernel basis and Phi its 11-point/20-panel
// integral. The cache holds one row per requested time; likelihood code
// evaluates rates and cumulative rates as dot products against it.
Eigen::VectorXd hazard_basis_at(const HazardGrid& grid, double t);
Eigen::VectorXd cumulative_basis_at(const HazardGrid& grid, double t);

struct HazardBasisCache {
    Eigen::MatrixXd rate;        // N x (K+1)
    Eigen::MatrixXd cumulative;  // N x (K+1)
};

HazardBasisCache make_basis_cache(const HazardGrid& grid, const Eigen::VectorXd& times);

}  // namespace riskmix
