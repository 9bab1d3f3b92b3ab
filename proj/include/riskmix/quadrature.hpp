#pragma once

#include <Eigen/Dense>
#include <functional>

namespace riskmix {

// Gauss-Legendre rule on [-1,1].
struct QuadratureRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

// n-point rule, nodes by Newton iteration on the Legendre recurrence.
QuadratureRule gauss_legendre(int n);

// The 11-point rule used for all cumulative-hazard integrals (cached).
const QuadratureRule& gauss_legendre_11();

// Composite integral of f over [a,b]: the rule applied to n_panels equal panels.
double integrate_panels(const std::function<double(double)>& f, double a, double b,
                        int n_panels, const QuadratureRule& rule = gauss_legendre_11());

}  // namespace riskmix
