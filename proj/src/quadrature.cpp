#include "riskmix/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace riskmix {

QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Chebyshev estimate, then Newton on P_n(z)
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        const double w = 2.0 / ((1.0 - z * z) * pp * pp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

const QuadratureRule& gauss_legendre_11() {
    static const QuadratureRule rule = gauss_legendre(11);
    return rule;
}

double integrate_panels(const std::function<double(double)>& f, double a, double b,
                        int n_panels, const QuadratureRule& rule) {
    if (n_panels < 1) throw std::invalid_argument("integrate_panels: n_panels must be >= 1");
    if (a == b) return 0.0;
    const double panel = (b - a) / n_panels;
    double total = 0.0;
    for (int j = 0; j < n_panels; ++j) {
        const double lo = a + j * panel;
        const double mid = lo + 0.5 * panel;
        const double half = 0.5 * panel;
        double sum = 0.0;
        for (int q = 0; q < rule.nodes.size(); ++q)
            sum += rule.weights[q] * f(mid + half * rule.nodes[q]);
        total += half * sum;
    }
    return total;
}

}  // namespace riskmix
