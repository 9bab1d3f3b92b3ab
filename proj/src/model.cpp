#include "riskmix/model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace riskmix {

long n_params(ModelKind kind, long n_classes, long resolution, long n_risks, long n_covariates) {
    if (n_classes < 1 || resolution < 0 || n_risks < 1 || n_covariates < 0)
        throw std::invalid_argument("n_params: invalid arguments");
    const long p1 = n_covariates + 1;
    switch (kind) {
        case ModelKind::latent:
            return n_risks * n_classes * p1 + resolution * n_risks + n_classes - 1;
        case ModelKind::gaussian:
            return (p1 * p1 * n_risks * n_risks) / 2 + (3 * p1 * n_risks) / 2 +
                   resolution * n_risks;
    }
    throw std::invalid_argument("n_params: unknown model kind");
}

BaseHazard LatentClassModel::base_hazard(int r) const {
    if (r < 0 || r > n_risks) throw std::invalid_argument("base_hazard: risk out of range");
    return BaseHazard(grid, knots.row(r).transpose());
}

void LatentClassModel::validate() const {
    if (n_classes < 1 || n_risks < 1 || n_covariates < 0)
        throw std::invalid_argument("latent model: invalid dimensions");
    if (weights.size() != n_classes) throw std::invalid_argument("latent model: bad weight count");
    if (std::abs(weights.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("latent model: weights must sum to 1");
    if ((weights.array() <= 0.0).any() || (weights.array() >= 1.0 + 1e-12).any())
        throw std::invalid_argument("latent model: weights must lie in (0,1)");
    if (static_cast<int>(coef.size()) != n_risks + 1)
        throw std::invalid_argument("latent model: expected R+1 coefficient matrices");
    for (int r = 0; r <= n_risks; ++r) {
        if (coef[r].rows() != n_classes || coef[r].cols() != n_covariates + 1)
            throw std::invalid_argument("latent model: coefficient matrix must be L x (p+1)");
        if (!coef[r].allFinite())
            throw std::invalid_argument("latent model: non-finite coefficient");
    }
    if (!free_censoring && coef[0].cwiseAbs().maxCoeff() != 0.0)
        throw std::invalid_argument("latent model: censoring coefficients must be zero unless free");
    if (knots.rows() != n_risks + 1 || knots.cols() != grid.n_knots())
        throw std::invalid_argument("latent model: knot matrix must be (R+1) x (K+1)");
    if (!knots.allFinite() || (knots.array() < 0.0).any())
        throw std::invalid_argument("latent model: knot values must be finite and >= 0");
}

void canonicalize_classes(LatentClassModel& model) {
    const int L = model.n_classes;
    std::vector<int> order(L);
    std::iota(order.begin(), order.end(), 0);
    auto lex_less = [&model](int a, int b) {
        for (const auto& m : model.coef)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                if (m(a, c) < m(b, c)) return true;
                if (m(a, c) > m(b, c)) return false;
            }
        return false;
    };
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (model.weights[a] != model.weights[b]) return model.weights[a] > model.weights[b];
        return lex_less(a, b);
    });
    Eigen::VectorXd w(L);
    std::vector<Eigen::MatrixXd> coef = model.coef;
    for (int l = 0; l < L; ++l) {
        w[l] = model.weights[order[l]];
        for (std::size_t r = 0; r < coef.size(); ++r) coef[r].row(l) = model.coef[r].row(order[l]);
    }
    model.weights = std::move(w);
    model.coef = std::move(coef);
}

Eigen::Block<const Eigen::MatrixXd> GaussianFrailtyModel::block(int r, int r2) const {
    const int d = block_dim();
    return covariance.block((r - 1) * d, (r2 - 1) * d, d, d);
}

BaseHazard GaussianFrailtyModel::base_hazard(int r) const {
    if (r < 0 || r > n_risks) throw std::invalid_argument("base_hazard: risk out of range");
    return BaseHazard(grid, knots.row(r).transpose());
}

void GaussianFrailtyModel::validate() const {
    if (n_risks < 1 || n_covariates < 0)
        throw std::invalid_argument("gaussian model: invalid dimensions");
    const int m = block_dim() * n_risks;
    if (means.rows() != n_risks || means.cols() != block_dim())
        throw std::invalid_argument("gaussian model: means must be R x (p+1)");
    if (covariance.rows() != m || covariance.cols() != m)
        throw std::invalid_argument("gaussian model: covariance must be (p+1)R square");
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("gaussian model: covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("gaussian model: eigendecomposition failed");
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw std::invalid_argument("gaussian model: covariance is indefinite");
    if (knots.rows() != n_risks + 1 || knots.cols() != grid.n_knots())
        throw std::invalid_argument("gaussian model: knot matrix must be (R+1) x (K+1)");
    if (!knots.allFinite() || (knots.array() < 0.0).any())
        throw std::invalid_argument("gaussian model: knot values must be finite and >= 0");
}

}  // namespace riskmix
