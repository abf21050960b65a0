#include "csa/weights.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "csa/geometry.hpp"

namespace csa::weights {

void WeightParams::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::domain_error("WeightParams: lambda must lie in [0,1], got " +
                                std::to_string(lambda));
    }
    if (!std::isfinite(alpha)) {
        throw std::domain_error("WeightParams: alpha must be finite");
    }
}

namespace {

double checked_density(const DensityFn& f, const Eigen::VectorXd& x, const char* name) {
    if (!f) throw std::invalid_argument(std::string("DensityPair: ") + name + " is not set");
    const double v = f(x);
    if (!std::isfinite(v) || v < kSupportFloor) {
        throw std::domain_error(std::string("support violation: ") + name + "(x) = " +
                                std::to_string(v));
    }
    return v;
}

}  // namespace

double DensityPair::train_density(const Eigen::VectorXd& x) const {
    return checked_density(p_tr, x, "p_tr");
}

double DensityPair::test_density(const Eigen::VectorXd& x) const {
    return checked_density(p_te, x, "p_te");
}

double DensityPair::density_ratio(const Eigen::VectorXd& x) const {
    if (ratio) {
        const double r = ratio(x);
        if (!std::isfinite(r) || r <= 0.0) {
            throw std::domain_error("support violation: density ratio(x) = " + std::to_string(r));
        }
        return r;
    }
    return test_density(x) / train_density(x);
}

double generalized_weight(const DensityPair& dp, const Eigen::VectorXd& x,
                          const WeightParams& wp) {
    wp.validate();
    const double a = dp.train_density(x);
    const double b = dp.test_density(x);
    return geometry::f_interpolate(a, b, wp.lambda, wp.alpha) / a;
}

double weight_from_ratio(double r, const WeightParams& wp) {
    wp.validate();
    if (!(r > 0.0) || !std::isfinite(r)) {
        throw std::domain_error("weight_from_ratio requires r > 0, got " + std::to_string(r));
    }
    if (wp.lambda == 0.0) return 1.0;
    if (wp.lambda == 1.0) return r;
    if (std::abs(wp.alpha - 1.0) < geometry::kLogBranchWindow) {
        return std::exp(wp.lambda * std::log(r));
    }
    // log w = 2/(1-alpha) * log((1-lambda) + lambda * r^{(1-alpha)/2}),
    // with the inner sum evaluated by log-sum-exp.
    const double t = 0.5 * (1.0 - wp.alpha) * std::log(r);
    const double la = std::log1p(-wp.lambda);
    const double lb = std::log(wp.lambda) + t;
    const double m = std::max(la, lb);
    const double lse = m + std::log(std::exp(la - m) + std::exp(lb - m));
    return std::exp(2.0 / (1.0 - wp.alpha) * lse);
}

Eigen::VectorXd batch_weights(const DensityPair& dp, const Eigen::MatrixXd& X,
                              const WeightParams& wp) {
    wp.validate();
    Eigen::VectorXd w(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        try {
            w[i] = generalized_weight(dp, X.row(i).transpose(), wp);
        } catch (const std::domain_error& e) {
            throw std::domain_error("row " + std::to_string(i) + ": " + e.what());
        }
    }
    return w;
}

}  // namespace csa::weights
