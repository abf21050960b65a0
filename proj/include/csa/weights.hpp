#pragma once

#include <Eigen/Core>
#include <functional>

namespace csa::weights {

// Densities smaller than this are treated as support violations rather than
// clamped: under the covariate shift assumption both densities are strictly
// positive wherever they are evaluated.
inline constexpr double kSupportFloor = 1e-300;

// Coordinates of the generalized weight family: interpolation position
// lambda in [0, 1] and mean parameter alpha (any finite real).
struct WeightParams {
    double lambda = 0.0;
    double alpha = 1.0;

    void validate() const;
};

using DensityFn = std::function<double(const Eigen::VectorXd&)>;

// Pair of pointwise-evaluable input densities. `ratio` may be supplied when a
// numerically exact closed form for p_te/p_tr exists; otherwise the quotient
// of the two evaluators is used.
struct DensityPair {
    DensityFn p_tr;
    DensityFn p_te;
    DensityFn ratio;  // optional

    double train_density(const Eigen::VectorXd& x) const;
    double test_density(const Eigen::VectorXd& x) const;
    double density_ratio(const Eigen::VectorXd& x) const;
};

// Generalized importance weight
//   w(x) = m^{(lambda,alpha)}(p_tr(x), p_te(x)) / p_tr(x),
// computed through the f-interpolation of the two density values. Equals 1 at
// lambda = 0 and p_te/p_tr at lambda = 1; recovers the exponentially flattened
// ratio (p_te/p_tr)^lambda at alpha = 1 and the relative weight
// p_te / ((1-lambda) p_te + lambda p_tr) at alpha = 3.
double generalized_weight(const DensityPair& dp, const Eigen::VectorXd& x,
                          const WeightParams& wp);

// Same weight expressed through the density ratio r = p_te/p_tr alone:
//   w = [(1-lambda) + lambda r^{(1-alpha)/2}]^{2/(1-alpha)}   (alpha != 1)
//   w = r^lambda                                              (alpha == 1)
// Evaluated in log space so extreme ratios cannot overflow.
double weight_from_ratio(double r, const WeightParams& wp);

// Row-wise generalized_weight over a feature matrix. Support violations are
// reported with the offending row index.
Eigen::VectorXd batch_weights(const DensityPair& dp, const Eigen::MatrixXd& X,
                              const WeightParams& wp);

}  // namespace csa::weights
