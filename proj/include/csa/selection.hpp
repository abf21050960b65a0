#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "csa/learners.hpp"
#include "csa/weights.hpp"

namespace csa::selection {

// Rectangular search domain for (lambda, alpha). The lambda range must stay
// inside [0, 1]; the default alpha range covers the mixture (alpha = -1)
// through the relative-weight (alpha = 3) family members.
struct SearchBox {
    std::array<double, 2> lambda_range{0.0, 1.0};
    std::array<double, 2> alpha_range{-1.0, 3.0};

    void validate() const;
    // Map between box coordinates and the unit square.
    Eigen::Vector2d to_unit(const weights::WeightParams& wp) const;
    weights::WeightParams from_unit(const Eigen::Vector2d& u) const;
};

// Gaussian-process surrogate over the unit square with a squared-exponential
// kernel. Hyperparameters are fixed rather than tuned: per-dimension length
// scale 0.2, signal variance equal to the variance of the observed losses
// (floored at 1e-12) and noise variance 1e-6 times the signal. States are
// immutable; gp_update returns a new state.
class GpState {
public:
    // Builds the surrogate from observations. Optional overrides pin the
    // signal/noise variances (used by tests and noise-free fixtures).
    static GpState fit(Eigen::MatrixXd points, Eigen::VectorXd losses,
                       double length_scale = 0.2, double signal_override = -1.0,
                       double noise_override = -1.0);

    Eigen::Index count() const { return points_.rows(); }
    const Eigen::MatrixXd& points() const { return points_; }
    const Eigen::VectorXd& losses() const { return losses_; }
    double signal_variance() const { return signal_variance_; }
    double noise_variance() const { return noise_variance_; }
    double prior_mean() const { return prior_mean_; }
    double length_scale() const { return length_scale_; }

    friend struct GpPosteriorAccess;

private:
    GpState() = default;

    Eigen::MatrixXd points_;   // k x 2, unit-square coordinates
    Eigen::VectorXd losses_;
    double length_scale_ = 0.2;
    double signal_variance_ = 1.0;
    double noise_variance_ = 1e-6;
    double prior_mean_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> factor_;  // of K + noise I (with jitter if needed)
    Eigen::VectorXd alpha_;               // factor^{-1} (losses - prior_mean)
};

GpState gp_update(const GpState& state, const Eigen::Vector2d& point, double loss);

struct Posterior {
    double mean = 0.0;
    double stddev = 0.0;
};

Posterior gp_posterior(const GpState& state, const Eigen::Vector2d& point);

// Expected improvement for minimization:
//   EI = (L - mu) Phi(Z) + sigma phi(Z),  Z = (L - mu) / sigma,
// where L is the incumbent (smallest observed) loss. The sigma -> 0 limit
// max(L - mu, 0) is used below sigma = 1e-12. Always nonnegative.
double expected_improvement(const GpState& state, const Eigen::Vector2d& point,
                            double incumbent_loss);

struct SelectionResult {
    weights::WeightParams best_params{};
    double best_loss = 0.0;
    std::vector<std::pair<weights::WeightParams, double>> history;
    int evaluations = 0;
};

using Objective = std::function<double(const weights::WeightParams&)>;

// Sequential Bayesian optimization of the objective over the box. The initial
// design takes the four box corners then the center (so the lambda = 0 and
// lambda = 1 baselines are always evaluated), with any further initial points
// drawn uniformly from the seeded generator. Each iteration maximizes EI over
// a 101 x 101 unit-square grid, refines the 20 best candidates by pattern
// search, evaluates the objective there and refits the surrogate. Objective
// failures are recorded with +inf loss and never become the incumbent.
SelectionResult bayes_opt(const Objective& objective, const SearchBox& box, int n_init,
                          int n_iter, std::uint64_t seed);

struct GridResult {
    SelectionResult selection;
    Eigen::MatrixXd surface;      // n_lambda x n_alpha, +inf where the objective failed
    std::vector<double> lambdas;  // row coordinates
    std::vector<double> alphas;   // column coordinates
};

// Exhaustive evaluation over an n_lambda x n_alpha grid. Ties are broken
// toward the smallest lambda, then the smallest alpha.
GridResult grid_search(const Objective& objective, const SearchBox& box, int n_lambda,
                       int n_alpha);

// Importance-weighted cross-validation loss of the (lambda, alpha) weighting:
// the model is trained on each fold complement with the generalized weights
// and validated with the full density ratio as in
//   L = mean_folds mean_i ratio(x_i) * loss(h(x_i), y_i).
// Deterministic given the seed (which only shuffles the fold assignment).
double iwcv_loss(const learners::Dataset& train, const weights::DensityPair& dp,
                 const weights::WeightParams& wp, const learners::LearnerConfig& learner,
                 int folds, std::uint64_t seed);

// Information criterion for the weighted estimator,
//   IC = -2 L1(theta) + 2 tr(J H^{-1}),
// in the normal linear regression closed form: theta is the weighted
// least-squares fit, sigma^2 the weighted mean squared residual and h_i the
// diagonal of the weighted hat matrix X (X'WX)^{-1} X' W.
double ic_gw_linear(const learners::Dataset& train, const weights::DensityPair& dp,
                    const weights::WeightParams& wp);

// Per-sample log-likelihood callbacks evaluated at the weighted-risk
// minimizer, indexed by training row.
struct SampleLogLikelihood {
    int dim = 0;
    std::function<double(Eigen::Index)> log_density;
    std::function<Eigen::VectorXd(Eigen::Index)> score;
    std::function<Eigen::MatrixXd(Eigen::Index)> hessian;
};

// Plug-in estimate of the criterion above for an arbitrary parametric model:
// J and H are replaced by the sample sums -sum_i r_i w_i s_i s_i' and
// sum_i w_i hess_i. A gradient-norm guard rejects callbacks whose parameter
// is not the weighted minimizer.
double ic_gw_general(const SampleLogLikelihood& model, const learners::Dataset& train,
                     const weights::DensityPair& dp, const weights::WeightParams& wp);

}  // namespace csa::selection
