#include "csa/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "csa/rng.hpp"

namespace csa::selection {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }
double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

}  // namespace

void SearchBox::validate() const {
    if (!(lambda_range[0] >= 0.0 && lambda_range[1] <= 1.0 &&
          lambda_range[0] < lambda_range[1])) {
        throw std::invalid_argument("SearchBox: lambda range must be a nondegenerate "
                                    "subinterval of [0,1]");
    }
    if (!(alpha_range[0] < alpha_range[1]) || !std::isfinite(alpha_range[0]) ||
        !std::isfinite(alpha_range[1])) {
        throw std::invalid_argument("SearchBox: alpha range must be finite and nondegenerate");
    }
}

Eigen::Vector2d SearchBox::to_unit(const weights::WeightParams& wp) const {
    return {(wp.lambda - lambda_range[0]) / (lambda_range[1] - lambda_range[0]),
            (wp.alpha - alpha_range[0]) / (alpha_range[1] - alpha_range[0])};
}

weights::WeightParams SearchBox::from_unit(const Eigen::Vector2d& u) const {
    weights::WeightParams wp;
    wp.lambda = lambda_range[0] + u[0] * (lambda_range[1] - lambda_range[0]);
    wp.alpha = alpha_range[0] + u[1] * (alpha_range[1] - alpha_range[0]);
    // Clamp roundoff so the endpoint identities stay exact.
    wp.lambda = std::clamp(wp.lambda, lambda_range[0], lambda_range[1]);
    wp.alpha = std::clamp(wp.alpha, alpha_range[0], alpha_range[1]);
    return wp;
}

GpState GpState::fit(Eigen::MatrixXd points, Eigen::VectorXd losses, double length_scale,
                     double signal_override, double noise_override) {
    if (points.rows() != losses.size() || points.rows() == 0 || points.cols() != 2) {
        throw std::invalid_argument("GpState: need a k x 2 point matrix with matching losses");
    }
    if (!losses.allFinite()) throw std::invalid_argument("GpState: losses must be finite");
    if (!(length_scale > 0.0)) throw std::invalid_argument("GpState: length scale must be > 0");

    GpState s;
    s.points_ = std::move(points);
    s.losses_ = std::move(losses);
    s.length_scale_ = length_scale;
    s.prior_mean_ = s.losses_.mean();
    const double var =
        (s.losses_.array() - s.prior_mean_).square().sum() / static_cast<double>(s.losses_.size());
    s.signal_variance_ = signal_override >= 0.0 ? signal_override : std::max(var, 1e-12);
    s.noise_variance_ = noise_override >= 0.0 ? noise_override : 1e-6 * s.signal_variance_;

    const Eigen::Index k = s.points_.rows();
    Eigen::MatrixXd K(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double d2 = (s.points_.row(i) - s.points_.row(j)).squaredNorm();
            K(i, j) = K(j, i) =
                s.signal_variance_ * std::exp(-d2 / (2.0 * length_scale * length_scale));
        }
        K(i, i) += s.noise_variance_;
    }

    double jitter = 0.0;
    for (int attempt = 0; attempt < 10; ++attempt) {
        Eigen::MatrixXd M = K;
        if (jitter > 0.0) M.diagonal().array() += jitter;
        s.factor_.compute(M);
        if (s.factor_.info() == Eigen::Success) {
            s.alpha_ = s.factor_.solve(s.losses_.array() - s.prior_mean_);
            return s;
        }
        jitter = (jitter == 0.0) ? 1e-12 * s.signal_variance_ : 10.0 * jitter;
    }
    throw std::runtime_error("GpState: kernel matrix factorization failed despite jitter");
}

GpState gp_update(const GpState& state, const Eigen::Vector2d& point, double loss) {
    if (!std::isfinite(loss)) throw std::invalid_argument("gp_update: loss must be finite");
    const Eigen::Index k = state.count();
    Eigen::MatrixXd points(k + 1, 2);
    Eigen::VectorXd losses(k + 1);
    points.topRows(k) = state.points();
    losses.head(k) = state.losses();
    points.row(k) = point.transpose();
    losses[k] = loss;
    return GpState::fit(std::move(points), std::move(losses), state.length_scale());
}

struct GpPosteriorAccess {
    static Posterior posterior(const GpState& s, const Eigen::Vector2d& point) {
        Eigen::VectorXd ks(s.points_.rows());
        for (Eigen::Index i = 0; i < s.points_.rows(); ++i) {
            const double d2 = (s.points_.row(i).transpose() - point).squaredNorm();
            ks[i] = s.signal_variance_ *
                    std::exp(-d2 / (2.0 * s.length_scale_ * s.length_scale_));
        }
        Posterior p;
        p.mean = s.prior_mean_ + ks.dot(s.alpha_);
        const double var = s.signal_variance_ - ks.dot(s.factor_.solve(ks));
        p.stddev = std::sqrt(std::max(var, 0.0));
        return p;
    }
};

Posterior gp_posterior(const GpState& state, const Eigen::Vector2d& point) {
    return GpPosteriorAccess::posterior(state, point);
}

double expected_improvement(const GpState& state, const Eigen::Vector2d& point,
                            double incumbent_loss) {
    const Posterior p = gp_posterior(state, point);
    const double gap = incumbent_loss - p.mean;
    if (p.stddev < 1e-12) return std::max(gap, 0.0);
    const double z = gap / p.stddev;
    return std::max(gap * normal_cdf(z) + p.stddev * normal_pdf(z), 0.0);
}

namespace {

// Pattern search maximizing EI inside the unit square.
Eigen::Vector2d refine_candidate(const GpState& state, Eigen::Vector2d point, double incumbent) {
    double best = expected_improvement(state, point, incumbent);
    double step = 0.005;
    while (step >= 1e-4) {
        bool improved = false;
        for (int dim = 0; dim < 2; ++dim) {
            for (double sgn : {1.0, -1.0}) {
                Eigen::Vector2d cand = point;
                cand[dim] = std::clamp(cand[dim] + sgn * step, 0.0, 1.0);
                const double ei = expected_improvement(state, cand, incumbent);
                if (ei > best) {
                    best = ei;
                    point = cand;
                    improved = true;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    return point;
}

Eigen::Vector2d propose_next(const GpState& state, double incumbent) {
    constexpr int kGrid = 101;
    struct Cand {
        Eigen::Vector2d p;
        double ei;
        double sd;
    };
    std::vector<Cand> top;
    top.reserve(kGrid * kGrid);
    for (int i = 0; i < kGrid; ++i) {
        for (int j = 0; j < kGrid; ++j) {
            Eigen::Vector2d p(static_cast<double>(i) / (kGrid - 1),
                              static_cast<double>(j) / (kGrid - 1));
            const Posterior post = gp_posterior(state, p);
            const double gap = incumbent - post.mean;
            double ei;
            if (post.stddev < 1e-12) {
                ei = std::max(gap, 0.0);
            } else {
                const double z = gap / post.stddev;
                ei = std::max(gap * normal_cdf(z) + post.stddev * normal_pdf(z), 0.0);
            }
            top.push_back({p, ei, post.stddev});
        }
    }
    auto better = [](const Cand& a, const Cand& b) {
        if (a.ei != b.ei) return a.ei > b.ei;
        return a.sd > b.sd;  // prefer the more uncertain point among EI ties
    };
    const std::size_t keep = std::min<std::size_t>(20, top.size());
    std::partial_sort(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(keep), top.end(),
                      better);
    top.resize(keep);

    Eigen::Vector2d best_point = top.front().p;
    double best_ei = top.front().ei;
    double best_sd = top.front().sd;
    for (const Cand& c : top) {
        const Eigen::Vector2d refined = refine_candidate(state, c.p, incumbent);
        const double ei = expected_improvement(state, refined, incumbent);
        const double sd = gp_posterior(state, refined).stddev;
        if (ei > best_ei || (ei == best_ei && sd > best_sd)) {
            best_ei = ei;
            best_sd = sd;
            best_point = refined;
        }
    }
    return best_point;
}

}  // namespace

SelectionResult bayes_opt(const Objective& objective, const SearchBox& box, int n_init,
                          int n_iter, std::uint64_t seed) {
    box.validate();
    if (!objective) throw std::invalid_argument("bayes_opt: objective is not set");
    if (n_init < 2) throw std::invalid_argument("bayes_opt: n_init must be at least 2");
    if (n_iter < 0) throw std::invalid_argument("bayes_opt: n_iter must be nonnegative");

    Rng rng(seed);
    // Corners first so the lambda = 0 and lambda = 1 baselines are always
    // part of the design, then the center, then uniform points.
    const Eigen::Vector2d fixed[] = {
        {0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {0.5, 0.5}};
    std::vector<Eigen::Vector2d> design;
    for (int i = 0; i < n_init; ++i) {
        if (i < 5) {
            design.push_back(fixed[i]);
        } else {
            design.emplace_back(rng.uniform(), rng.uniform());
        }
    }

    SelectionResult result;
    std::vector<Eigen::Vector2d> gp_points;
    std::vector<double> gp_losses;
    auto evaluate = [&](const Eigen::Vector2d& u) {
        const weights::WeightParams wp = box.from_unit(u);
        double loss;
        try {
            loss = objective(wp);
            if (std::isnan(loss)) loss = kInf;
        } catch (const std::exception&) {
            loss = kInf;
        }
        result.history.emplace_back(wp, loss);
        if (std::isfinite(loss)) {
            gp_points.push_back(u);
            gp_losses.push_back(loss);
        }
    };

    for (const auto& u : design) evaluate(u);

    for (int iter = 0; iter < n_iter; ++iter) {
        Eigen::Vector2d next;
        if (gp_losses.empty()) {
            // Every evaluation so far failed; keep probing at random.
            next = {rng.uniform(), rng.uniform()};
        } else {
            Eigen::MatrixXd P(static_cast<Eigen::Index>(gp_points.size()), 2);
            Eigen::VectorXd L(static_cast<Eigen::Index>(gp_losses.size()));
            for (std::size_t i = 0; i < gp_points.size(); ++i) {
                P.row(static_cast<Eigen::Index>(i)) = gp_points[i].transpose();
                L[static_cast<Eigen::Index>(i)] = gp_losses[i];
            }
            const GpState state = GpState::fit(std::move(P), std::move(L));
            const double incumbent = *std::min_element(gp_losses.begin(), gp_losses.end());
            next = propose_next(state, incumbent);
        }
        evaluate(next);
    }

    int best = -1;
    for (std::size_t i = 0; i < result.history.size(); ++i) {
        if (std::isfinite(result.history[i].second) &&
            (best < 0 || result.history[i].second < result.history[static_cast<std::size_t>(best)].second)) {
            best = static_cast<int>(i);
        }
    }
    if (best < 0) throw std::runtime_error("bayes_opt: every objective evaluation failed");
    result.best_params = result.history[static_cast<std::size_t>(best)].first;
    result.best_loss = result.history[static_cast<std::size_t>(best)].second;
    result.evaluations = static_cast<int>(result.history.size());
    return result;
}

GridResult grid_search(const Objective& objective, const SearchBox& box, int n_lambda,
                       int n_alpha) {
    box.validate();
    if (!objective) throw std::invalid_argument("grid_search: objective is not set");
    if (n_lambda < 2 || n_alpha < 2) {
        throw std::invalid_argument("grid_search: grid counts must be at least 2");
    }

    GridResult out;
    out.surface.resize(n_lambda, n_alpha);
    out.lambdas.resize(static_cast<std::size_t>(n_lambda));
    out.alphas.resize(static_cast<std::size_t>(n_alpha));
    for (int i = 0; i < n_lambda; ++i) {
        const double t = static_cast<double>(i) / (n_lambda - 1);
        out.lambdas[static_cast<std::size_t>(i)] =
            box.lambda_range[0] + t * (box.lambda_range[1] - box.lambda_range[0]);
    }
    for (int j = 0; j < n_alpha; ++j) {
        const double t = static_cast<double>(j) / (n_alpha - 1);
        out.alphas[static_cast<std::size_t>(j)] =
            box.alpha_range[0] + t * (box.alpha_range[1] - box.alpha_range[0]);
    }

    int best_i = -1, best_j = -1;
    for (int i = 0; i < n_lambda; ++i) {
        for (int j = 0; j < n_alpha; ++j) {
            weights::WeightParams wp{out.lambdas[static_cast<std::size_t>(i)],
                                     out.alphas[static_cast<std::size_t>(j)]};
            double loss;
            try {
                loss = objective(wp);
                if (std::isnan(loss)) loss = kInf;
            } catch (const std::exception&) {
                loss = kInf;
            }
            out.surface(i, j) = loss;
            out.selection.history.emplace_back(wp, loss);
            if (std::isfinite(loss) &&
                (best_i < 0 || loss < out.surface(best_i, best_j))) {
                best_i = i;
                best_j = j;
            }
        }
    }
    if (best_i < 0) throw std::runtime_error("grid_search: every objective evaluation failed");
    out.selection.best_params = weights::WeightParams{
        out.lambdas[static_cast<std::size_t>(best_i)], out.alphas[static_cast<std::size_t>(best_j)]};
    out.selection.best_loss = out.surface(best_i, best_j);
    out.selection.evaluations = n_lambda * n_alpha;
    return out;
}

double iwcv_loss(const learners::Dataset& train, const weights::DensityPair& dp,
                 const weights::WeightParams& wp, const learners::LearnerConfig& learner,
                 int folds, std::uint64_t seed) {
    const bool classification = learner.task == learners::TaskKind::classification;
    train.validate(classification);
    wp.validate();
    if (folds < 2) throw std::invalid_argument("iwcv_loss: need at least 2 folds");
    if (train.rows() < folds) {
        throw std::invalid_argument("iwcv_loss: dataset smaller than the fold count");
    }

    Rng rng(seed);
    const std::vector<int> order = shuffled_indices(static_cast<int>(train.rows()), rng);

    double total = 0.0;
    for (int k = 0; k < folds; ++k) {
        std::vector<int> val, fit_rows;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            (static_cast<int>(pos % static_cast<std::size_t>(folds)) == k ? val : fit_rows)
                .push_back(order[pos]);
        }

        learners::Dataset sub;
        sub.X.resize(static_cast<Eigen::Index>(fit_rows.size()), train.cols());
        sub.y.resize(static_cast<Eigen::Index>(fit_rows.size()));
        for (std::size_t i = 0; i < fit_rows.size(); ++i) {
            sub.X.row(static_cast<Eigen::Index>(i)) = train.X.row(fit_rows[i]);
            sub.y[static_cast<Eigen::Index>(i)] = train.y[fit_rows[i]];
        }
        if (classification && (sub.y.maxCoeff() == sub.y.minCoeff())) {
            throw std::runtime_error("iwcv_loss: fold " + std::to_string(k) +
                                     " leaves a single class in the training part");
        }

        const Eigen::VectorXd w = weights::batch_weights(dp, sub.X, wp);
        const learners::Model model = learners::fit(learner, sub, w);

        double fold_loss = 0.0;
        for (int row : val) {
            const Eigen::VectorXd x = train.X.row(row).transpose();
            const double pred = learners::predict(model, train.X.row(row))[0];
            fold_loss += dp.density_ratio(x) *
                         learners::task_loss(learner.task, pred, train.y[row]);
        }
        total += fold_loss / static_cast<double>(val.size());
    }
    return total / static_cast<double>(folds);
}

double ic_gw_linear(const learners::Dataset& train, const weights::DensityPair& dp,
                    const weights::WeightParams& wp) {
    train.validate();
    wp.validate();
    const Eigen::Index n = train.rows();
    const Eigen::VectorXd w = weights::batch_weights(dp, train.X, wp);
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        r[i] = dp.density_ratio(train.X.row(i).transpose());
    }

    const learners::LinearModel model = learners::fit_weighted_linear(train, w);
    Eigen::MatrixXd Xt(n, train.cols() + 1);
    Xt.col(0).setOnes();
    Xt.rightCols(train.cols()) = train.X;
    const Eigen::VectorXd eps = train.y - learners::predict(model, train.X);

    const double cw = w.sum();
    const double sigma2 = w.dot(eps.cwiseAbs2()) / cw;
    if (!(sigma2 > 0.0)) {
        throw std::runtime_error("ic_gw_linear: weighted residual variance is not positive");
    }

    // Weighted leverages h_i = w_i x_i' (X'WX)^{-1} x_i.
    const Eigen::MatrixXd A = Xt.transpose() * w.asDiagonal() * Xt;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("ic_gw_linear: singular weighted normal equations");
    }
    const Eigen::MatrixXd AinvXt = llt.solve(Xt.transpose());

    const double log_norm = std::log(2.0 * 3.141592653589793238462643 * sigma2);
    double fit_term = 0.0;
    double penalty = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = eps[i] * eps[i] / sigma2;
        const double h = w[i] * Xt.row(i).dot(AinvXt.col(i));
        fit_term += r[i] * (z + log_norm);
        penalty += r[i] * (z * h + w[i] / (2.0 * cw) * (z - 1.0) * (z - 1.0));
    }
    return fit_term + 2.0 * penalty;
}

double ic_gw_general(const SampleLogLikelihood& model, const learners::Dataset& train,
                     const weights::DensityPair& dp, const weights::WeightParams& wp) {
    train.validate();
    wp.validate();
    if (model.dim < 1 || !model.log_density || !model.score || !model.hessian) {
        throw std::invalid_argument("ic_gw_general: incomplete model callbacks");
    }
    const Eigen::Index n = train.rows();
    const int p = model.dim;
    const Eigen::VectorXd w = weights::batch_weights(dp, train.X, wp);

    double l1 = 0.0;
    Eigen::VectorXd weighted_score_sum = Eigen::VectorXd::Zero(p);
    double score_scale = 0.0;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = dp.density_ratio(train.X.row(i).transpose());
        const Eigen::VectorXd s = model.score(i);
        const Eigen::MatrixXd h = model.hessian(i);
        if (s.size() != p || h.rows() != p || h.cols() != p) {
            throw std::invalid_argument("ic_gw_general: callback dimension mismatch at row " +
                                        std::to_string(i));
        }
        l1 += r * model.log_density(i);
        weighted_score_sum += w[i] * s;
        score_scale += w[i] * s.norm();
        J.noalias() -= (r * w[i]) * (s * s.transpose());
        H += w[i] * h;
    }

    if (weighted_score_sum.norm() > 1e-6 * std::max(score_scale, 1.0)) {
        throw std::invalid_argument("ic_gw_general: callbacks are not evaluated at the weighted "
                                    "risk minimizer (|sum_i w_i score_i| = " +
                                    std::to_string(weighted_score_sum.norm()) + ")");
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
    if (!lu.isInvertible()) {
        throw std::runtime_error("ic_gw_general: singular weighted Hessian estimate");
    }
    return -2.0 * l1 + 2.0 * lu.solve(J).trace();
}

}  // namespace csa::selection
