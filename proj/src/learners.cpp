#include "csa/learners.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace csa::learners {

namespace {

double stable_sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

void check_weights(const Eigen::VectorXd& w, Eigen::Index n) {
    if (w.size() != n) {
        throw std::invalid_argument("weights length " + std::to_string(w.size()) +
                                    " does not match sample count " + std::to_string(n));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(w[i] >= 0.0) || !std::isfinite(w[i])) {
            throw std::invalid_argument("weight " + std::to_string(i) +
                                        " is negative or non-finite");
        }
    }
    if (!(w.sum() > 0.0)) throw std::invalid_argument("weights must not all be zero");
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Xt(X.rows(), X.cols() + 1);
    Xt.col(0).setOnes();
    Xt.rightCols(X.cols()) = X;
    return Xt;
}

}  // namespace

void Dataset::validate(bool classification) const {
    if (X.rows() < 1) throw std::invalid_argument("Dataset must contain at least one example");
    if (y.size() != X.rows()) {
        throw std::invalid_argument("Dataset: target length " + std::to_string(y.size()) +
                                    " does not match row count " + std::to_string(X.rows()));
    }
    if (!X.allFinite() || !y.allFinite()) {
        throw std::invalid_argument("Dataset contains non-finite entries");
    }
    if (classification) {
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            if (y[i] != 1.0 && y[i] != -1.0) {
                throw std::invalid_argument("classification target at row " + std::to_string(i) +
                                            " is " + std::to_string(y[i]) + ", expected +-1");
            }
        }
    }
}

Eigen::VectorXd solve_spd_with_jitter(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                      const char* context) {
    const Eigen::Index n = A.rows();
    const double scale = A.trace() / static_cast<double>(n);
    const double bnorm = b.norm();
    double jitter = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::MatrixXd M = A;
        if (jitter > 0.0) M.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(M);
        if (llt.info() == Eigen::Success) {
            Eigen::VectorXd x = llt.solve(b);
            // Guard against a numerically successful factorization of a
            // near-singular matrix.
            if ((A * x - b).norm() <= 1e-8 * (bnorm + scale * x.norm()) + 1e-300) {
                return x;
            }
        }
        jitter = (jitter == 0.0) ? 1e-12 * scale : 10.0 * jitter;
        if (jitter > 1e-6 * scale) break;
    }
    throw std::runtime_error(std::string(context) + ": singular system (jitter escalation "
                             "exhausted)");
}

LinearModel fit_weighted_linear(const Dataset& data, const Eigen::VectorXd& weights) {
    data.validate();
    check_weights(weights, data.rows());
    const Eigen::MatrixXd Xt = with_intercept(data.X);
    const Eigen::MatrixXd A = Xt.transpose() * weights.asDiagonal() * Xt;
    const Eigen::VectorXd b = Xt.transpose() * (weights.cwiseProduct(data.y));
    const Eigen::VectorXd beta = solve_spd_with_jitter(A, b, "fit_weighted_linear");
    LinearModel model;
    model.intercept = beta[0];
    model.coefficients = beta.tail(beta.size() - 1);
    return model;
}

LinearModel fit_weighted_logistic(const Dataset& data, const Eigen::VectorXd& weights,
                                  const LogisticOptions& opts) {
    data.validate(true);
    check_weights(weights, data.rows());
    const Eigen::MatrixXd Xt = with_intercept(data.X);
    const Eigen::Index n = Xt.rows();
    const Eigen::Index p = Xt.cols();

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    auto nll = [&](const Eigen::VectorXd& t) {
        double v = 0.0;
        const Eigen::VectorXd f = Xt * t;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m = -data.y[i] * f[i];
            // log(1 + exp(m)) without overflow
            v += weights[i] * (m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)));
        }
        return v;
    };

    double obj = nll(theta);
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        const Eigen::VectorXd f = Xt * theta;
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
        Eigen::VectorXd curv(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double s = stable_sigmoid(-data.y[i] * f[i]);
            grad -= weights[i] * data.y[i] * s * Xt.row(i).transpose();
            const double pr = stable_sigmoid(f[i]);
            curv[i] = weights[i] * pr * (1.0 - pr);
        }
        if (grad.norm() <= opts.tol) return {theta.tail(p - 1), theta[0]};

        const Eigen::MatrixXd H = Xt.transpose() * curv.asDiagonal() * Xt;
        const Eigen::VectorXd step = solve_spd_with_jitter(H, grad, "fit_weighted_logistic");

        double stepsize = 1.0;
        bool accepted = false;
        for (int half = 0; half < 50; ++half) {
            const Eigen::VectorXd cand = theta - stepsize * step;
            const double cand_obj = nll(cand);
            if (cand_obj <= obj) {
                theta = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            stepsize *= 0.5;
        }
        if (!accepted) break;
        if (theta.norm() > 1e6) {
            throw std::runtime_error("fit_weighted_logistic: parameter norm exceeded 1e6, "
                                     "data appears perfectly separable");
        }
    }

    // Final gradient check after the iteration budget.
    const Eigen::VectorXd f = Xt * theta;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        grad -= weights[i] * data.y[i] * stable_sigmoid(-data.y[i] * f[i]) * Xt.row(i).transpose();
    }
    if (grad.norm() <= opts.tol) return {theta.tail(p - 1), theta[0]};
    throw std::runtime_error("fit_weighted_logistic: no convergence after " +
                             std::to_string(opts.max_iter) + " iterations, |grad| = " +
                             std::to_string(grad.norm()));
}

double median_pairwise_distance(const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    if (n < 2) return 1.0;
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            d.push_back((X.row(i) - X.row(j)).norm());
        }
    }
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    double med = *mid;
    if (med <= 0.0) {
        // Duplicate-heavy inputs; fall back to the mean distance.
        double s = 0.0;
        for (double v : d) s += v;
        med = s / static_cast<double>(d.size());
    }
    return med;
}

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double bandwidth) {
    if (a.cols() != b.cols()) throw std::invalid_argument("rbf_gram: dimension mismatch");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("rbf_gram: bandwidth must be positive");
    const Eigen::VectorXd an = a.rowwise().squaredNorm();
    const Eigen::VectorXd bn = b.rowwise().squaredNorm();
    Eigen::MatrixXd d2 = -2.0 * a * b.transpose();
    d2.colwise() += an;
    d2.rowwise() += bn.transpose();
    return (-d2.cwiseMax(0.0) / (2.0 * bandwidth * bandwidth)).array().exp();
}

KernelModel fit_weighted_kernel_ridge(const Dataset& data, const Eigen::VectorXd& weights,
                                      const KernelRidgeOptions& opts) {
    data.validate();
    check_weights(weights, data.rows());

    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        if (weights[i] >= 1e-12) keep.push_back(i);
    }
    if (keep.empty()) {
        throw std::invalid_argument("fit_weighted_kernel_ridge: all weights are ~0");
    }
    const Eigen::Index m = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd Xk(m, data.cols());
    Eigen::VectorXd yk(m), wk(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        Xk.row(i) = data.X.row(keep[static_cast<std::size_t>(i)]);
        yk[i] = data.y[keep[static_cast<std::size_t>(i)]];
        wk[i] = weights[keep[static_cast<std::size_t>(i)]];
    }

    KernelModel model;
    model.bandwidth = opts.bandwidth > 0.0 ? opts.bandwidth : median_pairwise_distance(Xk);
    if (!(model.bandwidth > 0.0)) {
        throw std::invalid_argument("fit_weighted_kernel_ridge: degenerate inputs, "
                                    "bandwidth heuristic returned 0");
    }
    model.ridge = opts.ridge > 0.0 ? opts.ridge : 1e-3 * static_cast<double>(m);

    Eigen::MatrixXd M = rbf_gram(Xk, Xk, model.bandwidth);
    M.diagonal() += model.ridge * wk.cwiseInverse();
    model.dual_coefficients = solve_spd_with_jitter(M, yk, "fit_weighted_kernel_ridge");
    model.support_points = std::move(Xk);
    return model;
}

Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.coefficients.size()) {
        throw std::invalid_argument("predict: feature count mismatch");
    }
    return (X * model.coefficients).array() + model.intercept;
}

Eigen::VectorXd predict(const KernelModel& model, const Eigen::MatrixXd& X) {
    return rbf_gram(X, model.support_points, model.bandwidth) * model.dual_coefficients;
}

Eigen::VectorXd predict(const Model& model, const Eigen::MatrixXd& X) {
    return std::visit([&X](const auto& m) { return predict(m, X); }, model);
}

double mse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& y) {
    if (prediction.size() != y.size()) throw std::invalid_argument("mse: length mismatch");
    if (prediction.size() == 0) throw std::invalid_argument("mse: empty input");
    return (prediction - y).squaredNorm() / static_cast<double>(y.size());
}

double misclassification_rate(const Eigen::VectorXd& prediction, const Eigen::VectorXd& y) {
    if (prediction.size() != y.size()) {
        throw std::invalid_argument("misclassification_rate: length mismatch");
    }
    if (prediction.size() == 0) throw std::invalid_argument("misclassification_rate: empty input");
    auto sign = [](double v) { return v >= 0.0 ? 1.0 : -1.0; };
    Eigen::Index wrong = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (sign(prediction[i]) != sign(y[i])) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(y.size());
}

Model fit(const LearnerConfig& config, const Dataset& data, const Eigen::VectorXd& weights) {
    switch (config.kind) {
        case LearnerKind::linear:
            return fit_weighted_linear(data, weights);
        case LearnerKind::logistic:
            return fit_weighted_logistic(data, weights, config.logistic);
        case LearnerKind::kernel_ridge:
            return fit_weighted_kernel_ridge(data, weights, config.kernel);
    }
    throw std::logic_error("fit: unknown learner kind");
}

double task_loss(TaskKind task, double prediction, double target) {
    if (task == TaskKind::regression) {
        const double r = prediction - target;
        return r * r;
    }
    const double ps = prediction >= 0.0 ? 1.0 : -1.0;
    const double ts = target >= 0.0 ? 1.0 : -1.0;
    return ps == ts ? 0.0 : 1.0;
}

double task_metric(TaskKind task, const Eigen::VectorXd& prediction, const Eigen::VectorXd& y) {
    return task == TaskKind::regression ? mse(prediction, y) : misclassification_rate(prediction, y);
}

}  // namespace csa::learners
