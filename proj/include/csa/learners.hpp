#pragma once

#include <Eigen/Core>
#include <variant>

namespace csa::learners {

// Dense supervised dataset. Targets are real for regression and +-1 for
// binary classification.
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;

    Eigen::Index rows() const { return X.rows(); }
    Eigen::Index cols() const { return X.cols(); }

    // Throws when empty, shapes disagree, entries are non-finite, or (for
    // classification) targets are not +-1.
    void validate(bool classification = false) const;
};

struct LinearModel {
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
};

struct KernelModel {
    Eigen::MatrixXd support_points;
    Eigen::VectorXd dual_coefficients;
    double bandwidth = 1.0;
    double ridge = 1e-3;
};

// Exact weighted least squares with intercept: minimizes
// sum_i w_i (y_i - b0 - b' x_i)^2. Zero weights drop rows from the fit.
LinearModel fit_weighted_linear(const Dataset& data, const Eigen::VectorXd& weights);

struct LogisticOptions {
    double tol = 1e-8;  // gradient-norm stopping threshold
    int max_iter = 100;
};

// Weighted logistic regression on +-1 labels by damped Newton from a zero
// start. The returned coefficients are the decision function f(x) = b0 + b'x;
// classify by sign. Perfect separation is reported once the parameter norm
// exceeds 1e6.
LinearModel fit_weighted_logistic(const Dataset& data, const Eigen::VectorXd& weights,
                                  const LogisticOptions& opts = {});

struct KernelRidgeOptions {
    double bandwidth = 0.0;  // <= 0: median pairwise distance of the inputs
    double ridge = 0.0;      // <= 0: 1e-3 * n_retained
};

// Weighted RBF kernel ridge (least-squares SVM): dual coefficients solve
// (K + ridge W^{-1}) a = y over rows with weight >= 1e-12.
KernelModel fit_weighted_kernel_ridge(const Dataset& data, const Eigen::VectorXd& weights,
                                      const KernelRidgeOptions& opts = {});

Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& X);
Eigen::VectorXd predict(const KernelModel& model, const Eigen::MatrixXd& X);

using Model = std::variant<LinearModel, KernelModel>;

Eigen::VectorXd predict(const Model& model, const Eigen::MatrixXd& X);

double mse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& y);

// Fraction of sign disagreements; zero predictions count as positive.
double misclassification_rate(const Eigen::VectorXd& prediction, const Eigen::VectorXd& y);

// Gram matrix K_ij = exp(-|a_i - b_j|^2 / (2 h^2)).
Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double bandwidth);

double median_pairwise_distance(const Eigen::MatrixXd& X);

// Solves the SPD system A x = b by Cholesky, escalating a diagonal jitter of
// 1e-12 * trace/n by factors of 10 up to 1e-6 * trace/n before giving up.
Eigen::VectorXd solve_spd_with_jitter(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                      const char* context);

enum class LearnerKind { linear, logistic, kernel_ridge };
enum class TaskKind { regression, classification };

struct LearnerConfig {
    LearnerKind kind = LearnerKind::linear;
    TaskKind task = TaskKind::regression;
    LogisticOptions logistic{};
    KernelRidgeOptions kernel{};
};

// Fits the configured learner with per-sample weights.
Model fit(const LearnerConfig& config, const Dataset& data, const Eigen::VectorXd& weights);

// Task loss of a single prediction: squared error or 0/1 sign disagreement.
double task_loss(TaskKind task, double prediction, double target);

// Task metric over a dataset: MSE or misclassification rate.
double task_metric(TaskKind task, const Eigen::VectorXd& prediction, const Eigen::VectorXd& y);

}  // namespace csa::learners
