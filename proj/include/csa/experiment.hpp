#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "csa/learners.hpp"
#include "csa/selection.hpp"
#include "csa/shift.hpp"

namespace csa::experiment {

// Weighting strategies benchmarked by the harness. The aiwerm/riwerm
// baselines replicate the "(optimal)" columns of the reference protocol:
// their lambda is chosen by linear search on the *test* metric, which leaks
// test data by design and is flagged in every report.
enum class Method {
    erm,           // unweighted
    iwerm,         // full density ratio
    aiwerm,        // alpha = 1, lambda by test-set linear search
    riwerm,        // alpha = 3, lambda by test-set linear search
    igiwerm_bopt,  // (lambda, alpha) by Bayesian optimization of the IWCV loss
    igiwerm_ic,    // (lambda, alpha) by grid search on the information criterion
    igiwerm_grid,  // (lambda, alpha) by grid search on the IWCV loss
};

std::string to_string(Method m);
Method method_from_string(const std::string& name);
bool method_leaks_test_data(Method m);

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string dataset = "synth";  // "synth" or a LIBSVM file path
    std::vector<Method> methods = {Method::erm, Method::iwerm, Method::aiwerm, Method::riwerm,
                                   Method::igiwerm_bopt, Method::igiwerm_ic,
                                   Method::igiwerm_grid};
    int trials = 10;
    std::uint64_t seed = 1;
    learners::LearnerConfig learner{};
    selection::SearchBox box{};
    int folds = 5;
    int bo_init = 5;
    int bo_iter = 20;
    int grid_lambda = 11;
    int grid_alpha = 11;
    int baseline_lambda_grid = 21;  // lambda resolution of the (optimal) baselines
    double gain = 16.0;             // projection-sigmoid gain of the induced shift
    int synth_n_tr = 1000;
    int synth_n_te = 300;
    bool parallel_trials = true;

    void validate() const;  // throws ConfigError
};

struct TrialReport {
    Method method{};
    int trial = 0;
    std::uint64_t seed = 0;
    double lambda = 0.0;
    double alpha = 0.0;
    bool has_alpha = false;  // erm/iwerm weights do not depend on alpha
    double metric = 0.0;
    double seconds = 0.0;
    bool failed = false;
    std::string error;
};

// Train/test split with known densities, as consumed by a single trial.
struct TrialData {
    learners::Dataset train;
    learners::Dataset test;
    weights::DensityPair densities;
};

// Builds the data for one trial: the synthetic regression draw, or the
// projection-sigmoid split of the (already standardized) pool. Deterministic
// given config.seed and the trial index.
TrialData make_trial_data(const ExperimentConfig& config, int trial);

// Runs every configured method on every trial. Per-trial failures are
// recorded in the report and do not stop the run. Reports are ordered by
// (trial, method position in the config).
std::vector<TrialReport> run_experiment(const ExperimentConfig& config);

struct MethodSummary {
    Method method{};
    double mean = 0.0;
    double stddev = 0.0;  // population convention; 0 for a single trial
    int trials = 0;
    int failed = 0;
};

// Aggregates per-method statistics over the successful trials, preserving
// first-appearance order.
std::vector<MethodSummary> summarize(const std::vector<TrialReport>& reports);

// CSV with the exact header `method,mean,std,trials`.
void emit_report_csv(const std::vector<MethodSummary>& summaries, std::ostream& out);

// Human-readable table; methods that leak test data are marked.
std::string format_report_table(const std::vector<MethodSummary>& summaries);

// Per-trial CSV: method,trial,seed,lambda,alpha,metric,seconds,status.
void emit_trials_csv(const std::vector<TrialReport>& reports, std::ostream& out);

// Grid surface as CSV rows `lambda,alpha,loss`, row-major with lambda outer.
void emit_surface(const selection::GridResult& grid, std::ostream& out);

// Reads a config from a JSON document (unknown keys are rejected).
ExperimentConfig config_from_json_text(const std::string& text);

}  // namespace csa::experiment
