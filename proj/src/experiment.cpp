#include "csa/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "csa/libsvm.hpp"
#include "csa/rng.hpp"

namespace csa::experiment {

namespace {

// Stream tags for deriving independent per-trial generators.
constexpr std::uint64_t kProjectionStream = 1;
constexpr std::uint64_t kAssignStream = 2;
constexpr std::uint64_t kCvStream = 4;
constexpr std::uint64_t kBoStream = 5;

std::uint64_t trial_seed(const ExperimentConfig& config, int trial) {
    return config.seed + static_cast<std::uint64_t>(trial);
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::erm: return "erm";
        case Method::iwerm: return "iwerm";
        case Method::aiwerm: return "aiwerm";
        case Method::riwerm: return "riwerm";
        case Method::igiwerm_bopt: return "igiwerm-bopt";
        case Method::igiwerm_ic: return "igiwerm-ic";
        case Method::igiwerm_grid: return "igiwerm-grid";
    }
    return "?";
}

Method method_from_string(const std::string& name) {
    for (Method m : {Method::erm, Method::iwerm, Method::aiwerm, Method::riwerm,
                     Method::igiwerm_bopt, Method::igiwerm_ic, Method::igiwerm_grid}) {
        if (to_string(m) == name) return m;
    }
    throw ConfigError("unknown method '" + name + "'");
}

bool method_leaks_test_data(Method m) { return m == Method::aiwerm || m == Method::riwerm; }

void ExperimentConfig::validate() const {
    if (trials < 1) throw ConfigError("trials must be at least 1");
    if (methods.empty()) throw ConfigError("at least one method is required");
    if (folds < 2) throw ConfigError("folds must be at least 2");
    if (bo_init < 2) throw ConfigError("bo_init must be at least 2");
    if (bo_iter < 0) throw ConfigError("bo_iter must be nonnegative");
    if (grid_lambda < 2 || grid_alpha < 2) throw ConfigError("grid counts must be at least 2");
    if (baseline_lambda_grid < 2) throw ConfigError("baseline_lambda_grid must be at least 2");
    if (synth_n_tr < 1 || synth_n_te < 1) throw ConfigError("synthetic sample counts must be positive");
    if (!std::isfinite(gain)) throw ConfigError("gain must be finite");
    try {
        box.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (dataset != "synth") {
        std::ifstream probe(dataset);
        if (!probe) throw ConfigError("dataset file '" + dataset + "' does not exist");
    }
    if (dataset == "synth" && learner.task != learners::TaskKind::regression) {
        throw ConfigError("the synthetic source is a regression task");
    }
}

namespace {

// Standardized pool shared by all trials of a file-backed run.
learners::Dataset load_pool(const std::string& path) {
    io::LibsvmData parsed = io::load_libsvm_file(path);
    auto [standardized, stats] = shift::zscore_standardize(parsed.data.X);
    learners::Dataset pool;
    pool.X = std::move(standardized);
    pool.y = std::move(parsed.data.y);
    return pool;
}

Eigen::VectorXd unit_sphere_projection(Eigen::Index dim, Rng& rng) {
    Eigen::VectorXd w(dim);
    double norm = 0.0;
    do {
        for (Eigen::Index i = 0; i < dim; ++i) w[i] = rng.normal();
        norm = w.norm();
    } while (norm < 1e-12);
    return w / norm;
}

TrialData trial_data_from_pool(const learners::Dataset& pool, const ExperimentConfig& config,
                               int trial) {
    const std::uint64_t seed = trial_seed(config, trial);
    Rng base(seed);
    Rng proj_rng = base.stream(kProjectionStream);
    const Eigen::VectorXd projection = unit_sphere_projection(pool.cols(), proj_rng);
    shift::SplitDataset split =
        shift::induce_shift(pool, projection, base.stream(kAssignStream).seed(), config.gain);
    TrialData td;
    td.densities = shift::density_pair_from_spec(split.spec);
    td.train = std::move(split.train);
    td.test = std::move(split.test);
    return td;
}

struct MethodOutcome {
    double lambda = 0.0;
    double alpha = 0.0;
    bool has_alpha = false;
    double metric = 0.0;
};

Eigen::VectorXd ratio_weights(const TrialData& td) {
    Eigen::VectorXd w(td.train.rows());
    for (Eigen::Index i = 0; i < td.train.rows(); ++i) {
        w[i] = td.densities.density_ratio(td.train.X.row(i).transpose());
    }
    return w;
}

double fit_and_score(const TrialData& td, const ExperimentConfig& config,
                     const Eigen::VectorXd& weights) {
    const learners::Model model = learners::fit(config.learner, td.train, weights);
    return learners::task_metric(config.learner.task, learners::predict(model, td.test.X),
                                 td.test.y);
}

double fit_and_score(const TrialData& td, const ExperimentConfig& config,
                     const weights::WeightParams& wp) {
    return fit_and_score(td, config, weights::batch_weights(td.densities, td.train.X, wp));
}

// The "(optimal)" baseline: lambda minimizing the *test* metric along a fixed
// alpha. Intentionally leaks test data, matching the reference protocol.
MethodOutcome test_optimal_baseline(const TrialData& td, const ExperimentConfig& config,
                                    double alpha) {
    MethodOutcome out;
    out.alpha = alpha;
    out.has_alpha = true;
    out.metric = std::numeric_limits<double>::infinity();
    const int n = config.baseline_lambda_grid;
    for (int i = 0; i < n; ++i) {
        const double lambda = static_cast<double>(i) / (n - 1);
        const double metric = fit_and_score(td, config, weights::WeightParams{lambda, alpha});
        if (metric < out.metric) {
            out.metric = metric;
            out.lambda = lambda;
        }
    }
    return out;
}

selection::Objective iwcv_objective(const TrialData& td, const ExperimentConfig& config,
                                    std::uint64_t cv_seed) {
    return [&td, &config, cv_seed](const weights::WeightParams& wp) {
        return selection::iwcv_loss(td.train, td.densities, wp, config.learner, config.folds,
                                    cv_seed);
    };
}

// Information-criterion objective for the configured learner. The criterion
// needs a parametric likelihood, so the kernel learner is rejected.
selection::Objective ic_objective(const TrialData& td, const ExperimentConfig& config) {
    if (config.learner.kind == learners::LearnerKind::linear) {
        return [&td](const weights::WeightParams& wp) {
            return selection::ic_gw_linear(td.train, td.densities, wp);
        };
    }
    if (config.learner.kind == learners::LearnerKind::logistic) {
        return [&td, &config](const weights::WeightParams& wp) {
            const Eigen::VectorXd w = weights::batch_weights(td.densities, td.train.X, wp);
            const learners::LinearModel model =
                learners::fit_weighted_logistic(td.train, w, config.learner.logistic);

            struct Shared {
                Eigen::MatrixXd Xt;
                Eigen::VectorXd y;
                Eigen::VectorXd margin;
            };
            auto sh = std::make_shared<Shared>();
            sh->Xt.resize(td.train.rows(), td.train.cols() + 1);
            sh->Xt.col(0).setOnes();
            sh->Xt.rightCols(td.train.cols()) = td.train.X;
            sh->y = td.train.y;
            sh->margin = learners::predict(model, td.train.X);

            auto sigmoid = [](double v) {
                if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                const double e = std::exp(v);
                return e / (1.0 + e);
            };
            selection::SampleLogLikelihood ll;
            ll.dim = static_cast<int>(td.train.cols() + 1);
            ll.log_density = [sh](Eigen::Index i) {
                const double m = -sh->y[i] * sh->margin[i];
                return -(m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)));
            };
            ll.score = [sh, sigmoid](Eigen::Index i) -> Eigen::VectorXd {
                return sh->y[i] * sigmoid(-sh->y[i] * sh->margin[i]) * sh->Xt.row(i).transpose();
            };
            ll.hessian = [sh, sigmoid](Eigen::Index i) -> Eigen::MatrixXd {
                const double p = sigmoid(sh->margin[i]);
                return -p * (1.0 - p) *
                       (sh->Xt.row(i).transpose() * sh->Xt.row(i));
            };
            return selection::ic_gw_general(ll, td.train, td.densities, wp);
        };
    }
    throw std::runtime_error("information-criterion selection requires a parametric learner "
                             "(linear or logistic)");
}

MethodOutcome run_method(Method method, const TrialData& td, const ExperimentConfig& config,
                         std::uint64_t seed) {
    Rng base(seed);
    MethodOutcome out;
    switch (method) {
        case Method::erm: {
            out.lambda = 0.0;
            out.metric = fit_and_score(td, config,
                                       Eigen::VectorXd::Ones(td.train.rows()).eval());
            return out;
        }
        case Method::iwerm: {
            out.lambda = 1.0;
            out.metric = fit_and_score(td, config, ratio_weights(td));
            return out;
        }
        case Method::aiwerm:
            return test_optimal_baseline(td, config, 1.0);
        case Method::riwerm:
            return test_optimal_baseline(td, config, 3.0);
        case Method::igiwerm_bopt: {
            const auto objective = iwcv_objective(td, config, base.stream(kCvStream).seed());
            const selection::SelectionResult sel = selection::bayes_opt(
                objective, config.box, config.bo_init, config.bo_iter, base.stream(kBoStream).seed());
            out.lambda = sel.best_params.lambda;
            out.alpha = sel.best_params.alpha;
            out.has_alpha = true;
            out.metric = fit_and_score(td, config, sel.best_params);
            return out;
        }
        case Method::igiwerm_grid: {
            const auto objective = iwcv_objective(td, config, base.stream(kCvStream).seed());
            const selection::GridResult grid =
                selection::grid_search(objective, config.box, config.grid_lambda, config.grid_alpha);
            out.lambda = grid.selection.best_params.lambda;
            out.alpha = grid.selection.best_params.alpha;
            out.has_alpha = true;
            out.metric = fit_and_score(td, config, grid.selection.best_params);
            return out;
        }
        case Method::igiwerm_ic: {
            const auto objective = ic_objective(td, config);
            const selection::GridResult grid =
                selection::grid_search(objective, config.box, config.grid_lambda, config.grid_alpha);
            out.lambda = grid.selection.best_params.lambda;
            out.alpha = grid.selection.best_params.alpha;
            out.has_alpha = true;
            out.metric = fit_and_score(td, config, grid.selection.best_params);
            return out;
        }
    }
    throw std::logic_error("run_method: unknown method");
}

std::vector<TrialReport> run_trial(const ExperimentConfig& config,
                                   const learners::Dataset* pool, int trial) {
    const std::uint64_t seed = trial_seed(config, trial);
    std::vector<TrialReport> reports;
    reports.reserve(config.methods.size());

    TrialData td;
    std::string data_error;
    try {
        td = pool ? trial_data_from_pool(*pool, config, trial)
                  : [&] {
                        shift::SynthData s =
                            shift::synth_regression(config.synth_n_tr, config.synth_n_te, seed);
                        return TrialData{std::move(s.train), std::move(s.test),
                                         std::move(s.densities)};
                    }();
    } catch (const std::exception& e) {
        data_error = e.what();
    }

    for (Method method : config.methods) {
        TrialReport r;
        r.method = method;
        r.trial = trial;
        r.seed = seed;
        if (!data_error.empty()) {
            r.failed = true;
            r.error = "trial data: " + data_error;
            reports.push_back(std::move(r));
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const MethodOutcome out = run_method(method, td, config, seed);
            r.lambda = out.lambda;
            r.alpha = out.alpha;
            r.has_alpha = out.has_alpha;
            r.metric = out.metric;
            if (!std::isfinite(r.metric)) {
                r.failed = true;
                r.error = "non-finite metric";
            }
        } catch (const std::exception& e) {
            r.failed = true;
            r.error = e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        reports.push_back(std::move(r));
    }
    return reports;
}

}  // namespace

TrialData make_trial_data(const ExperimentConfig& config, int trial) {
    config.validate();
    if (config.dataset == "synth") {
        shift::SynthData s = shift::synth_regression(config.synth_n_tr, config.synth_n_te,
                                                     trial_seed(config, trial));
        return TrialData{std::move(s.train), std::move(s.test), std::move(s.densities)};
    }
    const learners::Dataset pool = load_pool(config.dataset);
    return trial_data_from_pool(pool, config, trial);
}

std::vector<TrialReport> run_experiment(const ExperimentConfig& config) {
    config.validate();
    std::unique_ptr<learners::Dataset> pool;
    if (config.dataset != "synth") {
        pool = std::make_unique<learners::Dataset>(load_pool(config.dataset));
    }

    std::vector<std::vector<TrialReport>> per_trial(static_cast<std::size_t>(config.trials));
    if (config.parallel_trials && config.trials > 1) {
        std::vector<std::future<std::vector<TrialReport>>> futures;
        futures.reserve(static_cast<std::size_t>(config.trials));
        for (int t = 0; t < config.trials; ++t) {
            futures.push_back(std::async(std::launch::async, run_trial, std::cref(config),
                                         pool.get(), t));
        }
        for (int t = 0; t < config.trials; ++t) {
            per_trial[static_cast<std::size_t>(t)] = futures[static_cast<std::size_t>(t)].get();
        }
    } else {
        for (int t = 0; t < config.trials; ++t) {
            per_trial[static_cast<std::size_t>(t)] = run_trial(config, pool.get(), t);
        }
    }

    std::vector<TrialReport> reports;
    reports.reserve(static_cast<std::size_t>(config.trials) * config.methods.size());
    for (auto& block : per_trial) {
        for (auto& r : block) reports.push_back(std::move(r));
    }
    return reports;
}

std::vector<MethodSummary> summarize(const std::vector<TrialReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("summarize: no reports");
    std::vector<MethodSummary> out;
    auto find = [&out](Method m) -> MethodSummary& {
        for (auto& s : out) {
            if (s.method == m) return s;
        }
        out.push_back(MethodSummary{m, 0.0, 0.0, 0, 0});
        return out.back();
    };
    for (const auto& r : reports) {
        MethodSummary& s = find(r.method);
        if (r.failed) {
            ++s.failed;
        } else {
            ++s.trials;
            s.mean += r.metric;
        }
    }
    for (auto& s : out) {
        if (s.trials > 0) s.mean /= s.trials;
    }
    for (const auto& r : reports) {
        if (r.failed) continue;
        MethodSummary& s = find(r.method);
        const double d = r.metric - s.mean;
        s.stddev += d * d;
    }
    for (auto& s : out) {
        s.stddev = s.trials > 0 ? std::sqrt(s.stddev / s.trials) : 0.0;
        if (s.trials == 0) s.mean = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

void emit_report_csv(const std::vector<MethodSummary>& summaries, std::ostream& out) {
    out << "method,mean,std,trials\n";
    out.precision(12);
    for (const auto& s : summaries) {
        out << to_string(s.method) << ',' << s.mean << ',' << s.stddev << ',' << s.trials << '\n';
    }
}

std::string format_report_table(const std::vector<MethodSummary>& summaries) {
    std::ostringstream os;
    os << std::left << std::setw(14) << "method" << std::right << std::setw(14) << "mean"
       << std::setw(14) << "std" << std::setw(9) << "trials" << std::setw(9) << "failed" << '\n';
    bool leaking = false;
    for (const auto& s : summaries) {
        std::string name = to_string(s.method);
        if (method_leaks_test_data(s.method)) {
            name += " [*]";
            leaking = true;
        }
        os << std::left << std::setw(14) << name << std::right << std::fixed
           << std::setprecision(4) << std::setw(14) << s.mean << std::setw(14) << s.stddev
           << std::setw(9) << s.trials << std::setw(9) << s.failed << '\n';
        os.unsetf(std::ios::fixed);
    }
    if (leaking) {
        os << "[*] lambda chosen by linear search on the test metric; "
              "these baselines read test labels by design.\n";
    }
    return os.str();
}

void emit_trials_csv(const std::vector<TrialReport>& reports, std::ostream& out) {
    out << "method,trial,seed,lambda,alpha,metric,seconds,status\n";
    out.precision(12);
    for (const auto& r : reports) {
        out << to_string(r.method) << ',' << r.trial << ',' << r.seed << ',' << r.lambda << ',';
        if (r.has_alpha) out << r.alpha;
        out << ',' << r.metric << ',' << r.seconds << ','
            << (r.failed ? "failed" : "ok") << '\n';
    }
}

void emit_surface(const selection::GridResult& grid, std::ostream& out) {
    out << "lambda,alpha,loss\n";
    out.precision(12);
    for (std::size_t i = 0; i < grid.lambdas.size(); ++i) {
        for (std::size_t j = 0; j < grid.alphas.size(); ++j) {
            out << grid.lambdas[i] << ',' << grid.alphas[j] << ','
                << grid.surface(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                << '\n';
        }
    }
}

namespace {

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(known.begin(), known.end(),
                         [&key](const char* k) { return key == k; }) == known.end()) {
            throw ConfigError("unknown config key '" + where + key + "'");
        }
    }
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }

    ExperimentConfig c;
    try {
        reject_unknown_keys(j, {"dataset", "methods", "trials", "seed", "learner", "box", "folds",
                                "bo", "grid", "baseline_lambda_grid", "gain", "synth",
                                "parallel"},
                            "");
        if (j.contains("dataset")) c.dataset = j["dataset"].get<std::string>();
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j["methods"]) {
                c.methods.push_back(method_from_string(m.get<std::string>()));
            }
        }
        if (j.contains("trials")) c.trials = j["trials"].get<int>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("folds")) c.folds = j["folds"].get<int>();
        if (j.contains("baseline_lambda_grid")) {
            c.baseline_lambda_grid = j["baseline_lambda_grid"].get<int>();
        }
        if (j.contains("gain")) c.gain = j["gain"].get<double>();
        if (j.contains("parallel")) c.parallel_trials = j["parallel"].get<bool>();
        if (j.contains("bo")) {
            reject_unknown_keys(j["bo"], {"init", "iter"}, "bo.");
            if (j["bo"].contains("init")) c.bo_init = j["bo"]["init"].get<int>();
            if (j["bo"].contains("iter")) c.bo_iter = j["bo"]["iter"].get<int>();
        }
        if (j.contains("grid")) {
            reject_unknown_keys(j["grid"], {"lambda", "alpha"}, "grid.");
            if (j["grid"].contains("lambda")) c.grid_lambda = j["grid"]["lambda"].get<int>();
            if (j["grid"].contains("alpha")) c.grid_alpha = j["grid"]["alpha"].get<int>();
        }
        if (j.contains("synth")) {
            reject_unknown_keys(j["synth"], {"n_tr", "n_te"}, "synth.");
            if (j["synth"].contains("n_tr")) c.synth_n_tr = j["synth"]["n_tr"].get<int>();
            if (j["synth"].contains("n_te")) c.synth_n_te = j["synth"]["n_te"].get<int>();
        }
        if (j.contains("box")) {
            reject_unknown_keys(j["box"], {"lambda", "alpha"}, "box.");
            auto range = [](const nlohmann::json& arr, const char* name) {
                if (!arr.is_array() || arr.size() != 2) {
                    throw ConfigError(std::string("box.") + name + " must be [lo, hi]");
                }
                return std::array<double, 2>{arr[0].get<double>(), arr[1].get<double>()};
            };
            if (j["box"].contains("lambda")) c.box.lambda_range = range(j["box"]["lambda"], "lambda");
            if (j["box"].contains("alpha")) c.box.alpha_range = range(j["box"]["alpha"], "alpha");
        }
        if (j.contains("learner")) {
            const auto& l = j["learner"];
            reject_unknown_keys(l, {"kind", "task", "tol", "max_iter", "bandwidth", "ridge"},
                                "learner.");
            std::string kind = l.contains("kind") ? l["kind"].get<std::string>() : "linear";
            if (kind == "linear") {
                c.learner.kind = learners::LearnerKind::linear;
                c.learner.task = learners::TaskKind::regression;
            } else if (kind == "logistic") {
                c.learner.kind = learners::LearnerKind::logistic;
                c.learner.task = learners::TaskKind::classification;
            } else if (kind == "kernel-ridge") {
                c.learner.kind = learners::LearnerKind::kernel_ridge;
                c.learner.task = learners::TaskKind::classification;
            } else {
                throw ConfigError("unknown learner kind '" + kind + "'");
            }
            if (l.contains("task")) {
                const std::string task = l["task"].get<std::string>();
                if (task == "regression") {
                    c.learner.task = learners::TaskKind::regression;
                } else if (task == "classification") {
                    c.learner.task = learners::TaskKind::classification;
                } else {
                    throw ConfigError("unknown task '" + task + "'");
                }
            }
            if (l.contains("tol")) c.learner.logistic.tol = l["tol"].get<double>();
            if (l.contains("max_iter")) c.learner.logistic.max_iter = l["max_iter"].get<int>();
            if (l.contains("bandwidth")) c.learner.kernel.bandwidth = l["bandwidth"].get<double>();
            if (l.contains("ridge")) c.learner.kernel.ridge = l["ridge"].get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid config value: ") + e.what());
    }
    return c;
}

}  // namespace csa::experiment
