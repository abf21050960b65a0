#include "csa/shift.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "csa/rng.hpp"

namespace csa::shift {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

double stable_sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

double gaussian_log_pdf(double x, double mean, double variance) {
    const double d = x - mean;
    return -0.5 * std::log(kTwoPi * variance) - d * d / (2.0 * variance);
}

}  // namespace

void ShiftSpec::validate() const {
    if (projection.size() == 0 || projection.isZero(0.0)) {
        throw std::invalid_argument("ShiftSpec: projection must have a nonzero entry");
    }
    if (!(scale_sigma > 0.0)) {
        throw std::invalid_argument("ShiftSpec: scale_sigma must be positive, got " +
                                    std::to_string(scale_sigma));
    }
    if (!std::isfinite(gain)) throw std::invalid_argument("ShiftSpec: gain must be finite");
}

std::pair<Eigen::MatrixXd, StandardizeStats> zscore_standardize(const Eigen::MatrixXd& X) {
    if (X.rows() < 1) throw std::invalid_argument("zscore_standardize: empty matrix");
    const double n = static_cast<double>(X.rows());
    StandardizeStats stats;
    stats.mean = X.colwise().mean();
    stats.stddev.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double var = (X.col(j).array() - stats.mean[j]).square().sum() / n;
        stats.stddev[j] = std::sqrt(var);
        if (!(stats.stddev[j] > 0.0)) {
            throw std::invalid_argument("zscore_standardize: column " + std::to_string(j) +
                                        " has zero variance");
        }
    }
    return {apply_standardize(X, stats), stats};
}

Eigen::MatrixXd apply_standardize(const Eigen::MatrixXd& X, const StandardizeStats& stats) {
    if (X.cols() != stats.mean.size()) {
        throw std::invalid_argument("apply_standardize: column count mismatch");
    }
    return (X.rowwise() - stats.mean.transpose()).array().rowwise() /
           stats.stddev.transpose().array();
}

Eigen::MatrixXd invert_standardize(const Eigen::MatrixXd& X, const StandardizeStats& stats) {
    if (X.cols() != stats.mean.size()) {
        throw std::invalid_argument("invert_standardize: column count mismatch");
    }
    return (X.array().rowwise() * stats.stddev.transpose().array()).rowwise() +
           stats.mean.transpose().array();
}

SplitDataset induce_shift(const learners::Dataset& data, const Eigen::VectorXd& projection,
                          std::uint64_t seed, double gain) {
    data.validate();
    if (projection.size() != data.cols()) {
        throw std::invalid_argument("induce_shift: projection dimension " +
                                    std::to_string(projection.size()) +
                                    " does not match feature count " +
                                    std::to_string(data.cols()));
    }
    if (projection.isZero(0.0)) {
        throw std::invalid_argument("induce_shift: projection must be nonzero");
    }

    const Eigen::VectorXd t = data.X * projection;
    const double n = static_cast<double>(t.size());
    const double mean = t.mean();
    const double sigma = std::sqrt((t.array() - mean).square().sum() / n);
    if (!(sigma > 1e-12)) {
        throw std::invalid_argument("induce_shift: w'x is constant over the dataset "
                                    "(degenerate projection)");
    }

    Rng rng(seed);
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const double v = gain * t[i] / sigma;
        (rng.uniform() < stable_sigmoid(v) ? tr : te).push_back(i);
    }
    if (tr.empty() || te.empty()) {
        throw std::runtime_error("induce_shift: one side of the split is empty (n = " +
                                 std::to_string(data.rows()) + ")");
    }

    auto take = [&](const std::vector<Eigen::Index>& idx) {
        learners::Dataset d;
        d.X.resize(static_cast<Eigen::Index>(idx.size()), data.cols());
        d.y.resize(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            d.X.row(static_cast<Eigen::Index>(k)) = data.X.row(idx[k]);
            d.y[static_cast<Eigen::Index>(k)] = data.y[idx[k]];
        }
        return d;
    };

    SplitDataset out;
    out.train = take(tr);
    out.test = take(te);
    out.spec = ShiftSpec{projection, sigma, gain};
    out.seed = seed;
    return out;
}

weights::DensityPair density_pair_from_spec(const ShiftSpec& spec) {
    spec.validate();
    const Eigen::VectorXd w = spec.projection;
    const double scale = spec.gain / spec.scale_sigma;
    auto v_of = [w, scale](const Eigen::VectorXd& x) {
        if (x.size() != w.size()) {
            throw std::invalid_argument("density evaluation: dimension mismatch");
        }
        return scale * w.dot(x);
    };
    weights::DensityPair dp;
    dp.p_tr = [v_of](const Eigen::VectorXd& x) { return stable_sigmoid(v_of(x)); };
    dp.p_te = [v_of](const Eigen::VectorXd& x) { return stable_sigmoid(-v_of(x)); };
    dp.ratio = [v_of](const Eigen::VectorXd& x) { return std::exp(-v_of(x)); };
    return dp;
}

SynthData synth_regression(int n_tr, int n_te, std::uint64_t seed) {
    if (n_tr < 1 || n_te < 1) {
        throw std::invalid_argument("synth_regression: sample counts must be positive");
    }
    constexpr double kTrainMean = 0.0, kTrainVar = 5.0;
    constexpr double kTestMean = -5.0, kTestVar = 0.5;
    constexpr double kNoiseVar = 5.0;

    Rng rng(seed);
    auto draw = [&](int n, double mean, double var) {
        learners::Dataset d;
        d.X.resize(n, 1);
        d.y.resize(n);
        for (int i = 0; i < n; ++i) {
            const double x = rng.normal(mean, var);
            d.X(i, 0) = x;
            d.y[i] = x * x + rng.normal(0.0, kNoiseVar);
        }
        return d;
    };

    SynthData out;
    out.train = draw(n_tr, kTrainMean, kTrainVar);
    out.test = draw(n_te, kTestMean, kTestVar);
    out.densities.p_tr = [](const Eigen::VectorXd& x) {
        return std::exp(gaussian_log_pdf(x[0], kTrainMean, kTrainVar));
    };
    out.densities.p_te = [](const Eigen::VectorXd& x) {
        return std::exp(gaussian_log_pdf(x[0], kTestMean, kTestVar));
    };
    out.densities.ratio = [](const Eigen::VectorXd& x) {
        return std::exp(gaussian_log_pdf(x[0], kTestMean, kTestVar) -
                        gaussian_log_pdf(x[0], kTrainMean, kTrainVar));
    };
    return out;
}

}  // namespace csa::shift
