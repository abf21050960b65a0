#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "csa/learners.hpp"
#include "csa/weights.hpp"

namespace csa::shift {

// Parameters of the projection-sigmoid split: an example x is assigned to the
// training set with probability sigmoid(gain * w'x / sigma), where sigma is
// the population standard deviation of w'x over the full dataset.
struct ShiftSpec {
    Eigen::VectorXd projection;
    double scale_sigma = 0.0;
    double gain = 16.0;

    void validate() const;
};

struct StandardizeStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;  // population convention (divide by n)
};

// Z-score standardization per column; returns the transformed matrix and the
// statistics needed to transform held-out data. Columns with zero variance
// are rejected with their index.
std::pair<Eigen::MatrixXd, StandardizeStats> zscore_standardize(const Eigen::MatrixXd& X);

Eigen::MatrixXd apply_standardize(const Eigen::MatrixXd& X, const StandardizeStats& stats);
Eigen::MatrixXd invert_standardize(const Eigen::MatrixXd& X, const StandardizeStats& stats);

struct SplitDataset {
    learners::Dataset train;
    learners::Dataset test;
    ShiftSpec spec;
    std::uint64_t seed = 0;
};

// Randomly assigns every example to train/test with the sigmoid probability
// above. Deterministic given the seed; both splits must end up nonempty.
SplitDataset induce_shift(const learners::Dataset& data, const Eigen::VectorXd& projection,
                          std::uint64_t seed, double gain = 16.0);

// Closed-form densities induced by the split protocol:
//   p_tr(x) = e^v / (1 + e^v),  p_te(x) = 1 / (1 + e^v),  v = gain * w'x / sigma.
// They are complementary (p_tr + p_te = 1) and their ratio is exp(-v).
weights::DensityPair density_pair_from_spec(const ShiftSpec& spec);

struct SynthData {
    learners::Dataset train;
    learners::Dataset test;
    weights::DensityPair densities;
};

// Synthetic 1-d regression task: covariates are Normal(0, variance 5) for
// train and Normal(-5, variance 0.5) for test, targets y = x^2 + eps with
// eps ~ Normal(0, variance 5). The density pair holds the two Gaussians in
// closed form. Deterministic given the seed.
SynthData synth_regression(int n_tr, int n_te, std::uint64_t seed);

}  // namespace csa::shift
