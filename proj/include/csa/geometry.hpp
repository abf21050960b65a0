#pragma once

#include <Eigen/Core>

namespace csa::geometry {

// Width of the window around alpha = 1 in which the power representation is
// replaced by the log/exp (geometric) formulas. The power form degenerates as
// the exponent (1 - alpha)/2 approaches zero.
inline constexpr double kLogBranchWindow = 1e-8;

// Power representation of a positive number:
//   f_alpha(a) = a^{(1-alpha)/2}   (alpha != 1)
//   f_alpha(a) = log(a)            (alpha == 1)
// a = 0 is permitted only for alpha < 1, where f_alpha(0) = 0.
double f_alpha(double a, double alpha);

// Inverse of f_alpha. v = 0 is permitted only for alpha < 1.
double f_alpha_inv(double v, double alpha);

// Generalized weighted mean of two nonnegative numbers:
//   m(a, b) = f_alpha_inv((1 - lambda) f_alpha(a) + lambda f_alpha(b))
// Equals a at lambda = 0 and b at lambda = 1 (exactly, by short-circuit),
// lies between min(a,b) and max(a,b), and is nonincreasing in alpha.
// Covers the arithmetic (alpha = -1), geometric (alpha = 1) and harmonic
// (alpha = 3) means as special cases.
double f_interpolate(double a, double b, double lambda, double alpha);

// Discrete probability vector: nonnegative entries summing to 1 within 1e-12.
class ProbVector {
public:
    explicit ProbVector(Eigen::VectorXd entries);

    const Eigen::VectorXd& entries() const { return entries_; }
    Eigen::Index size() const { return entries_.size(); }
    double operator[](Eigen::Index i) const { return entries_[i]; }

private:
    Eigen::VectorXd entries_;
};

// Alpha-divergence between probability vectors,
//   D_alpha[p : q] = 4 / (1 - alpha^2) * (1 - sum_i p_i^{(1-alpha)/2} q_i^{(1+alpha)/2}).
// The KL limits |alpha| = 1 are rejected.
double alpha_divergence(const ProbVector& p, const ProbVector& q, double alpha);

// Point on the alpha-geodesic between p and q: componentwise f-interpolation
// normalized to sum one. At lambda in {0, 1} the inputs are returned as-is.
ProbVector alpha_geodesic_point(const ProbVector& p, const ProbVector& q, double lambda,
                                double alpha);

}  // namespace csa::geometry
