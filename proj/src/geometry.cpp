#include "csa/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace csa::geometry {

namespace {

void check_alpha(double alpha) {
    if (!std::isfinite(alpha)) {
        throw std::domain_error("alpha must be finite, got " + std::to_string(alpha));
    }
}

bool log_branch(double alpha) { return std::abs(alpha - 1.0) < kLogBranchWindow; }

}  // namespace

double f_alpha(double a, double alpha) {
    check_alpha(alpha);
    if (a < 0.0 || !std::isfinite(a)) {
        throw std::domain_error("f_alpha requires a >= 0, got " + std::to_string(a));
    }
    if (log_branch(alpha)) {
        if (a == 0.0) throw std::domain_error("f_alpha: a = 0 is not in the domain for alpha = 1");
        return std::log(a);
    }
    if (a == 0.0) {
        if (alpha > 1.0) {
            throw std::domain_error("f_alpha: a = 0 is not in the domain for alpha > 1");
        }
        return 0.0;
    }
    return std::pow(a, 0.5 * (1.0 - alpha));
}

double f_alpha_inv(double v, double alpha) {
    check_alpha(alpha);
    if (!std::isfinite(v)) {
        throw std::domain_error("f_alpha_inv requires finite v");
    }
    if (log_branch(alpha)) return std::exp(v);
    if (v < 0.0 || (v == 0.0 && alpha > 1.0)) {
        throw std::domain_error("f_alpha_inv: v = " + std::to_string(v) +
                                " is outside the range of f_alpha for alpha = " +
                                std::to_string(alpha));
    }
    if (v == 0.0) return 0.0;
    return std::pow(v, 2.0 / (1.0 - alpha));
}

double f_interpolate(double a, double b, double lambda, double alpha) {
    check_alpha(alpha);
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::domain_error("f_interpolate requires lambda in [0,1], got " +
                                std::to_string(lambda));
    }
    // Exact endpoints for every alpha.
    if (lambda == 0.0) {
        f_alpha(a, alpha);  // still enforce the domain
        return a;
    }
    if (lambda == 1.0) {
        f_alpha(b, alpha);
        return b;
    }
    const double v = (1.0 - lambda) * f_alpha(a, alpha) + lambda * f_alpha(b, alpha);
    return f_alpha_inv(v, alpha);
}

ProbVector::ProbVector(Eigen::VectorXd entries) : entries_(std::move(entries)) {
    if (entries_.size() == 0) throw std::invalid_argument("ProbVector must be nonempty");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < entries_.size(); ++i) {
        const double e = entries_[i];
        if (!(e >= 0.0) || !std::isfinite(e)) {
            throw std::invalid_argument("ProbVector entry " + std::to_string(i) +
                                        " is negative or non-finite");
        }
        sum += e;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw std::invalid_argument("ProbVector entries sum to " + std::to_string(sum) +
                                    ", expected 1");
    }
}

double alpha_divergence(const ProbVector& p, const ProbVector& q, double alpha) {
    check_alpha(alpha);
    if (p.size() != q.size()) {
        throw std::invalid_argument("alpha_divergence: dimension mismatch (" +
                                    std::to_string(p.size()) + " vs " + std::to_string(q.size()) +
                                    ")");
    }
    if (std::abs(std::abs(alpha) - 1.0) < 1e-12) {
        throw std::domain_error("alpha_divergence is not defined at |alpha| = 1");
    }
    const double ep = 0.5 * (1.0 - alpha);
    const double eq = 0.5 * (1.0 + alpha);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double pi = p[i];
        const double qi = q[i];
        if (pi == 0.0 && ep < 0.0) {
            throw std::domain_error("alpha_divergence: zero component in p with alpha > 1");
        }
        if (qi == 0.0 && eq < 0.0) {
            throw std::domain_error("alpha_divergence: zero component in q with alpha < -1");
        }
        if (pi == 0.0 || qi == 0.0) continue;
        sum += std::pow(pi, ep) * std::pow(qi, eq);
    }
    double d = 4.0 / (1.0 - alpha * alpha) * (1.0 - sum);
    if (d < 0.0 && d > -1e-9) d = 0.0;  // roundoff at p ~ q
    return d;
}

ProbVector alpha_geodesic_point(const ProbVector& p, const ProbVector& q, double lambda,
                                double alpha) {
    if (p.size() != q.size()) {
        throw std::invalid_argument("alpha_geodesic_point: dimension mismatch");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::domain_error("alpha_geodesic_point requires lambda in [0,1]");
    }
    if (lambda == 0.0) return p;
    if (lambda == 1.0) return q;
    Eigen::VectorXd m(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        m[i] = f_interpolate(p[i], q[i], lambda, alpha);
    }
    const double c = m.sum();
    if (!(c > 0.0)) {
        throw std::domain_error("alpha_geodesic_point: interpolated measure has zero mass");
    }
    return ProbVector(m / c);
}

}  // namespace csa::geometry
