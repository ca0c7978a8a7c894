#pragma once

// Random TCCO instances and brute-force references shared by the solver tests.

#include "teak/cqp.hpp"
#include "teak/flux.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace teak::testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline VectorXd unit_weights(Eigen::Index n) {
    const auto w = trapezoid_weights(TimeGrid(0.0, 1.0, static_cast<std::size_t>(n)));
    return Eigen::Map<const VectorXd>(w.data(), n);
}

inline TccoProblem make(const VectorXd& y, const MatrixXd& X, bool pointwise = true, bool moment = true) {
    TccoProblem p;
    p.y = y;
    p.X = X;
    p.quad_weights = unit_weights(y.size());
    p.enforce_pointwise = pointwise;
    p.enforce_moment = moment;
    return p;
}

// Positive regressors shaped like pulses, response below a random combination.
inline TccoProblem random_instance(std::mt19937_64& rng, int p, int n = 40) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MatrixXd X(n, p);
    for (int k = 0; k < p; ++k) {
        const double centre = 5 + 25 * u(rng), width = 3 + 8 * u(rng);
        for (int i = 0; i < n; ++i) X(i, k) = 0.05 + std::exp(-0.5 * std::pow((i - centre) / width, 2));
    }
    VectorXd b(p);
    for (int k = 0; k < p; ++k) b(k) = 0.2 + u(rng);
    VectorXd y = X * b;
    for (int i = 0; i < n; ++i) y(i) *= 0.6 + 0.6 * u(rng);
    return make(y, X);
}

inline double objective(const TccoProblem& p, const VectorXd& b) { return (p.y - p.X * b).squaredNorm(); }

inline bool feasible(const TccoProblem& p, const VectorXd& b, double tol) {
    if ((b.array() < -tol).any()) return false;
    const VectorXd r = p.y - p.X * b;
    if (p.enforce_pointwise && (r.array() < -tol).any()) return false;
    if (p.enforce_moment && p.quad_weights.dot(r) < -tol) return false;
    return true;
}

// Exhaustive lattice search for p = 2. For each b0 the feasible b1 form an
// interval [0, hi]; its lattice points and hi itself are scanned. Without hi an
// optimum in a thin wedge between two nearly parallel rows has no feasible
// lattice point within several steps.
inline VectorXd brute_force_2d(const TccoProblem& p, double step) {
    const MatrixXd G = p.X.transpose() * p.X;
    const VectorXd c = p.X.transpose() * p.y;
    double b0_max = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < p.y.size(); ++i) b0_max = std::min(b0_max, p.y(i) / p.X(i, 0));
    VectorXd best(2);
    double best_f = std::numeric_limits<double>::infinity();
    for (double b0 = 0.0; b0 <= b0_max + 1e-15; b0 += step) {
        double hi = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < p.y.size(); ++i) hi = std::min(hi, (p.y(i) - b0 * p.X(i, 0)) / p.X(i, 1));
        if (hi < 0.0) continue;
        const auto n1 = static_cast<long>(std::floor(hi / step));
        for (long j = 0; j <= n1 + 1; ++j) {
            const double b1 = j <= n1 ? static_cast<double>(j) * step : hi;
            const double f = G(0, 0) * b0 * b0 + 2 * G(0, 1) * b0 * b1 + G(1, 1) * b1 * b1 - 2 * (c(0) * b0 + c(1) * b1);
            if (f < best_f) {
                best_f = f;
                best << b0, b1;
            }
        }
    }
    return best;
}

} // namespace teak::testing
