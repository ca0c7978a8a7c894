#pragma once

// Constrained least squares behind temporal calibration:
//
//   minimize ||y - X b||^2
//   subject to  b >= 0
//               y_i + margin - x_i^T b >= 0 (pointwise, optional)
//               w^T y - w^T X b >= 0        (aggregate area, optional)
//
// p (columns of X) is tiny, N (rows) can be large.

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace teak {

struct TccoProblem {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    /// Quadrature weights for the area constraint (trapezoid weights of the grid).
    Eigen::VectorXd quad_weights;
    bool enforce_pointwise = true;
    bool enforce_moment = true;
    /// Negative selects the default 1e-9 * max|y|.
    double feas_tol = -1.0;
    /// A row carries a pointwise constraint only when some x_ik exceeds
    /// pos_tol * max_i x_ik; near-zero regressor values give meaningless bounds.
    double pos_tol = 1e-6;
    /// Allowance added to every pointwise bound, in units of y. Noisy data
    /// need one: with a hard bound the lowest noise excursion sets b.
    double pointwise_margin = 0.0;
    /// Zero selects the default 10 * p * N active-set steps.
    std::size_t max_iterations = 0;
};

/// Flat constraint numbering used in active sets: [0, p) bounds b_k >= 0,
/// [p, p + N) pointwise rows, p + N the area constraint.
struct ConstraintIndex {
    static std::size_t bound(std::size_t k) { return k; }
    static std::size_t pointwise(std::size_t p, std::size_t row) { return p + row; }
    static std::size_t moment(std::size_t p, std::size_t n) { return p + n; }
};

struct TccoSolution {
    Eigen::VectorXd b;
    Eigen::VectorXd residuals;
    double objective = 0.0;
    std::vector<std::size_t> active_set;
    double kkt_residual = 0.0;
    std::size_t iterations = 0;
};

/// Effective feasibility tolerance of a problem.
double feasibility_tolerance(const TccoProblem& problem);

/// Rows that carry a pointwise constraint under pos_tol.
std::vector<std::size_t> pointwise_rows(const TccoProblem& problem);

/// Global minimizer by a primal active-set method. Pointwise rows are pruned to
/// the 1000 tightest before the active-set loop and violated rows are added
/// back until every eligible row is satisfied within feas_tol.
/// Throws InfeasibleError when no feasible b exists and ConvergenceError when
/// the step budget runs out.
TccoSolution solve(const TccoProblem& problem);

/// Closed-form p = 1 minimizer: clamp((x.y)/(x.x), 0, b_max) with b_max the
/// tightest pointwise ratio over rows with x_i > pos_tol * max(x), further
/// bounded by the area ratio when w.x > 0. Uses both constraints.
double oracle_1d(const Eigen::VectorXd& y, const Eigen::VectorXd& x, const Eigen::VectorXd& quad_weights,
                 double pos_tol = 1e-6);

/// Largest of: stationarity residual with nonnegative multipliers fitted on the
/// active constraints, complementary-slackness violation, primal infeasibility.
double check_kkt(const TccoProblem& problem, const TccoSolution& solution);

} // namespace teak
