#include "teak/cqp.hpp"

#include "teak/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace teak {

namespace {

constexpr std::size_t kPoolSize = 1000;

// minimize 0.5 z^T H z + g^T z  subject to  A z >= c
struct DenseQp {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    Eigen::MatrixXd A;
    Eigen::VectorXd c;
};

struct QpResult {
    Eigen::VectorXd z;
    std::vector<Eigen::Index> working;
    std::size_t iterations = 0;
};

// Orthonormal basis of the null space of the working-set rows.
Eigen::MatrixXd null_space(const Eigen::MatrixXd& A, const std::vector<Eigen::Index>& working, Eigen::Index n) {
    if (working.empty()) return Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd At(n, static_cast<Eigen::Index>(working.size()));
    for (std::size_t j = 0; j < working.size(); ++j) At.col(static_cast<Eigen::Index>(j)) = A.row(working[j]).transpose();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(At);
    const Eigen::Index rank = qr.rank();
    Eigen::MatrixXd Q = qr.householderQ();
    return Q.rightCols(n - rank);
}

// Primal active-set method (convex H) from a point feasible within `tol`.
QpResult active_set(const DenseQp& qp, Eigen::VectorXd z, std::size_t max_iterations, std::size_t& budget_used) {
    const Eigen::Index n = qp.H.rows();
    const Eigen::Index m = qp.A.rows();
    std::vector<char> in_working(static_cast<std::size_t>(m), 0);
    QpResult res;
    Eigen::VectorXd row_norm(m);
    for (Eigen::Index j = 0; j < m; ++j) row_norm(j) = std::max(qp.A.row(j).norm(), std::numeric_limits<double>::min());
    const double h_norm = qp.H.norm();

    while (true) {
        if (budget_used >= max_iterations)
            throw ConvergenceError("active-set solver exceeded " + std::to_string(max_iterations) + " steps");
        ++budget_used;
        ++res.iterations;

        const Eigen::VectorXd grad = qp.H * z + qp.g;
        const Eigen::MatrixXd Z = null_space(qp.A, res.working, n);
        Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
        if (Z.cols() > 0) {
            const Eigen::MatrixXd reduced = Z.transpose() * qp.H * Z;
            const Eigen::VectorXd rhs = -(Z.transpose() * grad);
            d = Z * reduced.completeOrthogonalDecomposition().solve(rhs);
        }

        const double z_scale = 1.0 + z.lpNorm<Eigen::Infinity>();
        if (d.lpNorm<Eigen::Infinity>() <= 1e-13 * z_scale) {
            if (res.working.empty()) break;
            Eigen::MatrixXd At(n, static_cast<Eigen::Index>(res.working.size()));
            for (std::size_t j = 0; j < res.working.size(); ++j)
                At.col(static_cast<Eigen::Index>(j)) = qp.A.row(res.working[j]).transpose();
            const Eigen::VectorXd lambda = At.completeOrthogonalDecomposition().solve(grad);
            const double grad_scale = h_norm * z.norm() + qp.g.norm() + std::numeric_limits<double>::min();
            std::ptrdiff_t drop = -1;
            double most_negative = 0.0;
            for (std::size_t j = 0; j < res.working.size(); ++j) {
                const double scaled = lambda(static_cast<Eigen::Index>(j)) * row_norm(res.working[j]);
                if (scaled < -1e-11 * grad_scale) {
                    if (drop < 0 || scaled < most_negative ||
                        (scaled == most_negative && res.working[j] < res.working[static_cast<std::size_t>(drop)])) {
                        most_negative = scaled;
                        drop = static_cast<std::ptrdiff_t>(j);
                    }
                }
            }
            if (drop < 0) break;
            in_working[static_cast<std::size_t>(res.working[static_cast<std::size_t>(drop)])] = 0;
            res.working.erase(res.working.begin() + drop);
            continue;
        }

        double alpha = 1.0;
        Eigen::Index blocking = -1;
        const double d_norm = d.norm();
        for (Eigen::Index j = 0; j < m; ++j) {
            if (in_working[static_cast<std::size_t>(j)]) continue;
            const double ad = qp.A.row(j).dot(d);
            if (ad >= -1e-14 * row_norm(j) * d_norm) continue;
            const double slack = std::max(0.0, qp.A.row(j).dot(z) - qp.c(j));
            const double step = slack / -ad;
            if (step < alpha || (step == alpha && blocking >= 0 && j < blocking)) {
                alpha = step;
                blocking = j;
            }
        }
        z += alpha * d;
        if (blocking >= 0) {
            res.working.push_back(blocking);
            in_working[static_cast<std::size_t>(blocking)] = 1;
        }
    }
    res.z = std::move(z);
    return res;
}

void validate(const TccoProblem& pr) {
    const auto n = pr.y.size();
    const auto p = pr.X.cols();
    if (p < 1) throw DomainError("TCCO problem needs at least one regressor");
    if (pr.X.rows() != n || pr.quad_weights.size() != n) throw DomainError("TCCO problem dimensions disagree");
    if (n < 8 || n < p) throw DomainError("TCCO problem needs N >= 8 and N >= p");
    if (!pr.y.allFinite() || !pr.X.allFinite() || !pr.quad_weights.allFinite())
        throw DomainError("TCCO problem contains non-finite entries");
    if ((pr.quad_weights.array() <= 0.0).any()) throw DomainError("TCCO quadrature weights must be positive");
    if (!(pr.pos_tol >= 0.0)) throw DomainError("TCCO pos_tol must be nonnegative");
    if (!(pr.pointwise_margin >= 0.0) || !std::isfinite(pr.pointwise_margin))
        throw DomainError("TCCO pointwise_margin must be finite and nonnegative");
}

// Builds bounds + selected pointwise rows + (optionally) the area row.
struct ConstraintSet {
    DenseQp qp;
    std::vector<std::size_t> flat;
};

ConstraintSet build(const TccoProblem& pr, const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                    const std::vector<std::size_t>& rows) {
    const auto p = pr.X.cols();
    const auto n = static_cast<std::size_t>(pr.y.size());
    const Eigen::Index m = p + static_cast<Eigen::Index>(rows.size()) + (pr.enforce_moment ? 1 : 0);
    ConstraintSet cs;
    cs.qp.H = H;
    cs.qp.g = g;
    cs.qp.A.setZero(m, p);
    cs.qp.c.setZero(m);
    cs.flat.reserve(static_cast<std::size_t>(m));
    Eigen::Index r = 0;
    for (Eigen::Index k = 0; k < p; ++k, ++r) {
        cs.qp.A(r, k) = 1.0;
        cs.flat.push_back(ConstraintIndex::bound(static_cast<std::size_t>(k)));
    }
    for (std::size_t i : rows) {
        cs.qp.A.row(r) = -pr.X.row(static_cast<Eigen::Index>(i));
        cs.qp.c(r) = -(pr.y(static_cast<Eigen::Index>(i)) + pr.pointwise_margin);
        cs.flat.push_back(ConstraintIndex::pointwise(static_cast<std::size_t>(p), i));
        ++r;
    }
    if (pr.enforce_moment) {
        cs.qp.A.row(r) = -(pr.X.transpose() * pr.quad_weights).transpose();
        cs.qp.c(r) = -pr.quad_weights.dot(pr.y);
        cs.flat.push_back(ConstraintIndex::moment(static_cast<std::size_t>(p), n));
    }
    return cs;
}

// Finds a point within tol of the feasible set, or throws InfeasibleError.
// Auxiliary problem: minimize s^2 / 2 over (b, s) with every constraint relaxed by s.
Eigen::VectorXd phase_one(const DenseQp& qp, double tol, std::size_t max_iterations, std::size_t& budget_used) {
    const Eigen::Index p = qp.A.cols();
    const Eigen::Index m = qp.A.rows();
    DenseQp aux;
    aux.H = Eigen::MatrixXd::Zero(p + 1, p + 1);
    aux.H(p, p) = 1.0;
    aux.g = Eigen::VectorXd::Zero(p + 1);
    aux.A = Eigen::MatrixXd::Zero(m + 1, p + 1);
    aux.c = Eigen::VectorXd::Zero(m + 1);
    for (Eigen::Index j = 0; j < m; ++j) {
        aux.A.row(j).head(p) = qp.A.row(j);
        // the leading p rows are the bounds; they stay hard so b >= 0 survives
        aux.A(j, p) = j < p ? 0.0 : 1.0;
        aux.c(j) = qp.c(j);
    }
    aux.A(m, p) = 1.0;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(p + 1);
    z(p) = std::max(0.0, (qp.c - qp.A * z.head(p)).maxCoeff());
    const QpResult r = active_set(aux, z, max_iterations, budget_used);
    if (r.z(p) > tol)
        throw InfeasibleError("no calibration coefficient satisfies the constraints (minimum violation " +
                              std::to_string(r.z(p)) + ")");
    return r.z.head(p);
}

} // namespace

double feasibility_tolerance(const TccoProblem& problem) {
    if (problem.feas_tol >= 0.0) return problem.feas_tol;
    const double ymax = problem.y.size() ? problem.y.cwiseAbs().maxCoeff() : 0.0;
    return 1e-9 * ymax;
}

std::vector<std::size_t> pointwise_rows(const TccoProblem& pr) {
    std::vector<std::size_t> rows;
    if (!pr.enforce_pointwise) return rows;
    const Eigen::RowVectorXd colmax = pr.X.colwise().maxCoeff();
    for (Eigen::Index i = 0; i < pr.X.rows(); ++i) {
        for (Eigen::Index k = 0; k < pr.X.cols(); ++k) {
            if (colmax(k) > 0.0 && pr.X(i, k) > pr.pos_tol * colmax(k)) {
                rows.push_back(static_cast<std::size_t>(i));
                break;
            }
        }
    }
    return rows;
}

TccoSolution solve(const TccoProblem& pr) {
    validate(pr);
    const auto p = pr.X.cols();
    const auto n = static_cast<std::size_t>(pr.y.size());
    const double tol = feasibility_tolerance(pr);
    const std::size_t max_iterations = pr.max_iterations ? pr.max_iterations : 10 * static_cast<std::size_t>(p) * n;

    const Eigen::MatrixXd H = 2.0 * pr.X.transpose() * pr.X;
    const Eigen::VectorXd g = -2.0 * pr.X.transpose() * pr.y;

    const std::vector<std::size_t> eligible = pointwise_rows(pr);
    std::vector<std::size_t> pool = eligible;
    if (pool.size() > kPoolSize) {
        // smallest y_i / x_i (normalized per column) first: the lower envelope binds
        const Eigen::RowVectorXd colmax = pr.X.colwise().maxCoeff();
        std::vector<double> key(n, 0.0);
        for (std::size_t i : pool) {
            double denom = 0.0;
            for (Eigen::Index k = 0; k < p; ++k)
                if (colmax(k) > 0.0) denom += std::max(0.0, pr.X(static_cast<Eigen::Index>(i), k)) / colmax(k);
            key[i] = (pr.y(static_cast<Eigen::Index>(i)) + pr.pointwise_margin) / denom;
        }
        std::stable_sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
        pool.resize(kPoolSize);
        std::sort(pool.begin(), pool.end());
    }

    std::size_t budget_used = 0;
    while (true) {
        const ConstraintSet cs = build(pr, H, g, pool);
        Eigen::VectorXd start = Eigen::VectorXd::Zero(p);
        if ((cs.qp.A * start - cs.qp.c).minCoeff() < -tol) start = phase_one(cs.qp, tol, max_iterations, budget_used);
        const QpResult qp = active_set(cs.qp, start, max_iterations, budget_used);

        // add back any eligible row the pruned pool missed
        std::vector<std::pair<double, std::size_t>> violated;
        if (pool.size() < eligible.size()) {
            std::vector<char> in_pool(n, 0);
            for (std::size_t i : pool) in_pool[i] = 1;
            for (std::size_t i : eligible) {
                if (in_pool[i]) continue;
                const double slack = pr.y(static_cast<Eigen::Index>(i)) + pr.pointwise_margin -
                                     pr.X.row(static_cast<Eigen::Index>(i)).dot(qp.z);
                if (slack < -tol) violated.emplace_back(slack, i);
            }
        }
        if (violated.empty()) {
            TccoSolution sol;
            sol.b = qp.z;
            sol.residuals = pr.y - pr.X * sol.b;
            sol.objective = sol.residuals.squaredNorm();
            for (Eigen::Index j : qp.working) sol.active_set.push_back(cs.flat[static_cast<std::size_t>(j)]);
            std::sort(sol.active_set.begin(), sol.active_set.end());
            sol.iterations = budget_used;
            sol.kkt_residual = check_kkt(pr, sol);
            return sol;
        }
        std::sort(violated.begin(), violated.end());
        if (violated.size() > kPoolSize) violated.resize(kPoolSize);
        for (const auto& v : violated) pool.push_back(v.second);
        std::sort(pool.begin(), pool.end());
    }
}

double oracle_1d(const Eigen::VectorXd& y, const Eigen::VectorXd& x, const Eigen::VectorXd& w, double pos_tol) {
    const double xx = x.squaredNorm();
    if (!(xx > 0.0)) throw DomainError("oracle_1d: regressor is identically zero");
    const double b_ols = x.dot(y) / xx;
    double b_max = std::numeric_limits<double>::infinity();
    const double xmax = x.maxCoeff();
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (x(i) > pos_tol * xmax && xmax > 0.0) b_max = std::min(b_max, y(i) / x(i));
    const double wx = w.dot(x);
    if (wx > 0.0) b_max = std::min(b_max, w.dot(y) / wx);
    return std::clamp(b_ols, 0.0, std::max(0.0, b_max));
}

namespace {

// Lawson-Hanson: min ||A lambda - target|| subject to lambda >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& target) {
    const Eigen::Index k = A.cols();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
    std::vector<char> passive(static_cast<std::size_t>(k), 0);
    const double tol = 1e-14 * (A.norm() * target.norm() + 1e-300);
    for (int outer = 0; outer < 3 * static_cast<int>(k) + 10; ++outer) {
        const Eigen::VectorXd w = A.transpose() * (target - A * x);
        Eigen::Index best = -1;
        double best_w = tol;
        for (Eigen::Index j = 0; j < k; ++j)
            if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = 1;
        for (int inner = 0; inner < 3 * static_cast<int>(k) + 10; ++inner) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index j = 0; j < k; ++j)
                if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
            Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
            for (std::size_t j = 0; j < idx.size(); ++j) Ap.col(static_cast<Eigen::Index>(j)) = A.col(idx[j]);
            const Eigen::VectorXd zp = Ap.completeOrthogonalDecomposition().solve(target);
            if ((zp.array() > 0.0).all()) {
                x.setZero();
                for (std::size_t j = 0; j < idx.size(); ++j) x(idx[j]) = zp(static_cast<Eigen::Index>(j));
                break;
            }
            double alpha = 1.0;
            for (std::size_t j = 0; j < idx.size(); ++j) {
                const double zj = zp(static_cast<Eigen::Index>(j));
                if (zj <= 0.0) alpha = std::min(alpha, x(idx[j]) / (x(idx[j]) - zj));
            }
            for (std::size_t j = 0; j < idx.size(); ++j)
                x(idx[j]) += alpha * (zp(static_cast<Eigen::Index>(j)) - x(idx[j]));
            for (std::size_t j = 0; j < idx.size(); ++j)
                if (x(idx[j]) <= 1e-300) {
                    x(idx[j]) = 0.0;
                    passive[static_cast<std::size_t>(idx[j])] = 0;
                }
        }
    }
    return x;
}

} // namespace

double check_kkt(const TccoProblem& pr, const TccoSolution& sol) {
    const auto p = pr.X.cols();
    const Eigen::VectorXd& b = sol.b;
    const Eigen::VectorXd grad = 2.0 * pr.X.transpose() * (pr.X * b - pr.y);
    const double b_norm = b.norm();

    std::vector<Eigen::VectorXd> active_rows;
    std::vector<double> active_slack;
    double primal = 0.0;
    auto consider = [&](const Eigen::VectorXd& a, double c) {
        const double slack = a.dot(b) - c;
        primal = std::max(primal, -slack);
        // activity judged by distance in b-space: rows with tiny regressor
        // values have tiny slack without being anywhere near binding
        const double a_norm = a.norm();
        if (a_norm > 0.0 && slack <= 1e-10 * (1.0 + b_norm) * a_norm) {
            active_rows.push_back(a);
            active_slack.push_back(slack);
        }
    };
    for (Eigen::Index k = 0; k < p; ++k) consider(Eigen::VectorXd::Unit(p, k), 0.0);
    for (std::size_t i : pointwise_rows(pr))
        consider(-pr.X.row(static_cast<Eigen::Index>(i)).transpose(),
                 -(pr.y(static_cast<Eigen::Index>(i)) + pr.pointwise_margin));
    if (pr.enforce_moment) consider(-(pr.X.transpose() * pr.quad_weights), -pr.quad_weights.dot(pr.y));

    double stationarity = grad.norm();
    double slackness = 0.0;
    if (!active_rows.empty()) {
        Eigen::MatrixXd A(p, static_cast<Eigen::Index>(active_rows.size()));
        for (std::size_t j = 0; j < active_rows.size(); ++j) A.col(static_cast<Eigen::Index>(j)) = active_rows[j];
        const Eigen::VectorXd lambda = nnls(A, grad);
        stationarity = (grad - A * lambda).norm();
        for (std::size_t j = 0; j < active_rows.size(); ++j)
            slackness = std::max(slackness, lambda(static_cast<Eigen::Index>(j)) * std::abs(active_slack[j]));
    }
    return std::max({stationarity, slackness, primal});
}

} // namespace teak
