#include "teak/calibration.hpp"

#include "teak/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace teak {

namespace {

constexpr double kHuberTuning = 1.345;
constexpr int kMaxIrls = 100;

double median(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct LinearFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    std::size_t iterations = 0;
};

Eigen::VectorXd weighted_lstsq(const Eigen::MatrixXd& D, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    const Eigen::VectorXd sw = w.array().sqrt();
    const Eigen::MatrixXd Dw = sw.asDiagonal() * D;
    const Eigen::VectorXd yw = sw.asDiagonal() * y;
    return Dw.colPivHouseholderQr().solve(yw);
}

void require_full_rank(const Eigen::MatrixXd& D) {
    // scale columns so the rank test is unit-free
    Eigen::MatrixXd Dn = D;
    for (Eigen::Index k = 0; k < Dn.cols(); ++k) {
        const double norm = Dn.col(k).norm();
        if (norm == 0.0) throw RankDeficientError("moment calibration: a design column is identically zero");
        Dn.col(k) /= norm;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Dn);
    qr.setThreshold(1e-10);
    if (qr.rank() < Dn.cols())
        throw RankDeficientError("moment calibration: design matrix is rank deficient (constant tau_area?)");
}

LinearFit fit_linear(const Eigen::MatrixXd& D, const Eigen::VectorXd& y, bool robust) {
    require_full_rank(D);
    const Eigen::Index n = D.rows();
    const Eigen::Index q = D.cols();
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    LinearFit fit;
    fit.beta = weighted_lstsq(D, y, w);

    if (robust) {
        const double floor = 1e-12 * (y.cwiseAbs().maxCoeff() + 1e-300);
        bool converged = false;
        for (int it = 0; it < kMaxIrls; ++it) {
            const Eigen::VectorXd r = y - D * fit.beta;
            std::vector<double> rv(r.data(), r.data() + n);
            const double med = median(rv);
            for (auto& v : rv) v = std::abs(v - med);
            const double scale = std::max(median(rv) / 0.6745, floor);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double u = std::abs(r(i)) / scale;
                w(i) = u <= kHuberTuning ? 1.0 : kHuberTuning / u;
            }
            const Eigen::VectorXd next = weighted_lstsq(D, y, w);
            const double change = (next - fit.beta).cwiseAbs().maxCoeff();
            fit.beta = next;
            fit.iterations = static_cast<std::size_t>(it + 1);
            if (change <= 1e-8 * (1.0 + fit.beta.cwiseAbs().maxCoeff())) {
                converged = true;
                break;
            }
        }
        if (!converged) throw ConvergenceError("Huber IRLS did not converge in 100 iterations");
    }

    const Eigen::VectorXd r = y - D * fit.beta;
    const double dof = static_cast<double>(n - q);
    const double sigma2 = (w.array() * r.array().square()).sum() / dof;
    const Eigen::MatrixXd cov = (D.transpose() * w.asDiagonal() * D).inverse() * sigma2;
    fit.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return fit;
}

void check_lengths(std::size_t a, std::size_t b, std::size_t c) {
    if (a != b || b != c) throw DomainError("moment calibration: series lengths differ");
    if (a < 4) throw DomainError("moment calibration needs at least 4 pulses");
}

} // namespace

MomentCalibModel fit_moment_calibration(std::span<const double> m0_gas, std::span<const double> tau_area,
                                        std::span<const double> m0_inert, bool robust) {
    check_lengths(m0_gas.size(), tau_area.size(), m0_inert.size());
    const auto n = static_cast<Eigen::Index>(m0_gas.size());
    Eigen::MatrixXd D(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        D(i, 0) = 1.0;
        D(i, 1) = tau_area[k];
        D(i, 2) = m0_inert[k];
        y(i) = m0_gas[k];
    }
    const LinearFit fit = fit_linear(D, y, robust);
    MomentCalibModel m;
    m.mu = fit.beta(0);
    m.zeta1 = fit.beta(1);
    m.zeta2 = fit.beta(2);
    m.standard_errors = {fit.se(0), fit.se(1), fit.se(2)};
    m.robust = robust;
    m.iterations = fit.iterations;
    return m;
}

MomentCalibModel fit_moment_calibration_reduced(std::span<const double> m0_gas, std::span<const double> m0_inert,
                                                bool robust) {
    check_lengths(m0_gas.size(), m0_inert.size(), m0_inert.size());
    const auto n = static_cast<Eigen::Index>(m0_gas.size());
    Eigen::MatrixXd D(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        D(i, 0) = 1.0;
        D(i, 1) = m0_inert[k];
        y(i) = m0_gas[k];
    }
    const LinearFit fit = fit_linear(D, y, robust);
    MomentCalibModel m;
    m.mu = fit.beta(0);
    m.zeta2 = fit.beta(1);
    m.standard_errors = {fit.se(0), 0.0, fit.se(1)};
    m.robust = robust;
    m.reduced = true;
    m.iterations = fit.iterations;
    return m;
}

TccoSolution tcco_calibrate(const Flux& dv, std::span<const Flux> ivs, const TccoConfig& config) {
    if (ivs.empty()) throw DomainError("tcco_calibrate: no regressors");
    const auto n = static_cast<Eigen::Index>(dv.size());
    TccoProblem pr;
    pr.y = Eigen::Map<const Eigen::VectorXd>(dv.values.data(), n);
    pr.X.resize(n, static_cast<Eigen::Index>(ivs.size()));
    for (std::size_t k = 0; k < ivs.size(); ++k) {
        if (!(ivs[k].grid == dv.grid))
            throw GridMismatchError("tcco_calibrate: regressor '" + ivs[k].species + "' is not on the reference grid");
        pr.X.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(ivs[k].values.data(), n);
    }
    const auto w = trapezoid_weights(dv.grid);
    pr.quad_weights = Eigen::Map<const Eigen::VectorXd>(w.data(), n);
    pr.enforce_pointwise = config.enforce_pointwise;
    pr.enforce_moment = config.enforce_moment;
    pr.feas_tol = config.feas_tol;
    pr.pos_tol = config.pos_tol;
    pr.pointwise_margin = config.pointwise_margin;
    return solve(pr);
}

std::vector<Flux> calibrated_fluxes(std::span<const Flux> ivs, const TccoSolution& solution) {
    std::vector<Flux> out;
    out.reserve(ivs.size());
    for (std::size_t k = 0; k < ivs.size(); ++k) {
        const double b = solution.b(static_cast<Eigen::Index>(k));
        std::vector<double> v(ivs[k].values);
        for (auto& x : v) x *= b;
        Flux f = ivs[k].with_values(std::move(v));
        f.units = FluxUnits::calibrated;
        out.push_back(std::move(f));
    }
    return out;
}

std::string_view to_string(RelationshipCheck check) {
    switch (check) {
    case RelationshipCheck::reversible_consistent: return "reversible_consistent";
    case RelationshipCheck::irreversible_consistent: return "irreversible_consistent";
    case RelationshipCheck::no_reaction: return "no_reaction";
    case RelationshipCheck::violation: return "violation";
    }
    return "violation";
}

RelationshipCheck check_relationships(double m0_r, std::span<const double> m0_p, double m0_I, double m1n_r,
                                      double m1n_I, double blend, double tol) {
    const double scaled = blend * m0_I;
    const double area_tol = tol * std::abs(scaled);
    const double m1_tol = tol * std::abs(m1n_I);
    const bool areas_equal = std::abs(m0_r - scaled) <= area_tol;
    if (areas_equal && std::abs(m1n_r - m1n_I) <= m1_tol) return RelationshipCheck::no_reaction;
    if (areas_equal && m1n_r > m1n_I) return RelationshipCheck::reversible_consistent;
    const double products = std::accumulate(m0_p.begin(), m0_p.end(), 0.0);
    if (m0_r < scaled && m1n_r < m1n_I && m0_r + products <= scaled + area_tol)
        return RelationshipCheck::irreversible_consistent;
    return RelationshipCheck::violation;
}

} // namespace teak
