#pragma once

#include "teak/cqp.hpp"
#include "teak/flux.hpp"

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace teak {

/// m0_gas = mu + zeta1 * tau_area + zeta2 * m0_inert, fitted across pulses.
struct MomentCalibModel {
    double mu = 0.0;
    double zeta1 = 0.0;
    double zeta2 = 0.0;
    std::array<double, 3> standard_errors{};
    bool robust = false;
    /// tau_area term dropped (zeta1 fixed at 0).
    bool reduced = false;
    std::size_t iterations = 0;
    /// zeta2 <= 0 cannot be a physical calibration; reported, not enforced.
    bool physically_meaningful() const { return zeta2 > 0.0; }
};

/// OLS or (robust) Huber-IRLS fit, tuning constant 1.345, iterated until the
/// coefficients move less than 1e-8. Needs >= 4 pulses.
/// Throws RankDeficientError (e.g. constant tau_area) and ConvergenceError
/// (IRLS past 100 iterations).
MomentCalibModel fit_moment_calibration(std::span<const double> m0_gas, std::span<const double> tau_area,
                                        std::span<const double> m0_inert, bool robust = false);

/// Same fit without the tau_area column.
MomentCalibModel fit_moment_calibration_reduced(std::span<const double> m0_gas, std::span<const double> m0_inert,
                                                bool robust = false);

struct TccoConfig {
    bool enforce_pointwise = true;
    bool enforce_moment = true;
    /// Negative selects the solver default.
    double feas_tol = -1.0;
    /// Relative regressor level below which rows carry no pointwise constraint.
    double pos_tol = 1e-6;
    /// Absolute allowance on every pointwise bound (reference units).
    double pointwise_margin = 0.0;
};

/// Calibrate regressor fluxes against a reference flux on the same grid.
/// Throws GridMismatchError when grids differ; solver errors propagate.
TccoSolution tcco_calibrate(const Flux& dv, std::span<const Flux> ivs, const TccoConfig& config);

/// b_k * iv_k for every regressor, in calibrated units.
std::vector<Flux> calibrated_fluxes(std::span<const Flux> ivs, const TccoSolution& solution);

enum class RelationshipCheck { reversible_consistent, irreversible_consistent, no_reaction, violation };

std::string_view to_string(RelationshipCheck check);

/// Classify post-calibration moments of a reactant, its products and the inert.
/// `tol` is relative: areas compare within tol * blend * m0_I and normalized
/// first moments within tol * m1n_I. Order: no_reaction, reversible,
/// irreversible, else violation.
RelationshipCheck check_relationships(double m0_r, std::span<const double> m0_p, double m0_I, double m1n_r,
                                      double m1n_I, double blend = 1.0, double tol = 0.02);

struct CalibrationReport {
    std::vector<double> coefficient_per_pulse;
    RelationshipCheck relationship_check = RelationshipCheck::violation;
    /// blend * m0_I - (m0_r + sum m0_p)
    double mass_balance_slack = 0.0;
};

} // namespace teak
