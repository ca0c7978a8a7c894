#pragma once

#include "teak/flux.hpp"

#include <optional>
#include <span>
#include <vector>

namespace teak {

struct SmoothResult {
    Flux smoothed;
    /// input - smoothed, elementwise
    std::vector<double> residuals;
    double smoothing_factor = 0.0;
    double residual_std = 0.0;
    /// Trace of the hat matrix.
    double effective_dof = 0.0;
};

/// Natural cubic smoothing spline with a knot at every grid point, minimizing
/// sum (y_i - g(t_i))^2 + factor * integral g''(t)^2 dt.
///
/// Without an explicit factor it minimizes generalized cross-validation,
/// N RSS / (N - tr S)^2 with S the hat matrix: a half-decade scan of
/// log(factor) followed by golden-section refinement. Matching RSS to
/// N sigma^2 (discrepancy principle) collapses to near interpolation whenever
/// the tail noise estimate is low by more than about tr(S)/N, a routine error
/// for a few thousand samples. An input whose estimate_noise_std is exactly
/// zero yields factor 0 (interpolation). Residuals are equally weighted.
SmoothResult smooth(const Flux& flux, std::optional<double> factor = std::nullopt);

/// Robust noise level: 1.4826 * MAD of the first differences of the trailing
/// tail_fraction of the signal, divided by sqrt(2).
double estimate_noise_std(const Flux& flux, double tail_fraction = 0.1);

/// Spline values for a fixed penalty on a uniform grid of spacing `step`.
std::vector<double> smoothing_spline(std::span<const double> values, double step, double factor);

/// Trace of the spline hat matrix (effective degrees of freedom) for a fixed penalty.
double smoother_trace(std::span<const double> values, double step, double factor);

} // namespace teak
