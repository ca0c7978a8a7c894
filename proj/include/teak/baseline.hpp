#pragma once

#include "teak/flux.hpp"

#include <optional>

namespace teak {

struct BaselineResult {
    Flux corrected;
    /// Constant removed from the input: corrected = input - shift.
    double shift = 0.0;
    /// Scaled Gamma density the anchor is matched to (window mean when windowed).
    double gamma_tail_value = 0.0;
    double tau_peak_used = 0.0;
    /// Area that scaled the unit Gamma density (gamma method only).
    double area_estimate = 0.0;
};

/// Shift the flux so its final sample equals the Gamma tail expected at t_end.
/// A positive `anchor_window` (seconds) matches means over the trailing window
/// instead of single values, which averages away most of the noise a single
/// sample carries; 0 anchors on the last sample alone.
///
/// The scale is taken from the peak, beta = tau_p / (shape - 1) (twice the peak
/// time for the ideal shape 1.5), and the unit density is scaled to flux units by
/// `area_estimate`. When no area is given it is estimated from the flux after a
/// preliminary tail-mean shift and refined once from the corrected flux.
/// Throws DegenerateFluxError if the maximum lies on a grid boundary.
BaselineResult baseline_gamma(const Flux& flux, double shape = 1.5,
                              std::optional<double> area_estimate = std::nullopt, double anchor_window = 0.0);

/// Subtract the mean of the values in the final `tail_window` seconds.
BaselineResult baseline_tail_mean(const Flux& flux, double tail_window);

} // namespace teak
