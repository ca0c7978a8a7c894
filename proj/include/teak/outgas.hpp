#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace teak {

struct OutgasReport {
    std::vector<std::size_t> flagged_indices;
    /// One-sided t statistics of the final pass (+inf when the window has zero
    /// spread and the point lies above it).
    std::vector<double> t_statistics;
    std::vector<double> p_values;
    std::size_t window_half_width = 5;
    double significance = 0.01;
};

/// Moving-window outlier test on an m0 series. Each point is compared with the
/// 2w nearest unflagged neighbours (centred, extended inward at the ends) by a
/// one-sided predictive t-test, t = (x - mean) / (s * sqrt(1 + 1/n)) with
/// n - 1 degrees of freedom. The second pass drops first-pass flags from every
/// window. Throws DomainError when the series is shorter than 2w + 3 or the
/// significance is outside (0, 1).
OutgasReport detect_outgas(std::span<const double> m0_series, std::size_t window_half_width = 5,
                           double significance = 0.01);

} // namespace teak
