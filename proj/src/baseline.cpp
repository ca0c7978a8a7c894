#include "teak/baseline.hpp"

#include "teak/errors.hpp"

#include <cmath>

namespace teak {

namespace {

Flux shifted(const Flux& flux, double shift) {
    std::vector<double> v(flux.values);
    for (auto& x : v) x -= shift;
    return flux.with_values(std::move(v));
}

double tail_mean(const Flux& flux, double tail_window) {
    const double cutoff = flux.grid.end() - tail_window;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = flux.size(); i-- > 0;) {
        if (flux.grid.at(i) < cutoff) break;
        sum += flux.values[i];
        ++count;
    }
    return count ? sum / static_cast<double>(count) : flux.values.back();
}

} // namespace

BaselineResult baseline_gamma(const Flux& flux, double shape, std::optional<double> area_estimate,
                              double anchor_window) {
    if (!(shape > 1.0)) throw DomainError("baseline_gamma: shape must exceed 1 for a peaked density");
    if (!(anchor_window >= 0.0) || !(anchor_window < flux.grid.duration()))
        throw DomainError("baseline_gamma: anchor window must lie in [0, duration)");
    const std::size_t peak = argmax_index(flux.values);
    if (peak == 0 || peak + 1 == flux.size())
        throw DegenerateFluxError("baseline_gamma: flux maximum lies on the grid boundary");

    BaselineResult r;
    r.tau_peak_used = flux.grid.at(peak);
    const GammaParams params{shape, r.tau_peak_used / (shape - 1.0)};
    // anchor: last sample, or the mean over the trailing window
    const double cutoff = flux.grid.end() - anchor_window;
    double last = 0.0, unit_tail = 0.0;
    std::size_t count = 0;
    for (std::size_t i = flux.size(); i-- > 0;) {
        if (count > 0 && flux.grid.at(i) < cutoff) break;
        last += flux.values[i];
        unit_tail += gamma_pdf(flux.grid.at(i), params);
        ++count;
    }
    if (count > 1) {
        last /= static_cast<double>(count);
        unit_tail /= static_cast<double>(count);
    }

    auto correct = [&](double area) {
        BaselineResult out = r;
        out.area_estimate = area;
        out.gamma_tail_value = area * unit_tail;
        out.shift = last - out.gamma_tail_value;
        std::vector<double> v(flux.values);
        for (auto& x : v) x = x - last + out.gamma_tail_value;
        out.corrected = flux.with_values(std::move(v));
        return out;
    };

    if (area_estimate) return correct(*area_estimate);

    const double provisional = trapezoid(flux.grid, shifted(flux, tail_mean(flux, 0.1 * flux.grid.duration())).values);
    const BaselineResult first = correct(provisional);
    return correct(trapezoid(flux.grid, first.corrected.values));
}

BaselineResult baseline_tail_mean(const Flux& flux, double tail_window) {
    if (!(tail_window > 0.0) || !(tail_window < flux.grid.duration()))
        throw DomainError("baseline_tail_mean: tail window must lie in (0, duration)");
    BaselineResult r;
    r.shift = tail_mean(flux, tail_window);
    r.corrected = shifted(flux, r.shift);
    r.tau_peak_used = flux.grid.at(argmax_index(flux.values));
    return r;
}

} // namespace teak
