#include "teak/flux.hpp"

#include "teak/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace teak {

TimeGrid::TimeGrid(double start, double step, std::size_t count)
    : start_(start), step_(step), count_(count) {
    if (!(start >= 0.0) || !std::isfinite(start))
        throw DomainError("time grid start must be finite and >= 0");
    if (!(step > 0.0) || !std::isfinite(step))
        throw DomainError("time grid step must be finite and > 0");
    if (count < kMinCount)
        throw DomainError("time grid needs at least " + std::to_string(kMinCount) + " points, got " +
                          std::to_string(count));
}

std::vector<double> TimeGrid::times() const {
    std::vector<double> t(count_);
    for (std::size_t i = 0; i < count_; ++i) t[i] = at(i);
    return t;
}

Flux::Flux(TimeGrid grid_, std::vector<double> values_, FluxUnits units_, std::string species_,
           std::size_t pulse_index_)
    : grid(grid_), values(std::move(values_)), units(units_), species(std::move(species_)),
      pulse_index(pulse_index_) {
    if (values.size() != grid.count())
        throw DomainError("flux has " + std::to_string(values.size()) + " values for a grid of " +
                          std::to_string(grid.count()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw DomainError("flux value at index " + std::to_string(i) + " is not finite");
    }
}

Flux Flux::with_values(std::vector<double> new_values) const {
    return Flux(grid, std::move(new_values), units, species, pulse_index);
}

double gamma_pdf(double t, const GammaParams& params) {
    if (!(params.alpha > 0.0) || !(params.beta > 0.0))
        throw DomainError("gamma parameters must be positive");
    if (!(t >= 0.0)) throw DomainError("gamma_pdf requires t >= 0");
    if (t == 0.0) {
        if (params.alpha > 1.0) return 0.0;
        if (params.alpha == 1.0) return 1.0 / params.beta;
        return HUGE_VAL;
    }
    // log-space keeps large alpha from overflowing tgamma
    const double log_pdf = (params.alpha - 1.0) * std::log(t) - t / params.beta - std::lgamma(params.alpha) -
                           params.alpha * std::log(params.beta);
    return std::exp(log_pdf);
}

std::vector<double> trapezoid_weights(const TimeGrid& grid) {
    std::vector<double> w(grid.count(), grid.step());
    w.front() *= 0.5;
    w.back() *= 0.5;
    return w;
}

double trapezoid(const TimeGrid& grid, std::span<const double> values) {
    if (values.size() != grid.count()) throw DomainError("trapezoid: length mismatch");
    double interior = 0.0;
    for (std::size_t i = 1; i + 1 < values.size(); ++i) interior += values[i];
    return grid.step() * (interior + 0.5 * (values.front() + values.back()));
}

Moments moments(const Flux& flux, int max_order) {
    if (max_order < 0 || max_order > 3) throw DomainError("moments: max_order must be in [0, 3]");
    const auto& v = flux.values;
    const std::size_t n = v.size();
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
        const double t = flux.grid.at(i);
        double term = w * v[i];
        for (int k = 0; k <= max_order; ++k) {
            acc[k] += term;
            term *= t;
        }
    }
    Moments m;
    const double h = flux.grid.step();
    m.m0 = acc[0] * h;
    m.m1 = acc[1] * h;
    m.m2 = acc[2] * h;
    m.m3 = acc[3] * h;
    m.m1_normalized = (m.m0 != 0.0 && max_order >= 1) ? m.m1 / m.m0 : std::nan("");
    return m;
}

std::size_t argmax_index(std::span<const double> values) {
    if (values.empty()) throw DomainError("argmax of empty sequence");
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

ResidenceProps residence_props(const Flux& flux) {
    const Moments m = moments(flux, 2);
    if (!(m.m0 > 0.0)) throw DegenerateFluxError("residence_props: m0 <= 0");
    const std::size_t peak = argmax_index(flux.values);
    if (peak == 0 || peak + 1 == flux.size())
        throw DegenerateFluxError("residence_props: flux maximum lies on the grid boundary");

    ResidenceProps r;
    r.tau_mean = m.m1 / m.m0;
    r.tau_var = m.m2 / m.m0 - r.tau_mean * r.tau_mean;
    if (!(r.tau_var > 0.0)) throw DegenerateFluxError("residence_props: nonpositive residence-time variance");
    if (!(r.tau_mean > 0.0)) throw DegenerateFluxError("residence_props: nonpositive mean residence time");
    r.tau_peak = flux.grid.at(peak);
    r.gamma.alpha = r.tau_mean * r.tau_mean / r.tau_var;
    r.gamma.beta = r.tau_var / r.tau_mean;
    r.tau_area = std::exp(std::lgamma(r.gamma.alpha) + r.gamma.alpha * std::log(r.gamma.beta));
    if (!std::isfinite(r.tau_area)) throw DegenerateFluxError("residence_props: tau_area is not finite");
    return r;
}

ConversionResult conversion(double reactant_m0, double inert_m0, double blend_ratio) {
    if (!(inert_m0 > 0.0)) throw DomainError("conversion: inert m0 must be positive");
    if (!(blend_ratio > 0.0)) throw DomainError("conversion: blend ratio must be positive");
    ConversionResult c;
    c.value = 1.0 - reactant_m0 / (blend_ratio * inert_m0);
    c.out_of_range = !(c.value >= -0.05 && c.value <= 1.0);
    return c;
}

Flux graham_align(const Flux& flux, double mass_gas, double mass_ref) {
    if (!(mass_gas > 0.0) || !(mass_ref > 0.0)) throw DomainError("graham_align: masses must be positive");
    if (mass_gas == mass_ref) return flux;

    // aligned(t) = c * F(c * t) with c = sqrt(mass_gas / mass_ref)
    const double c = std::sqrt(mass_gas / mass_ref);
    const TimeGrid& g = flux.grid;
    const std::size_t n = g.count();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double src = (g.at(i) * c - g.start()) / g.step();
        double value;
        if (src <= 0.0) {
            value = flux.values.front();
        } else if (src >= static_cast<double>(n - 1)) {
            value = flux.values.back();
        } else {
            const auto j = static_cast<std::size_t>(src);
            const double frac = src - static_cast<double>(j);
            value = flux.values[j] + frac * (flux.values[j + 1] - flux.values[j]);
        }
        out[i] = c * value;
    }
    return flux.with_values(std::move(out));
}

double mean(std::span<const double> values) {
    if (values.empty()) throw DomainError("mean of empty sequence");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
    if (values.size() < 2) throw DomainError("sample_std needs at least two values");
    const double mu = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::vector<double> standardize(std::span<const double> values) {
    if (values.size() < 2) throw DomainError("standardize needs at least two values");
    const double mu = mean(values);
    const double sd = sample_std(values);
    if (!(sd > 0.0)) throw DomainError("standardize: zero variance");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mu) / sd;
    return out;
}

} // namespace teak
