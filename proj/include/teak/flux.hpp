#pragma once

// Pulse-response flux types and the moment / residence-time computations
// built on them. Units: time in seconds, masses in AMU, flux in volts until
// calibrated.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace teak {

/// Uniform time axis: t_i = start + i * step for i in [0, count).
class TimeGrid {
public:
    static constexpr std::size_t kMinCount = 8;

    TimeGrid() = default;
    /// Throws DomainError unless start >= 0, step > 0 and count >= kMinCount.
    TimeGrid(double start, double step, std::size_t count);

    double start() const noexcept { return start_; }
    double step() const noexcept { return step_; }
    std::size_t count() const noexcept { return count_; }
    double at(std::size_t i) const noexcept { return start_ + static_cast<double>(i) * step_; }
    double end() const noexcept { return at(count_ - 1); }
    double duration() const noexcept { return end() - start_; }

    std::vector<double> times() const;

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    double start_ = 0.0;
    double step_ = 1.0;
    std::size_t count_ = kMinCount;
};

enum class FluxUnits { volts, calibrated };

/// One pulse response of one species.
struct Flux {
    TimeGrid grid;
    std::vector<double> values;
    FluxUnits units = FluxUnits::volts;
    std::string species;
    std::size_t pulse_index = 0;

    Flux() = default;
    /// Validates length and finiteness; throws DomainError.
    Flux(TimeGrid grid, std::vector<double> values, FluxUnits units = FluxUnits::volts,
         std::string species = {}, std::size_t pulse_index = 0);

    std::size_t size() const noexcept { return values.size(); }
    Flux with_values(std::vector<double> new_values) const;
};

/// Ordered pulses of one species.
struct PulseSeries {
    std::string species;
    std::vector<Flux> pulses;
};

struct GammaParams {
    double alpha = 1.5;
    double beta = 1.0 / 3.0;
};

struct Moments {
    double m0 = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
    /// m1 / m0; NaN when m0 == 0.
    double m1_normalized = 0.0;
};

struct ResidenceProps {
    double tau_mean = 0.0;
    double tau_var = 0.0;
    double tau_peak = 0.0;
    double tau_area = 0.0;
    GammaParams gamma;
};

struct ConversionResult {
    double value = 0.0;
    /// Set when value lies outside [-0.05, 1]; the value itself is never clamped.
    bool out_of_range = false;
};

/// Gamma density. Throws DomainError for t < 0 or nonpositive parameters.
double gamma_pdf(double t, const GammaParams& params);

/// Composite trapezoid weights for the grid.
std::vector<double> trapezoid_weights(const TimeGrid& grid);

double trapezoid(const TimeGrid& grid, std::span<const double> values);

/// Trapezoid moments m^0..m^max_order (higher orders left at zero).
Moments moments(const Flux& flux, int max_order = 3);

/// Earliest index attaining the maximum value.
std::size_t argmax_index(std::span<const double> values);

/// Method-of-moments residence-time properties. Throws DegenerateFluxError when
/// m0 <= 0, tau_var <= 0, the peak sits on a grid boundary, or tau_area is not finite.
ResidenceProps residence_props(const Flux& flux);

/// 1 - reactant_m0 / (blend_ratio * inert_m0).
ConversionResult conversion(double reactant_m0, double inert_m0, double blend_ratio = 1.0);

/// Graham's-law alignment of a gas of mass mass_gas onto the transport
/// timescale of mass_ref, resampled (linearly) on the input grid.
Flux graham_align(const Flux& flux, double mass_gas, double mass_ref);

/// (x - mean) / sample std. Throws DomainError on fewer than two values or zero variance.
std::vector<double> standardize(std::span<const double> values);

double mean(std::span<const double> values);
/// Sample (n - 1) standard deviation.
double sample_std(std::span<const double> values);

} // namespace teak
