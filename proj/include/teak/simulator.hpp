#pragma once

// Synthetic TAP pulse responses: the analytic standard diffusion curve, a
// Crank-Nicolson thin-zone diffusion/reaction solver, and signal distortions.

#include "teak/flux.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace teak {

/// Dimensionless Knudsen outlet flux for a pulse through an inert bed, unit
/// area over [0, inf). Two series (long- and short-time) truncated at 1e-12.
double standard_diffusion_curve(double tau);
std::vector<double> standard_diffusion_curve(std::span<const double> tau);

struct SimScenario {
    double length = 1.0;        // cm
    double porosity = 0.5;
    double diffusivity = 0.5;   // cm^2/s
    double rate_constant = 0.0; // 1/s, first order in the catalyst zone
    double pulse_amount = 1.0;  // mol
    double duration = 3.0;      // s
    std::size_t grid_points_space = 400;
    std::size_t grid_points_time = 4000;
    std::pair<double, double> catalyst_zone{0.475, 0.525};
    /// Rerun at doubled resolution and require m0 to agree within 1e-4.
    bool self_check = true;
};

/// eps * L^2 / D: seconds per unit of dimensionless time.
double diffusion_time_scale(const SimScenario& s);

struct SimOutput {
    Flux reactant;
    /// Present when a product diffusivity was requested.
    std::optional<Flux> product;
    /// Fraction of the pulse consumed inside the collection window.
    double consumed_fraction = 0.0;
    /// Fraction still inside the reactor at the end of the window.
    double remaining_fraction = 0.0;
};

/// Outlet flux D * dC/dx at x = L in mol/s on the grid
/// {0, duration / grid_points_time, grid_points_time + 1}. With a product
/// diffusivity, the consumed reactant is released as a product that diffuses
/// through the same bed. Throws DomainError on invalid parameters and
/// AccuracyError when the self-check fails.
SimOutput simulate_pulse(const SimScenario& scenario, std::optional<double> product_diffusivity = std::nullopt);

/// Reactant outlet flux only.
Flux simulate_outlet_flux(const SimScenario& scenario);

enum class DriftKind { none, linear, sinusoidal };

struct Drift {
    DriftKind kind = DriftKind::none;
    double slope = 0.0;
    double amplitude = 0.0;
    double period = 1.0; // pulses
    /// Multiplicative factor at a pulse index.
    double factor(std::size_t pulse_index) const;
};

struct OutgasEvent {
    std::size_t pulse_index = 0;
    double extra_fraction = 0.0;
    double delay = 0.0; // s
};

struct DistortionSpec {
    double noise_std = 0.0;
    Drift drift;
    std::vector<OutgasEvent> outgas;
    double scale = 1.0;
    double baseline_offset = 0.0;
};

/// scale * drift(i) * (flux + outgas) + noise + offset, where outgas is a
/// delayed copy of the flux weighted by extra_fraction. Noise comes from a
/// mt19937_64 seeded by (rng_seed, pulse_index), so output is reproducible.
Flux apply_distortion(const Flux& flux, const DistortionSpec& spec, std::size_t pulse_index, std::uint64_t rng_seed);

// ---- multi-species experiments ------------------------------------------

enum class SpeciesRole { inert, reactant, product, fragment };

std::string_view to_string(SpeciesRole role);
/// Throws SchemaError on unknown names.
SpeciesRole parse_role(std::string_view name);

enum class RateSchedule { constant, linear_decay };

struct SimSpecies {
    std::string label;
    double mass = 40.0;
    SpeciesRole role = SpeciesRole::inert;
    double blend_fraction = 0.0;
    /// Reactant (or, for a fragment/product, the species it derives from).
    std::string parent;
    double rate_constant = 0.0;
    RateSchedule schedule = RateSchedule::constant;
    /// linear_decay reaches zero at this pulse index.
    std::size_t decay_pulses = 1;
    DistortionSpec distortion;
};

struct ExperimentScenario {
    SimScenario reactor;
    /// Mass at which reactor.diffusivity applies (Knudsen: D ~ 1/sqrt(mass)).
    double reference_mass = 40.0;
    std::size_t pulses = 10;
    std::vector<SimSpecies> species;
    std::uint64_t seed = 0;
};

struct ExperimentTruth {
    /// Per reactant label: consumed fraction per pulse.
    std::vector<std::pair<std::string, std::vector<double>>> conversion;
    /// Per species label: rate constant per pulse (zero for non-reactants).
    std::vector<std::pair<std::string, std::vector<double>>> rate_constant;
};

struct ExperimentData {
    std::vector<PulseSeries> series; // one per species, scenario order
    ExperimentTruth truth;
};

double rate_at(const SimSpecies& sp, std::size_t pulse_index);

/// Validates the scenario (exactly one inert, known parents) and simulates
/// every pulse; identical scenarios give bit-identical data.
ExperimentData simulate_experiment(const ExperimentScenario& scenario);

} // namespace teak
