#pragma once

// Experiment configuration and simulation scenario documents (JSON).
// Unknown keys are rejected so typos fail loudly.

#include "teak/simulator.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace teak {

struct SpeciesConfig {
    std::string label;
    double mass = 40.0;
    SpeciesRole role = SpeciesRole::inert;
    /// Feed fraction; inert and reactants only, products/fragments carry 0.
    double blend_fraction = 0.0;
    /// Reactant for a product; reactant or product for a fragment.
    std::string parent;
};

enum class BaselineMethod { gamma, tail_mean };

struct BaselineConfig {
    BaselineMethod method = BaselineMethod::gamma;
    double shape = 1.5;
    /// tail_mean window in seconds; 0 selects the final 10% of the duration.
    double window = 0.0;
    /// gamma: trailing window (seconds) whose mean is anchored to the Gamma
    /// tail. Empty selects the final 10% of the duration, 0 the last sample.
    std::optional<double> anchor_window;
};

struct TccoSettings {
    bool enforce_pointwise = true;
    bool enforce_moment = true;
    /// Negative selects the solver default.
    double feas_tol = -1.0;
    /// Relative regressor level below which a sample carries no pointwise
    /// constraint (the solver's pos_tol) for reactant/product calibration.
    double pointwise_floor = 5e-2;
    /// Pointwise bounds are relaxed by noise_margin standard deviations of the
    /// estimated noise left in the smoothed fluxes; 0 makes them hard.
    double noise_margin = 3.0;
};

struct OutgasConfig {
    std::size_t window_half_width = 5;
    double significance = 0.01;
    bool auto_exclude = false;
};

struct ExperimentConfig {
    std::vector<SpeciesConfig> species;
    /// Empty selects the pulse whose inert m0 is the series median.
    std::optional<std::size_t> reference_pulse;
    BaselineConfig baseline;
    /// Empty selects the generalized cross-validation minimum.
    std::optional<double> smoothing_factor;
    TccoSettings tcco;
    OutgasConfig outgas;

    const SpeciesConfig& inert() const;
    const SpeciesConfig* find(const std::string& label) const;
};

/// Throws SchemaError describing the first problem found.
ExperimentConfig parse_config(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& config);
void validate(const ExperimentConfig& config);

ExperimentScenario parse_scenario(const nlohmann::json& doc);

/// Configuration matching a scenario's species, defaults elsewhere.
ExperimentConfig config_for(const ExperimentScenario& scenario);

/// Reads and parses a JSON file; IoError when unreadable, SchemaError when malformed.
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// FNV-1a of the canonical JSON text.
std::uint64_t config_hash(const ExperimentConfig& config);

} // namespace teak
