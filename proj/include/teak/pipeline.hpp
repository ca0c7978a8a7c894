#pragma once

// Per-pulse chain smooth -> align -> baseline -> calibrate, followed by the
// series-level steps (moments, conversion, outgas flags, relationship check,
// moment-calibration cross-check).

#include "teak/calibration.hpp"
#include "teak/config.hpp"
#include "teak/outgas.hpp"
#include "teak/parallel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace teak {

struct SpeciesResult {
    std::string label;
    SpeciesRole role = SpeciesRole::inert;
    /// Calibration group: the inert itself, or the reactant/product a fragment belongs to.
    std::string group;
    std::vector<Flux> calibrated;
    std::vector<Moments> moments;
    std::vector<double> coefficient;
    std::vector<double> baseline_shift;
    std::vector<double> smoothing_factor;
};

/// Reactant or product with its fragments, summed after calibration.
struct GroupResult {
    std::string label;
    SpeciesRole role = SpeciesRole::reactant;
    std::vector<std::string> members;
    /// Feed ratio applied to the calibrated inert: blend(reactant) / blend(inert).
    double blend_ratio = 1.0;
    std::vector<Moments> moments;
    std::vector<double> kkt_residual;
};

struct ConversionSeries {
    std::string reactant;
    double blend_ratio = 1.0;
    std::vector<double> m0_reactant;
    std::vector<double> m0_inert;
    std::vector<ConversionResult> conversion;
};

struct RelationshipEntry {
    std::string reactant;
    RelationshipCheck verdict = RelationshipCheck::violation;
    double mass_balance_slack = 0.0;
};

struct MomentFitEntry {
    std::string species;
    std::optional<MomentCalibModel> model;
    std::string note;
};

struct PipelineFailure {
    std::size_t pulse = 0;
    std::string stage;
    std::string species;
    std::string message;
    /// 2 schema/config, 3 numerical, 4 infeasible calibration
    int exit_code = 3;
};

struct Provenance {
    std::string version;
    std::uint64_t config_hash = 0;
    std::optional<std::uint64_t> seed;
    std::string execution;
    int threads = 1;
};

struct RunResult {
    std::string method;
    std::size_t pulses_total = 0;
    /// Pulses with results; less than pulses_total after a failure.
    std::size_t pulses_completed = 0;
    std::optional<std::size_t> reference_pulse;
    std::vector<SpeciesResult> species;
    std::vector<GroupResult> groups;
    std::vector<ConversionSeries> conversion;
    /// Inert m0 after baseline, before calibration (the series the outgas test sees).
    std::vector<double> inert_raw_m0;
    std::optional<OutgasReport> outgas;
    std::vector<std::size_t> excluded_pulses;
    std::vector<RelationshipEntry> relationships;
    std::vector<MomentFitEntry> moment_fits;
    std::optional<PipelineFailure> failure;
    std::vector<std::string> warnings;
    Provenance provenance;

    const SpeciesResult* find_species(const std::string& label) const;
    const ConversionSeries* find_conversion(const std::string& reactant) const;
};

/// TEAK: every pulse is smoothed, non-inert species are aligned to the inert
/// by Graham's law and baseline corrected, the inert is calibrated against the
/// reference pulse, and each reactant/product group against the same-pulse
/// calibrated inert scaled by the feed ratio. The first failing pulse ends the
/// run: earlier pulses are kept and `failure` says where and why.
/// Throws SchemaError / GridMismatchError when the data do not match the config.
RunResult run_teak(const std::vector<PulseSeries>& raw, const ExperimentConfig& config,
                   Execution exec = Execution::parallel);

/// Traditional route: tail-mean baseline, no smoothing or alignment, inert
/// used as measured and every other species multiplied by `coefficient`.
RunResult run_traditional(const std::vector<PulseSeries>& raw, const ExperimentConfig& config, double coefficient,
                          Execution exec = Execution::parallel);

/// Index of the median of `values` (lower middle for even counts, earliest on ties)
/// among the indices not listed in `skip`.
std::size_t median_index(const std::vector<double>& values, const std::vector<std::size_t>& skip = {});

/// Sample coefficient of variation over the indices not in `skip`.
double coefficient_of_variation(const std::vector<double>& values, const std::vector<std::size_t>& skip = {});

} // namespace teak
