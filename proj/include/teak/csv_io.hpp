#pragma once

// Wide pulse CSV: header `time,pulse_0,pulse_1,...`, one row per sample,
// one file per species.

#include "teak/flux.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace teak {

struct CsvRead {
    PulseSeries series;
    std::vector<std::string> warnings;
};

/// Throws SchemaError naming the row (1-based line) and column of the first
/// malformed cell, or when time is not strictly increasing. Nearly uniform
/// time axes (deviation above 1e-6 of the step) are resampled linearly onto a
/// uniform grid with a warning.
CsvRead parse_pulse_csv(std::string_view text, const std::string& species);
CsvRead read_pulse_csv(const std::filesystem::path& path, const std::string& species);

/// %.17g numbers so values round-trip exactly. All pulses must share a grid.
std::string format_pulse_csv(const std::vector<Flux>& pulses);
void write_pulse_csv(const std::filesystem::path& path, const std::vector<Flux>& pulses);

/// Writes text to a file, IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

/// printf("%.17g")
std::string format_double(double v);

} // namespace teak
