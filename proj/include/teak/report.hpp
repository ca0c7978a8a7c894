#pragma once

#include "teak/pipeline.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace teak {

/// Summary document; NaN values serialize as null.
nlohmann::json summary_json(const RunResult& result);

/// Writes <species>_calibrated.csv, moments.csv, conversion.csv, summary.json
/// and plot_long.csv into out_dir (created if missing). IoError names the path.
void emit_results(const RunResult& result, const std::filesystem::path& out_dir);

std::string moments_csv(const RunResult& result);
std::string conversion_csv(const RunResult& result);
/// pulse_index,time,species,value
std::string plot_long_csv(const RunResult& result);

} // namespace teak
