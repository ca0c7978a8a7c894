// teak: command-line front end.
//
//   teak simulate <scenario.json> -o <dir>
//   teak teak <config.json> -i <dir> -o <dir>
//   teak traditional <config.json> --coefficient <c> -i <dir> -o <dir>
//   teak moments -i <file>
//   teak detect-outgas -i <file>
//   teak compare <teak_dir> <trad_dir> [--truth truth.json]
//
// Exit codes: 0 success, 2 schema/config/IO error, 3 numerical failure,
// 4 infeasible calibration.

#include "teak/config.hpp"
#include "teak/csv_io.hpp"
#include "teak/errors.hpp"
#include "teak/outgas.hpp"
#include "teak/pipeline.hpp"
#include "teak/report.hpp"
#include "teak/simulator.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    bool serial = false;
    teak::Execution exec() const { return serial ? teak::Execution::serial : teak::Execution::parallel; }
};

std::vector<teak::PulseSeries> load_inputs(const teak::ExperimentConfig& cfg, const fs::path& dir) {
    std::vector<teak::PulseSeries> raw;
    for (const auto& sp : cfg.species) {
        auto read = teak::read_pulse_csv(dir / (sp.label + ".csv"), sp.label);
        for (const auto& w : read.warnings) std::cerr << "warning: " << sp.label << ": " << w << '\n';
        raw.push_back(std::move(read.series));
    }
    return raw;
}

int finish(teak::RunResult result, const Globals& g, const fs::path& out) {
    result.provenance.seed = g.seed;
    teak::emit_results(result, out);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    if (result.failure) {
        const auto& f = *result.failure;
        std::cerr << "error: pulse " << f.pulse << ", stage " << f.stage
                  << (f.species.empty() ? "" : ", species " + f.species) << ": " << f.message << '\n'
                  << "partial results (" << result.pulses_completed << " of " << result.pulses_total
                  << " pulses) written to " << out.string() << '\n';
        return f.exit_code;
    }
    std::cout << "wrote " << result.pulses_completed << " pulses to " << out.string() << '\n';
    return 0;
}

int cmd_simulate(const fs::path& scenario_path, const fs::path& out, const Globals& g) {
    teak::ExperimentScenario sc = teak::parse_scenario(teak::read_json(scenario_path));
    if (g.seed) sc.seed = *g.seed;
    const teak::ExperimentData data = teak::simulate_experiment(sc);

    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw teak::IoError("cannot create '" + out.string() + "': " + ec.message());
    for (const auto& s : data.series) teak::write_pulse_csv(out / (s.species + ".csv"), s.pulses);

    json truth{{"seed", sc.seed}, {"conversion", json::object()}, {"rate_constant", json::object()}};
    for (const auto& [label, v] : data.truth.conversion) truth["conversion"][label] = v;
    for (const auto& [label, v] : data.truth.rate_constant) truth["rate_constant"][label] = v;
    teak::write_json(out / "truth.json", truth);
    teak::write_json(out / "config.json", teak::to_json(teak::config_for(sc)));
    std::cout << "wrote " << data.series.size() << " species x " << sc.pulses << " pulses to " << out.string()
              << '\n';
    return 0;
}

int cmd_moments(const fs::path& in) {
    const auto read = teak::read_pulse_csv(in, in.stem().string());
    for (const auto& w : read.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "pulse_index,m0,m1,m2,m3,m1_normalized\n";
    for (std::size_t i = 0; i < read.series.pulses.size(); ++i) {
        const teak::Moments m = teak::moments(read.series.pulses[i]);
        std::cout << i << ',' << teak::format_double(m.m0) << ',' << teak::format_double(m.m1) << ','
                  << teak::format_double(m.m2) << ',' << teak::format_double(m.m3) << ','
                  << teak::format_double(m.m1_normalized) << '\n';
    }
    return 0;
}

int cmd_detect_outgas(const fs::path& in, std::size_t half_width, double significance) {
    const auto read = teak::read_pulse_csv(in, in.stem().string());
    std::vector<double> m0;
    for (const auto& f : read.series.pulses) m0.push_back(teak::moments(f, 0).m0);
    const teak::OutgasReport rep = teak::detect_outgas(m0, half_width, significance);
    auto nums = [](const std::vector<double>& v) {
        json a = json::array();
        for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
        return a;
    };
    json doc{{"file", in.string()},
             {"m0", nums(m0)},
             {"flagged_indices", rep.flagged_indices},
             {"t_statistics", nums(rep.t_statistics)},
             {"p_values", nums(rep.p_values)},
             {"window_half_width", rep.window_half_width},
             {"significance", rep.significance}};
    std::cout << doc.dump(2) << '\n';
    return 0;
}

std::vector<double> numbers(const json& a) {
    std::vector<double> v;
    for (const auto& x : a) v.push_back(x.is_number() ? x.get<double>() : std::nan(""));
    return v;
}

double cov_of(const std::vector<double>& v, const std::vector<std::size_t>& skip) {
    try {
        return teak::coefficient_of_variation(v, skip);
    } catch (const teak::TeakError&) {
        return std::nan("");
    }
}

int cmd_compare(const fs::path& teak_dir, const fs::path& trad_dir, const std::optional<fs::path>& truth_path) {
    const json a = teak::read_json(teak_dir / "summary.json");
    const json b = teak::read_json(trad_dir / "summary.json");
    std::vector<std::size_t> skip;
    for (const auto& x : a.at("excluded_pulses")) skip.push_back(x.get<std::size_t>());
    std::optional<json> truth;
    if (truth_path) truth = teak::read_json(*truth_path);

    auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
    json out{{"teak", teak_dir.string()}, {"traditional", trad_dir.string()}, {"excluded_pulses", skip}};

    out["species"] = json::array();
    for (const auto& sa : a.at("species")) {
        const std::string label = sa.at("label").get<std::string>();
        for (const auto& sb : b.at("species")) {
            if (sb.at("label") != label) continue;
            const double ca = cov_of(numbers(sa.at("m0")), skip);
            const double cb = cov_of(numbers(sb.at("m0")), skip);
            out["species"].push_back(json{{"label", label}, {"m0_cov_teak", num(ca)}, {"m0_cov_traditional", num(cb)}});
        }
    }

    out["conversion"] = json::array();
    for (const auto& ca : a.at("conversion")) {
        const std::string reactant = ca.at("reactant").get<std::string>();
        for (const auto& cb : b.at("conversion")) {
            if (cb.at("reactant") != reactant) continue;
            const auto va = numbers(ca.at("values"));
            const auto vb = numbers(cb.at("values"));
            json entry{{"reactant", reactant}, {"mean_teak", ca.at("mean")}, {"mean_traditional", cb.at("mean")}};
            if (truth && truth->at("conversion").contains(reactant)) {
                const auto vt = numbers(truth->at("conversion").at(reactant));
                const std::size_t n = std::min({va.size(), vb.size(), vt.size()});
                double worst_a = 0.0, worst_b = 0.0;
                std::size_t counted = 0, teak_not_worse = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (std::find(skip.begin(), skip.end(), i) != skip.end()) continue;
                    const double ea = std::abs(va[i] - vt[i]);
                    const double eb = std::abs(vb[i] - vt[i]);
                    worst_a = std::max(worst_a, ea);
                    worst_b = std::max(worst_b, eb);
                    ++counted;
                    if (ea <= eb) ++teak_not_worse;
                }
                entry["max_abs_error_teak"] = num(worst_a);
                entry["max_abs_error_traditional"] = num(worst_b);
                entry["pulses_compared"] = counted;
                entry["fraction_teak_not_worse"] =
                    counted ? num(static_cast<double>(teak_not_worse) / static_cast<double>(counted)) : json(nullptr);
            }
            out["conversion"].push_back(entry);
        }
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const teak::InfeasibleError*>(&e)) return 4;
    if (dynamic_cast<const teak::SchemaError*>(&e) || dynamic_cast<const teak::GridMismatchError*>(&e) ||
        dynamic_cast<const teak::IoError*>(&e) || dynamic_cast<const nlohmann::json::exception*>(&e))
        return 2;
    return 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"TAP pulse-response preprocessing (smoothing, baseline, constrained calibration)"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "RNG seed (simulate) recorded in provenance");
    app.add_flag("--serial", g.serial, "Run per-pulse stages on one thread");

    fs::path scenario, config, in_dir, out_dir, in_file, teak_dir, trad_dir, truth;
    double coefficient = 1.0;
    std::size_t half_width = 5;
    double significance = 0.01;

    auto* sim = app.add_subcommand("simulate", "Simulate a pulse series from a scenario JSON");
    sim->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
    sim->add_option("-o,--out", out_dir)->required();

    auto* tk = app.add_subcommand("teak", "Run the TEAK pipeline");
    tk->add_option("config", config)->required()->check(CLI::ExistingFile);
    tk->add_option("-i,--in", in_dir, "Directory with <label>.csv per species")->required()->check(CLI::ExistingDirectory);
    tk->add_option("-o,--out", out_dir)->required();

    auto* tr = app.add_subcommand("traditional", "Tail-mean baseline and fixed-coefficient scaling");
    tr->add_option("config", config)->required()->check(CLI::ExistingFile);
    tr->add_option("--coefficient", coefficient, "Calibration coefficient for non-inert species")->required();
    tr->add_option("-i,--in", in_dir)->required()->check(CLI::ExistingDirectory);
    tr->add_option("-o,--out", out_dir)->required();

    auto* mo = app.add_subcommand("moments", "Per-pulse moments of one CSV file");
    mo->add_option("-i,--in", in_file)->required()->check(CLI::ExistingFile);

    auto* og = app.add_subcommand("detect-outgas", "Moving-window outgas test on per-pulse m0");
    og->add_option("-i,--in", in_file)->required()->check(CLI::ExistingFile);
    og->add_option("-w,--window-half-width", half_width)->capture_default_str();
    og->add_option("--significance", significance)->capture_default_str();

    auto* cmp = app.add_subcommand("compare", "Compare a TEAK and a traditional output directory");
    cmp->add_option("teak_dir", teak_dir)->required()->check(CLI::ExistingDirectory);
    cmp->add_option("trad_dir", trad_dir)->required()->check(CLI::ExistingDirectory);
    cmp->add_option("--truth", truth, "truth.json written by simulate")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (seed_opt->count() > 0) g.seed = seed_value;

    try {
        if (sim->parsed()) return cmd_simulate(scenario, out_dir, g);
        if (tk->parsed() || tr->parsed()) {
            const teak::ExperimentConfig cfg = teak::parse_config(teak::read_json(config));
            const auto raw = load_inputs(cfg, in_dir);
            teak::RunResult r = tk->parsed() ? teak::run_teak(raw, cfg, g.exec())
                                             : teak::run_traditional(raw, cfg, coefficient, g.exec());
            return finish(std::move(r), g, out_dir);
        }
        if (mo->parsed()) return cmd_moments(in_file);
        if (og->parsed()) return cmd_detect_outgas(in_file, half_width, significance);
        if (cmp->parsed())
            return cmd_compare(teak_dir, trad_dir, truth.empty() ? std::nullopt : std::optional<fs::path>(truth));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 2;
}
