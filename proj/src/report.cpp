#include "teak/report.hpp"

#include "teak/csv_io.hpp"
#include "teak/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <system_error>

namespace teak {

using nlohmann::json;

namespace {

// nlohmann writes NaN/inf as null only for floats; make that explicit
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json array_of(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

bool excluded(const RunResult& r, std::size_t i) {
    return std::find(r.excluded_pulses.begin(), r.excluded_pulses.end(), i) != r.excluded_pulses.end();
}

bool flagged(const RunResult& r, std::size_t i) {
    if (!r.outgas) return false;
    const auto& f = r.outgas->flagged_indices;
    return std::find(f.begin(), f.end(), i) != f.end();
}

} // namespace

json summary_json(const RunResult& r) {
    json doc;
    doc["method"] = r.method;
    doc["pulses_total"] = r.pulses_total;
    doc["pulses_completed"] = r.pulses_completed;
    doc["reference_pulse"] = r.reference_pulse ? json(*r.reference_pulse) : json(nullptr);

    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.provenance.config_hash));
    doc["provenance"] = json{{"version", r.provenance.version},
                             {"config_hash", hash},
                             {"seed", r.provenance.seed ? json(*r.provenance.seed) : json(nullptr)},
                             {"execution", r.provenance.execution},
                             {"threads", r.provenance.threads}};

    doc["species"] = json::array();
    for (const auto& s : r.species) {
        json j{{"label", s.label}, {"role", std::string(to_string(s.role))}, {"group", s.group}};
        j["coefficient"] = array_of(s.coefficient);
        j["baseline_shift"] = array_of(s.baseline_shift);
        j["smoothing_factor"] = array_of(s.smoothing_factor);
        std::vector<double> m0;
        for (const auto& m : s.moments) m0.push_back(m.m0);
        j["m0"] = array_of(m0);
        doc["species"].push_back(j);
    }

    doc["conversion"] = json::array();
    for (const auto& c : r.conversion) {
        json j{{"reactant", c.reactant}, {"blend_ratio", num(c.blend_ratio)}};
        std::vector<double> v;
        json flags = json::array();
        for (const auto& x : c.conversion) {
            v.push_back(x.value);
            flags.push_back(x.out_of_range);
        }
        j["values"] = array_of(v);
        j["out_of_range"] = flags;
        double acc = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!excluded(r, i)) {
                acc += v[i];
                ++n;
            }
        j["mean"] = n ? num(acc / static_cast<double>(n)) : json(nullptr);
        doc["conversion"].push_back(j);
    }

    if (r.outgas) {
        doc["outgas"] = json{{"flagged_indices", r.outgas->flagged_indices},
                             {"t_statistics", array_of(r.outgas->t_statistics)},
                             {"p_values", array_of(r.outgas->p_values)},
                             {"window_half_width", r.outgas->window_half_width},
                             {"significance", r.outgas->significance}};
    } else {
        doc["outgas"] = nullptr;
    }
    doc["excluded_pulses"] = r.excluded_pulses;

    doc["relationships"] = json::array();
    for (const auto& e : r.relationships)
        doc["relationships"].push_back(json{{"reactant", e.reactant},
                                            {"verdict", std::string(to_string(e.verdict))},
                                            {"mass_balance_slack", num(e.mass_balance_slack)}});

    doc["moment_fits"] = json::array();
    for (const auto& f : r.moment_fits) {
        json j{{"species", f.species}, {"note", f.note}};
        if (f.model) {
            const auto& m = *f.model;
            j["model"] = json{{"mu", num(m.mu)},
                              {"zeta1", num(m.zeta1)},
                              {"zeta2", num(m.zeta2)},
                              {"standard_errors", array_of({m.standard_errors.begin(), m.standard_errors.end()})},
                              {"robust", m.robust},
                              {"reduced", m.reduced},
                              {"iterations", m.iterations},
                              {"physically_meaningful", m.physically_meaningful()}};
        } else {
            j["model"] = nullptr;
        }
        doc["moment_fits"].push_back(j);
    }

    doc["groups"] = json::array();
    for (const auto& g : r.groups) {
        std::vector<double> m0, m1n;
        for (const auto& m : g.moments) {
            m0.push_back(m.m0);
            m1n.push_back(m.m1_normalized);
        }
        doc["groups"].push_back(json{{"label", g.label},
                                     {"role", std::string(to_string(g.role))},
                                     {"members", g.members},
                                     {"blend_ratio", num(g.blend_ratio)},
                                     {"m0", array_of(m0)},
                                     {"m1_normalized", array_of(m1n)},
                                     {"kkt_residual", array_of(g.kkt_residual)}});
    }

    doc["inert_raw_m0"] = array_of(r.inert_raw_m0);
    if (r.failure) {
        doc["failure"] = json{{"pulse", r.failure->pulse},
                              {"stage", r.failure->stage},
                              {"species", r.failure->species},
                              {"message", r.failure->message},
                              {"exit_code", r.failure->exit_code}};
    } else {
        doc["failure"] = nullptr;
    }
    doc["warnings"] = r.warnings;
    return doc;
}

std::string moments_csv(const RunResult& r) {
    std::string out = "pulse_index,species,m0,m1,m2,m3,m1_normalized,coefficient\n";
    for (const auto& s : r.species) {
        for (std::size_t i = 0; i < s.moments.size(); ++i) {
            const Moments& m = s.moments[i];
            out += std::to_string(i) + ',' + s.label + ',' + format_double(m.m0) + ',' + format_double(m.m1) + ',' +
                   format_double(m.m2) + ',' + format_double(m.m3) + ',' + format_double(m.m1_normalized) + ',' +
                   format_double(s.coefficient[i]) + '\n';
        }
    }
    return out;
}

std::string conversion_csv(const RunResult& r) {
    std::string out = "pulse_index,reactant,m0_reactant,m0_inert,blend_ratio,conversion,out_of_range,outgas_flag,excluded\n";
    for (const auto& c : r.conversion) {
        for (std::size_t i = 0; i < c.conversion.size(); ++i) {
            out += std::to_string(i) + ',' + c.reactant + ',' + format_double(c.m0_reactant[i]) + ',' +
                   format_double(c.m0_inert[i]) + ',' + format_double(c.blend_ratio) + ',' +
                   format_double(c.conversion[i].value) + ',' + (c.conversion[i].out_of_range ? "1" : "0") + ',' +
                   (flagged(r, i) ? "1" : "0") + ',' + (excluded(r, i) ? "1" : "0") + '\n';
        }
    }
    return out;
}

std::string plot_long_csv(const RunResult& r) {
    std::string out = "pulse_index,time,species,value\n";
    for (const auto& s : r.species) {
        for (std::size_t i = 0; i < s.calibrated.size(); ++i) {
            const Flux& f = s.calibrated[i];
            for (std::size_t k = 0; k < f.size(); ++k)
                out += std::to_string(i) + ',' + format_double(f.grid.at(k)) + ',' + s.label + ',' +
                       format_double(f.values[k]) + '\n';
        }
    }
    return out;
}

void emit_results(const RunResult& r, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
    for (const auto& s : r.species)
        if (!s.calibrated.empty()) write_pulse_csv(out_dir / (s.label + "_calibrated.csv"), s.calibrated);
    write_text(out_dir / "moments.csv", moments_csv(r));
    write_text(out_dir / "conversion.csv", conversion_csv(r));
    write_text(out_dir / "plot_long.csv", plot_long_csv(r));
    write_json(out_dir / "summary.json", summary_json(r));
}

} // namespace teak
