#include "teak/config.hpp"

#include "teak/errors.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

namespace teak {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw SchemaError(where + ": expected a JSON object");
}

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    require_object(j, where);
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* k : keys) known = known || key == k;
        if (!known) throw SchemaError(where + ": unknown key '" + key + "'");
    }
}

double number(const json& j, const char* key, const std::string& where, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw SchemaError(where + "." + key + ": expected a number");
    return j[key].get<double>();
}

double required_number(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw SchemaError(where + ": missing '" + key + "'");
    return number(j, key, where, 0.0);
}

std::size_t count(const json& j, const char* key, const std::string& where, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j[key];
    // documents built in code hold signed integers even when nonnegative
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw SchemaError(where + "." + key + ": expected a nonnegative integer");
    return v.get<std::size_t>();
}

bool boolean(const json& j, const char* key, const std::string& where, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw SchemaError(where + "." + key + ": expected true or false");
    return j[key].get<bool>();
}

std::string text(const json& j, const char* key, const std::string& where, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) throw SchemaError(where + "." + key + ": expected a string");
    return j[key].get<std::string>();
}

void check_label(const std::string& label, const std::string& where) {
    if (label.empty()) throw SchemaError(where + ": label must not be empty");
    for (char c : label) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '+';
        if (!ok) throw SchemaError(where + ": label '" + label + "' may only use letters, digits and _ - . +");
    }
}

Drift parse_drift(const json& j, const std::string& where) {
    Drift d;
    if (j.is_string() && j.get<std::string>() == "none") return d;
    allow_keys(j, {"type", "slope", "amplitude", "period"}, where);
    const std::string type = text(j, "type", where, "none");
    if (type == "none") {
        d.kind = DriftKind::none;
    } else if (type == "linear") {
        d.kind = DriftKind::linear;
        d.slope = required_number(j, "slope", where);
    } else if (type == "sinusoidal") {
        d.kind = DriftKind::sinusoidal;
        d.amplitude = required_number(j, "amplitude", where);
        d.period = required_number(j, "period", where);
        if (!(d.period > 0.0)) throw SchemaError(where + ".period: must be > 0");
    } else {
        throw SchemaError(where + ".type: unknown drift '" + type + "'");
    }
    return d;
}

DistortionSpec parse_distortion(const json& j, const std::string& where) {
    allow_keys(j, {"noise_std", "drift", "outgas", "scale", "baseline_offset"}, where);
    DistortionSpec d;
    d.noise_std = number(j, "noise_std", where, 0.0);
    if (!(d.noise_std >= 0.0)) throw SchemaError(where + ".noise_std: must be >= 0");
    if (j.contains("drift")) d.drift = parse_drift(j["drift"], where + ".drift");
    if (j.contains("outgas")) {
        if (!j["outgas"].is_array()) throw SchemaError(where + ".outgas: expected an array");
        for (std::size_t k = 0; k < j["outgas"].size(); ++k) {
            const std::string w = where + ".outgas[" + std::to_string(k) + "]";
            const json& e = j["outgas"][k];
            allow_keys(e, {"pulse", "extra_fraction", "delay"}, w);
            OutgasEvent ev;
            if (!e.contains("pulse")) throw SchemaError(w + ": missing 'pulse'");
            ev.pulse_index = count(e, "pulse", w, 0);
            ev.extra_fraction = required_number(e, "extra_fraction", w);
            ev.delay = number(e, "delay", w, 0.0);
            if (!(ev.delay >= 0.0)) throw SchemaError(w + ".delay: must be >= 0");
            d.outgas.push_back(ev);
        }
    }
    d.scale = number(j, "scale", where, 1.0);
    if (!(d.scale > 0.0)) throw SchemaError(where + ".scale: must be > 0");
    d.baseline_offset = number(j, "baseline_offset", where, 0.0);
    return d;
}

} // namespace

const SpeciesConfig& ExperimentConfig::inert() const {
    for (const auto& s : species)
        if (s.role == SpeciesRole::inert) return s;
    throw SchemaError("config: no inert species");
}

const SpeciesConfig* ExperimentConfig::find(const std::string& label) const {
    for (const auto& s : species)
        if (s.label == label) return &s;
    return nullptr;
}

void validate(const ExperimentConfig& c) {
    if (c.species.empty()) throw SchemaError("config: no species");
    std::set<std::string> labels;
    int inert = 0;
    double blend = 0.0;
    for (const auto& s : c.species) {
        check_label(s.label, "config.species");
        if (!labels.insert(s.label).second) throw SchemaError("config: duplicate species '" + s.label + "'");
        if (!(s.mass > 0.0)) throw SchemaError("config: species '" + s.label + "' needs a positive mass");
        switch (s.role) {
        case SpeciesRole::inert:
            ++inert;
            [[fallthrough]];
        case SpeciesRole::reactant:
            if (!(s.blend_fraction > 0.0))
                throw SchemaError("config: species '" + s.label + "' needs a positive blend_fraction");
            blend += s.blend_fraction;
            break;
        case SpeciesRole::product:
        case SpeciesRole::fragment:
            if (s.blend_fraction != 0.0)
                throw SchemaError("config: " + std::string(to_string(s.role)) + " '" + s.label +
                                  "' is not fed; blend_fraction must be 0");
            break;
        }
    }
    if (inert != 1) throw SchemaError("config: exactly one inert species required, found " + std::to_string(inert));
    if (std::abs(blend - 1.0) > 1e-9) throw SchemaError("config: blend fractions must sum to 1");
    for (const auto& s : c.species) {
        if (s.role == SpeciesRole::inert || s.role == SpeciesRole::reactant) {
            if (!s.parent.empty()) throw SchemaError("config: species '" + s.label + "' cannot have a parent");
            continue;
        }
        const SpeciesConfig* parent = c.find(s.parent);
        if (!parent) throw SchemaError("config: species '" + s.label + "' has unknown parent '" + s.parent + "'");
        if (s.role == SpeciesRole::product && parent->role != SpeciesRole::reactant)
            throw SchemaError("config: product '" + s.label + "' must name a reactant parent");
        if (s.role == SpeciesRole::fragment && parent->role != SpeciesRole::reactant &&
            parent->role != SpeciesRole::product)
            throw SchemaError("config: fragment '" + s.label + "' must name a reactant or product parent");
    }
    if (c.baseline.method == BaselineMethod::gamma && !(c.baseline.shape > 1.0))
        throw SchemaError("config.baseline.shape: must be > 1 (the peak must lie after t = 0)");
    if (!(c.baseline.window >= 0.0)) throw SchemaError("config.baseline.window: must be >= 0");
    if (c.baseline.anchor_window && !(*c.baseline.anchor_window >= 0.0))
        throw SchemaError("config.baseline.anchor_window: must be >= 0");
    if (c.smoothing_factor && !(*c.smoothing_factor >= 0.0))
        throw SchemaError("config.smoothing.factor: must be >= 0");
    if (!(c.tcco.pointwise_floor >= 0.0 && c.tcco.pointwise_floor < 1.0))
        throw SchemaError("config.tcco.pointwise_floor: must lie in [0, 1)");
    if (!(c.tcco.noise_margin >= 0.0) || !std::isfinite(c.tcco.noise_margin))
        throw SchemaError("config.tcco.noise_margin: must be a finite number >= 0");
    if (c.outgas.window_half_width == 0) throw SchemaError("config.outgas.window_half_width: must be >= 1");
    if (!(c.outgas.significance > 0.0 && c.outgas.significance < 1.0))
        throw SchemaError("config.outgas.significance: must lie in (0, 1)");
}

ExperimentConfig parse_config(const json& doc) {
    allow_keys(doc, {"species", "reference_dv", "baseline", "smoothing", "tcco", "outgas"}, "config");
    ExperimentConfig c;
    if (!doc.contains("species") || !doc["species"].is_array()) throw SchemaError("config: 'species' must be an array");
    for (std::size_t k = 0; k < doc["species"].size(); ++k) {
        const std::string w = "config.species[" + std::to_string(k) + "]";
        const json& s = doc["species"][k];
        allow_keys(s, {"label", "mass", "role", "blend_fraction", "parent"}, w);
        SpeciesConfig sc;
        sc.label = text(s, "label", w, "");
        sc.mass = required_number(s, "mass", w);
        if (!s.contains("role")) throw SchemaError(w + ": missing 'role'");
        sc.role = parse_role(text(s, "role", w, ""));
        sc.blend_fraction = number(s, "blend_fraction", w, 0.0);
        sc.parent = text(s, "parent", w, "");
        c.species.push_back(sc);
    }
    if (doc.contains("reference_dv")) {
        const json& r = doc["reference_dv"];
        if (r.is_string()) {
            if (r.get<std::string>() != "auto_median")
                throw SchemaError("config.reference_dv: expected \"auto_median\" or {\"pulse_index\": n}");
        } else {
            allow_keys(r, {"pulse_index"}, "config.reference_dv");
            if (!r.contains("pulse_index")) throw SchemaError("config.reference_dv: missing 'pulse_index'");
            c.reference_pulse = count(r, "pulse_index", "config.reference_dv", 0);
        }
    }
    if (doc.contains("baseline")) {
        const json& b = doc["baseline"];
        allow_keys(b, {"method", "shape", "window", "anchor_window"}, "config.baseline");
        const std::string method = text(b, "method", "config.baseline", "gamma");
        if (method == "gamma") {
            c.baseline.method = BaselineMethod::gamma;
        } else if (method == "tail_mean") {
            c.baseline.method = BaselineMethod::tail_mean;
        } else {
            throw SchemaError("config.baseline.method: unknown method '" + method + "'");
        }
        c.baseline.shape = number(b, "shape", "config.baseline", 1.5);
        c.baseline.window = number(b, "window", "config.baseline", 0.0);
        if (b.contains("anchor_window") && !b["anchor_window"].is_null())
            c.baseline.anchor_window = number(b, "anchor_window", "config.baseline", 0.0);
    }
    if (doc.contains("smoothing")) {
        const json& s = doc["smoothing"];
        if (s.is_string()) {
            if (s.get<std::string>() != "auto")
                throw SchemaError("config.smoothing: expected \"auto\" or {\"factor\": x}");
        } else {
            allow_keys(s, {"factor"}, "config.smoothing");
            c.smoothing_factor = required_number(s, "factor", "config.smoothing");
        }
    }
    if (doc.contains("tcco")) {
        const json& t = doc["tcco"];
        allow_keys(t, {"enforce_pointwise", "enforce_moment", "feas_tol", "pointwise_floor", "noise_margin"}, "config.tcco");
        c.tcco.enforce_pointwise = boolean(t, "enforce_pointwise", "config.tcco", true);
        c.tcco.enforce_moment = boolean(t, "enforce_moment", "config.tcco", true);
        if (t.contains("feas_tol") && !t["feas_tol"].is_null()) {
            c.tcco.feas_tol = number(t, "feas_tol", "config.tcco", -1.0);
            if (!(c.tcco.feas_tol >= 0.0)) throw SchemaError("config.tcco.feas_tol: must be >= 0");
        }
        c.tcco.pointwise_floor = number(t, "pointwise_floor", "config.tcco", 5e-2);
        c.tcco.noise_margin = number(t, "noise_margin", "config.tcco", 3.0);
    }
    if (doc.contains("outgas")) {
        const json& o = doc["outgas"];
        allow_keys(o, {"window_half_width", "significance", "auto_exclude"}, "config.outgas");
        c.outgas.window_half_width = count(o, "window_half_width", "config.outgas", 5);
        c.outgas.significance = number(o, "significance", "config.outgas", 0.01);
        c.outgas.auto_exclude = boolean(o, "auto_exclude", "config.outgas", false);
    }
    validate(c);
    return c;
}

json to_json(const ExperimentConfig& c) {
    json doc;
    doc["species"] = json::array();
    for (const auto& s : c.species) {
        json j{{"label", s.label}, {"mass", s.mass}, {"role", std::string(to_string(s.role))}};
        if (s.role == SpeciesRole::inert || s.role == SpeciesRole::reactant) j["blend_fraction"] = s.blend_fraction;
        if (!s.parent.empty()) j["parent"] = s.parent;
        doc["species"].push_back(j);
    }
    if (c.reference_pulse)
        doc["reference_dv"] = json{{"pulse_index", *c.reference_pulse}};
    else
        doc["reference_dv"] = "auto_median";
    if (c.baseline.method == BaselineMethod::gamma)
    {
        doc["baseline"] = json{{"method", "gamma"}, {"shape", c.baseline.shape}};
        if (c.baseline.anchor_window) doc["baseline"]["anchor_window"] = *c.baseline.anchor_window;
    }
    else
        doc["baseline"] = json{{"method", "tail_mean"}, {"window", c.baseline.window}};
    if (c.smoothing_factor)
        doc["smoothing"] = json{{"factor", *c.smoothing_factor}};
    else
        doc["smoothing"] = "auto";
    doc["tcco"] = json{{"enforce_pointwise", c.tcco.enforce_pointwise},
                       {"enforce_moment", c.tcco.enforce_moment},
                       {"pointwise_floor", c.tcco.pointwise_floor},
                       {"noise_margin", c.tcco.noise_margin}};
    if (c.tcco.feas_tol >= 0.0) doc["tcco"]["feas_tol"] = c.tcco.feas_tol;
    doc["outgas"] = json{{"window_half_width", c.outgas.window_half_width},
                         {"significance", c.outgas.significance},
                         {"auto_exclude", c.outgas.auto_exclude}};
    return doc;
}

ExperimentScenario parse_scenario(const json& doc) {
    allow_keys(doc, {"reactor", "reference_mass", "pulses", "species", "seed"}, "scenario");
    ExperimentScenario sc;
    if (doc.contains("reactor")) {
        const json& r = doc["reactor"];
        const std::string w = "scenario.reactor";
        allow_keys(r,
                   {"length", "porosity", "diffusivity", "pulse_amount", "duration", "grid_points_space",
                    "grid_points_time", "catalyst_zone", "self_check"},
                   w);
        SimScenario& s = sc.reactor;
        s.length = number(r, "length", w, s.length);
        s.porosity = number(r, "porosity", w, s.porosity);
        s.diffusivity = number(r, "diffusivity", w, s.diffusivity);
        s.pulse_amount = number(r, "pulse_amount", w, s.pulse_amount);
        s.duration = number(r, "duration", w, s.duration);
        s.grid_points_space = count(r, "grid_points_space", w, s.grid_points_space);
        s.grid_points_time = count(r, "grid_points_time", w, s.grid_points_time);
        s.self_check = boolean(r, "self_check", w, s.self_check);
        if (r.contains("catalyst_zone")) {
            const json& z = r["catalyst_zone"];
            if (!z.is_array() || z.size() != 2 || !z[0].is_number() || !z[1].is_number())
                throw SchemaError(w + ".catalyst_zone: expected [start_fraction, end_fraction]");
            s.catalyst_zone = {z[0].get<double>(), z[1].get<double>()};
        }
    }
    sc.reference_mass = number(doc, "reference_mass", "scenario", sc.reference_mass);
    sc.pulses = count(doc, "pulses", "scenario", sc.pulses);
    sc.seed = count(doc, "seed", "scenario", 0);
    if (!doc.contains("species") || !doc["species"].is_array())
        throw SchemaError("scenario: 'species' must be an array");
    for (std::size_t k = 0; k < doc["species"].size(); ++k) {
        const std::string w = "scenario.species[" + std::to_string(k) + "]";
        const json& s = doc["species"][k];
        allow_keys(s, {"label", "mass", "role", "blend_fraction", "parent", "rate_constant", "rate_schedule", "distortion"},
                   w);
        SimSpecies sp;
        sp.label = text(s, "label", w, "");
        check_label(sp.label, w);
        sp.mass = required_number(s, "mass", w);
        if (!s.contains("role")) throw SchemaError(w + ": missing 'role'");
        sp.role = parse_role(text(s, "role", w, ""));
        sp.blend_fraction = number(s, "blend_fraction", w, 0.0);
        sp.parent = text(s, "parent", w, "");
        sp.rate_constant = number(s, "rate_constant", w, 0.0);
        if (!(sp.rate_constant >= 0.0)) throw SchemaError(w + ".rate_constant: must be >= 0");
        if (s.contains("rate_schedule")) {
            const json& r = s["rate_schedule"];
            if (r.is_string()) {
                if (r.get<std::string>() != "constant")
                    throw SchemaError(w + ".rate_schedule: expected \"constant\" or {\"type\": \"linear_decay\", ...}");
            } else {
                allow_keys(r, {"type", "pulses"}, w + ".rate_schedule");
                const std::string type = text(r, "type", w + ".rate_schedule", "constant");
                if (type == "linear_decay") {
                    sp.schedule = RateSchedule::linear_decay;
                    if (!r.contains("pulses")) throw SchemaError(w + ".rate_schedule: missing 'pulses'");
                    sp.decay_pulses = count(r, "pulses", w + ".rate_schedule", 1);
                } else if (type != "constant") {
                    throw SchemaError(w + ".rate_schedule.type: unknown schedule '" + type + "'");
                }
            }
        }
        if (s.contains("distortion")) sp.distortion = parse_distortion(s["distortion"], w + ".distortion");
        sc.species.push_back(sp);
    }
    return sc;
}

ExperimentConfig config_for(const ExperimentScenario& scenario) {
    ExperimentConfig c;
    for (const auto& sp : scenario.species) {
        SpeciesConfig s;
        s.label = sp.label;
        s.mass = sp.mass;
        s.role = sp.role;
        s.blend_fraction = (sp.role == SpeciesRole::inert || sp.role == SpeciesRole::reactant) ? sp.blend_fraction : 0.0;
        s.parent = sp.parent;
        c.species.push_back(s);
    }
    return c;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    const std::string text = to_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace teak
