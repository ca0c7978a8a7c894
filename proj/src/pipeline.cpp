#include "teak/pipeline.hpp"

#include "teak/baseline.hpp"
#include "teak/errors.hpp"
#include "teak/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace teak {

const SpeciesResult* RunResult::find_species(const std::string& label) const {
    for (const auto& s : species)
        if (s.label == label) return &s;
    return nullptr;
}

const ConversionSeries* RunResult::find_conversion(const std::string& reactant) const {
    for (const auto& c : conversion)
        if (c.reactant == reactant) return &c;
    return nullptr;
}

std::size_t median_index(const std::vector<double>& values, const std::vector<std::size_t>& skip) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (std::find(skip.begin(), skip.end(), i) == skip.end()) idx.push_back(i);
    if (idx.empty()) throw DomainError("median_index: no candidates");
    std::vector<double> sorted;
    for (std::size_t i : idx) sorted.push_back(values[i]);
    std::sort(sorted.begin(), sorted.end());
    const double target = sorted[(sorted.size() - 1) / 2];
    for (std::size_t i : idx)
        if (values[i] == target) return i;
    return idx.front();
}

double coefficient_of_variation(const std::vector<double>& values, const std::vector<std::size_t>& skip) {
    std::vector<double> kept;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (std::find(skip.begin(), skip.end(), i) == skip.end()) kept.push_back(values[i]);
    return sample_std(kept) / std::abs(mean(kept));
}

namespace {

constexpr const char* kVersion = "0.1.0";

int exit_code_for(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const InfeasibleError&) {
        return 4;
    } catch (const SchemaError&) {
        return 2;
    } catch (const GridMismatchError&) {
        return 2;
    } catch (const IoError&) {
        return 2;
    } catch (...) {
        return 3;
    }
}

std::string message_of(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    } catch (...) {
        return "unknown error";
    }
}

struct Group {
    std::string label;
    SpeciesRole role;
    std::vector<std::size_t> members; // config species indices, head first
    std::string reactant;             // reactant whose feed bounds this group
    double blend_ratio = 1.0;
};

struct Plan {
    const ExperimentConfig& cfg;
    std::vector<const PulseSeries*> series; // aligned with cfg.species
    std::size_t inert = 0;
    std::size_t pulses = 0;
    TimeGrid grid;
    std::vector<Group> groups;
};

Plan make_plan(const std::vector<PulseSeries>& raw, const ExperimentConfig& cfg) {
    validate(cfg);
    Plan plan{cfg, {}, 0, 0, {}, {}};
    for (std::size_t s = 0; s < cfg.species.size(); ++s) {
        const auto& sc = cfg.species[s];
        const PulseSeries* found = nullptr;
        for (const auto& ps : raw)
            if (ps.species == sc.label) found = &ps;
        if (!found) throw SchemaError("no data for species '" + sc.label + "'");
        if (found->pulses.empty()) throw SchemaError("species '" + sc.label + "' has no pulses");
        plan.series.push_back(found);
        if (sc.role == SpeciesRole::inert) plan.inert = s;
    }
    plan.pulses = plan.series[0]->pulses.size();
    plan.grid = plan.series[0]->pulses[0].grid;
    for (std::size_t s = 0; s < plan.series.size(); ++s) {
        if (plan.series[s]->pulses.size() != plan.pulses)
            throw SchemaError("species '" + cfg.species[s].label + "' has " +
                              std::to_string(plan.series[s]->pulses.size()) + " pulses, expected " +
                              std::to_string(plan.pulses));
        for (const auto& f : plan.series[s]->pulses)
            if (!(f.grid == plan.grid))
                throw GridMismatchError("species '" + cfg.species[s].label + "' pulse " +
                                        std::to_string(f.pulse_index) + " is not on the common time grid");
    }
    if (cfg.reference_pulse && *cfg.reference_pulse >= plan.pulses)
        throw SchemaError("reference pulse " + std::to_string(*cfg.reference_pulse) + " is out of range (" +
                          std::to_string(plan.pulses) + " pulses)");

    const double inert_blend = cfg.species[plan.inert].blend_fraction;
    for (std::size_t s = 0; s < cfg.species.size(); ++s) {
        const auto& sc = cfg.species[s];
        if (sc.role != SpeciesRole::reactant && sc.role != SpeciesRole::product) continue;
        Group g{sc.label, sc.role, {s}, sc.role == SpeciesRole::reactant ? sc.label : sc.parent, 1.0};
        for (std::size_t f = 0; f < cfg.species.size(); ++f)
            if (cfg.species[f].role == SpeciesRole::fragment && cfg.species[f].parent == sc.label) g.members.push_back(f);
        g.blend_ratio = cfg.find(g.reactant)->blend_fraction / inert_blend;
        plan.groups.push_back(std::move(g));
    }
    return plan;
}

struct PulseFailureSlot {
    std::exception_ptr error;
    std::string stage;
    std::string species;
};

// Per-pulse intermediate state, indexed [species][pulse].
struct Work {
    std::vector<std::vector<Flux>> processed;
    std::vector<std::vector<Flux>> calibrated;
    std::vector<std::vector<double>> coefficient;
    std::vector<std::vector<double>> shift;
    std::vector<std::vector<double>> factor;
    /// Pointwise noise std left in the processed flux.
    std::vector<std::vector<double>> noise;
    std::vector<std::vector<Moments>> group_moments; // [group][pulse]
    std::vector<std::vector<double>> group_kkt;
    std::vector<double> inert_m0;
    std::vector<PulseFailureSlot> failures;

    Work(std::size_t ns, std::size_t ng, std::size_t np)
        : processed(ns, std::vector<Flux>(np)), calibrated(ns, std::vector<Flux>(np)),
          coefficient(ns, std::vector<double>(np, 0.0)), shift(ns, std::vector<double>(np, 0.0)),
          factor(ns, std::vector<double>(np, 0.0)), noise(ns, std::vector<double>(np, 0.0)), group_moments(ng, std::vector<Moments>(np)),
          group_kkt(ng, std::vector<double>(np, 0.0)), inert_m0(np, 0.0), failures(np) {}

    std::size_t first_failure(std::size_t limit) const {
        for (std::size_t i = 0; i < limit; ++i)
            if (failures[i].error) return i;
        return limit;
    }
};

// Runs `body` for every pulse < limit, recording the first error per pulse.
template <class Body>
void per_pulse(Work& w, std::size_t limit, Execution exec, Body body) {
    for_each_index(limit, exec, [&](std::size_t i) {
        std::string stage, species;
        try {
            body(i, stage, species);
        } catch (...) {
            w.failures[i] = {std::current_exception(), stage, species};
        }
    });
}

double anchor_window(const ExperimentConfig& cfg, const TimeGrid& grid) {
    return cfg.baseline.anchor_window.value_or(0.1 * grid.duration());
}

double tail_window(const ExperimentConfig& cfg, const TimeGrid& grid) {
    if (cfg.baseline.method == BaselineMethod::tail_mean && cfg.baseline.window > 0.0) return cfg.baseline.window;
    return 0.1 * grid.duration();
}

// Calibrated group flux for a pulse: sum of its members.
Flux group_flux(const Work& w, const Group& g, std::size_t i) {
    std::vector<double> v(w.calibrated[g.members[0]][i].values.size(), 0.0);
    for (std::size_t s : g.members) {
        const auto& f = w.calibrated[s][i].values;
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += f[k];
    }
    Flux out = w.calibrated[g.members[0]][i].with_values(std::move(v));
    out.species = g.label;
    return out;
}

// Series-level steps shared by both routes, over pulses [0, completed).
void finish(RunResult& r, const Plan& plan, Work& w, std::size_t completed, bool outgas_done) {
    const auto& cfg = plan.cfg;
    r.pulses_completed = completed;
    auto cut = [completed](auto& v) { v.resize(std::min(v.size(), completed)); };

    for (std::size_t s = 0; s < cfg.species.size(); ++s) {
        const auto& sc = cfg.species[s];
        SpeciesResult sr;
        sr.label = sc.label;
        sr.role = sc.role;
        sr.group = sc.role == SpeciesRole::fragment ? sc.parent : sc.label;
        sr.calibrated = std::move(w.calibrated[s]);
        sr.coefficient = std::move(w.coefficient[s]);
        sr.baseline_shift = std::move(w.shift[s]);
        sr.smoothing_factor = std::move(w.factor[s]);
        cut(sr.calibrated);
        cut(sr.coefficient);
        cut(sr.baseline_shift);
        cut(sr.smoothing_factor);
        for (const auto& f : sr.calibrated) sr.moments.push_back(moments(f, 3));
        r.species.push_back(std::move(sr));
    }
    const SpeciesResult& inert = r.species[plan.inert];

    for (std::size_t g = 0; g < plan.groups.size(); ++g) {
        const Group& grp = plan.groups[g];
        GroupResult gr;
        gr.label = grp.label;
        gr.role = grp.role;
        gr.blend_ratio = grp.blend_ratio;
        for (std::size_t s : grp.members) gr.members.push_back(cfg.species[s].label);
        gr.moments = std::move(w.group_moments[g]);
        gr.kkt_residual = std::move(w.group_kkt[g]);
        cut(gr.moments);
        cut(gr.kkt_residual);
        if (grp.role == SpeciesRole::reactant) {
            ConversionSeries cs;
            cs.reactant = grp.label;
            cs.blend_ratio = grp.blend_ratio;
            for (std::size_t i = 0; i < completed; ++i) {
                cs.m0_reactant.push_back(gr.moments[i].m0);
                cs.m0_inert.push_back(inert.moments[i].m0);
                cs.conversion.push_back(conversion(gr.moments[i].m0, inert.moments[i].m0, grp.blend_ratio));
            }
            r.conversion.push_back(std::move(cs));
        }
        r.groups.push_back(std::move(gr));
    }

    if (!outgas_done) {
        r.inert_raw_m0.assign(w.inert_m0.begin(), w.inert_m0.begin() + static_cast<std::ptrdiff_t>(completed));
        const std::size_t wh = cfg.outgas.window_half_width;
        if (completed >= 2 * wh + 3) {
            r.outgas = detect_outgas(r.inert_raw_m0, wh, cfg.outgas.significance);
            if (cfg.outgas.auto_exclude) r.excluded_pulses = r.outgas->flagged_indices;
        } else {
            r.warnings.push_back("outgas test skipped: " + std::to_string(completed) + " pulses, need " +
                                 std::to_string(2 * wh + 3));
        }
    }

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < completed; ++i)
        if (std::find(r.excluded_pulses.begin(), r.excluded_pulses.end(), i) == r.excluded_pulses.end())
            kept.push_back(i);
    if (kept.empty()) return;

    auto series_mean = [&](const std::vector<Moments>& m, auto field) {
        double acc = 0.0;
        for (std::size_t i : kept) acc += field(m[i]);
        return acc / static_cast<double>(kept.size());
    };
    auto m0_of = [](const Moments& m) { return m.m0; };
    auto m1n_of = [](const Moments& m) { return m.m1_normalized; };

    const double m0_I = series_mean(inert.moments, m0_of);
    const double m1n_I = series_mean(inert.moments, m1n_of);
    for (const auto& gr : r.groups) {
        if (gr.role != SpeciesRole::reactant) continue;
        std::vector<double> products;
        for (std::size_t g = 0; g < plan.groups.size(); ++g)
            if (plan.groups[g].role == SpeciesRole::product && plan.groups[g].reactant == gr.label)
                products.push_back(series_mean(r.groups[g].moments, m0_of));
        RelationshipEntry e;
        e.reactant = gr.label;
        const double m0_r = series_mean(gr.moments, m0_of);
        e.verdict = check_relationships(m0_r, products, m0_I, series_mean(gr.moments, m1n_of), m1n_I, gr.blend_ratio);
        e.mass_balance_slack = gr.blend_ratio * m0_I - (m0_r + std::accumulate(products.begin(), products.end(), 0.0));
        r.relationships.push_back(e);
    }

    // Cross-check: linear moment model on uncalibrated (baselined) data.
    for (const Group& grp : plan.groups) {
        MomentFitEntry fit;
        fit.species = grp.label;
        if (kept.size() < 4) {
            fit.note = "skipped: fewer than 4 pulses";
            r.moment_fits.push_back(std::move(fit));
            continue;
        }
        std::vector<double> m0_gas, tau_area, m0_inert;
        try {
            for (std::size_t i : kept) {
                const Flux& f = w.processed[grp.members[0]][i];
                m0_gas.push_back(moments(f, 0).m0);
                tau_area.push_back(residence_props(f).tau_area);
                m0_inert.push_back(w.inert_m0[i]);
            }
            try {
                fit.model = fit_moment_calibration(m0_gas, tau_area, m0_inert, true);
            } catch (const RankDeficientError& e) {
                fit.model = fit_moment_calibration_reduced(m0_gas, m0_inert, true);
                fit.note = std::string("reduced model (") + e.what() + ")";
            }
            if (!fit.model->physically_meaningful()) fit.note += (fit.note.empty() ? "" : "; ") + std::string("zeta2 <= 0");
        } catch (const TeakError& e) {
            fit.model.reset();
            fit.note = e.what();
        }
        r.moment_fits.push_back(std::move(fit));
    }
}

void record_failure(RunResult& r, const Work& w, std::size_t pulse) {
    const auto& f = w.failures[pulse];
    r.failure = PipelineFailure{pulse, f.stage, f.species, message_of(f.error), exit_code_for(f.error)};
}

Provenance provenance(const ExperimentConfig& cfg, Execution exec) {
    Provenance p;
    p.version = kVersion;
    p.config_hash = config_hash(cfg);
    p.execution = exec == Execution::parallel ? "parallel" : "serial";
    p.threads = exec == Execution::parallel ? parallel_threads() : 1;
    return p;
}

} // namespace

RunResult run_teak(const std::vector<PulseSeries>& raw, const ExperimentConfig& cfg, Execution exec) {
    const Plan plan = make_plan(raw, cfg);
    const std::size_t ns = cfg.species.size();
    const std::size_t np = plan.pulses;
    const double inert_mass = cfg.species[plan.inert].mass;
    Work w(ns, plan.groups.size(), np);

    RunResult r;
    r.method = "teak";
    r.pulses_total = np;
    r.provenance = provenance(cfg, exec);

    // Stage A: smooth, align, baseline.
    per_pulse(w, np, exec, [&](std::size_t i, std::string& stage, std::string& species) {
        for (std::size_t s = 0; s < ns; ++s) {
            const auto& sc = cfg.species[s];
            species = sc.label;
            stage = "smooth";
            const SmoothResult sm = smooth(plan.series[s]->pulses[i], cfg.smoothing_factor);
            w.factor[s][i] = sm.smoothing_factor;
            // smoothed-value noise ~ sigma * sqrt(tr S / N); alignment rescales by sqrt(m_gas / m_inert)
            const double n_pts = static_cast<double>(sm.residuals.size());
            w.noise[s][i] = sm.residual_std * std::sqrt(sm.effective_dof / n_pts) *
                            (s == plan.inert ? 1.0 : std::sqrt(sc.mass / inert_mass));
            // Aligning first puts every species' baseline anchor (the last
            // sample) at the same reduced time as the inert's.
            stage = "align";
            const Flux aligned = s == plan.inert ? sm.smoothed : graham_align(sm.smoothed, sc.mass, inert_mass);
            stage = "baseline";
            const BaselineResult bl = cfg.baseline.method == BaselineMethod::gamma
                                          ? baseline_gamma(aligned, cfg.baseline.shape, std::nullopt,
                                                           anchor_window(cfg, plan.grid))
                                          : baseline_tail_mean(aligned, tail_window(cfg, plan.grid));
            w.shift[s][i] = bl.shift;
            w.processed[s][i] = bl.corrected;
        }
        w.inert_m0[i] = moments(w.processed[plan.inert][i], 0).m0;
    });
    std::size_t completed = w.first_failure(np);

    // Outgas flags come from the baselined inert, before any calibration
    // can absorb an inflated pulse.
    r.inert_raw_m0.assign(w.inert_m0.begin(), w.inert_m0.begin() + static_cast<std::ptrdiff_t>(completed));
    const std::size_t wh = cfg.outgas.window_half_width;
    if (completed >= 2 * wh + 3) {
        r.outgas = detect_outgas(r.inert_raw_m0, wh, cfg.outgas.significance);
        if (cfg.outgas.auto_exclude) r.excluded_pulses = r.outgas->flagged_indices;
    } else {
        r.warnings.push_back("outgas test skipped: " + std::to_string(completed) + " pulses, need " +
                             std::to_string(2 * wh + 3));
    }

    if (completed > 0) {
        std::size_t ref;
        if (cfg.reference_pulse) {
            ref = *cfg.reference_pulse;
        } else {
            std::vector<std::size_t> skip = r.excluded_pulses;
            if (skip.size() >= completed) skip.clear();
            ref = median_index(r.inert_raw_m0, skip);
        }
        if (ref >= completed) {
            completed = 0;
        } else {
            r.reference_pulse = ref;
            const Flux& dv = w.processed[plan.inert][ref];
            const TccoConfig inert_cfg{false, false, cfg.tcco.feas_tol, 1e-6};
            const TccoConfig gas_cfg{cfg.tcco.enforce_pointwise, cfg.tcco.enforce_moment, cfg.tcco.feas_tol,
                                     cfg.tcco.pointwise_floor};

            // Stage B: calibrate the inert to the reference, then each group to the inert.
            per_pulse(w, completed, exec, [&](std::size_t i, std::string& stage, std::string& species) {
                stage = "calibrate";
                species = cfg.species[plan.inert].label;
                const Flux iv = w.processed[plan.inert][i];
                const TccoSolution si = tcco_calibrate(dv, std::span<const Flux>(&iv, 1), inert_cfg);
                w.coefficient[plan.inert][i] = si.b(0);
                const Flux ci = calibrated_fluxes(std::span<const Flux>(&iv, 1), si)[0];
                if (!(moments(ci, 0).m0 > 0.0)) throw DegenerateFluxError("calibrated inert has nonpositive m0");
                w.calibrated[plan.inert][i] = ci;
                for (std::size_t g = 0; g < plan.groups.size(); ++g) {
                    const Group& grp = plan.groups[g];
                    species = grp.label;
                    std::vector<double> target = ci.values;
                    for (auto& v : target) v *= grp.blend_ratio;
                    const Flux y = ci.with_values(std::move(target));
                    std::vector<Flux> ivs;
                    for (std::size_t s : grp.members) ivs.push_back(w.processed[s][i]);
                    TccoConfig pcfg = gas_cfg;
                    if (cfg.tcco.noise_margin > 0.0 && cfg.tcco.enforce_pointwise) {
                        // margin from the unconstrained fit's coefficients
                        const TccoSolution ls = tcco_calibrate(y, ivs, inert_cfg);
                        const double sy = grp.blend_ratio * si.b(0) * w.noise[plan.inert][i];
                        double var = sy * sy;
                        for (std::size_t k = 0; k < grp.members.size(); ++k) {
                            const double sk = ls.b(static_cast<Eigen::Index>(k)) * w.noise[grp.members[k]][i];
                            var += sk * sk;
                        }
                        pcfg.pointwise_margin = cfg.tcco.noise_margin * std::sqrt(var);
                    }
                    const TccoSolution sol = tcco_calibrate(y, ivs, pcfg);
                    const auto cal = calibrated_fluxes(ivs, sol);
                    for (std::size_t k = 0; k < grp.members.size(); ++k) {
                        w.calibrated[grp.members[k]][i] = cal[k];
                        w.coefficient[grp.members[k]][i] = sol.b(static_cast<Eigen::Index>(k));
                    }
                    w.group_kkt[g][i] = sol.kkt_residual;
                    w.group_moments[g][i] = moments(group_flux(w, grp, i), 3);
                }
            });
            completed = w.first_failure(completed);
        }
    }
    const std::size_t first_bad = w.first_failure(np);
    if (first_bad < np) record_failure(r, w, first_bad);
    else if (completed < np) r.failure = PipelineFailure{completed, "reference", cfg.species[plan.inert].label,
                                                         "reference pulse did not complete preprocessing", 3};

    // drop flags beyond the completed range
    std::erase_if(r.excluded_pulses, [&](std::size_t i) { return i >= completed; });
    finish(r, plan, w, completed, true);
    return r;
}

RunResult run_traditional(const std::vector<PulseSeries>& raw, const ExperimentConfig& cfg, double coefficient,
                          Execution exec) {
    if (!(coefficient > 0.0) || !std::isfinite(coefficient))
        throw SchemaError("traditional calibration coefficient must be a positive number");
    const Plan plan = make_plan(raw, cfg);
    const std::size_t ns = cfg.species.size();
    const std::size_t np = plan.pulses;
    Work w(ns, plan.groups.size(), np);
    const double window = tail_window(cfg, plan.grid);

    RunResult r;
    r.method = "traditional";
    r.pulses_total = np;
    r.provenance = provenance(cfg, exec);

    per_pulse(w, np, exec, [&](std::size_t i, std::string& stage, std::string& species) {
        for (std::size_t s = 0; s < ns; ++s) {
            species = cfg.species[s].label;
            stage = "baseline";
            const BaselineResult bl = baseline_tail_mean(plan.series[s]->pulses[i], window);
            w.shift[s][i] = bl.shift;
            w.processed[s][i] = bl.corrected;
            const double c = s == plan.inert ? 1.0 : coefficient;
            std::vector<double> v = bl.corrected.values;
            for (auto& x : v) x *= c;
            Flux cal = bl.corrected.with_values(std::move(v));
            cal.units = FluxUnits::calibrated;
            w.calibrated[s][i] = std::move(cal);
            w.coefficient[s][i] = c;
        }
        w.inert_m0[i] = moments(w.processed[plan.inert][i], 0).m0;
        stage = "conversion";
        for (std::size_t g = 0; g < plan.groups.size(); ++g) {
            species = plan.groups[g].label;
            w.group_moments[g][i] = moments(group_flux(w, plan.groups[g], i), 3);
        }
        species = cfg.species[plan.inert].label;
        if (!(moments(w.calibrated[plan.inert][i], 0).m0 > 0.0))
            throw DegenerateFluxError("inert m0 is not positive after baseline correction");
    });
    const std::size_t completed = w.first_failure(np);
    if (completed < np) record_failure(r, w, completed);
    finish(r, plan, w, completed, false);
    return r;
}

} // namespace teak
