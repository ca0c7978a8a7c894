#include "teak/simulator.hpp"

#include "teak/errors.hpp"
#include "teak/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

namespace teak {

double standard_diffusion_curve(double tau) {
    if (!(tau > 0.0)) return 0.0;
    constexpr double pi = std::numbers::pi;
    double sum = 0.0;
    if (tau > 0.05) {
        for (int n = 0; n < 10000; ++n) {
            const double half = n + 0.5;
            const double term = pi * (2 * n + 1) * std::exp(-half * half * pi * pi * tau);
            sum += (n % 2 == 0) ? term : -term;
            if (term < 1e-12) break;
        }
    } else {
        const double pre = 1.0 / std::sqrt(pi * tau * tau * tau);
        for (int n = 0; n < 10000; ++n) {
            const double odd = 2 * n + 1;
            const double term = odd * pre * std::exp(-odd * odd / (4.0 * tau));
            sum += (n % 2 == 0) ? term : -term;
            if (term < 1e-12) break;
        }
    }
    return sum;
}

std::vector<double> standard_diffusion_curve(std::span<const double> tau) {
    std::vector<double> out(tau.size());
    std::transform(tau.begin(), tau.end(), out.begin(), [](double t) { return standard_diffusion_curve(t); });
    return out;
}

double diffusion_time_scale(const SimScenario& s) { return s.porosity * s.length * s.length / s.diffusivity; }

namespace {

void validate(const SimScenario& s) {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(s.length)) throw DomainError("scenario: length must be > 0");
    if (!(s.porosity > 0.0 && s.porosity < 1.0)) throw DomainError("scenario: porosity must lie in (0, 1)");
    if (!positive(s.diffusivity)) throw DomainError("scenario: diffusivity must be > 0");
    if (!(s.rate_constant >= 0.0) || !std::isfinite(s.rate_constant))
        throw DomainError("scenario: rate constant must be >= 0");
    if (!positive(s.pulse_amount)) throw DomainError("scenario: pulse amount must be > 0");
    if (!positive(s.duration)) throw DomainError("scenario: duration must be > 0");
    if (s.grid_points_space < 4) throw DomainError("scenario: need at least 4 spatial cells");
    if (s.grid_points_time + 1 < TimeGrid::kMinCount) throw DomainError("scenario: too few time steps");
    const auto [a, b] = s.catalyst_zone;
    if (!(a >= 0.0 && a <= b && b <= 1.0)) throw DomainError("scenario: catalyst zone must satisfy 0 <= start <= end <= 1");
}

// Constant tridiagonal system, factored once (Thomas algorithm).
class Tridiagonal {
public:
    Tridiagonal(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper)
        : lower_(std::move(lower)), upper_(std::move(upper)), inv_(diag.size()), cprime_(diag.size()) {
        const std::size_t n = diag.size();
        double denom = diag[0];
        inv_[0] = 1.0 / denom;
        cprime_[0] = n > 1 ? upper_[0] * inv_[0] : 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            denom = diag[i] - lower_[i] * cprime_[i - 1];
            inv_[i] = 1.0 / denom;
            cprime_[i] = i + 1 < n ? upper_[i] * inv_[i] : 0.0;
        }
    }

    void solve(std::vector<double>& rhs) const {
        const std::size_t n = rhs.size();
        rhs[0] *= inv_[0];
        for (std::size_t i = 1; i < n; ++i) rhs[i] = (rhs[i] - lower_[i] * rhs[i - 1]) * inv_[i];
        for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= cprime_[i] * rhs[i + 1];
    }

private:
    std::vector<double> lower_, upper_, inv_, cprime_;
};

// Vertex-centred finite volumes on nodes 0..n-1; node n (outlet) is held at
// zero. Node 0 owns half a cell and starts with the whole pulse.
struct Operator {
    std::vector<double> lower, diag, upper; // stiffness incl. reaction
};

Operator stiffness(std::size_t n, double h, double D, const std::vector<double>& kvol) {
    Operator A{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    const double g = D / h;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            A.diag[i] += g;
            A.lower[i] = -g;
        }
        A.diag[i] += g; // link to i + 1 or to the outlet node
        if (i + 1 < n) A.upper[i] = -g;
        A.diag[i] += kvol[i];
    }
    return A;
}

void apply(const Operator& A, const std::vector<double>& c, std::vector<double>& out) {
    const std::size_t n = c.size();
    for (std::size_t i = 0; i < n; ++i) {
        double v = A.diag[i] * c[i];
        if (i > 0) v += A.lower[i] * c[i - 1];
        if (i + 1 < n) v += A.upper[i] * c[i + 1];
        out[i] = v;
    }
}

SimOutput run_cn(const SimScenario& s, std::optional<double> product_d) {
    const std::size_t n = s.grid_points_space;
    const std::size_t steps = s.grid_points_time;
    const double h = s.length / static_cast<double>(n);
    const double dt = s.duration / static_cast<double>(steps);
    const double zl = s.catalyst_zone.first * s.length;
    const double zr = s.catalyst_zone.second * s.length;

    std::vector<double> mass(n), kvol(n), zero(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) * h;
        const double lo = i == 0 ? 0.0 : x - 0.5 * h;
        const double hi = x + 0.5 * h;
        mass[i] = s.porosity * (hi - lo);
        kvol[i] = s.rate_constant * std::max(0.0, std::min(hi, zr) - std::max(lo, zl));
    }

    auto system = [&](const Operator& A) {
        std::vector<double> lo(n), di(n), up(n);
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = 0.5 * dt * A.lower[i];
            di[i] = mass[i] + 0.5 * dt * A.diag[i];
            up[i] = 0.5 * dt * A.upper[i];
        }
        return Tridiagonal(std::move(lo), std::move(di), std::move(up));
    };

    const Operator Ar = stiffness(n, h, s.diffusivity, kvol);
    const Tridiagonal Lr = system(Ar);
    std::vector<double> c(n, 0.0), work(n), rhs(n);
    c[0] = s.pulse_amount / mass[0];

    std::vector<double> fr(steps + 1, 0.0);
    const double out_r = s.diffusivity / h;
    double consumed = 0.0;

    std::optional<Operator> Ap;
    std::optional<Tridiagonal> Lp;
    std::vector<double> p, fp;
    double out_p = 0.0;
    if (product_d) {
        Ap = stiffness(n, h, *product_d, zero);
        Lp = system(*Ap);
        p.assign(n, 0.0);
        fp.assign(steps + 1, 0.0);
        out_p = *product_d / h;
    }

    std::vector<double> source(n);
    for (std::size_t step = 1; step <= steps; ++step) {
        apply(Ar, c, work);
        for (std::size_t i = 0; i < n; ++i) {
            rhs[i] = mass[i] * c[i] - 0.5 * dt * work[i];
            source[i] = c[i];
        }
        Lr.solve(rhs);
        c.swap(rhs);
        double reacted = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            source[i] = 0.5 * dt * kvol[i] * (source[i] + c[i]);
            reacted += source[i];
        }
        consumed += reacted;
        fr[step] = out_r * c[n - 1];
        if (product_d) {
            apply(*Ap, p, work);
            for (std::size_t i = 0; i < n; ++i) rhs[i] = mass[i] * p[i] - 0.5 * dt * work[i] + source[i];
            Lp->solve(rhs);
            p.swap(rhs);
            fp[step] = out_p * p[n - 1];
        }
    }

    double remaining = 0.0;
    for (std::size_t i = 0; i < n; ++i) remaining += mass[i] * c[i];

    const TimeGrid grid(0.0, dt, steps + 1);
    SimOutput out;
    out.reactant = Flux(grid, std::move(fr));
    if (product_d) out.product = Flux(grid, std::move(fp));
    out.consumed_fraction = consumed / s.pulse_amount;
    out.remaining_fraction = remaining / s.pulse_amount;
    return out;
}

} // namespace

SimOutput simulate_pulse(const SimScenario& scenario, std::optional<double> product_diffusivity) {
    validate(scenario);
    if (product_diffusivity && !(*product_diffusivity > 0.0))
        throw DomainError("scenario: product diffusivity must be > 0");
    SimOutput out = run_cn(scenario, product_diffusivity);
    if (scenario.self_check) {
        SimScenario fine = scenario;
        fine.grid_points_space *= 2;
        fine.grid_points_time *= 2;
        const SimOutput ref = run_cn(fine, std::nullopt);
        const double m0 = moments(out.reactant, 0).m0;
        const double m0_fine = moments(ref.reactant, 0).m0;
        const double scale = std::max(std::abs(m0_fine), 1e-12 * scenario.pulse_amount);
        if (std::abs(m0 - m0_fine) > 1e-4 * scale)
            throw AccuracyError("simulator: m0 changes by " + std::to_string(std::abs(m0 - m0_fine) / scale) +
                                " (relative) under grid refinement; increase grid_points_space/time");
    }
    return out;
}

Flux simulate_outlet_flux(const SimScenario& scenario) { return simulate_pulse(scenario).reactant; }

double Drift::factor(std::size_t pulse_index) const {
    const double i = static_cast<double>(pulse_index);
    switch (kind) {
    case DriftKind::none: return 1.0;
    case DriftKind::linear: return 1.0 + slope * i;
    case DriftKind::sinusoidal: return 1.0 + amplitude * std::sin(2.0 * std::numbers::pi * i / period);
    }
    return 1.0;
}

Flux apply_distortion(const Flux& flux, const DistortionSpec& spec, std::size_t pulse_index, std::uint64_t rng_seed) {
    if (!(spec.scale > 0.0)) throw DomainError("distortion: scale must be > 0");
    const std::size_t n = flux.size();
    const TimeGrid& g = flux.grid;
    std::vector<double> v = flux.values;

    for (const auto& ev : spec.outgas) {
        if (ev.pulse_index != pulse_index) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const double src = (g.at(i) - ev.delay - g.start()) / g.step();
            if (src < 0.0) continue;
            const auto j = static_cast<std::size_t>(src);
            double shifted;
            if (j + 1 >= n) {
                shifted = flux.values.back();
            } else {
                const double frac = src - static_cast<double>(j);
                shifted = flux.values[j] + frac * (flux.values[j + 1] - flux.values[j]);
            }
            v[i] += ev.extra_fraction * shifted;
        }
    }

    const double factor = spec.scale * spec.drift.factor(pulse_index);
    for (auto& x : v) x = factor * x + spec.baseline_offset;

    if (spec.noise_std > 0.0) {
        std::seed_seq seq{static_cast<std::uint32_t>(rng_seed), static_cast<std::uint32_t>(rng_seed >> 32),
                          static_cast<std::uint32_t>(pulse_index)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> noise(0.0, spec.noise_std);
        for (auto& x : v) x += noise(rng);
    }
    return flux.with_values(std::move(v));
}

std::string_view to_string(SpeciesRole role) {
    switch (role) {
    case SpeciesRole::inert: return "inert";
    case SpeciesRole::reactant: return "reactant";
    case SpeciesRole::product: return "product";
    case SpeciesRole::fragment: return "fragment";
    }
    return "inert";
}

SpeciesRole parse_role(std::string_view name) {
    if (name == "inert") return SpeciesRole::inert;
    if (name == "reactant") return SpeciesRole::reactant;
    if (name == "product") return SpeciesRole::product;
    if (name == "fragment") return SpeciesRole::fragment;
    throw SchemaError("unknown species role '" + std::string(name) + "'");
}

double rate_at(const SimSpecies& sp, std::size_t pulse_index) {
    if (sp.role != SpeciesRole::reactant) return 0.0;
    if (sp.schedule == RateSchedule::constant) return sp.rate_constant;
    const double frac = 1.0 - static_cast<double>(pulse_index) / static_cast<double>(sp.decay_pulses);
    return sp.rate_constant * std::max(0.0, frac);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

const SimSpecies* find(const ExperimentScenario& sc, const std::string& label) {
    for (const auto& sp : sc.species)
        if (sp.label == label) return &sp;
    return nullptr;
}

void validate(const ExperimentScenario& sc) {
    if (sc.pulses == 0) throw SchemaError("scenario: pulses must be >= 1");
    if (!(sc.reference_mass > 0.0)) throw SchemaError("scenario: reference_mass must be > 0");
    std::set<std::string> labels;
    int inert = 0;
    double blend = 0.0;
    for (const auto& sp : sc.species) {
        if (sp.label.empty()) throw SchemaError("scenario: species label must not be empty");
        if (!labels.insert(sp.label).second) throw SchemaError("scenario: duplicate species '" + sp.label + "'");
        if (!(sp.mass > 0.0)) throw SchemaError("scenario: species '" + sp.label + "' needs a positive mass");
        if (sp.role == SpeciesRole::inert) ++inert;
        if (sp.role == SpeciesRole::inert || sp.role == SpeciesRole::reactant) {
            if (!(sp.blend_fraction > 0.0))
                throw SchemaError("scenario: species '" + sp.label + "' needs a positive blend_fraction");
            blend += sp.blend_fraction;
        }
        if (sp.schedule == RateSchedule::linear_decay && sp.decay_pulses == 0)
            throw SchemaError("scenario: decay_pulses must be >= 1");
        if (!(sp.distortion.scale > 0.0)) throw SchemaError("scenario: scale must be > 0 for '" + sp.label + "'");
    }
    if (inert != 1) throw SchemaError("scenario: exactly one inert species required");
    if (std::abs(blend - 1.0) > 1e-9) throw SchemaError("scenario: blend fractions must sum to 1");
    for (const auto& sp : sc.species) {
        if (sp.role == SpeciesRole::product || sp.role == SpeciesRole::fragment) {
            const SimSpecies* parent = find(sc, sp.parent);
            if (!parent) throw SchemaError("scenario: species '" + sp.label + "' has unknown parent '" + sp.parent + "'");
            if (sp.role == SpeciesRole::product && parent->role != SpeciesRole::reactant)
                throw SchemaError("scenario: product '" + sp.label + "' must name a reactant parent");
            if (sp.role == SpeciesRole::fragment && parent->role != SpeciesRole::reactant &&
                parent->role != SpeciesRole::product)
                throw SchemaError("scenario: fragment '" + sp.label + "' must name a reactant or product parent");
        }
    }
    for (const auto& sp : sc.species) {
        if (sp.role != SpeciesRole::reactant) continue;
        int products = 0;
        for (const auto& q : sc.species)
            if (q.role == SpeciesRole::product && q.parent == sp.label) ++products;
        if (products > 1) throw SchemaError("scenario: reactant '" + sp.label + "' has more than one product");
    }
}

} // namespace

ExperimentData simulate_experiment(const ExperimentScenario& sc) {
    validate(sc);
    const std::size_t ns = sc.species.size();
    const std::size_t np = sc.pulses;
    auto diffusivity = [&](double mass) { return sc.reactor.diffusivity * std::sqrt(sc.reference_mass / mass); };

    // physical (undistorted) flux per species and pulse
    std::vector<std::vector<Flux>> phys(ns, std::vector<Flux>(np));
    ExperimentTruth truth;

    // Each distinct (reactant, rate) pair is one PDE solve.
    struct Job {
        std::size_t species;
        double rate;
        SimOutput out;
    };
    std::vector<Job> jobs;
    std::vector<std::vector<std::size_t>> job_of(ns, std::vector<std::size_t>(np, 0));
    for (std::size_t s = 0; s < ns; ++s) {
        const auto& sp = sc.species[s];
        if (sp.role != SpeciesRole::inert && sp.role != SpeciesRole::reactant) continue;
        std::map<double, std::size_t> seen;
        for (std::size_t i = 0; i < np; ++i) {
            const double k = rate_at(sp, i);
            auto [it, fresh] = seen.emplace(k, jobs.size());
            if (fresh) jobs.push_back({s, k, {}});
            job_of[s][i] = it->second;
        }
    }

    std::vector<bool> first_of_species(jobs.size(), false);
    {
        std::set<std::size_t> done;
        for (std::size_t j = 0; j < jobs.size(); ++j) first_of_species[j] = done.insert(jobs[j].species).second;
    }

    for_each_index(jobs.size(), Execution::parallel, [&](std::size_t j) {
        const auto& sp = sc.species[jobs[j].species];
        SimScenario s = sc.reactor;
        s.rate_constant = jobs[j].rate;
        s.pulse_amount = sc.reactor.pulse_amount * sp.blend_fraction;
        s.diffusivity = diffusivity(sp.mass);
        s.self_check = sc.reactor.self_check && first_of_species[j];
        std::optional<double> product_d;
        for (const auto& q : sc.species)
            if (q.role == SpeciesRole::product && q.parent == sp.label) product_d = diffusivity(q.mass);
        jobs[j].out = simulate_pulse(s, product_d);
    });

    auto index_of = [&](const std::string& label) {
        for (std::size_t s = 0; s < ns; ++s)
            if (sc.species[s].label == label) return s;
        return ns;
    };

    for (std::size_t s = 0; s < ns; ++s) {
        const auto& sp = sc.species[s];
        if (sp.role == SpeciesRole::inert || sp.role == SpeciesRole::reactant) {
            for (std::size_t i = 0; i < np; ++i) phys[s][i] = jobs[job_of[s][i]].out.reactant;
        }
    }
    for (std::size_t s = 0; s < ns; ++s) {
        const auto& sp = sc.species[s];
        if (sp.role != SpeciesRole::product) continue;
        const std::size_t r = index_of(sp.parent);
        for (std::size_t i = 0; i < np; ++i) phys[s][i] = *jobs[job_of[r][i]].out.product;
    }
    for (std::size_t s = 0; s < ns; ++s) {
        const auto& sp = sc.species[s];
        if (sp.role != SpeciesRole::fragment) continue;
        const std::size_t parent = index_of(sp.parent);
        phys[s] = phys[parent];
    }

    ExperimentData data;
    data.series.resize(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        const auto& sp = sc.species[s];
        data.series[s].species = sp.label;
        data.series[s].pulses.resize(np);
        std::vector<double> rates(np);
        for (std::size_t i = 0; i < np; ++i) rates[i] = rate_at(sp, i);
        truth.rate_constant.emplace_back(sp.label, std::move(rates));
        if (sp.role == SpeciesRole::reactant) {
            std::vector<double> chi(np);
            for (std::size_t i = 0; i < np; ++i) chi[i] = jobs[job_of[s][i]].out.consumed_fraction;
            truth.conversion.emplace_back(sp.label, std::move(chi));
        }
    }

    for_each_index(ns * np, Execution::parallel, [&](std::size_t idx) {
        const std::size_t s = idx / np;
        const std::size_t i = idx % np;
        const auto& sp = sc.species[s];
        Flux f = apply_distortion(phys[s][i], sp.distortion, i, splitmix64(sc.seed + s));
        f.species = sp.label;
        f.pulse_index = i;
        f.units = FluxUnits::volts;
        data.series[s].pulses[i] = std::move(f);
    });
    data.truth = std::move(truth);
    return data;
}

} // namespace teak
