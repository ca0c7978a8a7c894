#include "doctest.h"
#include "support.hpp"

#include "teak/baseline.hpp"
#include "teak/errors.hpp"

using namespace teak;
using namespace teak::testing;

namespace {

// peak time 1/6 lands on a grid point
Flux exact_gamma(double offset = 0.0) { return gamma_flux(1.5, 1.0 / 3.0, 5.0, 3001, 1.0, offset); }

} // namespace

TEST_CASE("exact gamma samples need no shift") {
    const Flux f = exact_gamma();
    const BaselineResult r = baseline_gamma(f, 1.5, 1.0);
    CHECK(std::abs(r.shift) <= 1e-10);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(r.corrected.values[i] - f.values[i]) <= 1e-10);
    CHECK(r.tau_peak_used == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("constant offset is recovered") {
    const Flux f = exact_gamma();
    const double m0_true = moments(f, 0).m0;
    const BaselineResult r = baseline_gamma(exact_gamma(0.02));
    CHECK(std::abs(r.shift - 0.02) <= 1e-6);
    CHECK(std::abs(moments(r.corrected, 0).m0 - m0_true) <= 1e-4);
    CHECK(r.corrected.values.back() == r.gamma_tail_value);
}

TEST_CASE("offsets relative to peak") {
    const Flux f = exact_gamma();
    const double peak = max_of(f.values);
    const BaselineResult base = baseline_gamma(f);
    for (double c : {-0.05, 0.02, 0.1}) {
        CAPTURE(c);
        const BaselineResult r = baseline_gamma(exact_gamma(c * peak));
        CHECK(std::abs(r.shift - c * peak) <= 1e-3 * peak);
        for (std::size_t i = 0; i < f.size(); ++i)
            CHECK(r.corrected.values[i] == doctest::Approx(base.corrected.values[i]).epsilon(1e-12).scale(peak));
    }
}

TEST_CASE("gamma method is shift-equivariant") {
    const Flux f = standard_flux(1200, 4.0);
    const double peak = max_of(f.values);
    for (double window : {0.0, 0.4}) {
        const BaselineResult a = baseline_gamma(f, 1.5, std::nullopt, window);
        for (double c : {-3.0, 0.5, 11.0}) {
            std::vector<double> v(f.values);
            for (auto& x : v) x += c;
            const BaselineResult b = baseline_gamma(f.with_values(v), 1.5, std::nullopt, window);
            CHECK(b.shift - a.shift == doctest::Approx(c).epsilon(1e-12));
            for (std::size_t i = 0; i < f.size(); ++i)
                CHECK(std::abs(b.corrected.values[i] - a.corrected.values[i]) <= 1e-12 * (peak + std::abs(c)));
        }
    }
}

TEST_CASE("windowed anchor matches window means") {
    const Flux f = exact_gamma(0.3);
    const double window = 0.5;
    const BaselineResult r = baseline_gamma(f, 1.5, 2.0, window);
    double got = 0, want = 0;
    std::size_t n = 0;
    const GammaParams p{1.5, 2.0 * r.tau_peak_used};
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f.grid.at(i) < f.grid.end() - window) continue;
        got += r.corrected.values[i];
        want += 2.0 * gamma_pdf(f.grid.at(i), p);
        ++n;
    }
    CHECK(n > 1);
    CHECK(got / static_cast<double>(n) == doctest::Approx(want / static_cast<double>(n)).epsilon(1e-12));
    CHECK(r.gamma_tail_value == doctest::Approx(want / static_cast<double>(n)).epsilon(1e-12));

    CHECK_THROWS_AS(baseline_gamma(f, 1.5, std::nullopt, -0.1), DomainError);
    CHECK_THROWS_AS(baseline_gamma(f, 1.5, std::nullopt, f.grid.duration()), DomainError);
}

TEST_CASE("boundary maxima are rejected") {
    const TimeGrid g(0.0, 0.1, 50);
    std::vector<double> dec(50), inc(50);
    for (std::size_t i = 0; i < 50; ++i) {
        dec[i] = std::exp(-0.2 * static_cast<double>(i));
        inc[i] = static_cast<double>(i);
    }
    CHECK_THROWS_AS(baseline_gamma(Flux(g, dec)), DegenerateFluxError);
    CHECK_THROWS_AS(baseline_gamma(Flux(g, inc)), DegenerateFluxError);
    CHECK_THROWS_AS(baseline_gamma(exact_gamma(), 1.0), DomainError);
}

TEST_CASE("tail mean baseline") {
    const Flux f = exact_gamma();
    const double c = 0.07, sigma = 0.01;
    const Flux noisy = add_noise(exact_gamma(c), sigma, 3);
    const double window = 1.0;
    const BaselineResult r = baseline_tail_mean(noisy, window);
    const double n_tail = window / f.grid.step() + 1;
    CHECK(std::abs(r.shift - c) <= 3.0 * sigma / std::sqrt(n_tail));

    const TimeGrid g(0.0, 0.1, 20);
    const BaselineResult z = baseline_tail_mean(Flux(g, std::vector<double>(20, 0.0)), 0.5);
    CHECK(z.shift == 0.0);
    for (double x : z.corrected.values) CHECK(x == 0.0);

    CHECK_THROWS_AS(baseline_tail_mean(f, f.grid.duration()), DomainError);
    CHECK_THROWS_AS(baseline_tail_mean(f, 0.0), DomainError);
}

TEST_CASE("gamma and tail mean agree on a decayed flux") {
    // 10 dimensionless units: the tail is far below 1e-6 of the peak
    const Flux f = gamma_flux(1.5, 1.0 / 3.0, 10.0, 5001, 1.0, 0.04);
    const double m_gamma = moments(baseline_gamma(f).corrected, 0).m0;
    const double m_tail = moments(baseline_tail_mean(f, 1.0).corrected, 0).m0;
    CHECK(std::abs(m_gamma - m_tail) <= 1e-3 * m_tail);
}

TEST_CASE("tail mean underestimates a flux still eluting") {
    SimScenario s = quick_reactor();
    s.duration = 0.8; // collection stops while the pulse is still leaving
    s.self_check = false;
    const Flux f = simulate_outlet_flux(s);
    const double offset = 0.05 * max_of(f.values);
    std::vector<double> v(f.values);
    for (auto& x : v) x += offset;
    const Flux raw = f.with_values(v);
    const double m0_true = moments(f, 0).m0;

    const double m_tail = moments(baseline_tail_mean(raw, 0.1 * s.duration).corrected, 0).m0;
    const double m_gamma = moments(baseline_gamma(raw).corrected, 0).m0;
    CHECK(m_tail < m_gamma);
    CHECK(m_tail < m0_true);
    CHECK(std::abs(m_gamma - m0_true) < std::abs(m_tail - m0_true));
}
