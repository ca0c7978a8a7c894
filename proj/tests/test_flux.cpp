#include "doctest.h"
#include "support.hpp"

#include "teak/errors.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>

#include <random>

using namespace teak;
using teak::testing::gamma_flux;

TEST_CASE("time grid validation") {
    CHECK_THROWS_AS(TimeGrid(0.0, 0.1, 7), DomainError);
    CHECK_THROWS_AS(TimeGrid(0.0, 0.0, 10), DomainError);
    CHECK_THROWS_AS(TimeGrid(-1.0, 0.1, 10), DomainError);
    const TimeGrid g(0.5, 0.25, 9);
    CHECK(g.end() == doctest::Approx(2.5));
    CHECK(g.duration() == doctest::Approx(2.0));
}

TEST_CASE("flux rejects non-finite values and length mismatch") {
    const TimeGrid g(0.0, 1.0, 8);
    CHECK_THROWS_AS(Flux(g, std::vector<double>(7, 0.0)), DomainError);
    std::vector<double> v(8, 0.0);
    v[3] = std::nan("");
    CHECK_THROWS_AS(Flux(g, v), DomainError);
}

TEST_CASE("gamma density") {
    CHECK(gamma_pdf(0.0, {1.5, 1.0 / 3.0}) == 0.0);
    CHECK_THROWS_AS(gamma_pdf(-0.1, {1.5, 1.0}), DomainError);
    CHECK_THROWS_AS(gamma_pdf(1.0, {0.0, 1.0}), DomainError);
    CHECK_THROWS_AS(gamma_pdf(1.0, {1.5, -1.0}), DomainError);

    // mode of the ideal reactor density sits at (alpha - 1) beta
    const Flux f = gamma_flux(1.5, 1.0 / 3.0, 2.0, 12001);
    CHECK(std::abs(f.grid.at(argmax_index(f.values)) - 1.0 / 6.0) <= f.grid.step());

    boost::math::quadrature::exp_sinh<double> integrator;
    const double area = integrator.integrate([](double t) { return gamma_pdf(t, {2.0, 0.5}); });
    CHECK(std::abs(area - 1.0) <= 1e-8);
}

TEST_CASE("moments of simple fluxes") {
    const TimeGrid g(0.0, 0.01, 301);
    const Moments c = moments(Flux(g, std::vector<double>(301, 2.0)), 0);
    CHECK(c.m0 == doctest::Approx(6.0).epsilon(1e-12));

    const Moments z = moments(Flux(g, std::vector<double>(301, 0.0)));
    CHECK(z.m0 == 0.0);
    CHECK(z.m1 == 0.0);
    CHECK(z.m2 == 0.0);
    CHECK(z.m3 == 0.0);

    const Moments m = moments(gamma_flux(1.5, 1.0 / 3.0, 10.0, 100001));
    CHECK(std::abs(m.m0 - 1.0) <= 1e-4);
    CHECK(std::abs(m.m1_normalized - 0.5) <= 1e-3);
    // analytic E[t^2] = alpha (alpha + 1) beta^2
    CHECK(m.m2 == doctest::Approx(1.5 * 2.5 / 9.0).epsilon(1e-3));
}

TEST_CASE("Cauchy-Schwarz on random nonnegative fluxes") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const TimeGrid g(0.0, 0.05, 64);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> v(64);
        for (auto& x : v) x = u(rng);
        const Moments m = moments(Flux(g, v));
        CHECK(m.m0 >= 0.0);
        CHECK(m.m2 >= 0.0);
        CHECK(m.m1_normalized * m.m1_normalized <= m.m2 / m.m0 * (1 + 1e-12));
    }
}

TEST_CASE("trapezoid error is second order") {
    // alpha = 3 keeps the integrand smooth at t = 0; the window ends before the
    // flux decays so the endpoint derivative term does not vanish
    auto m0 = [](std::size_t n) { return moments(gamma_flux(3.0, 0.2, 1.0, n), 0).m0; };
    const double d1 = m0(301) - m0(601);
    const double d2 = m0(601) - m0(1201);
    CHECK(std::abs(d1 / d2) > 3.5);
    CHECK(std::abs(d1 / d2) < 4.5);
}

TEST_CASE("residence properties") {
    const Flux f = gamma_flux(1.5, 1.0 / 3.0, 10.0, 100001);
    const ResidenceProps p = residence_props(f);
    CHECK(std::abs(p.tau_mean - 0.5) <= 1e-3);
    CHECK(std::abs(p.gamma.beta - 1.0 / 3.0) <= 1e-2);
    CHECK(p.tau_var / p.tau_mean == doctest::Approx(p.gamma.beta));
    CHECK(p.tau_area == doctest::Approx(std::tgamma(p.gamma.alpha) * std::pow(p.gamma.beta, p.gamma.alpha)));

    std::vector<double> v(f.values);
    for (auto& x : v) x *= 7.5;
    const ResidenceProps q = residence_props(f.with_values(v));
    CHECK(q.tau_mean == doctest::Approx(p.tau_mean).epsilon(1e-12));
    CHECK(q.tau_var == doctest::Approx(p.tau_var).epsilon(1e-12));
    CHECK(q.tau_peak == p.tau_peak);
    CHECK(q.tau_area == doctest::Approx(p.tau_area).epsilon(1e-12));

    std::vector<double> dec(64);
    for (std::size_t i = 0; i < dec.size(); ++i) dec[i] = std::exp(-0.1 * static_cast<double>(i));
    CHECK_THROWS_AS(residence_props(Flux(TimeGrid(0.0, 0.1, 64), dec)), DegenerateFluxError);
    CHECK_THROWS_AS(residence_props(Flux(TimeGrid(0.0, 0.1, 64), std::vector<double>(64, 0.0))),
                    DegenerateFluxError);
}

TEST_CASE("beta from variance and from peak agree") {
    const Flux f = gamma_flux(1.5, 0.4, 12.0, 4001);
    const ResidenceProps p = residence_props(f);
    const double beta_var = p.tau_var / p.tau_mean;
    const double beta_peak = 2.0 * p.tau_peak;
    CHECK(std::abs(beta_var - beta_peak) <= 4.0 * f.grid.step());
}

TEST_CASE("conversion") {
    CHECK(conversion(0.5, 0.5).value == 0.0);
    CHECK(conversion(0.0, 0.7).value == 1.0);
    CHECK(conversion(0.3, 0.5).value == doctest::Approx(0.4));
    CHECK(conversion(0.3, 1.0, 0.5).value == doctest::Approx(0.4));
    CHECK_THROWS_AS(conversion(0.3, 0.0), DomainError);

    const ConversionResult neg = conversion(1.2, 1.0);
    CHECK(neg.out_of_range);
    CHECK(neg.value == doctest::Approx(-0.2));
    CHECK_FALSE(conversion(0.97, 1.0).out_of_range);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(1e-3, 1e3);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng);
        CHECK(conversion(x, x, 1.0).value == 0.0);
        const double r = u(rng);
        CHECK(conversion(r, x).value > conversion(r * 1.01, x).value);
    }
}

TEST_CASE("Graham alignment") {
    // long enough that the stretched copy has decayed too
    const Flux f = gamma_flux(1.5, 1.0 / 3.0, 12.0, 300001);
    const Flux same = graham_align(f, 40.0, 40.0);
    CHECK(same.values == f.values);

    const Flux a = graham_align(f, 160.0, 40.0);
    CHECK(a.grid == f.grid);
    const double peak = f.grid.at(argmax_index(f.values));
    const double peak_aligned = a.grid.at(argmax_index(a.values));
    CHECK(std::abs(peak_aligned - 0.5 * peak) <= f.grid.step());
    CHECK(std::abs(moments(a, 0).m0 - moments(f, 0).m0) <= 1e-6);

    // lighter gas stretched onto the reference timescale
    const Flux b = graham_align(f, 10.0, 40.0);
    CHECK(std::abs(moments(b, 0).m0 - moments(f, 0).m0) <= 1e-6);

    CHECK_THROWS_AS(graham_align(f, 0.0, 40.0), DomainError);
    CHECK_THROWS_AS(graham_align(f, 40.0, -1.0), DomainError);
}

TEST_CASE("standardize") {
    const std::vector<double> x{1.0, 2.0, 3.0};
    const auto z = standardize(x);
    CHECK(z[0] == doctest::Approx(-1.0));
    CHECK(z[1] == doctest::Approx(0.0));
    CHECK(z[2] == doctest::Approx(1.0));
    CHECK_THROWS_AS(standardize(std::vector<double>{2.0, 2.0, 2.0}), DomainError);
    CHECK_THROWS_AS(standardize(std::vector<double>{2.0}), DomainError);

    std::mt19937_64 rng(3);
    std::lognormal_distribution<double> d(0.0, 2.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> v(37);
        for (auto& e : v) e = d(rng);
        const auto s = standardize(v);
        CHECK(std::abs(mean(s)) < 1e-12);
        CHECK(sample_std(s) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("mean and std are linear across a fixed-shape gamma family") {
    std::mt19937_64 rng(17);
    std::vector<double> mu, sd;
    for (double scale : {0.5, 1.0, 1.5, 2.0, 3.0, 4.0}) {
        std::gamma_distribution<double> g(1.5, scale);
        std::vector<double> s(20000);
        for (auto& x : s) x = g(rng);
        mu.push_back(mean(s));
        sd.push_back(sample_std(s));
    }
    // least-squares line sd = a + c mu, then R^2
    const double mx = mean(mu), my = mean(sd);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        sxy += (mu[i] - mx) * (sd[i] - my);
        sxx += (mu[i] - mx) * (mu[i] - mx);
        syy += (sd[i] - my) * (sd[i] - my);
    }
    CHECK(sxy * sxy / (sxx * syy) > 0.999);
    CHECK(sxy / sxx == doctest::Approx(1.0 / std::sqrt(1.5)).epsilon(0.02));
}
