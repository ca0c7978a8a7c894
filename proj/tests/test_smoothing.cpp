#include "doctest.h"
#include "support.hpp"

#include "teak/errors.hpp"
#include "teak/smoothing.hpp"

#include <Eigen/Dense>

using namespace teak;
using namespace teak::testing;

namespace {

double skewness(const std::vector<double>& r) {
    const double mu = mean(r);
    double m2 = 0, m3 = 0;
    for (double x : r) {
        m2 += (x - mu) * (x - mu);
        m3 += (x - mu) * (x - mu) * (x - mu);
    }
    m2 /= static_cast<double>(r.size());
    m3 /= static_cast<double>(r.size());
    return m3 / std::pow(m2, 1.5);
}

double lag1(const std::vector<double>& r) {
    const double mu = mean(r);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        den += (r[i] - mu) * (r[i] - mu);
        if (i + 1 < r.size()) num += (r[i] - mu) * (r[i + 1] - mu);
    }
    return num / den;
}

} // namespace

TEST_CASE("noise-free flux passes through") {
    const Flux f = standard_flux(1000);
    const SmoothResult s = smooth(f);
    CHECK(s.residual_std <= 1e-6 * max_of(f.values));
    CHECK(s.smoothed.grid == f.grid);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(s.residuals[i] == f.values[i] - s.smoothed.values[i]);
}

TEST_CASE("noise level and residual shape at 5% noise") {
    // 1000 samples over 1.5 dimensionless units resolve the sqrt-t onset; at
    // 3 units the uniform penalty misfits the onset enough to skew residuals
    const Flux clean = standard_flux(1000, 1.5);
    const double peak = max_of(clean.values);
    const double sigma = 0.05 * peak;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        CAPTURE(seed);
        const Flux noisy = add_noise(clean, sigma, seed);
        const SmoothResult s = smooth(noisy);
        CHECK(s.residual_std >= 0.9 * sigma);
        CHECK(s.residual_std <= 1.1 * sigma);
        CHECK(std::abs(skewness(s.residuals)) <= 0.2);
        CHECK(std::abs(max_of(s.smoothed.values) - peak) <= 0.02 * peak);
        CHECK(lag1(s.residuals) <= 0.3);
        const double m0_in = moments(noisy, 0).m0;
        CHECK(std::abs(moments(s.smoothed, 0).m0 - m0_in) <= 0.005 * std::abs(m0_in));
        CHECK(s.effective_dof > 2.0);
        CHECK(s.effective_dof < 100.0);
    }
}

TEST_CASE("smoothing is idempotent at low noise") {
    const Flux clean = standard_flux(1000);
    const double peak = max_of(clean.values);
    const SmoothResult once = smooth(add_noise(clean, 0.01 * peak, 4));
    const SmoothResult twice = smooth(once.smoothed);
    for (std::size_t i = 0; i < clean.size(); ++i)
        CHECK(std::abs(twice.smoothed.values[i] - once.smoothed.values[i]) <= 0.01 * peak);
}

TEST_CASE("noise estimate") {
    const TimeGrid g(0.0, 0.01, 2000);
    std::vector<double> v(2000, 0.0);
    const Flux noise = add_noise(Flux(g, v), 0.01, 9);
    const double est = estimate_noise_std(noise);
    CHECK(est >= 0.008);
    CHECK(est <= 0.012);

    CHECK(estimate_noise_std(Flux(g, std::vector<double>(2000, 3.0))) == 0.0);

    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.25 - 1e-3 * static_cast<double>(i);
    CHECK(std::abs(estimate_noise_std(Flux(g, v))) <= 1e-12);

    CHECK_THROWS_AS(estimate_noise_std(noise, 0.0), DomainError);
    CHECK_THROWS_AS(estimate_noise_std(noise, 0.6), DomainError);
}

TEST_CASE("a zero noise estimate interpolates") {
    const TimeGrid g(0.0, 0.1, 40);
    std::vector<double> v(40, 0.0);
    v[10] = 1.0;
    v[11] = 2.0;
    const SmoothResult s = smooth(Flux(g, v));
    CHECK(s.smoothing_factor == 0.0);
    CHECK(s.smoothed.values == v);
}

TEST_CASE("explicit factors") {
    const Flux f = add_noise(standard_flux(200), 0.05, 2);
    CHECK_THROWS_AS(smooth(f, -1.0), DomainError);
    CHECK(smooth(f, 0.0).smoothed.values == f.values);

    // huge penalty leaves the least-squares line
    const SmoothResult line = smooth(f, 1e12);
    const auto t = f.grid.times();
    const double tm = mean(t), ym = mean(f.values);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        sxy += (t[i] - tm) * (f.values[i] - ym);
        sxx += (t[i] - tm) * (t[i] - tm);
    }
    const double slope = sxy / sxx;
    for (std::size_t i = 0; i < t.size(); ++i)
        CHECK(line.smoothed.values[i] == doctest::Approx(ym + slope * (t[i] - tm)).epsilon(1e-6).scale(1.0));
    CHECK(smoother_trace(f.values, f.grid.step(), 1e12) == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(smoother_trace(f.values, f.grid.step(), 0.0) == doctest::Approx(200.0));

    CHECK_THROWS_AS(smoothing_spline(std::vector<double>{1.0, 2.0}, 0.1, 1.0), DomainError);
    CHECK_THROWS_AS(smoothing_spline(f.values, 0.1, -1.0), DomainError);
}

TEST_CASE("hat-matrix trace matches a dense construction") {
    const std::size_t n = 30;
    const double h = 0.05;
    for (double factor : {1e-6, 1e-4, 1e-2, 1.0}) {
        CAPTURE(factor);
        // the smoother is linear: column j of S is the fit to the unit vector e_j
        Eigen::MatrixXd S(n, n);
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<double> e(n, 0.0);
            e[j] = 1.0;
            const auto col = smoothing_spline(e, h, factor);
            for (std::size_t i = 0; i < n; ++i) S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
        }
        CHECK((S - S.transpose()).cwiseAbs().maxCoeff() < 1e-10);
        const std::vector<double> any(n, 0.0);
        CHECK(smoother_trace(any, h, factor) == doctest::Approx(S.trace()).epsilon(1e-9));
    }
}
