#pragma once

#include "teak/flux.hpp"
#include "teak/simulator.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace teak::testing {

inline Flux gamma_flux(double alpha, double beta, double t_end, std::size_t count, double area = 1.0,
                       double offset = 0.0) {
    TimeGrid grid(0.0, t_end / static_cast<double>(count - 1), count);
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = area * gamma_pdf(grid.at(i), {alpha, beta}) + offset;
    return Flux(grid, std::move(v));
}

inline Flux standard_flux(std::size_t count = 1001, double t_end = 3.0) {
    return gamma_flux(1.5, 1.0 / 3.0, t_end, count);
}

inline Flux add_noise(const Flux& f, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma);
    std::vector<double> v(f.values);
    for (auto& x : v) x += n(rng);
    return f.with_values(std::move(v));
}

inline double max_of(const std::vector<double>& v) {
    double m = v.front();
    for (double x : v) m = std::max(m, x);
    return m;
}

/// Small reactor grid for fast unit tests.
inline SimScenario quick_reactor() {
    SimScenario s;
    s.grid_points_space = 100;
    s.grid_points_time = 600;
    s.self_check = false;
    return s;
}

} // namespace teak::testing
