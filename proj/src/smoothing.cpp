#include "teak/smoothing.hpp"

#include "teak/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace teak {

namespace {

// LDL^T of a symmetric positive-definite pentadiagonal matrix. diag has m
// entries, off1[i] = A(i, i+1), off2[i] = A(i, i+2).
struct PentaLdl {
    std::vector<double> l1, l2, d;

    PentaLdl(const std::vector<double>& diag, const std::vector<double>& off1, const std::vector<double>& off2) {
        const std::size_t m = diag.size();
        l1.assign(m, 0.0);
        l2.assign(m, 0.0);
        d.assign(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            double di = diag[i];
            if (i >= 2) {
                l2[i] = off2[i - 2] / d[i - 2];
                di -= l2[i] * l2[i] * d[i - 2];
            }
            if (i >= 1) {
                double num = off1[i - 1];
                if (i >= 2) num -= l2[i] * d[i - 2] * l1[i - 1];
                l1[i] = num / d[i - 1];
                di -= l1[i] * l1[i] * d[i - 1];
            }
            if (!(di > 0.0)) throw ConvergenceError("smoothing spline system lost positive definiteness");
            d[i] = di;
        }
    }

    void solve(std::vector<double>& rhs) const {
        const std::size_t m = d.size();
        for (std::size_t i = 0; i < m; ++i) {
            if (i >= 1) rhs[i] -= l1[i] * rhs[i - 1];
            if (i >= 2) rhs[i] -= l2[i] * rhs[i - 2];
        }
        for (std::size_t i = 0; i < m; ++i) rhs[i] /= d[i];
        for (std::size_t k = m; k-- > 0;) {
            if (k + 1 < m) rhs[k] -= l1[k + 1] * rhs[k + 1];
            if (k + 2 < m) rhs[k] -= l2[k + 2] * rhs[k + 2];
        }
    }

    // Diagonal and first two superdiagonals of A^{-1} (Hutchinson & de Hoog recursion).
    void inverse_band(std::vector<double>& s0, std::vector<double>& s1, std::vector<double>& s2) const {
        const std::size_t m = d.size();
        s0.assign(m, 0.0);
        s1.assign(m, 0.0);
        s2.assign(m, 0.0);
        for (std::size_t i = m; i-- > 0;) {
            const double a = (i + 1 < m) ? l1[i + 1] : 0.0;
            const double b = (i + 2 < m) ? l2[i + 2] : 0.0;
            const double s11 = (i + 1 < m) ? s0[i + 1] : 0.0;
            const double s12 = (i + 1 < m) ? s1[i + 1] : 0.0;
            const double s22 = (i + 2 < m) ? s0[i + 2] : 0.0;
            s2[i] = -a * s12 - b * s22;
            s1[i] = -a * s11 - b * s12;
            s0[i] = 1.0 / d[i] - a * s1[i] - b * s2[i];
        }
    }
};

struct SplineFit {
    std::vector<double> g;
    double trace = 0.0; // trace of the hat matrix
};

SplineFit fit_spline(std::span<const double> y, double h, double factor, bool want_trace) {
    const std::size_t n = y.size();
    SplineFit out;
    if (factor == 0.0) {
        out.g.assign(y.begin(), y.end());
        out.trace = static_cast<double>(n);
        return out;
    }
    // Reinsch: (R + factor * Q^T Q) gamma = Q^T y, g = y - factor * Q gamma
    const std::size_t m = n - 2;
    const double q = factor / (h * h);
    std::vector<double> diag(m, 2.0 * h / 3.0 + 6.0 * q);
    std::vector<double> off1(m > 0 ? m - 1 : 0, h / 6.0 - 4.0 * q);
    std::vector<double> off2(m > 1 ? m - 2 : 0, q);
    const PentaLdl ldl(diag, off1, off2);
    std::vector<double> gamma(m);
    for (std::size_t j = 0; j < m; ++j) gamma[j] = (y[j] - 2.0 * y[j + 1] + y[j + 2]) / h;
    ldl.solve(gamma);

    out.g.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // (Q gamma)_i with gamma = 0 at both natural ends
        const double left = (i >= 2) ? gamma[i - 2] : 0.0;
        const double centre = (i >= 1 && i <= m) ? gamma[i - 1] : 0.0;
        const double right = (i < m) ? gamma[i] : 0.0;
        out.g[i] = y[i] - factor * (left - 2.0 * centre + right) / h;
    }
    if (want_trace) {
        // tr S = n - factor * tr(A^{-1} Q^T Q); Q^T Q has rows (1, -4, 6, -4, 1) / h^2
        std::vector<double> s0, s1, s2;
        ldl.inverse_band(s0, s1, s2);
        double t = 0.0;
        for (std::size_t j = 0; j < m; ++j) t += 6.0 * s0[j] - 8.0 * s1[j] + 2.0 * s2[j];
        out.trace = static_cast<double>(n) - q * t;
    }
    return out;
}

double median_inplace(std::vector<double>& v) {
    const std::size_t n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double upper = *mid;
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

double sum_sq(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

} // namespace

std::vector<double> smoothing_spline(std::span<const double> y, double step, double factor) {
    if (y.size() < 3) throw DomainError("smoothing spline needs at least three points");
    if (!(factor >= 0.0)) throw DomainError("smoothing factor must be nonnegative");
    return fit_spline(y, step, factor, false).g;
}

double smoother_trace(std::span<const double> y, double step, double factor) {
    if (y.size() < 3) throw DomainError("smoothing spline needs at least three points");
    if (!(factor >= 0.0)) throw DomainError("smoothing factor must be nonnegative");
    return fit_spline(y, step, factor, true).trace;
}

double estimate_noise_std(const Flux& flux, double tail_fraction) {
    if (!(tail_fraction > 0.0 && tail_fraction <= 0.5))
        throw DomainError("tail_fraction must lie in (0, 0.5]");
    const std::size_t n = flux.size();
    const auto tail = std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(tail_fraction * n)));
    const std::size_t first = n - std::min(n, tail);
    std::vector<double> diffs;
    diffs.reserve(n - first);
    for (std::size_t i = first + 1; i < n; ++i) diffs.push_back(flux.values[i] - flux.values[i - 1]);
    std::vector<double> work = diffs;
    const double med = median_inplace(work);
    for (auto& d : diffs) d = std::abs(d - med);
    const double mad = median_inplace(diffs);
    return 1.4826 * mad / std::sqrt(2.0);
}

SmoothResult smooth(const Flux& flux, std::optional<double> factor) {
    if (flux.size() < TimeGrid::kMinCount) throw DomainError("smooth: need at least 8 points");
    const double h = flux.grid.step();
    const std::size_t n = flux.size();
    double lambda = 0.0;

    if (factor) {
        if (!(*factor >= 0.0)) throw DomainError("smooth: factor must be nonnegative");
        lambda = *factor;
    } else {
        const double sigma = estimate_noise_std(flux);
        if (sigma > 0.0) {
            // GCV = N RSS / (N - tr S)^2, minimized over p = log10(lambda / h^3):
            // coarse scan, then golden section around the best grid point
            const double scale = h * h * h;
            const double nn = static_cast<double>(n);
            auto risk = [&](double p) {
                const auto fit = fit_spline(flux.values, h, scale * std::pow(10.0, p), true);
                const double dof = nn - fit.trace;
                if (!(dof > 0.5)) return std::numeric_limits<double>::infinity();
                return nn * sum_sq(flux.values, fit.g) / (dof * dof);
            };
            constexpr double p_lo = -8.0, p_hi = 14.0, p_step = 0.5;
            const int grid = static_cast<int>(std::lround((p_hi - p_lo) / p_step));
            int best = 0;
            double best_risk = risk(p_lo);
            for (int k = 1; k <= grid; ++k) {
                const double r = risk(p_lo + k * p_step);
                if (r < best_risk) {
                    best_risk = r;
                    best = k;
                }
            }
            double lo = p_lo + std::max(0, best - 1) * p_step;
            double hi = p_lo + std::min(grid, best + 1) * p_step;
            const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
            double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
            double f1 = risk(x1), f2 = risk(x2);
            for (int it = 0; it < 30; ++it) {
                if (f1 <= f2) {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - inv_phi * (hi - lo);
                    f1 = risk(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + inv_phi * (hi - lo);
                    f2 = risk(x2);
                }
            }
            lambda = scale * std::pow(10.0, 0.5 * (lo + hi));
        }
    }

    SplineFit fit = fit_spline(flux.values, h, lambda, true);
    std::vector<double> g = std::move(fit.g);
    SmoothResult out;
    out.effective_dof = fit.trace;
    out.residuals.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.residuals[i] = flux.values[i] - g[i];
    out.smoothed = flux.with_values(std::move(g));
    out.smoothing_factor = lambda;
    out.residual_std = sample_std(out.residuals);
    return out;
}

} // namespace teak
