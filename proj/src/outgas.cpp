#include "teak/outgas.hpp"

#include "teak/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace teak {

namespace {

struct Pass {
    std::vector<double> t;
    std::vector<double> p;
    std::vector<bool> flagged;
};

Pass run_pass(std::span<const double> x, std::size_t w, double alpha, const std::vector<bool>& masked) {
    const std::size_t n = x.size();
    const std::size_t want = 2 * w;
    Pass out{std::vector<double>(n), std::vector<double>(n), std::vector<bool>(n, false)};
    std::vector<std::size_t> window;
    for (std::size_t i = 0; i < n; ++i) {
        window.clear();
        // w unmasked on each side, topping up from the other side near the ends
        std::size_t left = i, right = i;
        std::size_t nl = 0, nr = 0;
        auto take_left = [&]() {
            while (left > 0) {
                --left;
                if (!masked[left]) {
                    window.push_back(left);
                    ++nl;
                    return true;
                }
            }
            return false;
        };
        auto take_right = [&]() {
            while (right + 1 < n) {
                ++right;
                if (!masked[right]) {
                    window.push_back(right);
                    ++nr;
                    return true;
                }
            }
            return false;
        };
        while (nl < w && take_left()) {}
        while (nr < w && take_right()) {}
        while (window.size() < want && (take_left() || take_right())) {}

        const std::size_t m = window.size();
        if (m < 2) {
            out.t[i] = 0.0;
            out.p[i] = 1.0;
            continue;
        }
        double mean = 0.0;
        for (auto j : window) mean += x[j];
        mean /= static_cast<double>(m);
        double ss = 0.0;
        for (auto j : window) ss += (x[j] - mean) * (x[j] - mean);
        const double s = std::sqrt(ss / static_cast<double>(m - 1));
        const double diff = x[i] - mean;
        // exact ties with a flat window are not evidence of anything
        const double tol = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(mean);
        double t;
        if (s <= tol) {
            t = diff > tol ? std::numeric_limits<double>::infinity()
                           : (diff < -tol ? -std::numeric_limits<double>::infinity() : 0.0);
        } else {
            t = diff / (s * std::sqrt(1.0 + 1.0 / static_cast<double>(m)));
        }
        double p;
        if (std::isinf(t)) {
            p = t > 0 ? 0.0 : 1.0;
        } else {
            const boost::math::students_t dist(static_cast<double>(m - 1));
            p = boost::math::cdf(boost::math::complement(dist, t));
        }
        out.t[i] = t;
        out.p[i] = p;
        out.flagged[i] = p < alpha;
    }
    return out;
}

} // namespace

OutgasReport detect_outgas(std::span<const double> m0_series, std::size_t window_half_width, double significance) {
    const std::size_t n = m0_series.size();
    if (window_half_width == 0) throw DomainError("outgas: window half-width must be >= 1");
    if (n < 2 * window_half_width + 3)
        throw DomainError("outgas: series of " + std::to_string(n) + " is shorter than 2w + 3 = " +
                          std::to_string(2 * window_half_width + 3));
    if (!(significance > 0.0 && significance < 1.0)) throw DomainError("outgas: significance must lie in (0, 1)");
    for (double v : m0_series)
        if (!std::isfinite(v)) throw DomainError("outgas: series contains non-finite values");

    const Pass first = run_pass(m0_series, window_half_width, significance, std::vector<bool>(n, false));
    const Pass second = run_pass(m0_series, window_half_width, significance, first.flagged);

    OutgasReport r;
    r.window_half_width = window_half_width;
    r.significance = significance;
    r.t_statistics = second.t;
    r.p_values = second.p;
    for (std::size_t i = 0; i < n; ++i)
        if (second.flagged[i]) r.flagged_indices.push_back(i);
    return r;
}

} // namespace teak
