#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>

#include <boost/math/tools/minima.hpp>

namespace cfund {

struct Maximum {
    double x = 0.0;
    double value = -std::numeric_limits<double>::infinity();
};

inline double finite_or_lowest(double v) {
    return std::isnan(v) || v == -std::numeric_limits<double>::infinity() ? std::numeric_limits<double>::lowest() : v;
}

// Brent refinement of f on [lo, hi]; returns the refined point only when it
// beats `incumbent`.
template <class F>
Maximum refine_brent(F&& f, double lo, double hi, Maximum incumbent) {
    if (!(hi > lo)) return incumbent;
    std::uintmax_t iters = 200;
    auto neg = [&](double x) { return -finite_or_lowest(f(x)); };
    const auto [x, nv] = boost::math::tools::brent_find_minima(neg, lo, hi, 40, iters);
    const double v = f(x);
    if (v > incumbent.value) return {x, v};
    return incumbent;
}

// Maximise f over [lo, hi]: evaluate n_scan equally spaced points, then run
// Brent on the bracket around the best one. Ties keep the smallest x.
template <class F>
Maximum maximize_scan_brent(F&& f, double lo, double hi, std::size_t n_scan) {
    if (!(hi > lo) || n_scan < 2) {
        return {lo, f(lo)};
    }
    const double step = (hi - lo) / static_cast<double>(n_scan - 1);
    Maximum best{lo, f(lo)};
    std::size_t best_i = 0;
    for (std::size_t i = 1; i < n_scan; ++i) {
        const double x = i + 1 == n_scan ? hi : lo + step * static_cast<double>(i);
        const double v = f(x);
        if (v > best.value) {
            best = {x, v};
            best_i = i;
        }
    }
    if (best.value == -std::numeric_limits<double>::infinity()) return {lo, best.value};
    const double a = best_i == 0 ? lo : lo + step * static_cast<double>(best_i - 1);
    const double b = best_i + 1 >= n_scan ? hi : lo + step * static_cast<double>(best_i + 1);
    return refine_brent(f, a, b, best);
}

}  // namespace cfund
