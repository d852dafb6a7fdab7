#include "cfund/interp.hpp"

#include <algorithm>
#include <cmath>

#include "cfund/error.hpp"

namespace cfund {

namespace {

std::vector<double> raw_slopes(std::span<const double> f) {
    const std::size_t n = f.size();
    std::vector<double> d(n, 0.0);
    if (n == 2) {
        d[0] = d[1] = f[1] - f[0];
        return d;
    }
    if (n < 5) {
        d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / 2.0;
        d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / 2.0;
        for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / 2.0;
        return d;
    }
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / 12.0;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / 12.0;
    for (std::size_t i = 2; i + 2 < n; ++i) d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / 12.0;
    d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / 12.0;
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) / 12.0;
    return d;
}

// Clip d into the monotone region allowed by the neighbouring secants.
double limit(double d, double left, double right) {
    if (left * right <= 0.0) return 0.0;
    if (d * left <= 0.0) return 0.0;
    const double bound = 3.0 * std::min(std::abs(left), std::abs(right));
    return std::copysign(std::min(std::abs(d), bound), d);
}

}  // namespace

UniformHermite::UniformHermite(std::span<const double> values) : values_(values.begin(), values.end()) {
    if (values_.size() < 2) throw ValidationError("interpolation needs at least two nodes");
    for (double v : values_) {
        if (!std::isfinite(v)) throw ValidationError("interpolation of non-finite values");
    }
    slopes_ = raw_slopes(values_);
    const std::size_t n = values_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double left = i > 0 ? values_[i] - values_[i - 1] : values_[1] - values_[0];
        const double right = i + 1 < n ? values_[i + 1] - values_[i] : values_[n - 1] - values_[n - 2];
        slopes_[i] = limit(slopes_[i], left, right);
    }
}

double UniformHermite::at(double u) const {
    const std::size_t n = values_.size();
    if (!(u > 0.0)) return values_.front();
    if (u >= static_cast<double>(n - 1)) return values_.back();
    const auto i = static_cast<std::size_t>(u);
    const double t = u - static_cast<double>(i);
    const double t2 = t * t;
    const double s = 1.0 - t;
    const double h00 = (1.0 + 2.0 * t) * s * s;
    const double h10 = t * s * s;
    const double h01 = t2 * (3.0 - 2.0 * t);
    const double h11 = -t2 * s;
    return h00 * values_[i] + h10 * slopes_[i] + h01 * values_[i + 1] + h11 * slopes_[i + 1];
}

double linear_at(std::span<const double> values, double u) {
    const std::size_t n = values.size();
    if (!(u > 0.0)) return values.front();
    if (u >= static_cast<double>(n - 1)) return values.back();
    const auto i = static_cast<std::size_t>(u);
    const double t = u - static_cast<double>(i);
    return values[i] + t * (values[i + 1] - values[i]);
}

}  // namespace cfund
