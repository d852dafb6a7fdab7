#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cfund {

// Monotone cubic Hermite interpolant on a uniform grid. Slopes come from
// fourth-order finite differences and are then limited so that monotone data
// stay monotone between nodes. Queries are in index coordinates
// u = (x - x0) / h and clamp to the end values outside [0, n-1].
class UniformHermite {
public:
    UniformHermite() = default;
    explicit UniformHermite(std::span<const double> values);

    std::size_t size() const { return values_.size(); }
    double at(double u) const;
    std::span<const double> values() const { return values_; }

private:
    std::vector<double> values_;
    std::vector<double> slopes_;  // derivative per unit index
};

// Piecewise-linear interpolation on a uniform grid in index coordinates,
// clamped at both ends.
double linear_at(std::span<const double> values, double u);

}  // namespace cfund
