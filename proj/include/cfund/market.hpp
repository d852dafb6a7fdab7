#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace cfund {

// Real-terms Black-Scholes-Merton market: a bond growing at r and one
// geometric Brownian motion stock with drift mu and volatility sigma.
struct MarketParams {
    double r = 0.027;
    double mu = 0.062;
    double sigma = 0.15;

    void validate() const;
};

struct LogReturn {
    double mean;
    double sd;
};

// Log of the gross return over dt of a portfolio continuously rebalanced to
// hold the fraction pi in the stock.
LogReturn log_return_params(const MarketParams& mp, double pi, double dt);

double gross_return(const MarketParams& mp, double pi, double dt, double shock);

// Nodes and weights for E[f(xi)], xi ~ N(0, 1).
struct NormalRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

NormalRule gauss_hermite_rule(std::size_t K);

struct ReturnQuadrature {
    std::vector<double> nodes;    // gross returns
    std::vector<double> weights;  // probabilities

    double expectation() const;
};

// Gauss-Hermite discretisation of the one-period gross return. A degenerate
// (zero-volatility) return collapses to a single node.
ReturnQuadrature return_nodes(const MarketParams& mp, double pi, double dt, std::size_t K);

// Independent random substream for (seed, stream, index). Path i of a shock
// matrix uses index i, so its draws do not depend on how many paths exist.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

enum class Stream : std::uint64_t {
    MarketShocks = 1,
    OtherDeaths = 2,
    MemberDeaths = 3,
    Population = 4,
};

// Standard normal draws indexed (path, step).
class ShockMatrix {
public:
    ShockMatrix(std::uint64_t seed, std::size_t n_paths, std::size_t n_steps);

    std::uint64_t seed() const { return seed_; }
    std::size_t paths() const { return n_paths_; }
    std::size_t steps() const { return n_steps_; }

    double operator()(std::size_t path, std::size_t step) const { return data_[path * n_steps_ + step]; }
    std::span<const double> path(std::size_t p) const { return {data_.data() + p * n_steps_, n_steps_}; }

    friend bool operator==(const ShockMatrix&, const ShockMatrix&) = default;

private:
    std::uint64_t seed_;
    std::size_t n_paths_;
    std::size_t n_steps_;
    std::vector<double> data_;
};

ShockMatrix simulate_shocks(std::uint64_t seed, std::size_t n_paths, std::size_t n_steps);

}  // namespace cfund
