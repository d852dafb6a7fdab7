#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cfund/dp.hpp"
#include "cfund/market.hpp"
#include "cfund/mortality.hpp"
#include "cfund/prefs.hpp"

namespace cfund {

// Level payment per year bought by `budget`.
double annuity_payout(double budget, double r, const MortalityTable& table, PricingMode mode);

// Expected gain of consuming c per year until death: E[-exp(-s)] for KM,
// E[sum u dt] for vNM and Z_0 for Epstein-Zin.
double annuity_gain(const PreferenceSpec& prefs, double c, const MortalityTable& table);

// Gain of a consumption stream mixed exactly over the death time: the stream
// is consumed up to and including the death step.
double mixture_gain(const BellmanPreferences& prefs, std::span<const double> stream, const MortalityTable& table);

// Budget of the annuity whose gain equals `gain`.
double annuity_equivalent(double gain, const PreferenceSpec& prefs, const MortalityTable& table, double r,
                          PricingMode mode);

double annuity_outperformance(double equivalent, double budget);

// Consumption of the member under a policy, conditional on the member being
// alive. For finite funds the other members' deaths are sampled.
struct ConsumptionPaths {
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::vector<double> consumption;   // [path * n_steps + step]
    std::vector<double> alive_weight;  // P(member alive at step) on that path
    std::size_t clamped = 0;
    std::size_t overspent = 0;

    double at(std::size_t path, std::size_t step) const { return consumption[path * n_steps + step]; }
    std::span<const double> path(std::size_t p) const { return {consumption.data() + p * n_steps, n_steps}; }
};

ConsumptionPaths simulate_consumption(const ControlPolicy& policy, const MarketParams& mp, const MortalityTable& table,
                                      FundKind kind, double x0, const ShockMatrix& shocks, std::uint64_t seed);

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t paths = 0;
    std::size_t clamped = 0;
    std::size_t overspent = 0;
};

McEstimate mc_gain(const ControlPolicy& policy, const BellmanPreferences& prefs, const MarketParams& mp,
                   const MortalityTable& table, FundKind kind, double x0, std::size_t n_paths, std::uint64_t seed);

struct FanStatistics {
    std::vector<double> p5;
    std::vector<double> p50;
    std::vector<double> p95;
    std::vector<double> sample;
    std::vector<std::size_t> count;
};

// Linear interpolation between order statistics at position q (n - 1).
double percentile(std::span<const double> sorted, double q);

FanStatistics fan_statistics(const ConsumptionPaths& paths);

}  // namespace cfund
