#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cfund/dp.hpp"
#include "cfund/error.hpp"
#include "cfund/eval.hpp"

using namespace cfund;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

MortalityTable small_table() { return gompertz_makeham_table(0.002, 0.02, 1.1, 1.0, 10.0); }

KMPreferences km_for(const MortalityTable& table, double lambda = 1.0) {
    const Schedules s = Schedules::for_table(6718.0, 0.027, 16800.0, table);
    return {-1.0, calibrate_a(lambda, -1.0, s), s};
}

}  // namespace

TEST_CASE("annuity payout prices back to the budget", "[eval]") {
    const MortalityTable t = small_table();
    for (PricingMode mode : {PricingMode::FairLife, PricingMode::DeterministicTerm}) {
        const double c = annuity_payout(50000.0, 0.027, t, mode);
        const std::vector<double> level(t.size(), c);
        CHECK_THAT(funding_cost(level, 0.027, t, mode), WithinRel(50000.0, 1e-14));
    }
    CHECK(annuity_payout(1.0, 0.027, t, PricingMode::FairLife) > annuity_payout(1.0, 0.027, t, PricingMode::DeterministicTerm));
    CHECK_THROWS_AS(annuity_payout(0.0, 0.027, t, PricingMode::FairLife), ValidationError);
}

TEST_CASE("mixture gain sums over the death time", "[eval]") {
    const auto t = MortalityTable::from_masses(1.0, {0.5, 0.5});
    const std::vector<double> stream{2.0, 4.0};
    const double expected = 0.5 * (-0.5) + 0.5 * (-0.5 - 0.25);
    CHECK_THAT(mixture_gain(VNMPreferences{-1.0}, stream, t), WithinAbs(expected, 1e-15));
    const std::vector<double> short_stream{1.0};
    CHECK_THROWS_AS(mixture_gain(VNMPreferences{-1.0}, short_stream, t), ValidationError);
}

TEST_CASE("annuity equivalent inverts the annuity gain", "[eval]") {
    const MortalityTable t = small_table();
    const KMPreferences km = km_for(t);
    for (double b : {1000.0, 80000.0, 400000.0}) {
        const double g = annuity_gain(km, annuity_payout(b, 0.027, t, PricingMode::FairLife), t);
        CHECK_THAT(annuity_equivalent(g, km, t, 0.027, PricingMode::FairLife), WithinRel(b, 1e-9));
    }
    CHECK_THROWS_AS(annuity_equivalent(NAN, km, t, 0.027, PricingMode::FairLife), PricingError);
    const double floor = annuity_gain(km, 0.0, t);
    CHECK_THROWS_AS(annuity_equivalent(floor - 1.0, km, t, 0.027, PricingMode::FairLife), PricingError);
    CHECK_THROWS_AS(annuity_equivalent(0.5, km, t, 0.027, PricingMode::FairLife), PricingError);
    CHECK(annuity_outperformance(110.0, 100.0) == Catch::Approx(0.1));
}

TEST_CASE("percentiles", "[eval]") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0, 5.0};
    CHECK(percentile(v, 0.0) == 1.0);
    CHECK(percentile(v, 1.0) == 5.0);
    CHECK(percentile(v, 0.5) == 3.0);
    CHECK_THAT(percentile(v, 0.05), WithinAbs(1.2, 1e-15));
    CHECK_THROWS_AS(percentile(std::vector<double>{}, 0.5), ValidationError);
}

TEST_CASE("fan statistics skip dead paths", "[eval]") {
    ConsumptionPaths p;
    p.n_paths = 3;
    p.n_steps = 2;
    p.consumption = {1.0, 10.0, 2.0, 20.0, 3.0, 0.0};
    p.alive_weight = {1.0, 1.0, 1.0, 0.5, 1.0, 0.0};
    const FanStatistics f = fan_statistics(p);
    CHECK(f.count[0] == 3);
    CHECK(f.count[1] == 2);
    CHECK(f.p50[0] == 2.0);
    CHECK(f.p50[1] == 15.0);
    CHECK(f.sample[1] == 10.0);
}

TEST_CASE("simulated annuity in an infinite fund is deterministic", "[eval]") {
    const MortalityTable t = small_table();
    const KMPreferences km = km_for(t);
    const double x0 = 90000.0;
    const double c = annuity_payout(x0, 0.027, t, PricingMode::FairLife);
    const McEstimate mc = mc_gain(ConstantStrategy(c, 0.0), km, MarketParams{}, t, FundKind::infinite(), x0, 200, 3);
    CHECK_THAT(mc.mean, WithinRel(annuity_gain(km, c, t), 1e-12));
    CHECK(mc.se < 1e-12);
    CHECK(mc.overspent == 0);
}

TEST_CASE("Monte Carlo agrees with the grid value", "[eval]") {
    const MortalityTable t = small_table();
    const KMPreferences km = km_for(t);
    const MarketParams mp;
    const double x0 = 60000.0;
    GridConfig grid = GridConfig::around(x0);
    grid.n_wealth = 200;
    for (const FundKind kind : {FundKind::individual(), FundKind::finite(5), FundKind::infinite()}) {
        const KmSolution sol = solve_km(km, mp, t, kind, grid);
        const double dp = sol.value.gain(0, x0, kind.layers());
        const McEstimate mc = mc_gain(sol.policy, km, mp, t, kind, x0, 20000, 11);
        CHECK(std::abs(mc.mean - dp) < 4.0 * mc.se + 1e-4 * std::abs(dp));
    }
}

TEST_CASE("consumption paths are reproducible", "[eval]") {
    const MortalityTable t = small_table();
    const KMPreferences km = km_for(t);
    GridConfig grid = GridConfig::around(60000.0);
    grid.n_wealth = 100;
    const KmSolution sol = solve_km(km, MarketParams{}, t, FundKind::finite(3), grid);
    const ShockMatrix shocks = simulate_shocks(5, 50, t.size());
    const auto a = simulate_consumption(sol.policy, MarketParams{}, t, FundKind::finite(3), 60000.0, shocks, 5);
    const auto b = simulate_consumption(sol.policy, MarketParams{}, t, FundKind::finite(3), 60000.0, shocks, 5);
    CHECK(a.consumption == b.consumption);
    CHECK(a.alive_weight == b.alive_weight);
    CHECK(a.alive_weight[0] == 1.0);
}
