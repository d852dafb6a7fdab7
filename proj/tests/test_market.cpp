#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "cfund/error.hpp"
#include "cfund/market.hpp"

using namespace cfund;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("three-point Gauss-Hermite rule", "[market]") {
    const NormalRule rule = gauss_hermite_rule(3);
    REQUIRE(rule.nodes.size() == 3);
    CHECK_THAT(rule.nodes[0], WithinAbs(-std::sqrt(3.0), 1e-13));
    CHECK_THAT(rule.nodes[1], WithinAbs(0.0, 1e-13));
    CHECK_THAT(rule.nodes[2], WithinAbs(std::sqrt(3.0), 1e-13));
    CHECK_THAT(rule.weights[0], WithinAbs(1.0 / 6.0, 1e-13));
    CHECK_THAT(rule.weights[1], WithinAbs(2.0 / 3.0, 1e-13));
}

TEST_CASE("Gauss-Hermite integrates normal moments exactly", "[market]") {
    for (std::size_t K : {1, 2, 5, 9, 15}) {
        const NormalRule rule = gauss_hermite_rule(K);
        double double_factorial = 1.0;
        for (std::size_t m = 0; m < 2 * K; m += 2) {
            if (m > 0) double_factorial *= static_cast<double>(m - 1);
            double even = 0.0, odd = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                even += rule.weights[k] * std::pow(rule.nodes[k], static_cast<double>(m));
                odd += rule.weights[k] * std::pow(rule.nodes[k], static_cast<double>(m + 1));
            }
            CHECK_THAT(even, WithinRel(double_factorial, 1e-11));
            CHECK_THAT(odd, WithinAbs(0.0, 1e-9 * double_factorial));
        }
    }
    CHECK_THROWS_AS(gauss_hermite_rule(0), ValidationError);
}

TEST_CASE("portfolio return moments", "[market]") {
    const MarketParams mp;
    for (double pi : {0.0, 0.3, 1.0}) {
        const ReturnQuadrature q = return_nodes(mp, pi, 1.0, 9);
        const double sum = std::accumulate(q.weights.begin(), q.weights.end(), 0.0);
        CHECK_THAT(sum, WithinAbs(1.0, 1e-14));
        CHECK_THAT(q.expectation(), WithinRel(std::exp(mp.r + pi * (mp.mu - mp.r)), 1e-12));
    }
    const ReturnQuadrature bond = return_nodes(mp, 0.0, 2.0, 9);
    REQUIRE(bond.nodes.size() == 1);
    CHECK_THAT(bond.nodes[0], WithinRel(std::exp(2.0 * mp.r), 1e-15));
}

TEST_CASE("gross return of a rebalanced portfolio", "[market]") {
    const MarketParams mp{0.02, 0.07, 0.2};
    const double pi = 0.6, dt = 0.5, z = -1.3;
    const double sd = pi * mp.sigma;
    const double expected = std::exp((mp.r + pi * (mp.mu - mp.r) - 0.5 * sd * sd) * dt + sd * std::sqrt(dt) * z);
    CHECK_THAT(gross_return(mp, pi, dt, z), WithinRel(expected, 1e-14));
}

TEST_CASE("market validation", "[market]") {
    CHECK_THROWS_AS((MarketParams{0.02, 0.05, -0.1}.validate()), ValidationError);
    CHECK_THROWS_AS((MarketParams{NAN, 0.05, 0.1}.validate()), ValidationError);
    CHECK_NOTHROW(MarketParams{}.validate());
}

TEST_CASE("shock matrices are reproducible and prefix-stable", "[market]") {
    const ShockMatrix a = simulate_shocks(42, 100, 20);
    const ShockMatrix b = simulate_shocks(42, 100, 20);
    const ShockMatrix small = simulate_shocks(42, 10, 20);
    const ShockMatrix other = simulate_shocks(43, 100, 20);
    CHECK(a == b);
    for (std::size_t p = 0; p < 10; ++p) {
        for (std::size_t t = 0; t < 20; ++t) CHECK(small(p, t) == a(p, t));
    }
    CHECK(a(0, 0) != other(0, 0));

    double mean = 0.0, var = 0.0;
    const ShockMatrix big = simulate_shocks(1, 4000, 25);
    for (std::size_t p = 0; p < big.paths(); ++p) {
        for (double z : big.path(p)) {
            mean += z;
            var += z * z;
        }
    }
    const double n = 4000.0 * 25.0;
    mean /= n;
    var = var / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("substreams differ across stream and index", "[market]") {
    auto a = substream(7, 1, 0);
    auto b = substream(7, 2, 0);
    auto c = substream(7, 1, 1);
    auto a2 = substream(7, 1, 0);
    const auto x = a();
    CHECK(x == a2());
    CHECK(x != b());
    CHECK(x != c());
}
