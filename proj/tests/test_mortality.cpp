#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "cfund/config.hpp"
#include "cfund/error.hpp"
#include "cfund/mortality.hpp"

using namespace cfund;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("masses are normalised and trailing zeros dropped", "[mortality]") {
    const auto t = MortalityTable::from_masses(0.5, {1.0, 2.0, 1.0, 0.0, 0.0});
    REQUIRE(t.size() == 3);
    CHECK(t.horizon() == 1.5);
    CHECK_THAT(t.mass(1), WithinAbs(0.5, 1e-15));
    CHECK(t.survival_at(0) == 1.0);
    CHECK_THAT(t.survival_at(2), WithinAbs(0.25, 1e-15));
    CHECK(t.survival_at(3) == 0.0);
    CHECK_THAT(t.one_period_survival(1), WithinAbs(0.25 / 0.75, 1e-15));
    CHECK(t.one_period_survival(2) == 0.0);
    CHECK_THAT(t.expected_death_time(), WithinAbs(0.5 * 0.5 + 1.0 * 0.25, 1e-15));
}

TEST_CASE("one-period survivals multiply to the survival function", "[mortality]") {
    const auto t = gompertz_makeham_table(0.0005, 0.01, std::exp(0.09), 1.0, 50.0);
    double s = 1.0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        s *= t.one_period_survival(i);
        CHECK_THAT(s, WithinRel(t.survival_at(i + 1), 1e-12));
    }
}

TEST_CASE("survival at real times", "[mortality]") {
    const auto t = MortalityTable::from_masses(1.0, {0.25, 0.25, 0.5});
    CHECK(t.survival(0.0) == 1.0);
    CHECK_THAT(t.survival(1.0), WithinAbs(0.75, 1e-15));
    CHECK_THAT(t.survival(1.5), WithinAbs(0.5, 1e-15));
    CHECK(t.survival(3.0) == 0.0);
    CHECK_THROWS_AS(t.survival(3.5), DomainError);
    CHECK_THROWS_AS(t.survival(-0.1), DomainError);
}

TEST_CASE("invalid masses are rejected", "[mortality]") {
    CHECK_THROWS_AS(MortalityTable::from_masses(1.0, {}), ValidationError);
    CHECK_THROWS_AS(MortalityTable::from_masses(1.0, {0.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(MortalityTable::from_masses(1.0, {0.5, -0.1}), ValidationError);
    CHECK_THROWS_AS(MortalityTable::from_masses(1.0, {0.5, NAN}), ValidationError);
    CHECK_THROWS_AS(MortalityTable::from_masses(0.0, {1.0}), ValidationError);
}

TEST_CASE("csv parsing", "[mortality]") {
    std::istringstream ok("# comment\nt,p\n0,0.2\n\n1,0.3\n2,0.5\n");
    const auto t = parse_mortality_csv(ok);
    CHECK(t.size() == 3);
    CHECK(t.dt() == 1.0);

    std::istringstream bad_header("time,p\n0,1\n1,1\n");
    CHECK_THROWS_AS(parse_mortality_csv(bad_header), ParseError);

    std::istringstream bad_number("t,p\n0,0.5\n1,abc\n");
    try {
        parse_mortality_csv(bad_number);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }

    std::istringstream uneven("t,p\n0,0.5\n1,0.2\n3,0.3\n");
    CHECK_THROWS_AS(parse_mortality_csv(uneven), ValidationError);
    std::istringstream offset("t,p\n1,0.5\n2,0.5\n");
    CHECK_THROWS_AS(parse_mortality_csv(offset), ValidationError);
    CHECK_THROWS_AS(load_mortality_csv("/nonexistent/table.csv"), IoError);
}

TEST_CASE("bundled table", "[mortality]") {
    const auto t = load_mortality_csv(data_dir() / "cmi2018f_15.csv");
    CHECK(t.size() == 52);
    CHECK(t.dt() == 1.0);
    CHECK_THAT(t.expected_death_time(), WithinAbs(22.51058115920972, 1e-10));
}

TEST_CASE("tail truncation keeps the mass", "[mortality]") {
    const auto t = gompertz_makeham_table(0.0003, 0.00697, std::exp(0.1), 1.0, 80.0);
    const auto cut = truncate_tail(t, 1e-3);
    REQUIRE(cut.size() < t.size());
    CHECK(cut.survival_at(cut.size() - 1) >= 1e-3);
    double total = 0.0;
    for (double m : cut.masses()) total += m;
    CHECK_THAT(total, WithinAbs(1.0, 1e-14));
    for (std::size_t i = 0; i < cut.size(); ++i) CHECK_THAT(cut.survival_at(i), WithinRel(t.survival_at(i), 1e-13));
}

TEST_CASE("constant hazard gives geometric masses", "[mortality]") {
    const double A = 0.05;
    const auto t = gompertz_makeham_table(A, 0.0, 1.0, 1.0, 30.0);
    REQUIRE(t.size() == 30);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        CHECK_THAT(t.mass(i), WithinRel(std::exp(-A * i) * (1.0 - std::exp(-A)), 1e-12));
    }
    CHECK_THAT(t.mass(29), WithinRel(std::exp(-A * 29), 1e-12));
}
