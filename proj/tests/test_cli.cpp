#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cfund/config.hpp"
#include "cfund/error.hpp"
#include "cfund/experiments.hpp"

using namespace cfund;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("cfund_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& body) {
    std::ofstream out(p);
    out << body;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + CFUND_CLI + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmall =
    "grid_n_wealth = 80\n"
    "grid_n_consumption = 21\n"
    "mortality_truncation = 0.01\n";

}  // namespace

TEST_CASE("resolved config reads back identically", "[cli]") {
    std::istringstream in("lambda = 3.25\nseed = 99\nfan_kinds = individual,collective\nx_al_mode = deterministic_term\n");
    const RunConfig cfg = parse_config(in, {});
    CHECK(cfg.lambda == 3.25);
    CHECK(cfg.seed == 99);
    CHECK(cfg.fan_kinds.size() == 2);
    CHECK(cfg.x_al_mode == PricingMode::DeterministicTerm);
    const std::string text = resolved_config(cfg);
    std::istringstream again(text);
    CHECK(resolved_config(parse_config(again, {})) == text);

    RunConfig odd;
    odd.gompertz_c = 1.0 / 3.0;
    odd.r = 0.1 + 0.2;
    std::istringstream third(resolved_config(odd));
    const RunConfig back = parse_config(third, {});
    CHECK(back.gompertz_c == odd.gompertz_c);
    CHECK(back.r == odd.r);
}

TEST_CASE("config errors", "[cli]") {
    std::istringstream unknown("lamda = 2\n");
    CHECK_THROWS_AS(parse_config(unknown, {}), ConfigError);
    std::istringstream repeated("seed = 1\nseed = 2\n");
    CHECK_THROWS_AS(parse_config(repeated, {}), ConfigError);
    std::istringstream no_eq("seed 1\n");
    CHECK_THROWS_AS(parse_config(no_eq, {}), ConfigError);
    std::istringstream bad_value("sigma = fast\n");
    CHECK_THROWS_AS(parse_config(bad_value, {}), ConfigError);
    std::istringstream bad_range("sigma = -0.2\n");
    CHECK_THROWS(parse_config(bad_range, {}));
    std::istringstream comments("# header\n\nrho = -2 # trailing\n");
    CHECK(parse_config(comments, {}).rho == -2.0);
    CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), IoError);
}

TEST_CASE("default scenario", "[cli]") {
    const Scenario sc = build_scenario(RunConfig{});
    CHECK_THAT(sc.x_al, Catch::Matchers::WithinRel(126645.0697, 1e-8));
    CHECK(sc.x0 == sc.x_al);
    CHECK(std::holds_alternative<KMPreferences>(sc.prefs));
    RunConfig term;
    term.x_al_mode = PricingMode::DeterministicTerm;
    CHECK_THAT(build_scenario(term).x_al, Catch::Matchers::WithinRel(150414.8316, 1e-8));
}

TEST_CASE("exit codes", "[cli]") {
    const fs::path dir = scratch("exit");
    CHECK(run_cli("--config /nonexistent/run.cfg compare --out-dir " + dir.string()) == 4);
    write(dir / "bad.cfg", "no_such_key = 1\n");
    CHECK(run_cli("--config " + (dir / "bad.cfg").string() + " compare --out-dir " + dir.string()) == 2);
    write(dir / "range.cfg", "lambda = -1\n");
    CHECK(run_cli("--config " + (dir / "range.cfg").string() + " compare --out-dir " + dir.string()) == 2);
    write(dir / "missing_table.cfg", "mortality_file = nothing.csv\n");
    CHECK(run_cli("--config " + (dir / "missing_table.cfg").string() + " compare --out-dir " + dir.string()) == 4);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(!fs::exists(dir / "metrics.csv"));
}

TEST_CASE("compare writes metrics and a reusable resolved config", "[cli]") {
    const fs::path dir = scratch("compare");
    write(dir / "run.cfg", kSmall);
    REQUIRE(run_cli("--config " + (dir / "run.cfg").string() + " compare --out-dir " + dir.string()) == 0);
    const std::string metrics = slurp(dir / "metrics.csv");
    CHECK(metrics.rfind("# seed=20190701\n", 0) == 0);
    CHECK(metrics.find("annuity,") != std::string::npos);
    CHECK(metrics.find("collective,") != std::string::npos);

    const fs::path again = dir / "again";
    fs::create_directories(again);
    REQUIRE(run_cli("--config " + (dir / "resolved_config.txt").string() + " compare --out-dir " + again.string()) == 0);
    CHECK(slurp(again / "metrics.csv") == metrics);
    CHECK(slurp(again / "resolved_config.txt") == slurp(dir / "resolved_config.txt"));
}

TEST_CASE("fan output is byte-identical for a fixed seed", "[cli]") {
    const fs::path a = scratch("fan_a");
    const fs::path b = scratch("fan_b");
    write(a / "run.cfg", kSmall);
    const std::string args = "--config " + (a / "run.cfg").string() + " fan --paths 300 --seed 17 --out-dir ";
    REQUIRE(run_cli(args + a.string()) == 0);
    REQUIRE(run_cli(args + b.string()) == 0);
    for (const char* f : {"fan_annuity.csv", "fan_individual.csv", "fan_collective.csv", "fan_reference.csv"}) {
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK(slurp(a / f).rfind("# seed=17\n", 0) == 0);
    }
}

TEST_CASE("hetero output does not depend on the thread count", "[cli]") {
    const fs::path a = scratch("het_a");
    const fs::path b = scratch("het_b");
    write(a / "run.cfg", "population_n = 6\nfamily = vnm\n");
    const std::string args = "--config " + (a / "run.cfg").string() + " hetero --sims 130 --out-dir ";
    REQUIRE(run_cli(args + a.string(), "COLLECTIVE_FUND_THREADS=1") == 0);
    REQUIRE(run_cli(args + b.string(), "COLLECTIVE_FUND_THREADS=3") == 0);
    CHECK(slurp(a / "hetero_report.csv") == slurp(b / "hetero_report.csv"));
    CHECK(slurp(a / "hetero_histogram.csv") == slurp(b / "hetero_histogram.csv"));
}
