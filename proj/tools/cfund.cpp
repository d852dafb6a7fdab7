// Command-line front end: solve, compare, fan, hetero and evaluate runs over a
// flat key = value configuration.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "cfund/config.hpp"
#include "cfund/error.hpp"
#include "cfund/experiments.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kSolver = 3, kIo = 4 };

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::optional<std::size_t> paths;
    std::optional<std::size_t> sims;
};

cfund::Scenario scenario_from(const Flags& f) {
    cfund::RunConfig cfg = f.config.empty() ? cfund::RunConfig{} : cfund::load_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (f.paths) cfg.paths = *f.paths;
    if (f.sims) cfg.sims = *f.sims;
    cfg.validate();
    return cfund::build_scenario(cfg);
}

void warn_all(const cfund::FundSolution& sol) {
    for (const auto& w : sol.warnings) std::cerr << "warning (" << sol.label << "): " << w << "\n";
}

int run(const std::string& cmd, const Flags& f) {
    const cfund::Scenario sc = scenario_from(f);
    const std::filesystem::path out(f.out_dir);
    const std::string resolved = cfund::resolved_config(sc.config);

    if (cmd == "solve") {
        const cfund::FundSolution sol = cfund::solve_fund(sc, sc.config.fund_kind);
        warn_all(sol);
        const std::string csv = cfund::policy_csv(sc, sol);
        cfund::write_file(out / "resolved_config.txt", resolved);
        cfund::write_file(out / "policy.csv", csv);
        std::printf("%s: gain at x0=%.2f is %.10g\n", sol.kind.label().c_str(), sc.x0, sol.gain);
    } else if (cmd == "compare") {
        const auto rows = cfund::run_compare(sc);
        const std::string csv = cfund::metrics_csv(sc, rows);
        cfund::write_file(out / "resolved_config.txt", resolved);
        cfund::write_file(out / "metrics.csv", csv);
        std::printf("X_AL = %.2f, budget = %.2f\n", sc.x_al, sc.x0);
        for (const auto& r : rows) {
            std::printf("%-11s equivalent %12.2f  outperformance %+7.2f%%\n", r.fund_kind.c_str(), r.annuity_equivalent,
                        100.0 * r.outperformance);
        }
    } else if (cmd == "fan") {
        const auto fans = cfund::run_fan(sc, sc.config.paths);
        std::vector<std::pair<std::string, std::string>> files;
        for (const auto& fan : fans) files.emplace_back("fan_" + fan.kind + ".csv", cfund::fan_csv(sc, fan.stats));
        files.emplace_back("fan_reference.csv", cfund::fan_reference_csv(sc));
        cfund::write_file(out / "resolved_config.txt", resolved);
        for (const auto& [name, body] : files) cfund::write_file(out / name, body);
        std::printf("wrote %zu fan files to %s\n", files.size(), out.string().c_str());
    } else if (cmd == "hetero") {
        const auto rep = cfund::run_hetero(sc, sc.config.sims);
        const std::string report = cfund::hetero_report_csv(sc, rep);
        const std::string hist = cfund::histogram_csv(sc, rep.bins);
        cfund::write_file(out / "resolved_config.txt", resolved);
        cfund::write_file(out / "hetero_report.csv", report);
        cfund::write_file(out / "hetero_histogram.csv", hist);
        std::size_t above = 0;
        for (double r : rep.ratio) above += r >= 0.95 ? 1 : 0;
        std::printf("%zu members, %zu simulations: %zu with OR >= 0.95; max conservation error %.3g\n",
                    rep.members.size(), rep.result.simulations, above, rep.result.max_conservation_error);
        if (rep.result.unallocated > 0.0) std::fprintf(stderr, "unallocated estates: %.6g\n", rep.result.unallocated);
        if (rep.result.equal_split_events > 0) {
            std::fprintf(stderr, "estates split equally in %zu steps\n", rep.result.equal_split_events);
        }
    } else if (cmd == "evaluate") {
        const auto row = cfund::run_evaluate(sc, sc.config.paths);
        const std::string csv = cfund::evaluation_csv(sc, row);
        cfund::write_file(out / "resolved_config.txt", resolved);
        cfund::write_file(out / "evaluation.csv", csv);
        std::printf("%s: dp %.10g, mc %.10g +- %.3g (%zu paths)\n", row.fund_kind.c_str(), row.dp_gain, row.mc.mean,
                    row.mc.se, row.mc.paths);
        if (row.mc.clamped > 0) std::fprintf(stderr, "%zu policy lookups clamped to the grid\n", row.mc.clamped);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Consumption and investment in individual and collective pension funds"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags flags;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    std::size_t sims = 0;
    app.add_option("--config", flags.config, "key = value configuration file");
    auto* seed_opt = app.add_option("--seed", seed, "random seed");
    app.add_option("--out-dir", flags.out_dir, "directory for CSV output");
    auto* paths_opt = app.add_option("--paths", paths, "Monte Carlo paths");
    auto* sims_opt = app.add_option("--sims", sims, "heterogeneous fund simulations");

    std::string cmd;
    for (const char* name : {"solve", "compare", "fan", "hetero", "evaluate"}) {
        app.add_subcommand(name)->callback([&cmd, name] { cmd = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }
    if (*seed_opt) flags.seed = seed;
    if (*paths_opt) flags.paths = paths;
    if (*sims_opt) flags.sims = sims;

    cfund::configure_threads();
    try {
        return run(cmd, flags);
    } catch (const cfund::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const cfund::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const cfund::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const cfund::ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const cfund::Error& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kSolver;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    }
}
