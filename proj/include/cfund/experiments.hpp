#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cfund/config.hpp"
#include "cfund/dp.hpp"
#include "cfund/eval.hpp"
#include "cfund/pool.hpp"

namespace cfund {

// Everything derived from a RunConfig before any solve: the mortality table,
// schedules, calibrated preferences and the budget.
struct Scenario {
    RunConfig config;
    MortalityTable table;
    Schedules schedules;
    MarketParams market;
    double x_al = 0.0;
    double x0 = 0.0;
    PreferenceSpec prefs;
    GridConfig grid;
    HomogeneousOptions homogeneous;
};

Scenario build_scenario(const RunConfig& cfg);

// "annuity", "individual", "collective" or "finite" (uses fund_n).
FundKind fund_kind_from(const RunConfig& cfg, const std::string& name);

struct FundSolution {
    std::string label;
    FundKind kind;  // dynamics used when simulating the strategy
    double gain = 0.0;
    std::shared_ptr<const ControlPolicy> policy;
    std::shared_ptr<const KmSolution> grid_solution;  // set for grid solves
    std::vector<std::string> warnings;
};

FundSolution solve_fund(const Scenario& sc, const std::string& name);

struct CompareRow {
    std::string fund_kind;
    double gain = 0.0;
    double annuity_equivalent = 0.0;
    double outperformance = 0.0;
};

std::vector<CompareRow> run_compare(const Scenario& sc);

struct FanResult {
    std::string kind;
    FanStatistics stats;
};

std::vector<FanResult> run_fan(const Scenario& sc, std::size_t n_paths);

struct HeteroReport {
    std::vector<Member> members;
    HeteroResult result;
    std::vector<double> ratio;
    std::vector<HistogramBin> bins;
};

HeteroReport run_hetero(const Scenario& sc, std::size_t n_sims);

struct EvaluationRow {
    std::string fund_kind;
    double dp_gain = 0.0;
    McEstimate mc;
};

EvaluationRow run_evaluate(const Scenario& sc, std::size_t n_paths);

// CSV bodies; each starts with a `# seed=N` comment and a header row.
std::string policy_csv(const Scenario& sc, const FundSolution& sol);
std::string metrics_csv(const Scenario& sc, const std::vector<CompareRow>& rows);
std::string fan_csv(const Scenario& sc, const FanStatistics& fan);
std::string fan_reference_csv(const Scenario& sc);
std::string hetero_report_csv(const Scenario& sc, const HeteroReport& report);
std::string histogram_csv(const Scenario& sc, const std::vector<HistogramBin>& bins);
std::string evaluation_csv(const Scenario& sc, const EvaluationRow& row);

// Writes through a temporary file and renames it into place.
void write_file(const std::filesystem::path& path, const std::string& content);

// Applies COLLECTIVE_FUND_THREADS (0 or unset = runtime default).
void configure_threads();

}  // namespace cfund
