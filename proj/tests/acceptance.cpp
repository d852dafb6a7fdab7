// Acceptance checks AC1..AC9. Each prints one PASS/FAIL line; with arguments
// only the named checks run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cfund/config.hpp"
#include "cfund/dp.hpp"
#include "cfund/error.hpp"
#include "cfund/eval.hpp"
#include "cfund/experiments.hpp"
#include "cfund/pool.hpp"
#include "cfund/prefs.hpp"

using namespace cfund;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome ac1() {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg;
    cfg.paths = 10000;
    const Scenario sc = build_scenario(cfg);
    const auto rows = run_compare(sc);
    double annuity = NAN, individual = NAN, collective = NAN;
    for (const auto& row : rows) {
        if (row.fund_kind == "annuity") annuity = row.outperformance;
        if (row.fund_kind == "individual") individual = row.outperformance;
        if (row.fund_kind == "collective") collective = row.outperformance;
    }
    const double elapsed = seconds_since(t0);
    const bool pass = collective >= 0.15 && collective <= 0.25 && individual >= 0.0 && individual <= 0.04 &&
                      annuity == 0.0 && elapsed < 600.0;
    return {pass, fmt("collective %+.2f%% in [15,25], individual %+.2f%% in [0,4], annuity %+.4f%%, %.1fs",
                      100 * collective, 100 * individual, 100 * annuity, elapsed)};
}

Outcome ac2() {
    RunConfig cfg;
    const Scenario sc = build_scenario(cfg);
    const auto& prefs = std::get<KMPreferences>(sc.prefs);
    const KmSolution finite = solve_km(prefs, sc.market, sc.table, FundKind::finite(50), sc.grid);
    const KmSolution infinite = solve_km(prefs, sc.market, sc.table, FundKind::infinite(), sc.grid);

    const std::size_t sizes[] = {1, 2, 5, 10, 50};
    std::vector<double> values;
    for (std::size_t n : sizes) values.push_back(finite.value.gain(0, sc.x0, n));
    values.push_back(infinite.value.gain(0, sc.x0, 1));

    double worst_gap = INFINITY;
    for (std::size_t i = 1; i < values.size(); ++i) worst_gap = std::min(worst_gap, values[i] - values[i - 1]);
    const double payout = annuity_payout(sc.x0, sc.config.r, sc.table, sc.config.annuity_mode);
    const double best_annuity = annuity_gain(prefs, payout, sc.table);
    const double margin = values.back() - best_annuity;
    const bool pass = worst_gap >= -1e-6 && margin > 1e-4;
    return {pass, fmt("n=1,2,5,10,50,inf: %.6f %.6f %.6f %.6f %.6f %.6f; min gap %.3g >= -1e-6; "
                      "collective - annuity %.6f > 1e-4",
                      values[0], values[1], values[2], values[3], values[4], values[5], worst_gap, margin)};
}

Outcome ac3() {
    std::mt19937_64 rng(20190701);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const MarketParams mp;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const double m0 = 0.02 + 0.3 * U(rng);
        const MortalityTable table = MortalityTable::from_masses(1.0, {m0, 1.0 - m0});
        const double sp0 = 2000.0 + 6000.0 * U(rng);
        const double total = sp0 + 2000.0 + 12000.0 * U(rng);
        const Schedules sched = Schedules::for_table(sp0, 0.027, total, table);
        const double rho = -2.0 + 1.5 * U(rng);
        const double lambda = 0.5 + 2.5 * U(rng);
        const KMPreferences prefs{rho, calibrate_a(lambda, rho, sched), sched};
        const double x0 = (0.5 + 1.5 * U(rng)) * funding_cost(sched.funded_adequacy_levels(), mp.r, table,
                                                              PricingMode::DeterministicTerm);
        FundKind kind = FundKind::individual();
        switch (trial % 3) {
            case 1: kind = FundKind::infinite(); break;
            case 2: kind = FundKind::finite(2 + static_cast<std::size_t>(8 * U(rng))); break;
            default: break;
        }

        OracleInstance inst;
        inst.prefs = prefs;
        inst.market = mp;
        inst.table = table;
        inst.kind = kind;
        inst.x0 = x0;
        inst.quadrature_K = 3;
        const double oracle = brute_force_oracle(inst);

        GridConfig grid = GridConfig::around(x0, 1.0 / 64.0, 64.0);
        grid.n_wealth = 401;
        grid.quadrature_K = 3;
        const KmSolution sol = solve_km(prefs, mp, table, kind, grid);
        const double dp = sol.value.gain_at_node(0, kind.layers() - 1, 200);
        worst = std::max(worst, std::abs(dp - oracle));
    }

    RunConfig cfg;
    const Scenario sc = build_scenario(cfg);
    const auto& prefs = std::get<KMPreferences>(sc.prefs);
    const double payout = annuity_payout(sc.x0, sc.config.r, sc.table, PricingMode::FairLife);
    const PolicyEvaluation ev = evaluate_policy(ConstantStrategy(payout, 0.0), prefs, sc.market, sc.table,
                                                FundKind::infinite(), sc.grid, sc.x0);
    double direct = 0.0;
    double s = 0.0;
    for (std::size_t t = 0; t < sc.table.size(); ++t) {
        s += prefs.utility(payout, t) * sc.table.dt();
        direct -= sc.table.mass(t) * std::exp(-s);
    }
    const double annuity_err = std::abs(ev.value.gain(0, sc.x0, 1) - direct);
    const bool pass = worst <= 1e-6 && annuity_err <= 1e-9;
    return {pass, fmt("max |dp - oracle| %.3g <= 1e-6 over 20 instances; constant annuity |dp - direct| %.3g <= 1e-9",
                      worst, annuity_err)};
}

Outcome ac4() {
    RunConfig cfg;
    const Scenario sc = build_scenario(cfg);
    const Schedules& sched = sc.schedules;
    double worst = 0.0;
    for (double rho : {-2.0, -1.0, -0.5}) {
        for (double lambda : {0.5, 1.0, 50.0}) {
            const KMPreferences prefs{rho, calibrate_a(lambda, rho, sched), sched};
            auto S = [&](double eps) {
                double total = 0.0;
                for (std::size_t t = 0; t < sched.n_steps; ++t) {
                    total += prefs.utility((1.0 + eps) * sched.funded_adequacy(t), t) * sched.dt;
                }
                return total;
            };
            // Richardson-extrapolated central differences.
            const double h = 1e-3;
            const double d1 = (S(h) - S(-h)) / (2 * h);
            const double d2 = (S(h / 2) - S(-h / 2)) / h;
            const double derivative = (4 * d2 - d1) / 3;
            worst = std::max(worst, std::abs(derivative / lambda - 1.0));
        }
    }
    return {worst <= 1e-6, fmt("max relative error %.3g <= 1e-6 over rho {-2,-1,-0.5} x lambda {0.5,1,50}", worst)};
}

Outcome ac5() {
    RunConfig cfg;
    const Scenario sc = build_scenario(cfg);
    double worst_c = 0.0;
    for (double rho : {-2.0, -1.0, -0.5}) {
        const EZPreferences ez{rho, rho, 1.0};
        const VnmHomogeneous vnm = solve_vnm_homogeneous(VNMPreferences{rho}, sc.market, sc.table, 1, sc.homogeneous);
        const struct {
            FundKind kind;
            std::size_t n;
        } cases[] = {{FundKind::individual(), 1}, {FundKind::infinite(), VnmHomogeneous::kInfinite}};
        for (const auto& c : cases) {
            const HomogeneousSchedule sched = solve_ez_homogeneous(ez, sc.market, sc.table, c.kind, sc.homogeneous);
            for (std::size_t t = 0; t < sched.steps(); ++t) {
                worst_c = std::max(worst_c,
                                   std::abs(sched.consumption_fraction()[t] - vnm.consumption_fraction(t, c.n)));
            }
        }
    }

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.1, 10.0);
    double worst_h = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const EZPreferences ez{-1.5 + 1.0 * U(rng) / 10.0, -2.0 + U(rng) / 10.0, 0.9 + U(rng) / 100.0};
        std::vector<double> stream(30);
        for (double& g : stream) g = U(rng);
        const double scale = U(rng);
        std::vector<double> scaled(stream);
        for (double& g : scaled) g *= scale;
        const double z = ez_deterministic_value(ez, stream);
        worst_h = std::max(worst_h, std::abs(ez_deterministic_value(ez, scaled) / (scale * z) - 1.0));
    }
    const bool pass = worst_c <= 1e-4 && worst_h <= 1e-13;
    return {pass, fmt("max |c_EZ - c_vNM| %.3g <= 1e-4; homogeneity relative error %.3g <= 1e-13", worst_c, worst_h)};
}

Outcome ac6() {
    RunConfig cfg;
    cfg.lambda = 50.0;
    cfg.x0_multiple = 2.0;
    cfg.fan_kinds = {"collective"};
    const Scenario sc = build_scenario(cfg);
    const auto fans = run_fan(sc, 10000);
    const FanStatistics& fan = fans.front().stats;
    const double payout = annuity_payout(sc.x0, sc.config.r, sc.table, sc.config.annuity_mode);
    const bool start_ok = fan.p50[0] > 1.5 * payout;

    double worst = 0.0;
    std::size_t worst_t = 0;
    for (std::size_t t = 0; t < sc.schedules.n_steps; ++t) {
        const double level = sc.schedules.adequacy(t);
        if (sc.table.time(t) < 5.0 || level <= 0.0 || fan.count[t] == 0) continue;
        const double dev = std::abs(fan.p50[t] / level - 1.0);
        if (dev > worst) {
            worst = dev;
            worst_t = t;
        }
    }
    const bool pass = start_ok && worst <= 0.05;
    return {pass, fmt("median at t=0 %.0f vs 1.5 x payout %.0f; max |median/AL - 1| for t>=5 is %.2f%% (t=%zu) <= 5%%",
                      fan.p50[0], 1.5 * payout, 100 * worst, worst_t)};
}

Outcome ac7() {
    RunConfig cfg;
    cfg.family = "vnm";
    const Scenario sc = build_scenario(cfg);
    const HeteroReport rep = run_hetero(sc, 10000);
    std::size_t good = 0, above = 0;
    double lo = INFINITY, hi = -INFINITY;
    for (double r : rep.ratio) {
        if (r >= 0.95) ++good;
        if (r > 1.05) ++above;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    const double share = static_cast<double>(good) / static_cast<double>(rep.ratio.size());
    const double cons = rep.result.max_conservation_error;
    const bool pass = share >= 0.95 && above == 0 && cons <= 1e-9;
    return {pass, fmt("%zu members, OR in [%.4f, %.4f]; share >= 0.95 is %.0f%% >= 95%%; %zu above 1.05; "
                      "conservation %.3g <= 1e-9",
                      rep.ratio.size(), lo, hi, 100 * share, above, cons)};
}

Outcome ac8() {
    RunConfig cfg;
    double worst = 0.0;
    for (const std::string family : {"km", "vnm", "ez"}) {
        cfg.family = family;
        const Scenario sc = build_scenario(cfg);
        for (double m : {0.5, 1.0, 2.0}) {
            const double b = m * sc.x_al;
            const double gain = annuity_gain(sc.prefs, annuity_payout(b, sc.config.r, sc.table, sc.config.annuity_mode),
                                             sc.table);
            const double back = annuity_equivalent(gain, sc.prefs, sc.table, sc.config.r, sc.config.annuity_mode);
            worst = std::max(worst, std::abs(back / b - 1.0));
        }
    }
    return {worst <= 1e-3, fmt("max relative error %.3g <= 1e-3 for b in {0.5,1,2} X_AL, km/vnm/ez", worst)};
}

Outcome ac9() {
    RunConfig cfg;
    cfg.x_al_mode = PricingMode::DeterministicTerm;
    const Scenario sc = build_scenario(cfg);
    const double err = sc.x_al / 126636.0 - 1.0;
    return {std::abs(err) <= 0.02, fmt("deterministic-term X_AL %.2f vs 126636 (%+.2f%%, tolerance 2%%)", sc.x_al,
                                       100 * err)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
        {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
        {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9},
    };
    std::vector<std::string> wanted(argv + 1, argv + argc);
    int failures = 0;
    for (const auto& [name, check] : checks) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
        Outcome out;
        try {
            out = check();
        } catch (const std::exception& e) {
            out = {false, std::string("error: ") + e.what()};
        }
        std::printf("%s %s  %s\n", name.c_str(), out.pass ? "PASS" : "FAIL", out.detail.c_str());
        std::fflush(stdout);
        if (!out.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
