#include "cfund/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "cfund/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cfund {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string header(const Scenario& sc, const std::string& columns) {
    return "# seed=" + std::to_string(sc.config.seed) + "\n" + columns + "\n";
}

BellmanPreferences bellman(const Scenario& sc) {
    if (const auto* km = std::get_if<KMPreferences>(&sc.prefs)) return *km;
    if (const auto* v = std::get_if<VNMPreferences>(&sc.prefs)) return *v;
    throw ConfigError("epstein-zin preferences have no grid solver; use individual or collective funds");
}

}  // namespace

Scenario build_scenario(const RunConfig& cfg) {
    cfg.validate();
    Scenario sc{cfg,
                truncate_tail(load_mortality_csv(cfg.mortality_path()), cfg.mortality_truncation),
                {},
                {cfg.r, cfg.mu, cfg.sigma},
                0.0,
                0.0,
                VNMPreferences{},
                {},
                {}};
    sc.market.validate();
    sc.schedules = Schedules::for_table(cfg.sp0, cfg.r_tl, cfg.total_adequacy, sc.table);
    sc.x_al = funding_cost(sc.schedules.funded_adequacy_levels(), cfg.r, sc.table, cfg.x_al_mode);
    sc.x0 = cfg.x0 > 0.0 ? cfg.x0 : cfg.x0_multiple * sc.x_al;
    if (!(sc.x0 > 0.0)) throw ConfigError("config: budget is zero");

    if (cfg.family == "km") {
        sc.prefs = KMPreferences{cfg.rho, calibrate_a(cfg.lambda, cfg.rho, sc.schedules), sc.schedules};
    } else if (cfg.family == "vnm") {
        sc.prefs = VNMPreferences{cfg.rho};
    } else {
        sc.prefs = EZPreferences{cfg.ez_alpha, cfg.ez_rho, cfg.ez_beta};
    }

    sc.grid = GridConfig::around(sc.x0, cfg.grid_low_factor, cfg.grid_high_factor);
    sc.grid.n_wealth = cfg.grid_n_wealth;
    sc.grid.spacing = cfg.grid_spacing == "linear" ? Spacing::Linear : Spacing::Log;
    sc.grid.n_consumption = cfg.grid_n_consumption;
    sc.grid.n_pi = cfg.grid_n_pi;
    sc.grid.pi_low = cfg.pi_low;
    sc.grid.pi_high = cfg.pi_high;
    sc.grid.quadrature_K = cfg.quadrature_k;
    sc.grid.n_max = cfg.n_max;
    sc.grid.validate();
    sc.homogeneous = {cfg.quadrature_k, cfg.pi_low, cfg.pi_high, cfg.grid_n_consumption};
    return sc;
}

FundKind fund_kind_from(const RunConfig& cfg, const std::string& name) {
    if (name == "individual") return FundKind::individual();
    if (name == "collective") return FundKind::infinite();
    if (name == "finite") return FundKind::finite(cfg.fund_n).resolved(cfg.n_max);
    throw ConfigError("unknown fund kind '" + name + "'");
}

FundSolution solve_fund(const Scenario& sc, const std::string& name) {
    FundSolution out;
    out.label = name;
    if (name == "annuity") {
        const double c = annuity_payout(sc.x0, sc.config.r, sc.table, sc.config.annuity_mode);
        out.kind = FundKind::infinite();
        out.gain = annuity_gain(sc.prefs, c, sc.table);
        out.policy = std::make_shared<ConstantStrategy>(c, 0.0);
        return out;
    }
    out.kind = fund_kind_from(sc.config, name);
    if (const auto* ez = std::get_if<EZPreferences>(&sc.prefs)) {
        auto sched = std::make_shared<HomogeneousSchedule>(
            solve_ez_homogeneous(*ez, sc.market, sc.table, out.kind, sc.homogeneous));
        out.gain = sched->k().front() * sc.x0;
        out.policy = sched;
        return out;
    }
    auto sol = std::make_shared<KmSolution>(solve_km(bellman(sc), sc.market, sc.table, out.kind, sc.grid));
    out.gain = sol->value.gain(0, sc.x0, out.kind.type == FundKind::Type::CollectiveFinite ? out.kind.n : 1);
    out.warnings = sol->diagnostics.warnings;
    out.grid_solution = sol;
    out.policy = std::shared_ptr<const ControlPolicy>(sol, &sol->policy);
    return out;
}

std::vector<CompareRow> run_compare(const Scenario& sc) {
    std::vector<CompareRow> rows;
    for (const std::string name : {"annuity", "individual", "collective"}) {
        const FundSolution sol = solve_fund(sc, name);
        CompareRow row;
        row.fund_kind = name;
        row.gain = sol.gain;
        // The annuity bought with the budget is its own equivalent.
        row.annuity_equivalent = name == std::string("annuity")
                                     ? sc.x0
                                     : annuity_equivalent(sol.gain, sc.prefs, sc.table, sc.config.r, sc.config.annuity_mode);
        row.outperformance = annuity_outperformance(row.annuity_equivalent, sc.x0);
        rows.push_back(row);
    }
    return rows;
}

std::vector<FanResult> run_fan(const Scenario& sc, std::size_t n_paths) {
    const ShockMatrix shocks(sc.config.seed, n_paths, sc.table.size());
    std::vector<FanResult> out;
    for (const std::string& name : sc.config.fan_kinds) {
        const FundSolution sol = solve_fund(sc, name);
        const ConsumptionPaths paths =
            simulate_consumption(*sol.policy, sc.market, sc.table, sol.kind, sc.x0, shocks, sc.config.seed);
        out.push_back({name, fan_statistics(paths)});
    }
    return out;
}

HeteroReport run_hetero(const Scenario& sc, std::size_t n_sims) {
    const RunConfig& cfg = sc.config;
    PopulationSpec spec;
    spec.n = cfg.population_n;
    spec.power_low = cfg.population_power_low;
    spec.power_high = cfg.population_power_high;
    spec.wealth_low = cfg.population_wealth_low;
    spec.wealth_high = cfg.population_wealth_high;
    spec.age_low = cfg.population_age_low;
    spec.age_high = cfg.population_age_high;
    spec.sex_split = cfg.population_sex_split;
    spec.seed = cfg.seed;
    GompertzPopulation g;
    g.A = cfg.gompertz_a;
    g.B = cfg.gompertz_b;
    g.c = cfg.gompertz_c;
    g.male_ratio = cfg.gompertz_male_ratio;
    g.truncation = cfg.mortality_truncation;
    const PopulationTables tables = gompertz_population_tables(g, spec.age_low, spec.age_high);

    HeteroReport rep;
    rep.members = generate_population(spec, tables);
    PolicyCache cache(sc.market, sc.homogeneous, sc.grid, cfg.n_max);
    HeteroOptions opt;
    opt.n_sims = n_sims;
    opt.seed = cfg.seed;
    opt.estimator = cfg.hetero_estimator == "plain" ? HeteroEstimator::Plain : HeteroEstimator::ControlVariate;
    rep.result = run_hetero_mc(rep.members, cache, sc.market, opt);
    rep.ratio.resize(rep.members.size());
    for (std::size_t i = 0; i < rep.members.size(); ++i) {
        rep.ratio[i] = optimality_ratio(rep.result.u_S[i], rep.result.u_1[i], rep.result.u_inf[i]);
    }
    rep.bins = histogram(rep.ratio, cfg.histogram_bin_width);
    return rep;
}

EvaluationRow run_evaluate(const Scenario& sc, std::size_t n_paths) {
    const FundSolution sol = solve_fund(sc, sc.config.fund_kind);
    EvaluationRow row;
    row.fund_kind = sol.kind.label();
    row.dp_gain = sol.gain;
    row.mc = mc_gain(*sol.policy, bellman(sc), sc.market, sc.table, sol.kind, sc.x0, n_paths, sc.config.seed);
    return row;
}

std::string policy_csv(const Scenario& sc, const FundSolution& sol) {
    const bool finite = sol.kind.type == FundKind::Type::CollectiveFinite;
    std::string out = header(sc, finite ? "t,x,n,gamma,pi,W" : "t,x,gamma,pi,W");
    if (sol.grid_solution) {
        const KmSolution& s = *sol.grid_solution;
        const WealthGrid& grid = s.policy.grid();
        for (std::size_t t = 0; t < s.policy.steps(); ++t) {
            for (std::size_t layer = 0; layer < sol.kind.layers(); ++layer) {
                for (std::size_t j = 0; j < grid.size(); ++j) {
                    out += num(sc.table.time(t)) + "," + num(grid.node(j)) + ",";
                    if (finite) out += std::to_string(layer + 1) + ",";
                    out += num(s.policy.gamma_at_node(t, layer, j)) + "," + num(s.policy.pi_at_node(t, layer, j)) + "," +
                           num(s.value.gain_at_node(t, layer, j)) + "\n";
                }
            }
        }
        return out;
    }
    const auto* sched = dynamic_cast<const HomogeneousSchedule*>(sol.policy.get());
    if (sched == nullptr) throw ConfigError("policy output needs a solved fund");
    const WealthGrid grid(sc.grid);
    for (std::size_t t = 0; t < sched->steps(); ++t) {
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const double x = grid.node(j);
            const Control c = sched->control(t, x, 1);
            out += num(sc.table.time(t)) + "," + num(x) + "," + num(c.gamma) + "," + num(c.pi) + "," +
                   num(sched->k()[t] * x) + "\n";
        }
    }
    return out;
}

std::string metrics_csv(const Scenario& sc, const std::vector<CompareRow>& rows) {
    std::string out = header(sc, "fund_kind,annuity_equivalent,outperformance");
    for (const auto& r : rows) out += r.fund_kind + "," + num(r.annuity_equivalent) + "," + num(r.outperformance) + "\n";
    return out;
}

std::string fan_csv(const Scenario& sc, const FanStatistics& fan) {
    std::string out = header(sc, "t,p5,p50,p95,sample");
    for (std::size_t t = 0; t < fan.p50.size(); ++t) {
        out += num(sc.table.time(t)) + "," + num(fan.p5[t]) + "," + num(fan.p50[t]) + "," + num(fan.p95[t]) + "," +
               num(fan.sample[t]) + "\n";
    }
    return out;
}

std::string fan_reference_csv(const Scenario& sc) {
    const double c = annuity_payout(sc.x0, sc.config.r, sc.table, sc.config.annuity_mode);
    std::string out = header(sc, "t,adequacy,annuity");
    for (std::size_t t = 0; t < sc.table.size(); ++t) {
        out += num(sc.table.time(t)) + "," + num(sc.schedules.funded_adequacy(t)) + "," + num(c) + "\n";
    }
    return out;
}

std::string hetero_report_csv(const Scenario& sc, const HeteroReport& rep) {
    std::string out = header(sc, "member_id,u_S,u_1,u_inf,OR");
    for (std::size_t i = 0; i < rep.members.size(); ++i) {
        out += std::to_string(rep.members[i].id) + "," + num(rep.result.u_S[i]) + "," + num(rep.result.u_1[i]) + "," +
               num(rep.result.u_inf[i]) + "," + num(rep.ratio[i]) + "\n";
    }
    return out;
}

std::string histogram_csv(const Scenario& sc, const std::vector<HistogramBin>& bins) {
    std::string out = header(sc, "bin_low,bin_high,count");
    for (const auto& b : bins) out += num(b.low) + "," + num(b.high) + "," + std::to_string(b.count) + "\n";
    return out;
}

std::string evaluation_csv(const Scenario& sc, const EvaluationRow& row) {
    std::string out = header(sc, "fund_kind,dp_gain,mc_gain,mc_se,paths,clamped");
    out += row.fund_kind + "," + num(row.dp_gain) + "," + num(row.mc.mean) + "," + num(row.mc.se) + "," +
           std::to_string(row.mc.paths) + "," + std::to_string(row.mc.clamped) + "\n";
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void configure_threads() {
#ifdef _OPENMP
    if (const char* env = std::getenv("COLLECTIVE_FUND_THREADS"); env != nullptr) {
        const int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
#endif
}

}  // namespace cfund
