#include "cfund/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "cfund/error.hpp"

namespace cfund {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double ez_annuity_value(const EZPreferences& prefs, double c, const MortalityTable& table) {
    prefs.validate();
    if (!(c > 0.0)) {
        // Zero consumption is the bottom of the ordering.
        return 0.0;
    }
    double z = c;
    const double one = 1.0;
    for (std::size_t step = table.size() - 1; step-- > 0;) {
        z = ez_step(prefs, c, table.one_period_survival(step), {&z, 1}, {&one, 1});
    }
    return z;
}

}  // namespace

double annuity_payout(double budget, double r, const MortalityTable& table, PricingMode mode) {
    if (!(budget > 0.0)) throw ValidationError("annuity_payout: budget must be positive");
    const std::vector<double> ones(table.size(), 1.0);
    const double factor = funding_cost(ones, r, table, mode);
    if (!(factor > 0.0) || !std::isfinite(factor)) throw PricingError("annuity_payout: zero annuity factor");
    return budget / factor;
}

double mixture_gain(const BellmanPreferences& prefs, std::span<const double> stream, const MortalityTable& table) {
    if (stream.size() < table.size()) throw ValidationError("mixture_gain: stream shorter than the mortality table");
    const double dt = table.dt();
    double s = 0.0;
    double gain = 0.0;
    if (const auto* km = std::get_if<KMPreferences>(&prefs)) {
        for (std::size_t t = 0; t < table.size(); ++t) {
            s += km->utility(stream[t], t) * dt;
            gain += table.mass(t) * -std::exp(-s);
        }
        return gain;
    }
    const auto& vnm = std::get<VNMPreferences>(prefs);
    for (std::size_t t = 0; t < table.size(); ++t) {
        s += vnm.utility(stream[t]) * dt;
        if (s == kNegInf) return kNegInf;
        gain += table.mass(t) * s;
    }
    return gain;
}

double annuity_gain(const PreferenceSpec& prefs, double c, const MortalityTable& table) {
    if (!(c >= 0.0)) throw ValidationError("annuity_gain: consumption must be non-negative");
    if (const auto* ez = std::get_if<EZPreferences>(&prefs)) return ez_annuity_value(*ez, c, table);
    const std::vector<double> stream(table.size(), c);
    if (const auto* km = std::get_if<KMPreferences>(&prefs)) return mixture_gain(*km, stream, table);
    return mixture_gain(std::get<VNMPreferences>(prefs), stream, table);
}

double annuity_equivalent(double gain, const PreferenceSpec& prefs, const MortalityTable& table, double r,
                          PricingMode mode) {
    if (std::isnan(gain)) throw PricingError("annuity_equivalent: gain is NaN");
    const double floor = annuity_gain(prefs, 0.0, table);
    if (gain < floor) throw PricingError("annuity_equivalent: gain below that of zero consumption");
    if (gain == floor) return 0.0;
    auto g = [&](double b) { return annuity_gain(prefs, annuity_payout(b, r, table, mode), table); };
    double lo = 0.0;
    double hi = 1.0;
    while (g(hi) < gain) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw PricingError("annuity_equivalent: gain not attainable by any annuity");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-13 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) < gain) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double annuity_outperformance(double equivalent, double budget) {
    if (!(budget > 0.0)) throw ValidationError("annuity_outperformance: budget must be positive");
    return equivalent / budget - 1.0;
}

ConsumptionPaths simulate_consumption(const ControlPolicy& policy, const MarketParams& mp, const MortalityTable& table,
                                      FundKind kind, double x0, const ShockMatrix& shocks, std::uint64_t seed) {
    mp.validate();
    if (!(x0 > 0.0)) throw ValidationError("simulate_consumption: x0 must be positive");
    const std::size_t T = table.size();
    if (shocks.steps() < T) throw ValidationError("simulate_consumption: shock matrix shorter than the table");
    const double dt = table.dt();
    const bool finite = kind.type == FundKind::Type::CollectiveFinite;
    const std::size_t n_alive_inf = std::numeric_limits<std::size_t>::max();

    ConsumptionPaths out;
    out.n_paths = shocks.paths();
    out.n_steps = T;
    out.consumption.assign(out.n_paths * T, 0.0);
    out.alive_weight.assign(out.n_paths * T, 0.0);
    std::size_t clamped = 0;
    std::size_t overspent = 0;

#pragma omp parallel for schedule(static) reduction(+ : clamped, overspent)
    for (std::size_t p = 0; p < out.n_paths; ++p) {
        std::mt19937_64 deaths = substream(seed, static_cast<std::uint64_t>(Stream::OtherDeaths), p);
        double x = x0;
        std::size_t n = finite ? kind.n : (kind.type == FundKind::Type::Individual ? 1 : n_alive_inf);
        for (std::size_t t = 0; t < T; ++t) {
            const Control c = policy.control(t, x, n);
            if (c.clamped) ++clamped;
            double gamma = std::max(c.gamma, 0.0);
            if (gamma * dt > x * (1.0 + 1e-9)) {
                ++overspent;
                gamma = x / dt;
            }
            out.consumption[p * T + t] = gamma;
            out.alive_weight[p * T + t] = table.survival_at(t);
            const double s = table.one_period_survival(t);
            if (t + 1 == T || s <= 0.0) break;
            const double y = std::max(x - gamma * dt, 0.0);
            const double r = gross_return(mp, c.pi, dt, shocks(p, t));
            switch (kind.type) {
                case FundKind::Type::Individual:
                    x = y * r;
                    break;
                case FundKind::Type::CollectiveInfinite:
                    x = y * r / s;
                    break;
                case FundKind::Type::CollectiveFinite: {
                    std::binomial_distribution<std::size_t> others(n - 1, s);
                    const std::size_t b = n > 1 ? others(deaths) : 0;
                    x = y * r * static_cast<double>(n) / static_cast<double>(b + 1);
                    n = b + 1;
                    break;
                }
            }
        }
    }
    out.clamped = clamped;
    out.overspent = overspent;
    return out;
}

McEstimate mc_gain(const ControlPolicy& policy, const BellmanPreferences& prefs, const MarketParams& mp,
                   const MortalityTable& table, FundKind kind, double x0, std::size_t n_paths, std::uint64_t seed) {
    if (n_paths < 1) throw ValidationError("mc_gain: need at least one path");
    const ShockMatrix shocks(seed, n_paths, table.size());
    const ConsumptionPaths paths = simulate_consumption(policy, mp, table, kind, x0, shocks, seed);
    std::vector<double> g(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) g[p] = mixture_gain(prefs, paths.path(p), table);

    McEstimate est;
    est.paths = n_paths;
    est.clamped = paths.clamped;
    est.overspent = paths.overspent;
    double sum = 0.0;
    for (double v : g) sum += v;
    est.mean = sum / static_cast<double>(n_paths);
    if (n_paths > 1 && std::isfinite(est.mean)) {
        double ss = 0.0;
        for (double v : g) ss += (v - est.mean) * (v - est.mean);
        est.se = std::sqrt(ss / static_cast<double>(n_paths - 1) / static_cast<double>(n_paths));
    }
    return est;
}

double percentile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw ValidationError("percentile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("percentile: q must lie in [0, 1]");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= sorted.size()) return sorted.back();
    const double f = pos - static_cast<double>(i);
    return sorted[i] + f * (sorted[i + 1] - sorted[i]);
}

FanStatistics fan_statistics(const ConsumptionPaths& paths) {
    if (paths.n_paths < 2) throw ValidationError("fan_statistics: need at least two paths");
    FanStatistics fan;
    const std::size_t T = paths.n_steps;
    fan.p5.resize(T);
    fan.p50.resize(T);
    fan.p95.resize(T);
    fan.sample.resize(T);
    fan.count.resize(T);
    std::vector<double> col;
    col.reserve(paths.n_paths);
    for (std::size_t t = 0; t < T; ++t) {
        col.clear();
        for (std::size_t p = 0; p < paths.n_paths; ++p) {
            if (paths.alive_weight[p * T + t] > 0.0) col.push_back(paths.at(p, t));
        }
        fan.sample[t] = paths.at(0, t);
        fan.count[t] = col.size();
        if (col.empty()) {
            fan.p5[t] = fan.p50[t] = fan.p95[t] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        std::sort(col.begin(), col.end());
        fan.p5[t] = percentile(col, 0.05);
        fan.p50[t] = percentile(col, 0.50);
        fan.p95[t] = percentile(col, 0.95);
    }
    return fan;
}

}  // namespace cfund
