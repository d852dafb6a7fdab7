#include "cfund/pool.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "cfund/error.hpp"

namespace cfund {

namespace {

constexpr std::size_t kBlock = 64;

class VnmStrategy final : public MemberStrategy {
public:
    VnmStrategy(VNMPreferences prefs, VnmHomogeneous solution) : prefs_(prefs), sol_(std::move(solution)) {}

    Control control(std::size_t step, double x, std::size_t n_prime) const override {
        return sol_.control(step, x, n_prime);
    }
    Control infinite_control(std::size_t step, double x) const override {
        return sol_.control(step, x, VnmHomogeneous::kInfinite);
    }
    double value_individual(double x0) const override { return sol_.value(0, x0, 1); }
    double value_infinite(double x0) const override { return sol_.value(0, x0, VnmHomogeneous::kInfinite); }
    bool additive() const override { return true; }
    double utility(double gamma, std::size_t) const override { return prefs_.utility(gamma); }

private:
    VNMPreferences prefs_;
    VnmHomogeneous sol_;
};

class KmStrategy final : public MemberStrategy {
public:
    KmStrategy(KMPreferences prefs, KmSolution finite, KmSolution infinite, std::size_t n_max)
        : prefs_(std::move(prefs)), finite_(std::move(finite)), infinite_(std::move(infinite)), n_max_(n_max) {}

    Control control(std::size_t step, double x, std::size_t n_prime) const override {
        if (n_prime > n_max_) return infinite_control(step, x);
        return finite_.policy.control(step, x, n_prime);
    }
    Control infinite_control(std::size_t step, double x) const override { return infinite_.policy.control(step, x, 1); }
    double value_individual(double x0) const override { return finite_.value.gain(0, x0, 1); }
    double value_infinite(double x0) const override { return infinite_.value.gain(0, x0, 1); }
    bool additive() const override { return false; }
    double utility(double gamma, std::size_t step) const override { return prefs_.utility(gamma, step); }

private:
    KMPreferences prefs_;
    KmSolution finite_;
    KmSolution infinite_;
    std::size_t n_max_;
};

std::string key_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::size_t draw_death_step(std::mt19937_64& rng, const MortalityTable& table) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double u = uni(rng);
    double cum = 0.0;
    for (std::size_t t = 0; t + 1 < table.size(); ++t) {
        cum += table.mass(t);
        if (u < cum) return t;
    }
    return table.size() - 1;
}

struct BlockAccumulator {
    std::vector<double> plain;
    std::vector<double> diff;
    std::vector<std::size_t> count;
    double max_error = 0.0;
    double unallocated = 0.0;
    std::size_t equal_split = 0;
};

}  // namespace

std::string to_string(Sex s) { return s == Sex::Male ? "male" : "female"; }

FundState FundState::initial(std::span<const Member> members) {
    FundState st;
    st.wealth.resize(members.size());
    st.alive.resize(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
        st.wealth[i] = members[i].alive ? members[i].wealth : 0.0;
        st.alive[i] = members[i].alive ? 1 : 0;
        st.n_alive += members[i].alive ? 1 : 0;
    }
    return st;
}

void PopulationSpec::validate() const {
    if (n < 1) throw ValidationError("population: n must be at least 1");
    if (!(power_low <= power_high) || power_high >= 1.0 || (power_low <= 0.0 && power_high >= 0.0)) {
        throw ValidationError("population: power range must lie on one side of zero and below one");
    }
    if (!(wealth_low > 0.0) || !(wealth_low <= wealth_high)) throw ValidationError("population: invalid wealth range");
    if (age_low > age_high) throw ValidationError("population: invalid age range");
    if (!(sex_split >= 0.0 && sex_split <= 1.0)) throw ValidationError("population: sex_split must lie in [0, 1]");
    if (!(wealth_scale > 0.0)) throw ValidationError("population: wealth_scale must be positive");
}

void PopulationTables::add(Sex sex, int age, MortalityTable table) {
    tables_[{static_cast<int>(sex), age}] = std::make_shared<const MortalityTable>(std::move(table));
}

std::shared_ptr<const MortalityTable> PopulationTables::find(Sex sex, int age) const {
    const auto it = tables_.find({static_cast<int>(sex), age});
    return it == tables_.end() ? nullptr : it->second;
}

PopulationTables gompertz_population_tables(const GompertzPopulation& g, int age_low, int age_high) {
    PopulationTables out;
    for (int age = age_low; age <= age_high; ++age) {
        for (Sex sex : {Sex::Female, Sex::Male}) {
            const double b = g.B * std::pow(g.c, age - 65) * (sex == Sex::Male ? g.male_ratio : 1.0);
            out.add(sex, age, truncate_tail(gompertz_makeham_table(g.A, b, g.c, 1.0, g.horizon), g.truncation));
        }
    }
    return out;
}

std::vector<Member> generate_population(const PopulationSpec& spec, const PopulationTables& tables) {
    spec.validate();
    std::vector<Member> out;
    out.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        std::mt19937_64 rng = substream(spec.seed, static_cast<std::uint64_t>(Stream::Population), i);
        std::uniform_real_distribution<double> power(spec.power_low, spec.power_high);
        std::uniform_real_distribution<double> wealth(spec.wealth_low, spec.wealth_high);
        std::uniform_int_distribution<int> age(spec.age_low, spec.age_high);
        std::bernoulli_distribution male(spec.sex_split);
        Member m;
        m.id = i;
        m.prefs = VNMPreferences{power(rng)};
        m.wealth = wealth(rng) * spec.wealth_scale;
        m.retirement_age = age(rng);
        m.sex = male(rng) ? Sex::Male : Sex::Female;
        m.table = tables.find(m.sex, m.retirement_age);
        if (!m.table) {
            throw ConfigError("no mortality table for " + to_string(m.sex) + " retiring at " +
                              std::to_string(m.retirement_age));
        }
        out.push_back(std::move(m));
    }
    return out;
}

double contribution(double survival, double wealth_after_step) { return (1.0 - survival) * wealth_after_step; }

StepOutcome step_fund(const FundState& state, std::span<const Member> members, const PolicyLookup& policies,
                      const ReturnLookup& returns, std::span<const char> survives, std::size_t n_max) {
    const std::size_t M = members.size();
    if (state.wealth.size() != M || state.alive.size() != M || survives.size() != M) {
        throw ValidationError("step_fund: state, members and survival indicators differ in size");
    }
    const std::size_t t = state.step;
    const std::size_t n_prime = state.n_alive > n_max ? VnmHomogeneous::kInfinite : state.n_alive;

    StepOutcome out;
    out.next = state;
    out.next.step = t + 1;
    out.consumption.assign(M, 0.0);
    std::vector<double> post(M, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        if (!state.alive[i]) continue;
        const double dt = members[i].table->dt();
        const double x = state.wealth[i];
        const Control c = policies(i, t, x, n_prime);
        const double gamma = std::clamp(c.gamma, 0.0, x / dt);
        out.consumption[i] = gamma;
        post[i] = std::max(x - gamma * dt, 0.0) * returns(i, c.pi);
        total += post[i];
    }

    double estate = 0.0;
    double total_contribution = 0.0;
    std::size_t survivors = 0;
    std::vector<double> gamma_share(M, 0.0);
    for (std::size_t i = 0; i < M; ++i) {
        if (!state.alive[i]) continue;
        if (survives[i]) {
            const double s = members[i].table->one_period_survival(t);
            if (!(s > 0.0)) throw ValidationError("step_fund: member " + std::to_string(members[i].id) +
                                                  " survives beyond the end of its mortality table");
            gamma_share[i] = contribution(s, post[i]);
            total_contribution += gamma_share[i];
            ++survivors;
        } else {
            estate += post[i];
        }
    }

    out.next.n_alive = survivors;
    for (std::size_t i = 0; i < M; ++i) {
        if (!state.alive[i]) continue;
        if (!survives[i]) {
            out.next.alive[i] = 0;
            out.next.wealth[i] = 0.0;
            continue;
        }
        double share = 0.0;
        if (total_contribution > 0.0) {
            share = estate * gamma_share[i] / total_contribution;
        } else {
            share = estate / static_cast<double>(survivors);
        }
        out.next.wealth[i] = post[i] + share;
    }
    if (survivors == 0) {
        out.unallocated = estate;
    } else if (!(total_contribution > 0.0) && estate > 0.0) {
        out.equal_split = true;
    }

    double after = out.unallocated;
    for (std::size_t i = 0; i < M; ++i) after += out.next.wealth[i];
    out.conservation_error = total > 0.0 ? std::abs(after - total) / total : std::abs(after - total);
    return out;
}

PolicyCache::PolicyCache(MarketParams mp, HomogeneousOptions options, GridConfig grid_template, std::size_t n_max)
    : mp_(mp), options_(options), grid_(grid_template), n_max_(n_max) {
    mp_.validate();
    if (n_max_ < 1) throw ValidationError("policy cache: n_max must be at least 1");
}

std::size_t PolicyCache::size() const {
    const std::lock_guard lock(mutex_);
    return cache_.size();
}

std::shared_ptr<const MemberStrategy> PolicyCache::get(const Member& member) {
    if (!member.table) throw ConfigError("member " + std::to_string(member.id) + " has no mortality table");
    const std::string table_key = std::to_string(reinterpret_cast<std::uintptr_t>(member.table.get()));
    std::string key;
    if (const auto* v = std::get_if<VNMPreferences>(&member.prefs)) {
        key = "vnm|" + key_number(v->rho) + "|" + table_key;
    } else if (const auto* k = std::get_if<KMPreferences>(&member.prefs)) {
        key = "km|" + key_number(k->rho) + "|" + key_number(k->a) + "|" + key_number(k->schedules.sp0) + "|" +
              key_number(k->schedules.r_tl) + "|" + key_number(k->schedules.total_adequacy) + "|" +
              key_number(member.wealth) + "|" + table_key;
    } else {
        throw ConfigError("heterogeneous funds support power-utility and Kihlstrom-Mirman members only");
    }

    const std::lock_guard lock(mutex_);
    if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
    std::shared_ptr<const MemberStrategy> made;
    if (const auto* v = std::get_if<VNMPreferences>(&member.prefs)) {
        made = std::make_shared<VnmStrategy>(*v, solve_vnm_homogeneous(*v, mp_, *member.table, n_max_, options_));
    } else {
        const auto& k = std::get<KMPreferences>(member.prefs);
        GridConfig g = grid_;
        const double x0 = member.wealth;
        g.wealth_min = x0 * 0.01;
        g.wealth_max = x0 * 50.0;
        g.n_max = n_max_;
        made = std::make_shared<KmStrategy>(k, solve_km(k, mp_, *member.table, FundKind::finite(n_max_), g),
                                            solve_km(k, mp_, *member.table, FundKind::infinite(), g), n_max_);
    }
    cache_.emplace(key, made);
    return made;
}

HeteroResult run_hetero_mc(std::span<const Member> members, PolicyCache& cache, const MarketParams& mp,
                           const HeteroOptions& options) {
    const std::size_t M = members.size();
    if (M == 0) throw ValidationError("run_hetero_mc: empty population");
    if (options.n_sims < 1) throw ValidationError("run_hetero_mc: need at least one simulation");
    mp.validate();

    std::vector<std::shared_ptr<const MemberStrategy>> strategies(M);
    std::size_t T = 0;
    for (std::size_t i = 0; i < M; ++i) {
        strategies[i] = cache.get(members[i]);
        T = std::max(T, members[i].table->size());
    }
    const bool use_cv = options.estimator == HeteroEstimator::ControlVariate && !options.no_deaths;
    const std::size_t n_max = cache.n_max();

    HeteroResult res;
    res.simulations = options.n_sims;
    res.u_1.resize(M);
    res.u_inf.resize(M);
    for (std::size_t i = 0; i < M; ++i) {
        res.u_1[i] = strategies[i]->value_individual(members[i].wealth);
        res.u_inf[i] = strategies[i]->value_infinite(members[i].wealth);
    }

    const std::size_t n_blocks = (options.n_sims + kBlock - 1) / kBlock;
    std::vector<BlockAccumulator> blocks(n_blocks);

#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t blk = 0; blk < n_blocks; ++blk) {
        BlockAccumulator& acc = blocks[blk];
        acc.plain.assign(M, 0.0);
        acc.diff.assign(M * T, 0.0);
        acc.count.assign(M * T, 0);
        std::vector<double> shocks(T);
        std::vector<std::size_t> death(M);
        std::vector<char> survives(M);
        std::vector<double> x_inf(M);
        std::vector<double> satisfaction(M);
        const std::size_t end = std::min(options.n_sims, (blk + 1) * kBlock);
        for (std::size_t sim = blk * kBlock; sim < end; ++sim) {
            std::mt19937_64 market = substream(options.seed, static_cast<std::uint64_t>(Stream::MarketShocks), sim);
            std::normal_distribution<double> normal(0.0, 1.0);
            for (double& z : shocks) z = normal(market);
            for (std::size_t i = 0; i < M; ++i) {
                const MortalityTable& tab = *members[i].table;
                if (options.no_deaths) {
                    death[i] = tab.size() - 1;
                } else {
                    std::mt19937_64 rng =
                        substream(options.seed, static_cast<std::uint64_t>(Stream::MemberDeaths), sim * M + i);
                    death[i] = draw_death_step(rng, tab);
                }
                x_inf[i] = members[i].wealth;
                satisfaction[i] = 0.0;
            }

            FundState state = FundState::initial(members);
            while (state.n_alive > 0 && state.step < T) {
                const std::size_t t = state.step;
                const double z = shocks[t];
                for (std::size_t i = 0; i < M; ++i) survives[i] = state.alive[i] && death[i] > t;
                const PolicyLookup policies = [&](std::size_t i, std::size_t step, double x, std::size_t n_prime) {
                    return strategies[i]->control(step, x, n_prime);
                };
                const ReturnLookup returns = [&](std::size_t i, double pi) {
                    return gross_return(mp, pi, members[i].table->dt(), z);
                };
                StepOutcome out = step_fund(state, members, policies, returns, survives, n_max);
                acc.max_error = std::max(acc.max_error, out.conservation_error);
                acc.unallocated += out.unallocated;
                acc.equal_split += out.equal_split ? 1 : 0;

                for (std::size_t i = 0; i < M; ++i) {
                    if (!state.alive[i]) continue;
                    const MortalityTable& tab = *members[i].table;
                    const double dt = tab.dt();
                    const MemberStrategy& strat = *strategies[i];
                    const double u = strat.utility(out.consumption[i], t);
                    satisfaction[i] += u * dt;
                    if (!strat.additive() && !survives[i]) acc.plain[i] += -std::exp(-satisfaction[i]);
                    if (use_cv && strat.additive()) {
                        const Control ci = strat.infinite_control(t, x_inf[i]);
                        const double g = std::clamp(ci.gamma, 0.0, x_inf[i] / dt);
                        acc.diff[i * T + t] += u - strat.utility(g, t);
                        acc.count[i * T + t] += 1;
                        const double s = tab.one_period_survival(t);
                        if (s > 0.0) x_inf[i] = (x_inf[i] - g * dt) * gross_return(mp, ci.pi, dt, z) / s;
                    }
                }
                state = std::move(out.next);
            }
            for (std::size_t i = 0; i < M; ++i) {
                if (strategies[i]->additive()) acc.plain[i] += satisfaction[i];
            }
        }
    }

    std::vector<double> plain(M, 0.0);
    std::vector<double> diff(M * T, 0.0);
    std::vector<std::size_t> count(M * T, 0);
    for (const BlockAccumulator& acc : blocks) {
        for (std::size_t i = 0; i < M; ++i) plain[i] += acc.plain[i];
        for (std::size_t k = 0; k < M * T; ++k) {
            diff[k] += acc.diff[k];
            count[k] += acc.count[k];
        }
        res.max_conservation_error = std::max(res.max_conservation_error, acc.max_error);
        res.unallocated += acc.unallocated;
        res.equal_split_events += acc.equal_split;
    }

    res.u_S.resize(M);
    const auto sims = static_cast<double>(options.n_sims);
    for (std::size_t i = 0; i < M; ++i) {
        if (use_cv && strategies[i]->additive()) {
            const MortalityTable& tab = *members[i].table;
            double u = res.u_inf[i];
            for (std::size_t t = 0; t < tab.size(); ++t) {
                if (count[i * T + t] == 0) continue;
                u += tab.survival_at(t) * diff[i * T + t] / static_cast<double>(count[i * T + t]) * tab.dt();
            }
            res.u_S[i] = u;
        } else {
            res.u_S[i] = plain[i] / sims;
        }
    }
    return res;
}

double optimality_ratio(double u_S, double u_1, double u_inf) {
    if (u_inf == u_1) throw DomainError("optimality ratio undefined when u_inf equals u_1");
    return (u_S - u_1) / (u_inf - u_1);
}

std::vector<HistogramBin> histogram(std::span<const double> values, double width) {
    if (!(width > 0.0)) throw ValidationError("histogram: bin width must be positive");
    std::vector<HistogramBin> out;
    if (values.empty()) return out;
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    if (!std::isfinite(*mn) || !std::isfinite(*mx)) throw ValidationError("histogram: non-finite value");
    const auto first = static_cast<long long>(std::floor(*mn / width));
    const auto last = static_cast<long long>(std::floor(*mx / width));
    for (long long k = first; k <= last; ++k) {
        out.push_back({static_cast<double>(k) * width, static_cast<double>(k + 1) * width, 0});
    }
    for (double v : values) {
        const auto k = static_cast<long long>(std::floor(v / width));
        out[static_cast<std::size_t>(k - first)].count += 1;
    }
    return out;
}

}  // namespace cfund
