#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cfund/dp.hpp"
#include "cfund/market.hpp"
#include "cfund/mortality.hpp"
#include "cfund/prefs.hpp"

namespace cfund {

enum class Sex { Female, Male };

std::string to_string(Sex s);

struct Member {
    std::size_t id = 0;
    PreferenceSpec prefs = VNMPreferences{};
    std::shared_ptr<const MortalityTable> table;
    double wealth = 0.0;
    bool alive = true;
    Sex sex = Sex::Female;
    int retirement_age = 65;
};

struct FundState {
    std::size_t step = 0;
    std::vector<double> wealth;
    std::vector<char> alive;
    std::size_t n_alive = 0;

    static FundState initial(std::span<const Member> members);
};

struct PopulationSpec {
    std::size_t n = 100;
    double power_low = -1.5;
    double power_high = -0.5;
    double wealth_low = 0.5;
    double wealth_high = 1.5;
    int age_low = 60;
    int age_high = 69;
    double sex_split = 0.5;  // probability of Male
    double wealth_scale = 1.0;
    std::uint64_t seed = 1;

    void validate() const;
};

// Mortality tables by (sex, retirement age).
class PopulationTables {
public:
    void add(Sex sex, int age, MortalityTable table);
    std::shared_ptr<const MortalityTable> find(Sex sex, int age) const;
    std::size_t size() const { return tables_.size(); }

private:
    std::map<std::pair<int, int>, std::shared_ptr<const MortalityTable>> tables_;
};

// Gompertz-Makeham hazard A + B c^(age - 65 + t) for women and the same with
// B scaled by male_ratio for men, truncated at survival 1e-5.
struct GompertzPopulation {
    double A = 0.0003;
    double B = 0.00697;
    double c = 1.1051709180756477;  // e^0.1
    double male_ratio = 1.5;
    double horizon = 60.0;
    double truncation = 1e-5;
};

PopulationTables gompertz_population_tables(const GompertzPopulation& params, int age_low, int age_high);

std::vector<Member> generate_population(const PopulationSpec& spec, const PopulationTables& tables);

// (1 - s) times the member's wealth after consumption and investment.
double contribution(double survival, double wealth_after_step);

// Control of member `member` at `step`, wealth x, with n_prime members in the
// homogeneous fund it imitates (VnmHomogeneous::kInfinite above n_max).
using PolicyLookup = std::function<Control(std::size_t member, std::size_t step, double x, std::size_t n_prime)>;
using ReturnLookup = std::function<double(std::size_t member, double pi)>;

struct StepOutcome {
    FundState next;
    std::vector<double> consumption;  // per member; zero for members dead at the step
    double conservation_error = 0.0;  // relative
    double unallocated = 0.0;
    bool equal_split = false;
};

// One step of the heterogeneous fund: every alive member consumes and invests
// under its own homogeneous-fund policy, the estates of members who die are
// shared among the survivors in proportion to their contributions.
StepOutcome step_fund(const FundState& state, std::span<const Member> members, const PolicyLookup& policies,
                      const ReturnLookup& returns, std::span<const char> survives, std::size_t n_max);

// Optimal homogeneous-fund strategy of one member type with its values for
// the individual and infinite funds.
class MemberStrategy {
public:
    virtual ~MemberStrategy() = default;
    virtual Control control(std::size_t step, double x, std::size_t n_prime) const = 0;
    virtual Control infinite_control(std::size_t step, double x) const = 0;
    virtual double value_individual(double x0) const = 0;
    virtual double value_infinite(double x0) const = 0;
    // Per-step utility for additive families; NaN otherwise.
    virtual bool additive() const = 0;
    virtual double utility(double gamma, std::size_t step) const = 0;
};

// Solves strategies lazily, keyed by preference parameters, table and (for
// grid solves) initial wealth. Safe for concurrent readers.
class PolicyCache {
public:
    PolicyCache(MarketParams mp, HomogeneousOptions options, GridConfig grid_template, std::size_t n_max);

    std::shared_ptr<const MemberStrategy> get(const Member& member);
    std::size_t size() const;
    std::size_t n_max() const { return n_max_; }

private:
    MarketParams mp_;
    HomogeneousOptions options_;
    GridConfig grid_;
    std::size_t n_max_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const MemberStrategy>> cache_;
};

enum class HeteroEstimator { Plain, ControlVariate };

struct HeteroOptions {
    std::size_t n_sims = 10000;
    std::uint64_t seed = 1;
    HeteroEstimator estimator = HeteroEstimator::ControlVariate;
    // Forces every member to survive every step; for tests.
    bool no_deaths = false;
};

struct HeteroResult {
    std::vector<double> u_S;
    std::vector<double> u_1;
    std::vector<double> u_inf;
    double max_conservation_error = 0.0;
    double unallocated = 0.0;
    std::size_t equal_split_events = 0;
    std::size_t simulations = 0;
};

HeteroResult run_hetero_mc(std::span<const Member> members, PolicyCache& cache, const MarketParams& mp,
                           const HeteroOptions& options);

double optimality_ratio(double u_S, double u_1, double u_inf);

struct HistogramBin {
    double low;
    double high;
    std::size_t count;
};

std::vector<HistogramBin> histogram(std::span<const double> values, double width);

}  // namespace cfund
