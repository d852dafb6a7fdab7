#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cfund/interp.hpp"
#include "cfund/market.hpp"
#include "cfund/mortality.hpp"
#include "cfund/prefs.hpp"

namespace cfund {

enum class Spacing { Log, Linear };

struct GridConfig {
    double wealth_min = 1.0;
    double wealth_max = 100.0;
    std::size_t n_wealth = 400;
    Spacing spacing = Spacing::Log;
    std::size_t n_consumption = 41;
    std::size_t n_pi = 11;
    double pi_low = 0.0;
    double pi_high = 1.0;
    std::size_t quadrature_K = 9;
    std::size_t n_max = 50;

    // [x0 * low_factor, x0 * high_factor] with the remaining fields defaulted.
    static GridConfig around(double x0, double low_factor = 0.01, double high_factor = 50.0);

    void validate() const;
};

// Wealth nodes, uniform in the grid coordinate (log or plain wealth).
class WealthGrid {
public:
    explicit WealthGrid(const GridConfig& cfg);

    std::size_t size() const { return n_; }
    Spacing spacing() const { return spacing_; }
    double node(std::size_t j) const { return nodes_[j]; }
    const std::vector<double>& nodes() const { return nodes_; }
    double min() const { return nodes_.front(); }
    double max() const { return nodes_.back(); }

    // Index coordinate of wealth x; -inf for x <= 0 on a log grid.
    double index_of(double x) const;
    // Index coordinate from log-wealth (log grids only).
    double index_of_log(double log_x) const { return (log_x - origin_) * inv_step_; }

private:
    Spacing spacing_;
    std::size_t n_;
    double origin_;
    double inv_step_;
    std::vector<double> nodes_;
};

struct FundKind {
    enum class Type { Individual, CollectiveInfinite, CollectiveFinite };

    Type type = Type::Individual;
    std::size_t n = 1;

    static FundKind individual() { return {Type::Individual, 1}; }
    static FundKind infinite() { return {Type::CollectiveInfinite, 0}; }
    static FundKind finite(std::size_t n);

    // Finite funds larger than n_max behave as infinite ones.
    FundKind resolved(std::size_t n_max) const;

    // Survivor-count layers carried by a solver: n for a finite fund, else 1.
    std::size_t layers() const { return type == Type::CollectiveFinite ? n : 1; }
    std::size_t layer_of(std::size_t n_alive) const;
    std::string label() const;

    friend bool operator==(const FundKind&, const FundKind&) = default;
};

// One outcome of the other members' deaths over a step: with probability
// `prob` the per-survivor wealth is multiplied by `mult` and the next survivor
// layer is `next_layer`.
struct CreditBranch {
    double prob;
    double mult;
    double log_mult;
    std::size_t next_layer;
};

// Branches for a fund in layer `layer` at one-period survival s. Binomial
// terms below 1e-15 are dropped and the rest renormalised.
std::vector<CreditBranch> credit_branches(const FundKind& kind, std::size_t layer, double s);

struct Control {
    double gamma = 0.0;
    double pi = 0.0;
    bool clamped = false;  // wealth fell outside the policy's domain
};

class ControlPolicy {
public:
    virtual ~ControlPolicy() = default;
    virtual Control control(std::size_t step, double x, std::size_t n_alive) const = 0;
};

// Consume `gamma` every step and hold `pi` in the stock.
class ConstantStrategy final : public ControlPolicy {
public:
    ConstantStrategy(double gamma, double pi) : gamma_(gamma), pi_(pi) {}
    Control control(std::size_t, double, std::size_t) const override { return {gamma_, pi_, false}; }

private:
    double gamma_;
    double pi_;
};

using BellmanPreferences = std::variant<KMPreferences, VNMPreferences>;

// How a ValueFunction stores values. KM values are kept as v = -log(-W).
enum class ValueScale { KmLog, Additive };

// Below the grid KM values are interpolated linearly in wealth towards the
// value of holding no wealth; additive values follow x^tail_exponent.
class ValueFunction {
public:
    ValueFunction(WealthGrid grid, FundKind kind, std::size_t n_steps, double dt, ValueScale scale,
                  double tail_exponent = 0.0);

    const WealthGrid& grid() const { return grid_; }
    const FundKind& kind() const { return kind_; }
    std::size_t steps() const { return n_steps_; }
    ValueScale scale() const { return scale_; }

    // Stored value (v for KM, V otherwise) at a node and by interpolation.
    double stored_at_node(std::size_t step, std::size_t layer, std::size_t j) const;
    double stored(std::size_t step, double x, std::size_t n_alive) const;
    const UniformHermite& slice(std::size_t step, std::size_t layer) const { return slices_[step * layers_ + layer]; }

    // Gain W in the preference family's own units.
    double gain_at_node(std::size_t step, std::size_t layer, std::size_t j) const;
    double gain(std::size_t step, double x, std::size_t n_alive) const;

    double to_gain(double stored) const;

    // Stored value at wealth 0 <= x < grid().min().
    double below(std::size_t step, std::size_t layer, double x) const;
    double zero_value(std::size_t step, std::size_t layer) const { return zero_[step * layers_ + layer]; }

    void set_slice(std::size_t step, std::size_t layer, std::vector<double> values, double zero_value);

private:
    WealthGrid grid_;
    FundKind kind_;
    std::size_t n_steps_;
    std::size_t layers_;
    double dt_;
    ValueScale scale_;
    double tail_exponent_;
    std::vector<UniformHermite> slices_;
    std::vector<double> zero_;
};

class PolicyTable final : public ControlPolicy {
public:
    PolicyTable(WealthGrid grid, FundKind kind, std::size_t n_steps, double dt);

    const WealthGrid& grid() const { return grid_; }
    const FundKind& kind() const { return kind_; }
    std::size_t steps() const { return n_steps_; }

    double gamma_at_node(std::size_t step, std::size_t layer, std::size_t j) const { return gamma_[index(step, layer, j)]; }
    double pi_at_node(std::size_t step, std::size_t layer, std::size_t j) const { return pi_[index(step, layer, j)]; }
    void set_node(std::size_t step, std::size_t layer, std::size_t j, double gamma, double pi);

    // Consumption fraction and weight interpolated linearly in the grid
    // coordinate; outside the grid the boundary node's fraction is used.
    Control control(std::size_t step, double x, std::size_t n_alive) const override;

private:
    std::size_t index(std::size_t step, std::size_t layer, std::size_t j) const {
        return (step * layers_ + layer) * grid_.size() + j;
    }

    WealthGrid grid_;
    FundKind kind_;
    std::size_t n_steps_;
    std::size_t layers_;
    double dt_;
    std::vector<double> gamma_;
    std::vector<double> fraction_;
    std::vector<double> pi_;
};

struct SolverDiagnostics {
    std::size_t clamped_low = 0;
    std::size_t clamped_high = 0;
    std::size_t pi_at_bound = 0;
    std::size_t infeasible_unreachable = 0;
    std::vector<std::string> warnings;
};

struct KmSolution {
    PolicyTable policy;
    ValueFunction value;
    SolverDiagnostics diagnostics;
};

// Backward induction on the wealth grid. Finite funds carry one layer per
// surviving member count; funds above grid.n_max are solved as infinite.
KmSolution solve_km(const BellmanPreferences& prefs, const MarketParams& mp, const MortalityTable& table, FundKind kind,
                    const GridConfig& grid);

struct PolicyEvaluation {
    ValueFunction value;
    SolverDiagnostics diagnostics;
};

// Same recursion as solve_km with the controls taken from `policy`. Raises a
// SolverError when the policy overspends at a state reachable from x0.
PolicyEvaluation evaluate_policy(const ControlPolicy& policy, const BellmanPreferences& prefs, const MarketParams& mp,
                                 const MortalityTable& table, FundKind kind, const GridConfig& grid, double x0);

struct HomogeneousOptions {
    std::size_t quadrature_K = 9;
    double pi_low = 0.0;
    double pi_high = 1.0;
    std::size_t n_scan = 41;
};

// Time-only schedules of a homogeneous solution: value per unit wealth,
// consumption fraction c = gamma dt / x and stock weight.
class HomogeneousSchedule final : public ControlPolicy {
public:
    HomogeneousSchedule(FundKind kind, double dt, std::vector<double> k, std::vector<double> c, std::vector<double> pi)
        : kind_(kind), dt_(dt), k_(std::move(k)), c_(std::move(c)), pi_(std::move(pi)) {}

    const FundKind& kind() const { return kind_; }
    std::size_t steps() const { return k_.size(); }
    const std::vector<double>& k() const { return k_; }
    const std::vector<double>& consumption_fraction() const { return c_; }
    const std::vector<double>& pi() const { return pi_; }

    Control control(std::size_t step, double x, std::size_t n_alive) const override;

private:
    FundKind kind_;
    double dt_;
    std::vector<double> k_;
    std::vector<double> c_;
    std::vector<double> pi_;
};

// Epstein-Zin value V(t, x) = k_t x for Individual and CollectiveInfinite.
HomogeneousSchedule solve_ez_homogeneous(const EZPreferences& prefs, const MarketParams& mp, const MortalityTable& table,
                                         FundKind kind, const HomogeneousOptions& options = {});

// Power-utility value V(t, x, n) = h(t, n) x^rho / rho for every fund size
// n = 1..n_max and for the infinite fund.
class VnmHomogeneous final : public ControlPolicy {
public:
    static constexpr std::size_t kInfinite = std::numeric_limits<std::size_t>::max();

    VnmHomogeneous(double rho, double dt, std::size_t n_steps, std::size_t n_max);

    std::size_t n_max() const { return n_max_; }
    std::size_t steps() const { return n_steps_; }
    double rho() const { return rho_; }

    double h(std::size_t step, std::size_t n) const { return h_[index(step, n)]; }
    double consumption_fraction(std::size_t step, std::size_t n) const { return c_[index(step, n)]; }
    double pi(std::size_t step, std::size_t n) const { return pi_[index(step, n)]; }
    double value(std::size_t step, double x, std::size_t n) const;

    void set(std::size_t step, std::size_t n, double h, double c, double pi);

    // n_alive above n_max (including kInfinite) selects the infinite fund.
    Control control(std::size_t step, double x, std::size_t n_alive) const override;

private:
    std::size_t index(std::size_t step, std::size_t n) const;

    double rho_;
    double dt_;
    std::size_t n_steps_;
    std::size_t n_max_;
    std::vector<double> h_;
    std::vector<double> c_;
    std::vector<double> pi_;
};

VnmHomogeneous solve_vnm_homogeneous(const VNMPreferences& prefs, const MarketParams& mp, const MortalityTable& table,
                                     std::size_t n_max, const HomogeneousOptions& options = {});

// Small discrete instance for exhaustive enumeration: at most two periods,
// three return nodes and grids of consumption and weights.
struct OracleInstance {
    BellmanPreferences prefs = KMPreferences{};
    MarketParams market;
    MortalityTable table = MortalityTable::from_masses(1.0, {1.0});
    FundKind kind = FundKind::individual();
    double x0 = 1.0;
    std::size_t quadrature_K = 3;
    std::size_t n_gamma = 2001;
    std::size_t n_pi = 201;
    double pi_low = 0.0;
    double pi_high = 1.0;
};

// Exact maximum expected gain of the discrete instance. The last period
// always consumes everything, which is optimal for increasing utilities.
double brute_force_oracle(const OracleInstance& instance);

}  // namespace cfund
