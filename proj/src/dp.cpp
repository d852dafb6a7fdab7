#include "cfund/dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cfund/error.hpp"
#include "cfund/optimize.hpp"

namespace cfund {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPruneMass = 1e-15;
constexpr std::size_t kInfiniteAlive = std::numeric_limits<std::size_t>::max();

std::string state_label(std::size_t step, double x, const FundKind& kind, std::size_t layer) {
    std::ostringstream os;
    os.precision(10);
    os << "t=" << step << ", x=" << x;
    if (kind.type == FundKind::Type::CollectiveFinite) os << ", n=" << layer + 1;
    return os.str();
}

std::size_t alive_of_layer(const FundKind& kind, std::size_t layer) {
    switch (kind.type) {
        case FundKind::Type::Individual:
            return 1;
        case FundKind::Type::CollectiveInfinite:
            return kInfiniteAlive;
        case FundKind::Type::CollectiveFinite:
            return layer + 1;
    }
    return 1;
}

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

struct Model {
    bool km;
    KMPreferences km_prefs;
    VNMPreferences vnm_prefs;
    MarketParams mp;
    const MortalityTable& table;
    FundKind kind;
    WealthGrid grid;
    NormalRule rule;
    double dt;

    Model(const BellmanPreferences& prefs, const MarketParams& market, const MortalityTable& tab, FundKind k,
          const GridConfig& cfg)
        : km(std::holds_alternative<KMPreferences>(prefs)),
          mp(market),
          table(tab),
          kind(k),
          grid(cfg),
          rule(gauss_hermite_rule(cfg.quadrature_K)),
          dt(tab.dt()) {
        if (km) {
            km_prefs = std::get<KMPreferences>(prefs);
            km_prefs.validate();
            if (km_prefs.schedules.n_steps < tab.size()) {
                throw ValidationError("km preferences: schedules shorter than the mortality table");
            }
        } else {
            vnm_prefs = std::get<VNMPreferences>(prefs);
            vnm_prefs.validate();
        }
        mp.validate();
    }

    double utility(double gamma, std::size_t step) const {
        return km ? km_prefs.utility(gamma, step) : vnm_prefs.utility(gamma);
    }

    double tail_exponent() const { return km ? 0.0 : vnm_prefs.rho; }

    ValueScale scale() const { return km ? ValueScale::KmLog : ValueScale::Additive; }
};

struct LookupCount {
    std::size_t low = 0;
    std::size_t high = 0;
};

// Expected stored value after one step, given post-consumption wealth y and
// weight pi, for a fund in `layer` at `step`. Reads the slices of step + 1.
class StepContinuation {
public:
    StepContinuation(const Model& m, const ValueFunction& vf, std::size_t step, std::size_t layer)
        : m_(m), vf_(vf), next_(step + 1), s_(m.table.one_period_survival(step)) {
        branches_ = credit_branches(m.kind, layer, s_);
    }

    double survival() const { return s_; }

    double operator()(double y, double pi, LookupCount* count) const {
        if (s_ <= 0.0 || branches_.empty()) return 0.0;
        const LogReturn lr = log_return_params(m_.mp, pi, m_.dt);
        const bool single = lr.sd == 0.0;
        const std::size_t K = single ? 1 : m_.rule.nodes.size();
        const bool log_grid = m_.grid.spacing() == Spacing::Log;
        const double top = static_cast<double>(m_.grid.size() - 1);
        const double base = log_grid ? (y > 0.0 ? std::log(y) : kNegInf) : y;

        thread_local std::vector<double> vals;
        thread_local std::vector<double> wts;
        vals.clear();
        wts.clear();
        for (const CreditBranch& br : branches_) {
            const UniformHermite& slice = vf_.slice(next_, br.next_layer);
            for (std::size_t k = 0; k < K; ++k) {
                const double z = single ? 0.0 : m_.rule.nodes[k];
                const double w = single ? 1.0 : m_.rule.weights[k];
                const double lr_k = lr.mean + lr.sd * z;
                const double u = log_grid ? m_.grid.index_of_log(base + lr_k + br.log_mult)
                                          : m_.grid.index_of(base * std::exp(lr_k) * br.mult);
                if (count != nullptr && u > top + 1e-9) ++count->high;
                if (u < 0.0) {
                    const double x = log_grid ? (y > 0.0 ? std::exp(base + lr_k + br.log_mult) : 0.0)
                                              : base * std::exp(lr_k) * br.mult;
                    if (count != nullptr && y > 0.0 && u < -1e-9) ++count->low;
                    vals.push_back(vf_.below(next_, br.next_layer, x));
                } else {
                    vals.push_back(slice.at(u));
                }
                wts.push_back(br.prob * w);
            }
        }
        if (m_.km) {
            const double ref = *std::min_element(vals.begin(), vals.end());
            if (!std::isfinite(ref)) return ref;
            double e = 0.0;
            for (std::size_t i = 0; i < vals.size(); ++i) e += wts[i] * std::exp(-(vals[i] - ref));
            return ref - log_add(std::log1p(-s_) + ref, std::log(s_) + std::log(e));
        }
        double e = 0.0;
        for (std::size_t i = 0; i < vals.size(); ++i) e += wts[i] * vals[i];
        return s_ * e;
    }

private:
    const Model& m_;
    const ValueFunction& vf_;
    std::size_t next_;
    double s_;
    std::vector<CreditBranch> branches_;
};

void add_warnings(SolverDiagnostics& d) {
    if (d.clamped_high > 0) {
        d.warnings.push_back(std::to_string(d.clamped_high) +
                             " continuation lookups above the wealth grid were clamped; consider a larger wealth_max");
    }
    if (d.clamped_low > 0) {
        d.warnings.push_back(std::to_string(d.clamped_low) + " continuation lookups below the wealth grid were clamped");
    }
    if (d.infeasible_unreachable > 0) {
        d.warnings.push_back(std::to_string(d.infeasible_unreachable) +
                             " unreachable nodes where the policy overspends were floored at zero wealth");
    }
}

void check_finite(double v, std::size_t step, double x, const FundKind& kind, std::size_t layer) {
    if (!std::isfinite(v)) throw SolverError("non-finite value at " + state_label(step, x, kind, layer));
}

}  // namespace

// ---------------------------------------------------------------------------

GridConfig GridConfig::around(double x0, double low_factor, double high_factor) {
    if (!(x0 > 0.0)) throw ValidationError("grid: x0 must be positive");
    GridConfig g;
    g.wealth_min = x0 * low_factor;
    g.wealth_max = x0 * high_factor;
    return g;
}

void GridConfig::validate() const {
    if (n_wealth < 16) throw ValidationError("grid: n_wealth must be at least 16");
    if (spacing == Spacing::Log && !(wealth_min > 0.0)) throw ValidationError("grid: wealth_min must be positive");
    if (!(wealth_min >= 0.0) || !(wealth_max > wealth_min) || !std::isfinite(wealth_max)) {
        throw ValidationError("grid: need 0 <= wealth_min < wealth_max");
    }
    if (n_consumption < 2) throw ValidationError("grid: n_consumption must be at least 2");
    if (n_pi < 1) throw ValidationError("grid: n_pi must be at least 1");
    if (!std::isfinite(pi_low) || !std::isfinite(pi_high) || pi_low > pi_high) {
        throw ValidationError("grid: pi bounds must be finite with low <= high");
    }
    if (quadrature_K < 1) throw ValidationError("grid: quadrature_K must be at least 1");
    if (n_max < 1) throw ValidationError("grid: n_max must be at least 1");
}

WealthGrid::WealthGrid(const GridConfig& cfg) : spacing_(cfg.spacing), n_(cfg.n_wealth) {
    cfg.validate();
    const bool lg = spacing_ == Spacing::Log;
    const double a = lg ? std::log(cfg.wealth_min) : cfg.wealth_min;
    const double b = lg ? std::log(cfg.wealth_max) : cfg.wealth_max;
    const double step = (b - a) / static_cast<double>(n_ - 1);
    origin_ = a;
    inv_step_ = 1.0 / step;
    nodes_.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) {
        const double c = a + step * static_cast<double>(j);
        nodes_[j] = lg ? std::exp(c) : c;
    }
    nodes_.front() = cfg.wealth_min;
    nodes_.back() = cfg.wealth_max;
}

double WealthGrid::index_of(double x) const {
    if (spacing_ == Spacing::Log) return x > 0.0 ? (std::log(x) - origin_) * inv_step_ : kNegInf;
    return (x - origin_) * inv_step_;
}

FundKind FundKind::finite(std::size_t n) {
    if (n < 1) throw ValidationError("fund kind: n must be at least 1");
    return {Type::CollectiveFinite, n};
}

FundKind FundKind::resolved(std::size_t n_max) const {
    if (type == Type::CollectiveFinite && n > n_max) return infinite();
    return *this;
}

std::size_t FundKind::layer_of(std::size_t n_alive) const {
    if (type != Type::CollectiveFinite) return 0;
    if (n_alive < 1 || n_alive > n) {
        throw ConfigError("fund kind: no layer for " + std::to_string(n_alive) + " survivors in a fund of " +
                          std::to_string(n));
    }
    return n_alive - 1;
}

std::string FundKind::label() const {
    switch (type) {
        case Type::Individual:
            return "individual";
        case Type::CollectiveInfinite:
            return "collective";
        case Type::CollectiveFinite:
            return "finite_" + std::to_string(n);
    }
    return "unknown";
}

std::vector<CreditBranch> credit_branches(const FundKind& kind, std::size_t layer, double s) {
    if (!(s > 0.0)) return {};
    switch (kind.type) {
        case FundKind::Type::Individual:
            return {{1.0, 1.0, 0.0, 0}};
        case FundKind::Type::CollectiveInfinite:
            return {{1.0, 1.0 / s, -std::log(s), 0}};
        case FundKind::Type::CollectiveFinite:
            break;
    }
    const std::size_t others = layer;
    const double members = static_cast<double>(layer + 1);
    std::vector<CreditBranch> out;
    if (s >= 1.0) {
        out.push_back({1.0, 1.0, 0.0, others});
        return out;
    }
    const double ls = std::log(s);
    const double lq = std::log1p(-s);
    const double lgm = std::lgamma(static_cast<double>(others) + 1.0);
    double total = 0.0;
    for (std::size_t b = 0; b <= others; ++b) {
        const double db = static_cast<double>(b);
        const double lp = lgm - std::lgamma(db + 1.0) - std::lgamma(static_cast<double>(others - b) + 1.0) + db * ls +
                          static_cast<double>(others - b) * lq;
        const double p = std::exp(lp);
        if (p < kPruneMass) continue;
        const double mult = members / (db + 1.0);
        out.push_back({p, mult, std::log(mult), b});
        total += p;
    }
    for (auto& br : out) br.prob /= total;
    return out;
}

// ---------------------------------------------------------------------------

ValueFunction::ValueFunction(WealthGrid grid, FundKind kind, std::size_t n_steps, double dt, ValueScale scale,
                             double tail_exponent)
    : grid_(std::move(grid)),
      kind_(kind),
      n_steps_(n_steps),
      layers_(kind.layers()),
      dt_(dt),
      scale_(scale),
      tail_exponent_(tail_exponent),
      slices_(n_steps * layers_),
      zero_(n_steps * layers_, 0.0) {}

void ValueFunction::set_slice(std::size_t step, std::size_t layer, std::vector<double> values, double zero_value) {
    slices_.at(step * layers_ + layer) = UniformHermite(values);
    zero_.at(step * layers_ + layer) = zero_value;
}

double ValueFunction::below(std::size_t step, std::size_t layer, double x) const {
    const double first = slice(step, layer).values().front();
    const double xmin = grid_.min();
    if (scale_ == ValueScale::KmLog) {
        const double z = zero_value(step, layer);
        return z + (first - z) * (std::max(x, 0.0) / xmin);
    }
    if (!(x > 0.0)) return zero_value(step, layer);
    return first * std::pow(x / xmin, tail_exponent_);
}

double ValueFunction::stored_at_node(std::size_t step, std::size_t layer, std::size_t j) const {
    return slice(step, layer).values()[j];
}

double ValueFunction::stored(std::size_t step, double x, std::size_t n_alive) const {
    const std::size_t layer = kind_.layer_of(n_alive);
    if (x < grid_.min()) return below(step, layer, x);
    return slice(step, layer).at(grid_.index_of(x));
}

double ValueFunction::to_gain(double stored) const { return scale_ == ValueScale::KmLog ? -std::exp(-stored) : stored; }

double ValueFunction::gain_at_node(std::size_t step, std::size_t layer, std::size_t j) const {
    return to_gain(stored_at_node(step, layer, j));
}

double ValueFunction::gain(std::size_t step, double x, std::size_t n_alive) const {
    return to_gain(stored(step, x, n_alive));
}

PolicyTable::PolicyTable(WealthGrid grid, FundKind kind, std::size_t n_steps, double dt)
    : grid_(std::move(grid)), kind_(kind), n_steps_(n_steps), layers_(kind.layers()), dt_(dt) {
    const std::size_t total = n_steps_ * layers_ * grid_.size();
    gamma_.assign(total, 0.0);
    fraction_.assign(total, 0.0);
    pi_.assign(total, 0.0);
}

void PolicyTable::set_node(std::size_t step, std::size_t layer, std::size_t j, double gamma, double pi) {
    const std::size_t i = index(step, layer, j);
    gamma_[i] = gamma;
    pi_[i] = pi;
    fraction_[i] = std::clamp(gamma * dt_ / grid_.node(j), 0.0, 1.0);
}

Control PolicyTable::control(std::size_t step, double x, std::size_t n_alive) const {
    if (step >= n_steps_) throw ValidationError("policy lookup beyond the final step");
    const std::size_t layer = kind_.layer_of(n_alive);
    const std::size_t n = grid_.size();
    const std::span<const double> frac(fraction_.data() + index(step, layer, 0), n);
    const std::span<const double> pis(pi_.data() + index(step, layer, 0), n);
    const double u = grid_.index_of(x);
    Control c;
    c.clamped = u < -1e-9 || u > static_cast<double>(n - 1) + 1e-9;
    c.gamma = x > 0.0 ? linear_at(frac, u) * x / dt_ : 0.0;
    c.pi = linear_at(pis, u);
    return c;
}

// ---------------------------------------------------------------------------

KmSolution solve_km(const BellmanPreferences& prefs, const MarketParams& mp, const MortalityTable& table, FundKind kind,
                    const GridConfig& grid) {
    kind = kind.resolved(grid.n_max);
    const Model m(prefs, mp, table, kind, grid);
    const std::size_t T = table.size();
    const std::size_t n = m.grid.size();
    const std::size_t layers = kind.layers();
    const double dt = m.dt;

    KmSolution sol{PolicyTable(m.grid, kind, T, dt), ValueFunction(m.grid, kind, T, dt, m.scale(), m.tail_exponent()), {}};
    SolverDiagnostics& diag = sol.diagnostics;

    for (std::size_t step = T; step-- > 0;) {
        const bool terminal = step + 1 == T || table.one_period_survival(step) <= 0.0;
        for (std::size_t layer = 0; layer < layers; ++layer) {
            std::vector<double> v(n);
            if (terminal) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double x = m.grid.node(j);
                    const double gamma = x / dt;
                    v[j] = m.utility(gamma, step) * dt;
                    check_finite(v[j], step, x, kind, layer);
                    sol.policy.set_node(step, layer, j, gamma, grid.pi_low);
                }
                sol.value.set_slice(step, layer, std::move(v), m.utility(0.0, step) * dt);
                continue;
            }

            const StepContinuation phi(m, sol.value, step, layer);

            // Best continuation for each post-consumption wealth on the grid.
            std::vector<double> cont(n);
            std::vector<double> cont_pi(n);
            const double cont0 = phi(0.0, grid.pi_low, nullptr);
#pragma omp parallel for schedule(dynamic, 8)
            for (std::size_t j = 0; j < n; ++j) {
                const double y = m.grid.node(j);
                const Maximum best = maximize_scan_brent([&](double p) { return phi(y, p, nullptr); }, grid.pi_low,
                                                         grid.pi_high, grid.n_pi);
                cont[j] = best.value;
                cont_pi[j] = best.x;
            }
            for (std::size_t j = 0; j < n; ++j) check_finite(cont[j], step, m.grid.node(j), kind, layer);
            const UniformHermite cont_interp(cont);
            const double ymin = m.grid.min();
            auto cont_at = [&](double y) {
                if (!(y > 0.0)) return cont0;
                if (y < ymin) return phi(y, cont_pi[0], nullptr);
                return cont_interp.at(m.grid.index_of(y));
            };
            auto pi_at = [&](double y) {
                if (!(y > ymin)) return y > 0.0 ? cont_pi[0] : grid.pi_low;
                return linear_at(cont_pi, m.grid.index_of(y));
            };

            std::size_t low = 0;
            std::size_t high = 0;
            std::size_t at_bound = 0;
#pragma omp parallel for schedule(dynamic, 8) reduction(+ : low, high, at_bound)
            for (std::size_t j = 0; j < n; ++j) {
                const double x = m.grid.node(j);
                auto objective = [&](double g) { return m.utility(g, step) * dt + cont_at(x - g * dt); };
                const Maximum best = maximize_scan_brent(objective, 0.0, x / dt, grid.n_consumption);
                const double gamma = std::clamp(best.x, 0.0, x / dt);
                const double y = std::max(x - gamma * dt, 0.0);
                const double pi = pi_at(y);
                LookupCount count;
                v[j] = m.utility(gamma, step) * dt + phi(y, pi, &count);
                low += count.low;
                high += count.high;
                if (pi <= grid.pi_low || pi >= grid.pi_high) ++at_bound;
                sol.policy.set_node(step, layer, j, gamma, pi);
            }
            diag.clamped_low += low;
            diag.clamped_high += high;
            diag.pi_at_bound += at_bound;
            for (std::size_t j = 0; j < n; ++j) check_finite(v[j], step, m.grid.node(j), kind, layer);
            sol.value.set_slice(step, layer, std::move(v), m.utility(0.0, step) * dt + cont0);
        }
    }
    add_warnings(diag);
    return sol;
}

// ---------------------------------------------------------------------------

namespace {

// Propagates the interval of wealth reachable from x0 and checks that the
// policy never consumes more than the available wealth on it.
void check_reachable(const ControlPolicy& policy, const Model& m, double x0) {
    const std::size_t T = m.table.size();
    const std::size_t layers = m.kind.layers();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> lo(layers, inf);
    std::vector<double> hi(layers, -inf);
    lo[layers - 1] = hi[layers - 1] = x0;
    double zmax = 0.0;
    for (double z : m.rule.nodes) zmax = std::max(zmax, std::abs(z));

    for (std::size_t step = 0; step < T; ++step) {
        std::vector<double> nlo(layers, inf);
        std::vector<double> nhi(layers, -inf);
        const double s = m.table.one_period_survival(step);
        for (std::size_t layer = 0; layer < layers; ++layer) {
            if (lo[layer] > hi[layer]) continue;
            std::vector<double> points{lo[layer], hi[layer]};
            for (double x : m.grid.nodes()) {
                if (x > lo[layer] && x < hi[layer]) points.push_back(x);
            }
            const auto branches = credit_branches(m.kind, layer, s);
            for (double x : points) {
                const Control c = policy.control(step, x, alive_of_layer(m.kind, layer));
                if (!(c.gamma >= 0.0) || c.gamma * m.dt > x * (1.0 + 1e-9) + 1e-12) {
                    throw SolverError("policy infeasible at reachable state " + state_label(step, x, m.kind, layer));
                }
                if (branches.empty()) continue;
                const double y = std::max(x - c.gamma * m.dt, 0.0);
                const LogReturn lr = log_return_params(m.mp, c.pi, m.dt);
                const double rmin = std::exp(lr.mean - lr.sd * zmax);
                const double rmax = std::exp(lr.mean + lr.sd * zmax);
                for (const auto& br : branches) {
                    nlo[br.next_layer] = std::min(nlo[br.next_layer], y * rmin * br.mult);
                    nhi[br.next_layer] = std::max(nhi[br.next_layer], y * rmax * br.mult);
                }
            }
        }
        lo = std::move(nlo);
        hi = std::move(nhi);
    }
}

}  // namespace

PolicyEvaluation evaluate_policy(const ControlPolicy& policy, const BellmanPreferences& prefs, const MarketParams& mp,
                                 const MortalityTable& table, FundKind kind, const GridConfig& grid, double x0) {
    kind = kind.resolved(grid.n_max);
    const Model m(prefs, mp, table, kind, grid);
    if (!(x0 > 0.0)) throw ValidationError("evaluate_policy: x0 must be positive");
    check_reachable(policy, m, x0);

    const std::size_t T = table.size();
    const std::size_t n = m.grid.size();
    const double dt = m.dt;
    PolicyEvaluation out{ValueFunction(m.grid, kind, T, dt, m.scale(), m.tail_exponent()), {}};
    SolverDiagnostics& diag = out.diagnostics;

    for (std::size_t step = T; step-- > 0;) {
        for (std::size_t layer = 0; layer < kind.layers(); ++layer) {
            const StepContinuation phi(m, out.value, step, layer);
            const std::size_t alive = alive_of_layer(kind, layer);
            std::vector<double> v(n);
            std::size_t low = 0;
            std::size_t high = 0;
            std::size_t infeasible = 0;
#pragma omp parallel for schedule(static) reduction(+ : low, high, infeasible)
            for (std::size_t j = 0; j < n; ++j) {
                const double x = m.grid.node(j);
                const Control c = policy.control(step, x, alive);
                double y = x - c.gamma * dt;
                if (y < -1e-9 * x) ++infeasible;
                y = std::max(y, 0.0);
                LookupCount count;
                const double cont = step + 1 < T ? phi(y, c.pi, &count) : 0.0;
                v[j] = m.utility(c.gamma, step) * dt + cont;
                low += count.low;
                high += count.high;
            }
            diag.clamped_low += low;
            diag.clamped_high += high;
            diag.infeasible_unreachable += infeasible;
            for (std::size_t j = 0; j < n; ++j) check_finite(v[j], step, m.grid.node(j), kind, layer);
            const Control c0 = policy.control(step, 0.0, alive);
            const double zero = m.utility(c0.gamma, step) * dt + (step + 1 < T ? phi(0.0, c0.pi, nullptr) : 0.0);
            out.value.set_slice(step, layer, std::move(v), zero);
        }
    }
    add_warnings(diag);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

// log of the certainty-equivalent gross return (E[R^e])^(1/e).
double log_certainty_return(const MarketParams& mp, const NormalRule& rule, double pi, double dt, double e) {
    const LogReturn lr = log_return_params(mp, pi, dt);
    if (lr.sd == 0.0) return lr.mean;
    double acc = kNegInf;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        acc = log_add(acc, std::log(rule.weights[k]) + e * (lr.mean + lr.sd * rule.nodes[k]));
    }
    return acc / e;
}

double best_weight(const MarketParams& mp, const NormalRule& rule, double dt, double e, const HomogeneousOptions& o) {
    if (!(o.pi_high > o.pi_low)) return o.pi_low;
    const Maximum best = maximize_scan_brent([&](double p) { return log_certainty_return(mp, rule, p, dt, e); },
                                             o.pi_low, o.pi_high, std::max<std::size_t>(o.n_scan, 2));
    return best.x;
}

void validate_options(const HomogeneousOptions& o) {
    if (o.quadrature_K < 1) throw ValidationError("homogeneous solver: quadrature_K must be at least 1");
    if (!std::isfinite(o.pi_low) || !std::isfinite(o.pi_high) || o.pi_low > o.pi_high) {
        throw ValidationError("homogeneous solver: invalid pi bounds");
    }
}

}  // namespace

Control HomogeneousSchedule::control(std::size_t step, double x, std::size_t) const {
    if (step >= k_.size()) throw ValidationError("schedule lookup beyond the final step");
    return {c_[step] * std::max(x, 0.0) / dt_, pi_[step], false};
}

HomogeneousSchedule solve_ez_homogeneous(const EZPreferences& prefs, const MarketParams& mp, const MortalityTable& table,
                                         FundKind kind, const HomogeneousOptions& options) {
    prefs.validate();
    mp.validate();
    validate_options(options);
    if (kind.type == FundKind::Type::CollectiveFinite) {
        throw ValidationError("epstein-zin solver supports individual and infinite collective funds only");
    }
    const std::size_t T = table.size();
    const double dt = table.dt();
    const NormalRule rule = gauss_hermite_rule(options.quadrature_K);
    std::vector<double> k(T), c(T), pi(T);
    k[T - 1] = 1.0 / dt;
    c[T - 1] = 1.0;
    pi[T - 1] = options.pi_low;

    const double rho = prefs.rho;
    const double alpha = prefs.alpha;
    for (std::size_t step = T - 1; step-- > 0;) {
        const double s = table.one_period_survival(step);
        // The weight only enters through the certainty-equivalent return.
        const double p = best_weight(mp, rule, dt, alpha, options);
        const double log_m = log_certainty_return(mp, rule, p, dt, alpha);
        const double log_mult = kind.type == FundKind::Type::CollectiveInfinite ? -std::log(s) : 0.0;
        const double log_growth = std::log(k[step + 1]) + log_mult + log_m;
        // beta * (s * (k' m M)^alpha)^(rho/alpha)
        const double a = prefs.beta * std::exp(rho / alpha * std::log(s) + rho * log_growth);
        auto value = [&](double frac) {
            const double b = std::pow(frac / dt, rho) + a * std::pow(1.0 - frac, rho);
            return std::pow(b, 1.0 / rho);
        };
        const Maximum best = maximize_scan_brent(value, 0.0, 1.0, std::max<std::size_t>(options.n_scan, 3));
        if (!std::isfinite(best.value) || !(best.value > 0.0)) {
            throw SolverError("epstein-zin value diverged at step " + std::to_string(step));
        }
        k[step] = best.value;
        c[step] = best.x;
        pi[step] = p;
    }
    return HomogeneousSchedule(kind, dt, std::move(k), std::move(c), std::move(pi));
}

VnmHomogeneous::VnmHomogeneous(double rho, double dt, std::size_t n_steps, std::size_t n_max)
    : rho_(rho), dt_(dt), n_steps_(n_steps), n_max_(n_max) {
    const std::size_t total = n_steps * (n_max + 1);
    h_.assign(total, 0.0);
    c_.assign(total, 0.0);
    pi_.assign(total, 0.0);
}

std::size_t VnmHomogeneous::index(std::size_t step, std::size_t n) const {
    if (n == 0) throw ConfigError("homogeneous fund with no members");
    if (step >= n_steps_) throw ValidationError("homogeneous lookup beyond the final step");
    const std::size_t slot = n > n_max_ ? n_max_ : n - 1;
    return step * (n_max_ + 1) + slot;
}

void VnmHomogeneous::set(std::size_t step, std::size_t n, double h, double c, double pi) {
    const std::size_t i = index(step, n);
    h_[i] = h;
    c_[i] = c;
    pi_[i] = pi;
}

double VnmHomogeneous::value(std::size_t step, double x, std::size_t n) const {
    return h(step, n) * std::pow(x, rho_) / rho_;
}

Control VnmHomogeneous::control(std::size_t step, double x, std::size_t n_alive) const {
    const std::size_t i = index(step, n_alive);
    return {c_[i] * std::max(x, 0.0) / dt_, pi_[i], false};
}

VnmHomogeneous solve_vnm_homogeneous(const VNMPreferences& prefs, const MarketParams& mp, const MortalityTable& table,
                                     std::size_t n_max, const HomogeneousOptions& options) {
    prefs.validate();
    mp.validate();
    validate_options(options);
    if (n_max < 1) throw ValidationError("homogeneous solver: n_max must be at least 1");
    const std::size_t T = table.size();
    const double dt = table.dt();
    const double rho = prefs.rho;
    const NormalRule rule = gauss_hermite_rule(options.quadrature_K);
    VnmHomogeneous out(rho, dt, T, n_max);

    const double h_last = std::pow(dt, 1.0 - rho);
    for (std::size_t n = 1; n <= n_max + 1; ++n) out.set(T - 1, n, h_last, 1.0, options.pi_low);

    const double p = best_weight(mp, rule, dt, rho, options);
    const double moment = std::exp(rho * log_certainty_return(mp, rule, p, dt, rho));  // E[R^rho]
    for (std::size_t step = T - 1; step-- > 0;) {
        const double s = table.one_period_survival(step);
        for (std::size_t n = 1; n <= n_max + 1; ++n) {
            const bool infinite = n > n_max;
            double d = 0.0;
            if (infinite) {
                d = out.h(step + 1, VnmHomogeneous::kInfinite) * std::pow(s, -rho);
            } else {
                for (const auto& br : credit_branches(FundKind::finite(n), n - 1, s)) {
                    d += br.prob * out.h(step + 1, br.next_layer + 1) * std::pow(br.mult, rho);
                }
            }
            const double a = s * moment * d;
            // Stationary point of (dt^(1-rho) c^rho + a (1-c)^rho) / rho.
            const double q = std::pow(a * std::pow(dt, rho - 1.0), 1.0 / (rho - 1.0));
            const double c = q / (1.0 + q);
            const double h = h_last * std::pow(c, rho) + a * std::pow(1.0 - c, rho);
            if (!std::isfinite(h) || !(h > 0.0)) {
                throw SolverError("power-utility value diverged at step " + std::to_string(step));
            }
            out.set(step, infinite ? VnmHomogeneous::kInfinite : n, h, c, p);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

double brute_force_oracle(const OracleInstance& inst) {
    const MortalityTable& table = inst.table;
    const std::size_t T = table.size();
    if (T > 2) throw ValidationError("oracle: at most two periods");
    if (inst.quadrature_K < 1 || inst.quadrature_K > 3) throw ValidationError("oracle: one to three return nodes");
    if (inst.n_gamma < 2 || inst.n_pi < 1) throw ValidationError("oracle: empty control grid");
    if (inst.kind.type == FundKind::Type::CollectiveFinite && inst.kind.n > 10) {
        throw ValidationError("oracle: finite funds of at most ten members");
    }
    if (static_cast<double>(inst.n_gamma) * static_cast<double>(inst.n_pi) > 5e6) {
        throw ValidationError("oracle: control grid too large for enumeration");
    }
    if (!(inst.x0 > 0.0)) throw ValidationError("oracle: x0 must be positive");

    const bool km = std::holds_alternative<KMPreferences>(inst.prefs);
    const double dt = table.dt();
    auto u = [&](double g, std::size_t step) {
        return km ? std::get<KMPreferences>(inst.prefs).utility(g, step) : std::get<VNMPreferences>(inst.prefs).utility(g);
    };
    auto final_gain = [&](double x, std::size_t step) {
        const double ud = u(x / dt, step) * dt;
        return km ? -std::exp(-ud) : ud;
    };
    if (T == 1) return final_gain(inst.x0, 0);

    const double s = table.one_period_survival(0);
    const NormalRule rule = gauss_hermite_rule(inst.quadrature_K);
    const std::size_t start_layer = inst.kind.layers() - 1;
    const auto branches = credit_branches(inst.kind, start_layer, s);
    double best = kNegInf;
    for (std::size_t i = 0; i < inst.n_gamma; ++i) {
        const double gamma = inst.x0 / dt * static_cast<double>(i) / static_cast<double>(inst.n_gamma - 1);
        const double y = std::max(inst.x0 - gamma * dt, 0.0);
        const double u0 = u(gamma, 0) * dt;
        for (std::size_t q = 0; q < inst.n_pi; ++q) {
            const double pi = inst.n_pi == 1 ? inst.pi_low
                                             : inst.pi_low + (inst.pi_high - inst.pi_low) * static_cast<double>(q) /
                                                                 static_cast<double>(inst.n_pi - 1);
            const LogReturn lr = log_return_params(inst.market, pi, dt);
            double e = 0.0;
            for (const auto& br : branches) {
                for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
                    const double r = std::exp(lr.mean + lr.sd * rule.nodes[k]);
                    e += br.prob * rule.weights[k] * final_gain(y * r * br.mult, 1);
                }
            }
            const double w = km ? std::exp(-u0) * (-(1.0 - s) + s * e) : u0 + s * e;
            if (w > best) best = w;
        }
    }
    return best;
}

}  // namespace cfund
