#include "cfund/prefs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cfund/error.hpp"

namespace cfund {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_exponent(double rho, const char* what) {
    if (!std::isfinite(rho) || !(rho < 1.0) || rho == 0.0) {
        throw ValidationError(std::string(what) + ": exponent must lie in (-inf, 1) \\ {0}");
    }
}

}  // namespace

Schedules Schedules::for_table(double sp0, double r_tl, double total_adequacy, const MortalityTable& table) {
    Schedules s{sp0, r_tl, total_adequacy, table.dt(), table.size()};
    s.validate();
    return s;
}

double Schedules::state_pension(std::size_t step) const {
    return sp0 * std::exp(r_tl * dt * static_cast<double>(step));
}

double Schedules::adequacy(std::size_t step) const { return total_adequacy - state_pension(step); }

double Schedules::funded_adequacy(std::size_t step) const { return std::max(adequacy(step), 0.0); }

std::vector<double> Schedules::funded_adequacy_levels() const {
    std::vector<double> out(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) out[i] = funded_adequacy(i);
    return out;
}

void Schedules::validate() const {
    if (!(sp0 > 0.0) || !std::isfinite(sp0)) throw ValidationError("schedules: state pension must be positive");
    if (!std::isfinite(r_tl) || !std::isfinite(total_adequacy)) throw ValidationError("schedules: non-finite parameter");
    if (!(dt > 0.0)) throw ValidationError("schedules: dt must be positive");
}

double KMPreferences::utility(double gamma, std::size_t step) const {
    if (!(gamma >= 0.0)) return kNegInf;
    const double sp = schedules.state_pension(step);
    const double anchor = schedules.adequacy(step) + sp;
    return a * std::pow(gamma + sp, rho) - a * std::pow(anchor, rho);
}

void KMPreferences::validate() const {
    check_exponent(rho, "km preferences");
    if (!std::isfinite(a) || !(a * rho > 0.0)) throw ValidationError("km preferences: a must be non-zero with the sign of rho");
    schedules.validate();
    for (std::size_t i = 0; i < schedules.n_steps; ++i) {
        if (!(schedules.adequacy(i) + schedules.state_pension(i) > 0.0)) {
            throw ValidationError("km preferences: AL_t + SP_t must be positive");
        }
    }
}

double VNMPreferences::utility(double gamma) const {
    if (gamma < 0.0 || std::isnan(gamma)) return kNegInf;
    if (gamma == 0.0) return rho < 0.0 ? kNegInf : 0.0;
    return std::pow(gamma, rho) / rho;
}

void VNMPreferences::validate() const { check_exponent(rho, "vnm preferences"); }

void EZPreferences::validate() const {
    check_exponent(alpha, "epstein-zin alpha");
    check_exponent(rho, "epstein-zin rho");
    if (!(beta > 0.0) || !(beta <= 1.0)) throw ValidationError("epstein-zin: beta must lie in (0, 1]");
}

double signed_power(double exponent, double x) {
    if (!(x > 0.0)) throw DomainError("signed_power: argument must be positive");
    if (exponent == 0.0) throw DomainError("signed_power: exponent must be non-zero");
    const double v = std::pow(x, exponent);
    return exponent > 0.0 ? v : -v;
}

double utility_u(const KMPreferences& prefs, double gamma, std::size_t step) { return prefs.utility(gamma, step); }

double satisfaction(const KMPreferences& prefs, std::span<const double> stream, std::size_t tau) {
    if (tau >= stream.size()) throw ValidationError("satisfaction: stream shorter than the death step");
    const double dt = prefs.schedules.dt;
    double s = 0.0;
    for (std::size_t t = 0; t <= tau; ++t) {
        const double u = prefs.utility(stream[t], t);
        if (u == kNegInf) return kNegInf;
        s += u * dt;
    }
    return s;
}

GainEstimate km_gain(std::span<const double> satisfactions) {
    if (satisfactions.empty()) throw ValidationError("km_gain: no samples");
    const double inf = std::numeric_limits<double>::infinity();
    for (double s : satisfactions) {
        if (s == kNegInf) return {kNegInf, inf, inf};
    }
    // Work with exp(-s - m), m = max(-s), so large satisfactions do not overflow.
    const double m = -*std::min_element(satisfactions.begin(), satisfactions.end());
    const auto n = static_cast<double>(satisfactions.size());
    double sum = 0.0;
    for (double s : satisfactions) sum += std::exp(-s - m);
    const double scaled_mean = sum / n;
    double ss = 0.0;
    for (double s : satisfactions) {
        const double d = std::exp(-s - m) - scaled_mean;
        ss += d * d;
    }
    GainEstimate g;
    g.log_neg_mean = m + std::log(scaled_mean);
    g.mean = -std::exp(g.log_neg_mean);
    g.se = satisfactions.size() > 1 ? std::exp(m) * std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return g;
}

double calibrate_a(double lambda, double rho, const Schedules& schedules) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("calibrate_a: lambda must be positive");
    check_exponent(rho, "calibrate_a");
    double derivative = 0.0;
    bool any_positive = false;
    for (std::size_t t = 0; t < schedules.n_steps; ++t) {
        const double level = schedules.funded_adequacy(t);
        if (level <= 0.0) continue;
        any_positive = true;
        derivative += rho * level * std::pow(level + schedules.state_pension(t), rho - 1.0) * schedules.dt;
    }
    if (!any_positive) throw CalibrationError("calibrate_a: funded adequacy level is identically zero");
    return lambda / derivative;
}

double funding_cost(std::span<const double> level, double r, const MortalityTable& table, PricingMode mode) {
    if (level.size() != table.size()) throw ValidationError("funding_cost: level must cover the mortality grid");
    double pv = 0.0;
    for (std::size_t t = 0; t < level.size(); ++t) {
        if (!(level[t] >= 0.0)) throw ValidationError("funding_cost: negative level at step " + std::to_string(t));
        const double weight = mode == PricingMode::FairLife ? table.survival_at(t) : 1.0;
        pv += std::exp(-r * table.time(t)) * weight * level[t] * table.dt();
    }
    return pv;
}

double ez_deterministic_value(const EZPreferences& prefs, std::span<const double> stream) {
    if (stream.empty()) throw ValidationError("ez_deterministic_value: empty stream");
    double z = 0.0;
    double discount = 1.0;
    for (double g : stream) {
        if (!(g > 0.0)) throw DomainError("ez_deterministic_value: consumption must be positive");
        z += discount * std::pow(g, prefs.rho);
        discount *= prefs.beta;
    }
    return std::pow(z, 1.0 / prefs.rho);
}

double ez_step(const EZPreferences& prefs, double gamma, double survival, std::span<const double> next_values,
               std::span<const double> weights) {
    if (!(gamma > 0.0)) throw DomainError("ez_step: consumption must be positive");
    if (next_values.size() != weights.size()) throw ValidationError("ez_step: values and weights differ in length");
    double moment = 0.0;
    if (survival > 0.0) {
        for (std::size_t k = 0; k < next_values.size(); ++k) moment += weights[k] * std::pow(next_values[k], prefs.alpha);
        moment *= survival;
    }
    const double continuation = std::pow(moment, prefs.rho / prefs.alpha);
    return std::pow(std::pow(gamma, prefs.rho) + prefs.beta * continuation, 1.0 / prefs.rho);
}

}  // namespace cfund
