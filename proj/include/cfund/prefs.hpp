#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "cfund/mortality.hpp"

namespace cfund {

// Deterministic state pension SP_t = sp0 * exp(r_tl * t) and the private
// adequacy level AL_t = total_adequacy - SP_t on the grid of a mortality
// table. AL_t may be negative; the funded level is max(AL_t, 0).
struct Schedules {
    double sp0 = 6718.0;
    double r_tl = 0.027;
    double total_adequacy = 16800.0;
    double dt = 1.0;
    std::size_t n_steps = 0;

    static Schedules for_table(double sp0, double r_tl, double total_adequacy, const MortalityTable& table);

    double state_pension(std::size_t step) const;
    double adequacy(std::size_t step) const;
    double funded_adequacy(std::size_t step) const;
    std::vector<double> funded_adequacy_levels() const;

    void validate() const;
};

// Exponential Kihlstrom-Mirman preferences with a state pension:
// u(g, t) = a (g + SP_t)^rho - a (AL_t + SP_t)^rho, gain E[-exp(-sum u dt)].
struct KMPreferences {
    double rho = -1.0;
    double a = -1.0;
    Schedules schedules;

    double utility(double gamma, std::size_t step) const;
    void validate() const;
};

// Inter-temporally additive power utility u(g) = g^rho / rho, no discounting.
struct VNMPreferences {
    double rho = -1.0;

    double utility(double gamma) const;
    void validate() const;
};

// Homogeneous Epstein-Zin utility with mortality.
struct EZPreferences {
    double alpha = -1.0;
    double rho = -1.0;
    double beta = 1.0;

    void validate() const;
};

using PreferenceSpec = std::variant<VNMPreferences, KMPreferences, EZPreferences>;

// x^g for g > 0 and -x^g for g < 0; increasing in x for every g != 0.
double signed_power(double exponent, double x);

double utility_u(const KMPreferences& prefs, double gamma, std::size_t step);

// Sum of u(gamma_t, t) dt over t <= tau. -inf once any consumed amount is
// negative.
double satisfaction(const KMPreferences& prefs, std::span<const double> stream, std::size_t tau);

struct GainEstimate {
    double mean = 0.0;
    double se = 0.0;
    // log(-mean); stays finite when exp(-s) would overflow.
    double log_neg_mean = 0.0;
};

// Sample mean of -exp(-s) with its standard error.
GainEstimate km_gain(std::span<const double> satisfactions);

// Scale a such that the directional derivative of the satisfaction of the
// deterministic stream max(AL_t, 0) in its own direction equals lambda.
double calibrate_a(double lambda, double rho, const Schedules& schedules);

enum class PricingMode { DeterministicTerm, FairLife };

// Present value at r of a yearly level paid on every grid point
// (DeterministicTerm) or only while alive (FairLife).
double funding_cost(std::span<const double> level, double r, const MortalityTable& table, PricingMode mode);

// (sum_i beta^i gamma_i^rho)^(1/rho) for a strictly positive stream.
double ez_deterministic_value(const EZPreferences& prefs, std::span<const double> stream);

// One step of the homogeneous Epstein-Zin recursion. `next_values` and
// `weights` discretise Z_{t+dt} on the surviving branch; the dead branch
// contributes zero to E_t(Z^alpha) under either sign convention.
double ez_step(const EZPreferences& prefs, double gamma, double survival, std::span<const double> next_values,
               std::span<const double> weights);

}  // namespace cfund
