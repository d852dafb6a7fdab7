#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace cfund {

// Discrete distribution of the death time tau on the grid 0, dt, ..., T - dt.
// mass(i) is P(tau = i * dt); a member alive at grid time t still consumes at t
// even if t turns out to be the death step.
//
// Tables are immutable once built and are safe to share between threads.
class MortalityTable {
public:
    // Validates (finite, non-negative, positive total), renormalizes to unit
    // mass and strips trailing zero-mass points so that S(t) > 0 for every
    // retained grid time.
    static MortalityTable from_masses(double dt, std::vector<double> masses);

    double dt() const { return dt_; }
    std::size_t size() const { return p_.size(); }
    double horizon() const { return dt_ * static_cast<double>(p_.size()); }
    double time(std::size_t step) const { return dt_ * static_cast<double>(step); }

    double mass(std::size_t step) const { return p_.at(step); }
    std::span<const double> masses() const { return p_; }

    // P(tau >= t) for a real time t in [0, T]. Throws DomainError outside.
    double survival(double t) const;
    // P(tau >= step * dt), defined for step in [0, size()]; S(size()) = 0.
    double survival_at(std::size_t step) const { return tail_.at(step); }
    // Probability of surviving from grid time `step` to the next grid time.
    // Zero at the final grid point.
    double one_period_survival(std::size_t step) const;

    double expected_death_time() const;

private:
    MortalityTable(double dt, std::vector<double> p);

    double dt_;
    std::vector<double> p_;
    std::vector<double> tail_;
};

// Reads the `t,p` CSV format. Lines starting with '#' and blank lines are
// ignored. The time column must start at 0 and be evenly spaced.
MortalityTable parse_mortality_csv(std::istream& in);
MortalityTable load_mortality_csv(const std::filesystem::path& path);

// Drops grid points whose survival probability is below eps and moves their
// mass onto the last retained point.
MortalityTable truncate_tail(const MortalityTable& table, double eps);

// Synthetic table with hazard h(t) = A + B * c^t (t in years since the start
// of the table). Mass beyond the horizon is assigned to the last grid point.
MortalityTable gompertz_makeham_table(double A, double B, double c, double dt, double horizon);

}  // namespace cfund
