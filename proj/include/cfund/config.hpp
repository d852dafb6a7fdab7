#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cfund/prefs.hpp"

namespace cfund {

// Every run parameter. All rates are real (net of inflation).
struct RunConfig {
    // market
    double r = 0.027;
    double mu = 0.062;
    double sigma = 0.15;
    // state pension and adequacy
    double sp0 = 6718.0;
    double r_tl = 0.027;
    double total_adequacy = 16800.0;
    // mortality
    std::string mortality_file = "cmi2018f_15.csv";
    double mortality_truncation = 1e-5;
    // preferences: km | vnm | ez
    std::string family = "km";
    double rho = -1.0;
    double lambda = 1.0;
    double ez_alpha = -1.0;
    double ez_rho = -1.0;
    double ez_beta = 1.0;
    // budget: x0 if positive, else x0_multiple * X_AL
    double x0 = 0.0;
    double x0_multiple = 1.0;
    PricingMode x_al_mode = PricingMode::FairLife;
    PricingMode annuity_mode = PricingMode::FairLife;
    // fund selection for solve / evaluate: individual | collective | finite
    std::string fund_kind = "collective";
    std::size_t fund_n = 10;
    std::vector<std::string> fan_kinds{"annuity", "individual", "collective"};
    // grid
    std::size_t grid_n_wealth = 400;
    double grid_low_factor = 0.01;
    double grid_high_factor = 50.0;
    std::string grid_spacing = "log";
    std::size_t grid_n_consumption = 41;
    std::size_t grid_n_pi = 11;
    double pi_low = 0.0;
    double pi_high = 1.0;
    std::size_t quadrature_k = 9;
    std::size_t n_max = 50;
    // simulation
    std::uint64_t seed = 20190701;
    std::size_t paths = 10000;
    std::size_t sims = 10000;
    // heterogeneous fund
    std::size_t population_n = 100;
    double population_power_low = -1.5;
    double population_power_high = -0.5;
    double population_wealth_low = 0.5;
    double population_wealth_high = 1.5;
    int population_age_low = 60;
    int population_age_high = 69;
    double population_sex_split = 0.5;
    double gompertz_a = 0.0003;
    double gompertz_b = 0.00697;
    double gompertz_c = 1.1051709180756477;
    double gompertz_male_ratio = 1.5;
    std::string hetero_estimator = "control_variate";
    double histogram_bin_width = 0.005;

    // Directory used to resolve a relative mortality_file.
    std::filesystem::path base_dir;

    void validate() const;
    std::filesystem::path mortality_path() const;
};

// Flat `key = value` lines, `#` starts a comment. Unknown keys and repeated
// keys are rejected.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

// Every key with its value, in a form parse_config reads back exactly.
std::string resolved_config(const RunConfig& cfg);

// Directory holding the bundled data files.
std::filesystem::path data_dir();

}  // namespace cfund
