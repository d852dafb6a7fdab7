#include "cfund/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "cfund/error.hpp"

#ifndef CFUND_DATA_DIR
#define CFUND_DATA_DIR "data"
#endif

namespace cfund {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
        throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
    }
    return out;
}

template <class Int>
Int to_int(const std::string& key, const std::string& v) {
    Int out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
    }
    return out;
}

PricingMode to_mode(const std::string& key, const std::string& v) {
    if (v == "fair_life") return PricingMode::FairLife;
    if (v == "deterministic_term") return PricingMode::DeterministicTerm;
    throw ConfigError("config: " + key + " must be fair_life or deterministic_term");
}

std::string mode_name(PricingMode m) { return m == PricingMode::FairLife ? "fair_life" : "deterministic_term"; }

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct Field {
    const char* name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define CFUND_DOUBLE(member) \
    Field { #member, [](RunConfig& c, const std::string& v) { c.member = to_double(#member, v); }, [](const RunConfig& c) { return fmt_double(c.member); } }
#define CFUND_SIZE(member) \
    Field { #member, [](RunConfig& c, const std::string& v) { c.member = to_int<std::size_t>(#member, v); }, [](const RunConfig& c) { return std::to_string(c.member); } }
#define CFUND_INT(member) \
    Field { #member, [](RunConfig& c, const std::string& v) { c.member = to_int<int>(#member, v); }, [](const RunConfig& c) { return std::to_string(c.member); } }
#define CFUND_STRING(member) \
    Field { #member, [](RunConfig& c, const std::string& v) { c.member = v; }, [](const RunConfig& c) { return c.member; } }
#define CFUND_MODE(member) \
    Field { #member, [](RunConfig& c, const std::string& v) { c.member = to_mode(#member, v); }, [](const RunConfig& c) { return mode_name(c.member); } }

const std::vector<Field>& fields() {
    static const std::vector<Field> all{
        CFUND_DOUBLE(r),
        CFUND_DOUBLE(mu),
        CFUND_DOUBLE(sigma),
        CFUND_DOUBLE(sp0),
        CFUND_DOUBLE(r_tl),
        CFUND_DOUBLE(total_adequacy),
        CFUND_STRING(mortality_file),
        CFUND_DOUBLE(mortality_truncation),
        CFUND_STRING(family),
        CFUND_DOUBLE(rho),
        CFUND_DOUBLE(lambda),
        CFUND_DOUBLE(ez_alpha),
        CFUND_DOUBLE(ez_rho),
        CFUND_DOUBLE(ez_beta),
        CFUND_DOUBLE(x0),
        CFUND_DOUBLE(x0_multiple),
        CFUND_MODE(x_al_mode),
        CFUND_MODE(annuity_mode),
        CFUND_STRING(fund_kind),
        CFUND_SIZE(fund_n),
        Field{"fan_kinds",
              [](RunConfig& c, const std::string& v) { c.fan_kinds = split_list(v); },
              [](const RunConfig& c) {
                  std::string out;
                  for (const auto& k : c.fan_kinds) out += (out.empty() ? "" : ",") + k;
                  return out;
              }},
        CFUND_SIZE(grid_n_wealth),
        CFUND_DOUBLE(grid_low_factor),
        CFUND_DOUBLE(grid_high_factor),
        CFUND_STRING(grid_spacing),
        CFUND_SIZE(grid_n_consumption),
        CFUND_SIZE(grid_n_pi),
        CFUND_DOUBLE(pi_low),
        CFUND_DOUBLE(pi_high),
        CFUND_SIZE(quadrature_k),
        CFUND_SIZE(n_max),
        Field{"seed", [](RunConfig& c, const std::string& v) { c.seed = to_int<std::uint64_t>("seed", v); },
              [](const RunConfig& c) { return std::to_string(c.seed); }},
        CFUND_SIZE(paths),
        CFUND_SIZE(sims),
        CFUND_SIZE(population_n),
        CFUND_DOUBLE(population_power_low),
        CFUND_DOUBLE(population_power_high),
        CFUND_DOUBLE(population_wealth_low),
        CFUND_DOUBLE(population_wealth_high),
        CFUND_INT(population_age_low),
        CFUND_INT(population_age_high),
        CFUND_DOUBLE(population_sex_split),
        CFUND_DOUBLE(gompertz_a),
        CFUND_DOUBLE(gompertz_b),
        CFUND_DOUBLE(gompertz_c),
        CFUND_DOUBLE(gompertz_male_ratio),
        CFUND_STRING(hetero_estimator),
        CFUND_DOUBLE(histogram_bin_width),
    };
    return all;
}

#undef CFUND_DOUBLE
#undef CFUND_SIZE
#undef CFUND_INT
#undef CFUND_STRING
#undef CFUND_MODE

bool is_fund_kind(const std::string& k) {
    return k == "individual" || k == "collective" || k == "finite" || k == "annuity";
}

}  // namespace

void RunConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    if (!(sigma > 0.0)) fail("sigma must be positive");
    if (!(sp0 > 0.0)) fail("sp0 must be positive");
    if (!(mortality_truncation > 0.0 && mortality_truncation < 1.0)) fail("mortality_truncation must lie in (0, 1)");
    if (family != "km" && family != "vnm" && family != "ez") fail("family must be km, vnm or ez");
    auto exponent_ok = [](double e) { return e < 1.0 && e != 0.0; };
    if (!exponent_ok(rho)) fail("rho must lie in (-inf, 1) without 0");
    if (family == "km" && !(rho < 0.0 || rho > 0.0)) fail("rho must be non-zero");
    if (!(lambda > 0.0)) fail("lambda must be positive");
    if (!exponent_ok(ez_alpha) || !exponent_ok(ez_rho)) fail("ez exponents must lie in (-inf, 1) without 0");
    if (!(ez_beta > 0.0 && ez_beta <= 1.0)) fail("ez_beta must lie in (0, 1]");
    if (x0 < 0.0) fail("x0 must be non-negative");
    if (!(x0_multiple > 0.0)) fail("x0_multiple must be positive");
    if (fund_kind != "individual" && fund_kind != "collective" && fund_kind != "finite") {
        fail("fund_kind must be individual, collective or finite");
    }
    if (fund_n < 1) fail("fund_n must be at least 1");
    if (fan_kinds.empty()) fail("fan_kinds is empty");
    for (const auto& k : fan_kinds) {
        if (!is_fund_kind(k)) fail("unknown fan kind '" + k + "'");
    }
    if (grid_n_wealth < 16) fail("grid_n_wealth must be at least 16");
    if (!(grid_low_factor > 0.0 && grid_high_factor > grid_low_factor)) fail("grid factors must satisfy 0 < low < high");
    if (grid_spacing != "log" && grid_spacing != "linear") fail("grid_spacing must be log or linear");
    if (grid_n_consumption < 2) fail("grid_n_consumption must be at least 2");
    if (grid_n_pi < 1) fail("grid_n_pi must be at least 1");
    if (!(pi_low <= pi_high)) fail("pi_low must not exceed pi_high");
    if (quadrature_k < 1) fail("quadrature_k must be at least 1");
    if (n_max < 1) fail("n_max must be at least 1");
    if (paths < 2) fail("paths must be at least 2");
    if (sims < 1) fail("sims must be at least 1");
    if (population_n < 1) fail("population_n must be at least 1");
    if (hetero_estimator != "control_variate" && hetero_estimator != "plain") {
        fail("hetero_estimator must be control_variate or plain");
    }
    if (!(histogram_bin_width > 0.0)) fail("histogram_bin_width must be positive");
}

std::filesystem::path RunConfig::mortality_path() const {
    const std::filesystem::path p(mortality_file);
    if (p.is_absolute()) return p;
    if (!base_dir.empty() && std::filesystem::exists(base_dir / p)) return base_dir / p;
    return data_dir() / p;
}

RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
    RunConfig cfg;
    cfg.base_dir = base_dir;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        const Field* field = nullptr;
        for (const Field& f : fields()) {
            if (key == f.name) field = &f;
        }
        if (field == nullptr) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError("config line " + std::to_string(lineno) + ": repeated key '" + key + "'");
        field->set(cfg, value);
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    return parse_config(in, path.parent_path());
}

std::string resolved_config(const RunConfig& cfg) {
    std::string out;
    for (const Field& f : fields()) out += std::string(f.name) + " = " + f.get(cfg) + "\n";
    return out;
}

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("CFUND_DATA_DIR"); env != nullptr && *env != '\0') return env;
    return CFUND_DATA_DIR;
}

}  // namespace cfund
