#include "cfund/mortality.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <string>
#include <string_view>

#include "cfund/error.hpp"

namespace cfund {

namespace {

constexpr double kGridTolerance = 1e-9;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view text, double& out) {
    text = trim(text);
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

MortalityTable::MortalityTable(double dt, std::vector<double> p) : dt_(dt), p_(std::move(p)) {
    tail_.assign(p_.size() + 1, 0.0);
    for (std::size_t i = p_.size(); i-- > 0;) tail_[i] = tail_[i + 1] + p_[i];
    tail_[0] = 1.0;
}

MortalityTable MortalityTable::from_masses(double dt, std::vector<double> masses) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("mortality: dt must be positive");
    if (masses.empty()) throw ValidationError("mortality: table is empty");
    for (std::size_t i = 0; i < masses.size(); ++i) {
        if (!std::isfinite(masses[i])) throw ValidationError("mortality: non-finite mass at step " + std::to_string(i));
        if (masses[i] < 0.0) throw ValidationError("mortality: negative mass at step " + std::to_string(i));
    }
    const double total = std::accumulate(masses.begin(), masses.end(), 0.0);
    if (!(total > 0.0)) throw ValidationError("mortality: total mass must be positive");
    for (double& m : masses) m /= total;
    while (masses.back() == 0.0) masses.pop_back();
    return MortalityTable(dt, std::move(masses));
}

double MortalityTable::survival(double t) const {
    const double T = horizon();
    if (!(t >= -kGridTolerance * dt_) || t > T + kGridTolerance * dt_) {
        throw DomainError("mortality: survival time " + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
    }
    // First grid index with time >= t.
    const double k = t / dt_;
    auto step = static_cast<std::size_t>(std::ceil(k - kGridTolerance));
    if (step > p_.size()) step = p_.size();
    return tail_[step];
}

double MortalityTable::one_period_survival(std::size_t step) const {
    if (step >= p_.size()) return 0.0;
    const double here = tail_[step];
    if (!(here > 0.0)) return 0.0;
    return tail_[step + 1] / here;
}

double MortalityTable::expected_death_time() const {
    double e = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) e += time(i) * p_[i];
    return e;
}

MortalityTable parse_mortality_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<double> times;
    std::vector<double> masses;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        if (!header_seen) {
            if (view != "t,p") throw ParseError("mortality csv: expected header 't,p'", line_no);
            header_seen = true;
            continue;
        }
        const auto comma = view.find(',');
        if (comma == std::string_view::npos || view.find(',', comma + 1) != std::string_view::npos) {
            throw ParseError("mortality csv: expected two columns", line_no);
        }
        double t = 0.0;
        double p = 0.0;
        if (!parse_double(view.substr(0, comma), t) || !parse_double(view.substr(comma + 1), p)) {
            throw ParseError("mortality csv: malformed number", line_no);
        }
        if (p < 0.0) throw ValidationError("mortality csv: negative probability on line " + std::to_string(line_no));
        times.push_back(t);
        masses.push_back(p);
    }
    if (!header_seen) throw ParseError("mortality csv: missing header", line_no);
    if (times.size() < 2) throw ValidationError("mortality csv: need at least two rows to infer the grid spacing");
    if (std::abs(times[0]) > kGridTolerance) throw ValidationError("mortality csv: grid must start at t = 0");
    const double dt = times[1] - times[0];
    if (!(dt > 0.0)) throw ValidationError("mortality csv: times must be strictly increasing");
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double expected = dt * static_cast<double>(i);
        if (std::abs(times[i] - expected) > kGridTolerance * std::max(1.0, expected)) {
            throw ValidationError("mortality csv: uneven grid at t = " + std::to_string(times[i]));
        }
    }
    return MortalityTable::from_masses(dt, std::move(masses));
}

MortalityTable load_mortality_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mortality file " + path.string());
    return parse_mortality_csv(in);
}

MortalityTable truncate_tail(const MortalityTable& table, double eps) {
    if (!(eps > 0.0) || !(eps < 1.0)) throw ValidationError("truncate_tail: eps must lie in (0, 1)");
    std::size_t keep = table.size();
    while (keep > 1 && table.survival_at(keep - 1) < eps) --keep;
    if (keep == table.size()) return table;
    std::vector<double> p(table.masses().begin(), table.masses().begin() + static_cast<std::ptrdiff_t>(keep));
    p.back() += table.survival_at(keep);
    return MortalityTable::from_masses(table.dt(), std::move(p));
}

MortalityTable gompertz_makeham_table(double A, double B, double c, double dt, double horizon) {
    if (!(A >= 0.0) || !(B >= 0.0) || !(c >= 1.0)) throw ValidationError("gompertz_makeham: need A >= 0, B >= 0, c >= 1");
    if (A == 0.0 && B == 0.0) throw ValidationError("gompertz_makeham: hazard is identically zero");
    if (!(dt > 0.0) || !(horizon >= dt)) throw ValidationError("gompertz_makeham: need dt > 0 and horizon >= dt");
    const auto n = static_cast<std::size_t>(std::llround(horizon / dt));
    const double log_c = std::log(c);
    auto cumulative_hazard = [&](double t) {
        const double gompertz = log_c > 0.0 ? B * std::expm1(log_c * t) / log_c : B * t;
        return A * t + gompertz;
    };
    std::vector<double> p(n);
    double s_prev = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s_next = i + 1 < n ? std::exp(-cumulative_hazard(dt * static_cast<double>(i + 1))) : 0.0;
        p[i] = s_prev - s_next;
        s_prev = s_next;
    }
    return MortalityTable::from_masses(dt, std::move(p));
}

}  // namespace cfund
