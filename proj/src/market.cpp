#include "cfund/market.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "cfund/error.hpp"

namespace cfund {

void MarketParams::validate() const {
    if (!std::isfinite(r) || !std::isfinite(mu) || !std::isfinite(sigma)) {
        throw ValidationError("market: parameters must be finite");
    }
    if (!(sigma > 0.0)) throw ValidationError("market: sigma must be positive");
}

LogReturn log_return_params(const MarketParams& mp, double pi, double dt) {
    const double drift = mp.r + pi * (mp.mu - mp.r) - 0.5 * pi * pi * mp.sigma * mp.sigma;
    return {drift * dt, std::abs(pi) * mp.sigma * std::sqrt(dt)};
}

double gross_return(const MarketParams& mp, double pi, double dt, double shock) {
    const auto lr = log_return_params(mp, pi, dt);
    return std::exp(lr.mean + lr.sd * shock);
}

// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
NormalRule gauss_hermite_rule(std::size_t K) {
    if (K < 1) throw ValidationError("quadrature: need at least one node");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    for (std::size_t k = 1; k < K; ++k) {
        const double off = std::sqrt(static_cast<double>(k));
        jacobi(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = off;
        jacobi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    NormalRule rule;
    rule.nodes.resize(K);
    rule.weights.resize(K);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const auto col = static_cast<Eigen::Index>(k);
        rule.nodes[k] = solver.eigenvalues()(col);
        const double v0 = solver.eigenvectors()(0, col);
        rule.weights[k] = v0 * v0;
        total += rule.weights[k];
    }
    for (double& w : rule.weights) w /= total;
    // Exact symmetry about zero.
    for (std::size_t k = 0; k < K / 2; ++k) {
        const double x = 0.5 * (rule.nodes[K - 1 - k] - rule.nodes[k]);
        const double w = 0.5 * (rule.weights[K - 1 - k] + rule.weights[k]);
        rule.nodes[k] = -x;
        rule.nodes[K - 1 - k] = x;
        rule.weights[k] = rule.weights[K - 1 - k] = w;
    }
    if (K % 2 == 1) rule.nodes[K / 2] = 0.0;
    return rule;
}

double ReturnQuadrature::expectation() const {
    double e = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) e += weights[k] * nodes[k];
    return e;
}

ReturnQuadrature return_nodes(const MarketParams& mp, double pi, double dt, std::size_t K) {
    if (K < 1) throw ValidationError("return_nodes: K must be at least 1");
    const auto lr = log_return_params(mp, pi, dt);
    if (K == 1 || lr.sd == 0.0) return {{std::exp(lr.mean)}, {1.0}};
    const auto rule = gauss_hermite_rule(K);
    ReturnQuadrature q;
    q.weights = rule.weights;
    q.nodes.resize(K);
    for (std::size_t k = 0; k < K; ++k) q.nodes[k] = std::exp(lr.mean + lr.sd * rule.nodes[k]);
    return q;
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

ShockMatrix::ShockMatrix(std::uint64_t seed, std::size_t n_paths, std::size_t n_steps)
    : seed_(seed), n_paths_(n_paths), n_steps_(n_steps), data_(n_paths * n_steps) {
    if (n_paths < 1 || n_steps < 1) throw ValidationError("simulate_shocks: need at least one path and one step");
    for (std::size_t p = 0; p < n_paths; ++p) {
        auto rng = substream(seed, static_cast<std::uint64_t>(Stream::MarketShocks), p);
        std::normal_distribution<double> normal;
        for (std::size_t s = 0; s < n_steps; ++s) data_[p * n_steps + s] = normal(rng);
    }
}

ShockMatrix simulate_shocks(std::uint64_t seed, std::size_t n_paths, std::size_t n_steps) {
    return ShockMatrix(seed, n_paths, n_steps);
}

}  // namespace cfund
