#pragma once

// Gibbs sampler for the Bayesian Lasso and generalized inverse Gaussian
// variate generation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "errors.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "specfun.hpp"

namespace vblasso {

using Rng = std::mt19937_64;

/// Inverse Gaussian IG(mu, shape) draw (Michael, Schucany and Haas).
inline double sample_inverse_gaussian(double mu, double shape, Rng& rng) {
    if (!(mu > 0.0) || !(shape > 0.0)) throw std::invalid_argument("inverse Gaussian needs mu, shape > 0");
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    const double nu = normal(rng);
    const double w = mu * nu * nu / (2.0 * shape);
    // mu (1 + w - sqrt(w^2 + 2w)) without cancellation
    const double x = mu / (1.0 + w + std::sqrt(w * w + 2.0 * w));
    if (!std::isfinite(x)) return mu;
    return unif(rng) <= mu / (mu + x) ? x : mu * mu / x;
}

namespace detail {

inline double gig_mode(double lambda, double omega) {
    if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
    return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// Ratio-of-uniforms for the standardized density x^(lambda-1) exp(-omega (x + 1/x) / 2),
// lambda >= 0. Shifted by the mode for large lambda or omega.
inline double sample_gig_standard(double lambda, double omega, Rng& rng) {
    std::uniform_real_distribution<double> unif;
    const double t = 0.5 * (lambda - 1.0);
    const double s = 0.25 * omega;
    const double xm = gig_mode(lambda, omega);
    const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
    auto half_log_density = [&](double x) { return t * std::log(x) - s * (x + 1.0 / x) - nc; };

    if (lambda > 2.0 || omega > 3.0) {
        // bounding rectangle from the roots of a cubic (Dagpunar)
        const double a = -(2.0 * (lambda + 1.0) / omega + xm);
        const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
        const double c = xm;
        const double p = b - a * a / 3.0;
        const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
        const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
        const double fak = 2.0 * std::sqrt(-p / 3.0);
        const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
        const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;
        const double uplus = (y1 - xm) * std::exp(half_log_density(y1));
        const double uminus = (y2 - xm) * std::exp(half_log_density(y2));
        for (;;) {
            const double u = uminus + unif(rng) * (uplus - uminus);
            const double v = unif(rng);
            const double x = u / v + xm;
            if (x > 0.0 && std::log(v) <= half_log_density(x)) return x;
        }
    }

    const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
    const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
    for (;;) {
        const double u = um * unif(rng);
        const double v = unif(rng);
        const double x = u / v;
        if (x > 0.0 && std::log(v) <= half_log_density(x)) return x;
    }
}

}  // namespace detail

/// One draw from GIG(order, a, b), density proportional to
/// x^(order-1) exp(-(a x + b/x)/2). Orders +-1/2 go through the inverse
/// Gaussian; any other order uses ratio-of-uniforms.
inline double sample_gig(double order, double a, double b, Rng& rng) {
    specfun::GigParams{order, a, b}.validate();
    if (order == 0.5) return 1.0 / sample_inverse_gaussian(std::sqrt(a / b), a, rng);
    if (order == -0.5) return sample_inverse_gaussian(std::sqrt(b / a), b, rng);
    const double alpha = std::sqrt(b / a);
    const double omega = std::sqrt(a * b);
    const double x = detail::sample_gig_standard(std::abs(order), omega, rng);
    return order < 0.0 ? alpha / x : alpha * x;
}

struct GibbsOptions {
    int iterations = 15000;
    int burn_in = 5000;
    int thin = 10;
    std::uint64_t seed = 0;
    // Conditioning hooks: hold tau (and/or lambda) at fixed values instead of sampling them.
    std::optional<Eigen::VectorXd> fixed_tau;
    std::optional<double> fixed_lambda;

    void validate() const {
        if (burn_in < 0) throw std::invalid_argument("burn_in must be nonnegative");
        if (iterations <= burn_in) throw std::invalid_argument("iterations must exceed burn_in");
        if (thin < 1) throw std::invalid_argument("thin must be at least 1");
        if (fixed_lambda && !(*fixed_lambda > 0.0)) throw std::invalid_argument("fixed lambda must be positive");
        if (fixed_tau && !(fixed_tau->array() > 0.0).all())
            throw std::invalid_argument("fixed tau entries must be positive");
    }
    int kept() const { return (iterations - burn_in + thin - 1) / thin; }
};

/// Kept draws, one row per saved iteration.
struct GibbsChain {
    Eigen::MatrixXd beta_draws;
    Eigen::MatrixXd tau_draws;
    Eigen::VectorXd phi_draws;
    Eigen::VectorXd lambda_draws;

    Eigen::Index size() const { return phi_draws.size(); }
};

/// Cycles beta | tau, phi -> tau | beta, phi, lambda -> phi | beta, tau ->
/// lambda | tau, keeping every thin-th draw after burn_in.
inline GibbsChain gibbs_fit(const Dataset& data, const LassoPriors& priors, const GibbsOptions& opts = {}) {
    data.validate();
    priors.validate();
    opts.validate();
    const Eigen::Index n = data.n(), p = data.p();
    if (opts.fixed_tau && opts.fixed_tau->size() != p) throw std::invalid_argument("fixed tau has the wrong length");

    Rng rng(opts.seed);
    std::normal_distribution<double> normal;
    const Eigen::MatrixXd XtX = data.X.transpose() * data.X;
    const Eigen::VectorXd Xty = data.X.transpose() * data.y;

    Eigen::VectorXd tau = opts.fixed_tau ? *opts.fixed_tau : Eigen::VectorXd::Ones(p);
    double lambda = opts.fixed_lambda.value_or(1.0);
    double phi = 1.0;
    Eigen::VectorXd beta(p);

    const double phi_shape = priors.a0 + 0.5 * static_cast<double>(n + p);
    const double lambda_shape = priors.g0 + static_cast<double>(p);

    GibbsChain chain;
    const int kept = opts.kept();
    chain.beta_draws.resize(kept, p);
    chain.tau_draws.resize(kept, p);
    chain.phi_draws.resize(kept);
    chain.lambda_draws.resize(kept);

    Eigen::VectorXd z(p);
    int row = 0;
    for (int it = 0; it < opts.iterations; ++it) {
        Eigen::MatrixXd A = XtX;
        A.diagonal() += tau.cwiseInverse();
        const auto llt = factor_spd(A, "X'X + D_tau^-1", 1e300);
        for (Eigen::Index j = 0; j < p; ++j) z(j) = normal(rng);
        beta = llt.solve(Xty) + llt.matrixU().solve(z) / std::sqrt(phi);

        if (!opts.fixed_tau) {
            for (Eigen::Index j = 0; j < p; ++j) {
                const double b = std::max(beta(j) * beta(j) * phi, 1e-290);
                tau(j) = sample_gig(0.5, 2.0 * lambda, b, rng);
            }
        }

        const double rate = priors.b0 + 0.5 * ((data.y - data.X * beta).squaredNorm() +
                                               beta.dot(tau.cwiseInverse().cwiseProduct(beta)));
        phi = std::gamma_distribution<double>(phi_shape, 1.0 / rate)(rng);

        if (!opts.fixed_lambda) {
            lambda = std::gamma_distribution<double>(lambda_shape, 1.0 / (priors.h0 + tau.sum()))(rng);
        }
        if (!(phi > 0.0) || !(lambda > 0.0) || !std::isfinite(phi) || !std::isfinite(lambda))
            throw NumericalError("Gibbs draw of phi or lambda left the positive reals");

        if (it >= opts.burn_in && (it - opts.burn_in) % opts.thin == 0) {
            chain.beta_draws.row(row) = beta.transpose();
            chain.tau_draws.row(row) = tau.transpose();
            chain.phi_draws(row) = phi;
            chain.lambda_draws(row) = lambda;
            ++row;
        }
    }
    return chain;
}

/// Column-wise summaries of a matrix of draws.
struct ChainSummary {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;  // n - 1 denominator
    std::vector<double> probs;
    Eigen::MatrixXd quantiles;  // columns x probs
};

/// Type-7 (linear interpolation) sample quantile of sorted values.
inline double sorted_quantile(const std::vector<double>& sorted, double prob) {
    if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
    if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("quantile probability outside [0, 1]");
    const double h = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline ChainSummary summarize_draws(const Eigen::MatrixXd& draws, std::vector<double> probs = {0.025, 0.5, 0.975}) {
    if (draws.rows() < 1) throw std::invalid_argument("empty chain");
    ChainSummary out;
    out.probs = std::move(probs);
    out.mean = draws.colwise().mean().transpose();
    out.sd.resize(draws.cols());
    out.quantiles.resize(draws.cols(), static_cast<Eigen::Index>(out.probs.size()));
    const double denom = draws.rows() > 1 ? static_cast<double>(draws.rows() - 1) : 1.0;
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
        out.sd(j) = std::sqrt((draws.col(j).array() - out.mean(j)).square().sum() / denom);
        std::vector<double> col(draws.col(j).data(), draws.col(j).data() + draws.rows());
        std::sort(col.begin(), col.end());
        for (std::size_t k = 0; k < out.probs.size(); ++k)
            out.quantiles(j, static_cast<Eigen::Index>(k)) = sorted_quantile(col, out.probs[k]);
    }
    return out;
}

/// Summary of all parameters, columns ordered beta_1..p, phi, lambda, tau_1..p.
inline ChainSummary chain_summary(const GibbsChain& chain, std::vector<double> probs = {0.025, 0.5, 0.975}) {
    if (chain.size() < 1) throw std::invalid_argument("empty chain");
    const Eigen::Index p = chain.beta_draws.cols();
    Eigen::MatrixXd all(chain.size(), 2 * p + 2);
    all << chain.beta_draws, chain.phi_draws, chain.lambda_draws, chain.tau_draws;
    return summarize_draws(all, std::move(probs));
}

}  // namespace vblasso
