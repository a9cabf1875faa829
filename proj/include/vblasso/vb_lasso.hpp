#pragma once

// Coordinate-ascent variational inference for the Bayesian Lasso
//
//   y | beta, phi    ~ N(X beta, I / phi)
//   beta | phi, tau  ~ N(0, D_tau / phi)
//   tau_j | lambda   ~ Exp(lambda)            (rate parameterization)
//   phi ~ Ga(a0, b0),  lambda ~ Ga(g0, h0)    (or Jeffreys 1/phi, 1/lambda)
//
// with mean-field factors q1(beta, phi) normal-gamma, q2(tau) a product of
// GIG(1/2, d, f_j), and q3(lambda) gamma.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/math/distributions/students_t.hpp>

#include "errors.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "specfun.hpp"

namespace vblasso {

/// Condition-number limit for the q1 precision matrix.
inline constexpr double kMaxCondition = 1e12;
/// Floor applied to f_tau before GIG moments are taken.
inline constexpr double kTauScaleFloor = 1e-12;

enum class Monitor { elbo, hyperparameters, both };

struct FitOptions {
    int max_iterations = 1000;
    double rel_change_tol = 1e-4;  // 0.01% on monitored hyperparameters
    double elbo_tol = 1e-8;        // relative ELBO change when monitoring the ELBO
    std::uint64_t init_seed = 0;
    Monitor monitor = Monitor::hyperparameters;

    void validate() const {
        if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
        if (!(rel_change_tol > 0.0) || !(elbo_tol > 0.0))
            throw std::invalid_argument("tolerances must be positive");
    }
};

/// Variational hyperparameters. C_beta is covariance-scale:
/// q1(beta | phi) = N(m_beta, C_beta / phi), q1(phi) = Ga(a_phi, b_phi).
struct VariationalState {
    Eigen::VectorXd m_beta;
    Eigen::MatrixXd C_beta;
    double a_phi = 0.0;
    double b_phi = 0.0;
    double c_tau = 0.5;
    double d_tau = 0.0;
    Eigen::VectorXd f_tau;
    double g_lambda = 0.0;
    double h_lambda = 0.0;
    int iteration = 0;
    std::vector<double> elbo_trace;
    bool converged = false;
    std::uint64_t seed = 0;

    Eigen::Index p() const { return f_tau.size(); }
    double phi_mean() const { return a_phi / b_phi; }
    double phi_sd() const { return std::sqrt(a_phi) / b_phi; }
    double lambda_mean() const { return g_lambda / h_lambda; }
    double lambda_sd() const { return std::sqrt(g_lambda) / h_lambda; }

    specfun::GigParams tau_factor(Eigen::Index j) const {
        return {c_tau, d_tau, std::max(f_tau(j), kTauScaleFloor)};
    }
    Eigen::VectorXd tau_mean() const {
        Eigen::VectorXd v(p());
        for (Eigen::Index j = 0; j < p(); ++j) v(j) = specfun::gig_mean(tau_factor(j));
        return v;
    }
    Eigen::VectorXd tau_mean_inverse() const {
        Eigen::VectorXd v(p());
        for (Eigen::Index j = 0; j < p(); ++j) v(j) = specfun::gig_mean_inverse(tau_factor(j));
        return v;
    }
    Eigen::VectorXd tau_sd() const {
        Eigen::VectorXd v(p());
        for (Eigen::Index j = 0; j < p(); ++j) v(j) = std::sqrt(specfun::gig_var(tau_factor(j)));
        return v;
    }

    /// Marginal posterior sd of beta_j under q1: sqrt(b/(a-1) C_jj), the
    /// variance of the Student-t marginal of the normal-gamma factor.
    Eigen::VectorXd beta_sd() const {
        if (!(a_phi > 1.0)) throw std::domain_error("beta marginal variance needs a_phi > 1");
        return (C_beta.diagonal() * (b_phi / (a_phi - 1.0))).array().sqrt();
    }
};

namespace detail {

/// Sufficient statistics of (y, X) reused across iterations.
struct Gram {
    const Dataset* data = nullptr;
    Eigen::MatrixXd XtX;
    Eigen::VectorXd Xty;
    double n = 0.0;

    explicit Gram(const Dataset& d)
        : data(&d), XtX(d.X.transpose() * d.X), Xty(d.X.transpose() * d.y), n(static_cast<double>(d.n())) {}
};

inline void check_finite(double v, const char* term) {
    if (!std::isfinite(v)) throw NumericalError(std::string("ELBO term ") + term + " is not finite");
}

/// q1 update with a given diagonal E[D_tau^-1].
inline void update_q1(VariationalState& s, const Gram& g, const LassoPriors& priors,
                      const Eigen::VectorXd& tau_inv) {
    if (tau_inv.size() != g.XtX.rows()) throw std::invalid_argument("q2 factor does not match the number of columns");
    Eigen::MatrixXd precision = g.XtX;
    precision.diagonal() += tau_inv;
    const auto llt = factor_spd(precision, "C_beta^-1", kMaxCondition);
    s.C_beta = spd_inverse(llt, precision.rows());
    s.m_beta = llt.solve(g.Xty);
    s.a_phi = priors.a0 + 0.5 * g.n;
    // y'y - m' C^-1 m, written as a sum of nonnegative pieces
    const Eigen::VectorXd resid = g.data->y - g.data->X * s.m_beta;
    const double quad = resid.squaredNorm() + s.m_beta.dot(tau_inv.cwiseProduct(s.m_beta));
    s.b_phi = priors.b0 + 0.5 * quad;
    if (!(s.b_phi > 0.0)) throw NumericalError("b_phi is not positive");
}

inline void update_q2(VariationalState& s) {
    s.c_tau = 0.5;
    s.d_tau = 2.0 * s.lambda_mean();
    const double phi = s.phi_mean();
    s.f_tau = (s.m_beta.array().square() * phi + s.C_beta.diagonal().array()).max(kTauScaleFloor).matrix();
}

inline void update_q3(VariationalState& s, const LassoPriors& priors) {
    s.g_lambda = priors.g0 + static_cast<double>(s.p());
    s.h_lambda = priors.h0 + s.tau_mean().sum();
}

}  // namespace detail

/// Deterministic starting point: f_tau = 1, d_tau = 2, g = g0 + p,
/// h = max(h0 + p, 1), and a first q1 step with E[D_tau^-1] = I.
/// The seed is recorded but the scheme draws no random numbers.
inline VariationalState initialize(const Dataset& data, const LassoPriors& priors, std::uint64_t seed = 0) {
    data.validate();
    priors.validate();
    const detail::Gram g(data);
    VariationalState s;
    s.seed = seed;
    const Eigen::Index p = data.p();
    s.c_tau = 0.5;
    s.d_tau = 2.0;
    s.f_tau = Eigen::VectorXd::Ones(p);
    s.g_lambda = priors.g0 + static_cast<double>(p);
    s.h_lambda = std::max(priors.h0 + static_cast<double>(p), 1.0);
    detail::update_q1(s, g, priors, Eigen::VectorXd::Ones(p));
    return s;
}

/// q1(beta, phi): C^-1 = E[D_tau^-1] + X'X, m = C X'y, a = a0 + n/2,
/// b = b0 + (y'y - m' C^-1 m)/2.
inline VariationalState update_q1(VariationalState state, const Dataset& data, const LassoPriors& priors) {
    detail::update_q1(state, detail::Gram(data), priors, state.tau_mean_inverse());
    return state;
}

/// q2(tau): GIG(1/2, 2 E[lambda], E[phi beta_j^2]).
inline VariationalState update_q2(VariationalState state, const LassoPriors& /*priors*/) {
    detail::update_q2(state);
    return state;
}

/// q3(lambda): Ga(g0 + p, h0 + sum_j E[tau_j]).
inline VariationalState update_q3(VariationalState state, const LassoPriors& priors) {
    detail::update_q3(state, priors);
    return state;
}

/// Individual expectations making up the evidence lower bound.
struct ElboTerms {
    double log_lik = 0.0;         // E[log p(y | beta, phi)]
    double log_prior_beta_phi = 0.0;  // E[log p(beta, phi | tau)]
    double log_prior_tau = 0.0;   // E[log p(tau | lambda)]
    double log_prior_lambda = 0.0;  // E[log p(lambda)]
    double entropy_q1 = 0.0;      // -E[log q1]
    double entropy_q2 = 0.0;      // -E[log q2]
    double entropy_q3 = 0.0;      // -E[log q3]

    double total() const {
        return log_lik + log_prior_beta_phi + log_prior_tau + log_prior_lambda + entropy_q1 + entropy_q2 +
               entropy_q3;
    }
};

namespace detail {

// Terms shared by the Lasso and spline models: everything involving the
// penalized block (beta, phi, tau, lambda) except the likelihood.
inline void penalized_block_terms(const VariationalState& s, const LassoPriors& priors, ElboTerms& t) {
    using specfun::digamma;
    using specfun::log_gamma;
    constexpr double log2pi = 1.8378770664093454835606594728112;
    const double p = static_cast<double>(s.p());
    const double e_phi = s.phi_mean();
    const double e_log_phi = digamma(s.a_phi) - std::log(s.b_phi);

    double sum_e_tau = 0.0, sum_e_log_tau = 0.0, quad = 0.0, q2 = 0.0;
    for (Eigen::Index j = 0; j < s.p(); ++j) {
        const specfun::GigParams f = s.tau_factor(j);
        const double e_tau = specfun::gig_mean(f);
        const double e_inv = specfun::gig_mean_inverse(f);
        const double e_log = specfun::gig_expected_log(f);
        const double e_phi_beta2 = s.m_beta(j) * s.m_beta(j) * e_phi + s.C_beta(j, j);
        sum_e_tau += e_tau;
        sum_e_log_tau += e_log;
        quad += e_phi_beta2 * e_inv;
        q2 += 0.5 * f.order * std::log(f.a / f.b) - std::numbers::ln2 - specfun::log_bessel_k(f.order, std::sqrt(f.a * f.b)) +
              (f.order - 1.0) * e_log - 0.5 * (f.a * e_tau + f.b * e_inv);
    }

    const double phi_norm = priors.jeffreys ? 0.0 : priors.a0 * std::log(priors.b0) - log_gamma(priors.a0);
    const double a0 = priors.jeffreys ? 0.0 : priors.a0;
    const double b0 = priors.jeffreys ? 0.0 : priors.b0;
    t.log_prior_beta_phi = 0.5 * p * (e_log_phi - log2pi) - 0.5 * sum_e_log_tau - 0.5 * quad + phi_norm +
                           (a0 - 1.0) * e_log_phi - b0 * e_phi;

    if (s.p() > 0) {
        const double e_lambda = s.lambda_mean();
        const double e_log_lambda = digamma(s.g_lambda) - std::log(s.h_lambda);
        t.log_prior_tau = p * e_log_lambda - e_lambda * sum_e_tau;
        if (priors.jeffreys) {
            t.log_prior_lambda = -e_log_lambda;
        } else {
            t.log_prior_lambda = priors.g0 * std::log(priors.h0) - log_gamma(priors.g0) +
                                 (priors.g0 - 1.0) * e_log_lambda - priors.h0 * e_lambda;
        }
        t.entropy_q2 = -q2;
        t.entropy_q3 = -(s.g_lambda * std::log(s.h_lambda) - log_gamma(s.g_lambda) +
                         (s.g_lambda - 1.0) * e_log_lambda - s.g_lambda);
    }

    double log_det_C = 0.0;
    if (s.p() > 0) log_det_C = log_det(factor_spd(s.C_beta, "C_beta", 1e300));
    const double e_log_q1 = 0.5 * p * (e_log_phi - log2pi) - 0.5 * log_det_C - 0.5 * p + s.a_phi * std::log(s.b_phi) -
                            log_gamma(s.a_phi) + (s.a_phi - 1.0) * e_log_phi - s.a_phi;
    t.entropy_q1 = -e_log_q1;
}

}  // namespace detail

/// Expectation terms of the ELBO for the Lasso model.
inline ElboTerms elbo_terms(const VariationalState& s, const Dataset& data, const LassoPriors& priors) {
    constexpr double log2pi = 1.8378770664093454835606594728112;
    ElboTerms t;
    const double n = static_cast<double>(data.n());
    const double e_log_phi = specfun::digamma(s.a_phi) - std::log(s.b_phi);
    const Eigen::VectorXd resid = data.y - data.X * s.m_beta;
    const double trace = (data.X * s.C_beta).cwiseProduct(data.X).sum();  // tr(X'X C)
    t.log_lik = 0.5 * n * (e_log_phi - log2pi) - 0.5 * (s.phi_mean() * resid.squaredNorm() + trace);
    detail::penalized_block_terms(s, priors, t);

    detail::check_finite(t.log_lik, "E[log p(y|beta,phi)]");
    detail::check_finite(t.log_prior_beta_phi, "E[log p(beta,phi|tau)]");
    detail::check_finite(t.log_prior_tau, "E[log p(tau|lambda)]");
    detail::check_finite(t.log_prior_lambda, "E[log p(lambda)]");
    detail::check_finite(t.entropy_q1, "-E[log q1(beta,phi)]");
    detail::check_finite(t.entropy_q2, "-E[log q2(tau)]");
    detail::check_finite(t.entropy_q3, "-E[log q3(lambda)]");
    return t;
}

inline double elbo(const VariationalState& s, const Dataset& data, const LassoPriors& priors) {
    return elbo_terms(s, data, priors).total();
}

namespace detail {

inline double block_change(const Eigen::MatrixXd& now, const Eigen::MatrixXd& before) {
    if (now.size() == 0) return 0.0;
    return (now - before).cwiseAbs().maxCoeff() / (before.cwiseAbs().maxCoeff() + 1e-12);
}
inline double scalar_change(double now, double before) {
    return std::abs(now - before) / (std::abs(before) + 1e-12);
}

/// Convergence bookkeeping shared with the spline fit.
struct Tracker {
    FitOptions opts;
    bool elbo_ok(const std::vector<double>& trace) const {
        if (trace.size() < 2) return false;
        const double last = trace.back(), prev = trace[trace.size() - 2];
        return std::abs(last - prev) <= opts.elbo_tol * std::max(1.0, std::abs(last));
    }
    bool done(double param_change, const std::vector<double>& trace) const {
        const bool params = param_change < opts.rel_change_tol;
        switch (opts.monitor) {
            case Monitor::elbo: return elbo_ok(trace);
            case Monitor::hyperparameters: return params;
            case Monitor::both: return params && elbo_ok(trace);
        }
        return false;
    }
};

inline double lasso_change(const VariationalState& now, const VariationalState& before) {
    return std::max({block_change(now.m_beta, before.m_beta), block_change(now.C_beta, before.C_beta),
                     scalar_change(now.b_phi, before.b_phi), scalar_change(now.d_tau, before.d_tau),
                     block_change(now.f_tau, before.f_tau), scalar_change(now.h_lambda, before.h_lambda)});
}

}  // namespace detail

/// CAVI: cycles q1 -> q2 -> q3 and records the ELBO after each cycle until
/// the monitored quantities settle or max_iterations is reached. An
/// unconverged fit is returned with converged = false.
inline VariationalState fit(const Dataset& data, const LassoPriors& priors, const FitOptions& opts = {}) {
    opts.validate();
    VariationalState s = initialize(data, priors, opts.init_seed);
    const detail::Gram g(data);
    const detail::Tracker tracker{opts};
    for (int it = 1; it <= opts.max_iterations; ++it) {
        const VariationalState before = s;
        detail::update_q1(s, g, priors, s.tau_mean_inverse());
        detail::update_q2(s);
        detail::update_q3(s, priors);
        s.elbo_trace.push_back(elbo(s, data, priors));
        s.iteration = it;
        if (tracker.done(detail::lasso_change(s, before), s.elbo_trace)) {
            s.converged = true;
            break;
        }
    }
    return s;
}

/// Per-point Student-t predictive St(location, scale, dof). `scale` is the
/// squared scale parameter (1 + x'Cx) b/(a - 1); dof = 2a.
struct StudentTPredictive {
    Eigen::VectorXd location;
    Eigen::VectorXd scale;
    double dof = 0.0;

    double density(Eigen::Index i, double y) const {
        const double s = std::sqrt(scale(i));
        const boost::math::students_t dist(dof);
        return boost::math::pdf(dist, (y - location(i)) / s) / s;
    }

    /// Central interval with the given coverage level.
    std::pair<Eigen::VectorXd, Eigen::VectorXd> interval(double level = 0.95) const {
        if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must be in (0, 1)");
        const boost::math::students_t dist(dof);
        const double q = boost::math::quantile(dist, 0.5 + 0.5 * level);
        const Eigen::VectorXd half = scale.array().sqrt() * q;
        return {location - half, location + half};
    }
};

/// Predictive for new rows of X_new under q1.
inline StudentTPredictive predictive(const VariationalState& s, const Eigen::MatrixXd& X_new) {
    if (!(s.a_phi > 1.0)) throw std::invalid_argument("predictive scale undefined for a_phi <= 1");
    if (X_new.cols() != s.p()) throw std::invalid_argument("X_new has the wrong number of columns");
    StudentTPredictive out;
    out.location = X_new * s.m_beta;
    const Eigen::VectorXd xcx = (X_new * s.C_beta).cwiseProduct(X_new).rowwise().sum();
    out.scale = (1.0 + xcx.array()) * (s.b_phi / (s.a_phi - 1.0));
    out.dof = 2.0 * s.a_phi;
    return out;
}

}  // namespace vblasso
