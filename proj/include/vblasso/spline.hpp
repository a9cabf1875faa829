#pragma once

// Penalized regression splines on the truncated power basis
//
//   f(x) = sum_{j=0}^{p} beta1_j x^j + sum_{k=1}^{K} beta2_k (x - kappa_k)_+^p
//
// Only the knot coefficients beta2 carry the Lasso prior; the polynomial
// block has an independent normal prior and its own mean-field factor q4.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <boost/math/distributions/students_t.hpp>

#include "gibbs.hpp"
#include "model.hpp"
#include "vb_lasso.hpp"

namespace vblasso {

enum class Placement { quantile, equispaced, explicit_knots };

struct SplineSpec {
    int degree = 3;
    std::vector<double> knots;
    Placement placement = Placement::explicit_knots;

    Eigen::Index K() const { return static_cast<Eigen::Index>(knots.size()); }

    void validate() const {
        if (degree < 0) throw std::invalid_argument("spline degree must be nonnegative");
        for (std::size_t k = 0; k < knots.size(); ++k) {
            if (!std::isfinite(knots[k])) throw std::invalid_argument("knots must be finite");
            if (k > 0 && !(knots[k] > knots[k - 1])) throw std::invalid_argument("knots must be strictly increasing");
        }
    }
};

/// Interior knots at the type-7 quantiles k/(K+1) or equally spaced over
/// the range of x.
inline SplineSpec place_knots(const Eigen::VectorXd& x, int K, Placement placement, int degree = 3) {
    if (K < 0) throw std::invalid_argument("knot count must be nonnegative");
    if (x.size() < 2) throw std::invalid_argument("need at least two x values");
    std::vector<double> sorted(x.data(), x.data() + x.size());
    std::sort(sorted.begin(), sorted.end());
    SplineSpec spec{degree, {}, placement};
    if (K == 0) return spec;
    const double lo = sorted.front(), hi = sorted.back();
    if (placement == Placement::quantile) {
        const std::set<double> distinct(sorted.begin(), sorted.end());
        if (static_cast<int>(distinct.size()) < K + 2)
            throw std::invalid_argument("quantile placement of " + std::to_string(K) + " knots needs at least " +
                                        std::to_string(K + 2) + " distinct x values");
        for (int k = 1; k <= K; ++k) spec.knots.push_back(sorted_quantile(sorted, static_cast<double>(k) / (K + 1)));
        // ties in the data can repeat a quantile
        spec.knots.erase(std::unique(spec.knots.begin(), spec.knots.end()), spec.knots.end());
    } else if (placement == Placement::equispaced) {
        if (!(hi > lo)) throw std::invalid_argument("x has zero range");
        for (int k = 1; k <= K; ++k) spec.knots.push_back(lo + k * (hi - lo) / (K + 1));
    } else {
        throw std::invalid_argument("explicit placement takes the knots directly");
    }
    return spec;
}

struct PartitionedDesign {
    Eigen::MatrixXd X1;  // n x (p+1), column j is x^j
    Eigen::MatrixXd X2;  // n x K, column k is (x - kappa_k)_+^p
    SplineSpec spec;
};

/// (u)_+^p with (u)_+^0 the step that is 0 at u = 0.
inline double truncated_power(double u, int degree) {
    if (u <= 0.0) return 0.0;
    return degree == 0 ? 1.0 : std::pow(u, degree);
}

inline PartitionedDesign build_design(const Eigen::VectorXd& x, const SplineSpec& spec) {
    spec.validate();
    PartitionedDesign d;
    d.spec = spec;
    const Eigen::Index n = x.size();
    d.X1.resize(n, spec.degree + 1);
    d.X2.resize(n, spec.K());
    for (Eigen::Index i = 0; i < n; ++i) {
        double power = 1.0;
        for (int j = 0; j <= spec.degree; ++j) {
            d.X1(i, j) = power;
            power *= x(i);
        }
        for (Eigen::Index k = 0; k < spec.K(); ++k)
            d.X2(i, k) = truncated_power(x(i) - spec.knots[static_cast<std::size_t>(k)], spec.degree);
    }
    return d;
}

/// beta1 ~ N(m0, C0), independent of phi. C0 is a covariance.
struct Beta1Prior {
    Eigen::VectorXd m0;
    Eigen::MatrixXd C0;

    /// N(1, 100) on every polynomial coefficient.
    static Beta1Prior standard(int degree) {
        return {Eigen::VectorXd::Ones(degree + 1), 100.0 * Eigen::MatrixXd::Identity(degree + 1, degree + 1)};
    }
};

/// Lasso factors for the knot block plus q4(beta1) = N(m_beta1, C_beta1).
struct SplineVariationalState : VariationalState {
    Eigen::VectorXd m_beta1;
    Eigen::MatrixXd C_beta1;
};

namespace detail {

struct SplineGram {
    const Eigen::VectorXd* y;
    const PartitionedDesign* design;
    Eigen::MatrixXd X1tX1, X2tX2, X1tX2;
    Eigen::VectorXd X1ty, X2ty;
    Eigen::MatrixXd C0_inv;
    Eigen::VectorXd C0_inv_m0;
    double log_det_C0 = 0.0;
    double n = 0.0;

    SplineGram(const Eigen::VectorXd& yy, const PartitionedDesign& d, const Beta1Prior& prior)
        : y(&yy), design(&d) {
        X1tX1 = d.X1.transpose() * d.X1;
        X2tX2 = d.X2.transpose() * d.X2;
        X1tX2 = d.X1.transpose() * d.X2;
        X1ty = d.X1.transpose() * yy;
        X2ty = d.X2.transpose() * yy;
        const auto llt = factor_spd(prior.C0, "C0", 1e15);
        C0_inv = spd_inverse(llt, prior.C0.rows());
        C0_inv_m0 = C0_inv * prior.m0;
        log_det_C0 = log_det(llt);
        n = static_cast<double>(yy.size());
    }
};

inline void spline_q1(SplineVariationalState& s, const SplineGram& g, const LassoPriors& priors,
                      const Eigen::VectorXd& tau_inv) {
    const PartitionedDesign& d = *g.design;
    const Eigen::Index K = d.X2.cols();
    if (K > 0) {
        Eigen::MatrixXd precision = g.X2tX2;
        precision.diagonal() += tau_inv;
        const auto llt = factor_spd(precision, "C_beta^-1", kMaxCondition);
        s.C_beta = spd_inverse(llt, K);
        s.m_beta = llt.solve(g.X2ty - g.X1tX2.transpose() * s.m_beta1);
    } else {
        s.C_beta.resize(0, 0);
        s.m_beta.resize(0);
    }
    s.a_phi = priors.a0 + 0.5 * g.n;
    const Eigen::VectorXd resid = *g.y - d.X1 * s.m_beta1 - d.X2 * s.m_beta;
    const double quad = resid.squaredNorm() + s.m_beta.dot(tau_inv.cwiseProduct(s.m_beta)) +
                        (g.X1tX1 * s.C_beta1).trace();
    s.b_phi = priors.b0 + 0.5 * quad;
    if (!(s.b_phi > 0.0)) throw NumericalError("b_phi is not positive");
}

inline void spline_q4(SplineVariationalState& s, const SplineGram& g) {
    const double e_phi = s.phi_mean();
    const Eigen::MatrixXd precision = g.C0_inv + e_phi * g.X1tX1;
    const auto llt = factor_spd(precision, "C_beta1^-1", kMaxCondition);
    s.C_beta1 = spd_inverse(llt, precision.rows());
    Eigen::VectorXd rhs = g.C0_inv_m0 + e_phi * g.X1ty;
    if (s.m_beta.size() > 0) rhs -= e_phi * (g.X1tX2 * s.m_beta);
    s.m_beta1 = llt.solve(rhs);
}

inline Eigen::VectorXd spline_tau_inv(const SplineVariationalState& s) {
    return s.p() > 0 ? s.tau_mean_inverse() : Eigen::VectorXd();
}

}  // namespace detail

/// ELBO of the spline model: the Lasso terms for the knot block plus the
/// prior expectation and entropy of q4(beta1).
struct SplineElboTerms : ElboTerms {
    double log_prior_beta1 = 0.0;
    double entropy_q4 = 0.0;
    double total() const { return ElboTerms::total() + log_prior_beta1 + entropy_q4; }
};

inline SplineElboTerms spline_elbo_terms(const SplineVariationalState& s, const Eigen::VectorXd& y,
                                         const PartitionedDesign& design, const LassoPriors& priors,
                                         const Beta1Prior& beta1_prior) {
    constexpr double log2pi = 1.8378770664093454835606594728112;
    const detail::SplineGram g(y, design, beta1_prior);
    SplineElboTerms t;
    const double e_log_phi = specfun::digamma(s.a_phi) - std::log(s.b_phi);
    const Eigen::VectorXd resid = y - design.X1 * s.m_beta1 - design.X2 * s.m_beta;
    double trace2 = 0.0;
    if (s.p() > 0) trace2 = (g.X2tX2 * s.C_beta).trace();
    t.log_lik = 0.5 * g.n * (e_log_phi - log2pi) -
                0.5 * (s.phi_mean() * (resid.squaredNorm() + (g.X1tX1 * s.C_beta1).trace()) + trace2);
    detail::penalized_block_terms(s, priors, t);

    const double q = static_cast<double>(s.m_beta1.size());
    const Eigen::VectorXd dm = s.m_beta1 - beta1_prior.m0;
    t.log_prior_beta1 = -0.5 * q * log2pi - 0.5 * g.log_det_C0 -
                        0.5 * (dm.dot(g.C0_inv * dm) + (g.C0_inv * s.C_beta1).trace());
    const double log_det_C1 = log_det(factor_spd(s.C_beta1, "C_beta1", 1e300));
    t.entropy_q4 = 0.5 * q * (log2pi + 1.0) + 0.5 * log_det_C1;

    detail::check_finite(t.log_lik, "E[log p(y|beta,phi)]");
    detail::check_finite(t.log_prior_beta_phi, "E[log p(beta2,phi|tau)]");
    detail::check_finite(t.log_prior_tau, "E[log p(tau|lambda)]");
    detail::check_finite(t.log_prior_lambda, "E[log p(lambda)]");
    detail::check_finite(t.entropy_q1, "-E[log q1(beta2,phi)]");
    detail::check_finite(t.entropy_q2, "-E[log q2(tau)]");
    detail::check_finite(t.entropy_q3, "-E[log q3(lambda)]");
    detail::check_finite(t.log_prior_beta1, "E[log p(beta1)]");
    detail::check_finite(t.entropy_q4, "-E[log q4(beta1)]");
    return t;
}

inline double spline_elbo(const SplineVariationalState& s, const Eigen::VectorXd& y, const PartitionedDesign& design,
                          const LassoPriors& priors, const Beta1Prior& beta1_prior) {
    return spline_elbo_terms(s, y, design, priors, beta1_prior).total();
}

/// Four-factor CAVI: q4(beta1) -> q1(beta2, phi) -> q2(tau) -> q3(lambda).
/// Starts from q4 with E[phi] = 1 and a q1 step with E[D_tau^-1] = I on the
/// polynomial residual. With K = 0 only q4 and the gamma factor of phi are fitted.
inline SplineVariationalState fit_spline_vb(const Eigen::VectorXd& y, const PartitionedDesign& design,
                                            const LassoPriors& priors, const Beta1Prior& beta1_prior,
                                            const FitOptions& opts = {}) {
    opts.validate();
    priors.validate();
    if (design.X1.rows() != y.size() || design.X2.rows() != y.size())
        throw std::invalid_argument("design rows do not match y");
    if (beta1_prior.m0.size() != design.X1.cols() || beta1_prior.C0.rows() != design.X1.cols() ||
        beta1_prior.C0.cols() != design.X1.cols())
        throw std::invalid_argument("beta1 prior dimension does not match the polynomial block");
    if (!y.allFinite() || !design.X1.allFinite() || !design.X2.allFinite())
        throw std::invalid_argument("spline data has non-finite entries");

    const detail::SplineGram g(y, design, beta1_prior);
    const Eigen::Index K = design.X2.cols();

    SplineVariationalState s;
    s.seed = opts.init_seed;
    s.c_tau = 0.5;
    s.d_tau = 2.0;
    s.f_tau = Eigen::VectorXd::Ones(K);
    s.g_lambda = priors.g0 + static_cast<double>(K);
    s.h_lambda = std::max(priors.h0 + static_cast<double>(K), 1.0);
    s.a_phi = 1.0;
    s.b_phi = 1.0;
    s.m_beta = Eigen::VectorXd::Zero(K);
    detail::spline_q4(s, g);
    detail::spline_q1(s, g, priors, Eigen::VectorXd::Ones(K));

    const detail::Tracker tracker{opts};
    for (int it = 1; it <= opts.max_iterations; ++it) {
        const SplineVariationalState before = s;
        detail::spline_q4(s, g);
        detail::spline_q1(s, g, priors, detail::spline_tau_inv(s));
        if (K > 0) {
            detail::update_q2(s);
            detail::update_q3(s, priors);
        }
        s.elbo_trace.push_back(spline_elbo(s, y, design, priors, beta1_prior));
        s.iteration = it;
        double change = std::max({detail::block_change(s.m_beta1, before.m_beta1),
                                  detail::block_change(s.C_beta1, before.C_beta1),
                                  detail::scalar_change(s.b_phi, before.b_phi)});
        if (K > 0) change = std::max(change, detail::lasso_change(s, before));
        if (tracker.done(change, s.elbo_trace)) {
            s.converged = true;
            break;
        }
    }
    return s;
}

/// X1 m_beta1 + X2 m_beta2, optionally restricted to the knots in keep_mask.
inline Eigen::VectorXd fitted_curve(const SplineVariationalState& s, const PartitionedDesign& design,
                                    const std::optional<std::vector<bool>>& keep_mask = std::nullopt) {
    if (design.X1.cols() != s.m_beta1.size() || design.X2.cols() != s.m_beta.size())
        throw std::invalid_argument("design does not match the fitted state");
    Eigen::VectorXd f = design.X1 * s.m_beta1;
    if (!keep_mask) return f + design.X2 * s.m_beta;
    if (static_cast<Eigen::Index>(keep_mask->size()) != s.m_beta.size())
        throw std::invalid_argument("keep mask length must equal the knot count");
    for (Eigen::Index k = 0; k < s.m_beta.size(); ++k)
        if ((*keep_mask)[static_cast<std::size_t>(k)]) f += design.X2.col(k) * s.m_beta(k);
    return f;
}

/// Student-t band of the variational fit at new points: the normal-gamma
/// factor supplies (1 + x2'C x2) b/(a-1) and q4 adds x1'C_beta1 x1.
inline StudentTPredictive spline_predictive(const SplineVariationalState& s, const PartitionedDesign& at) {
    if (!(s.a_phi > 1.0)) throw std::invalid_argument("predictive scale undefined for a_phi <= 1");
    StudentTPredictive out;
    out.location = at.X1 * s.m_beta1 + at.X2 * s.m_beta;
    Eigen::VectorXd x2cx2 = Eigen::VectorXd::Zero(at.X1.rows());
    if (s.p() > 0) x2cx2 = (at.X2 * s.C_beta).cwiseProduct(at.X2).rowwise().sum();
    const Eigen::VectorXd x1cx1 = (at.X1 * s.C_beta1).cwiseProduct(at.X1).rowwise().sum();
    out.scale = (1.0 + x2cx2.array()) * (s.b_phi / (s.a_phi - 1.0)) + x1cx1.array();
    out.dof = 2.0 * s.a_phi;
    return out;
}

/// Exact normal-gamma refit on the polynomial block plus the kept knots.
struct SplineRefit {
    SplineSpec spec;  // kept knots only
    NormalGammaPosterior posterior;

    Eigen::VectorXd curve(const Eigen::VectorXd& x) const {
        const PartitionedDesign d = build_design(x, spec);
        Eigen::MatrixXd X(x.size(), d.X1.cols() + d.X2.cols());
        X << d.X1, d.X2;
        return X * posterior.m1;
    }

    /// Exact posterior predictive St(x'm, (1 + x'C1^-1 x) b/a, 2a).
    StudentTPredictive predictive(const Eigen::VectorXd& x) const {
        const PartitionedDesign d = build_design(x, spec);
        Eigen::MatrixXd X(x.size(), d.X1.cols() + d.X2.cols());
        X << d.X1, d.X2;
        const Eigen::MatrixXd cov = posterior.covariance_scale();
        StudentTPredictive out;
        out.location = X * posterior.m1;
        out.scale = (1.0 + (X * cov).cwiseProduct(X).rowwise().sum().array()) * (posterior.b1 / posterior.a1);
        out.dof = 2.0 * posterior.a1;
        return out;
    }
};

/// Refits y on [X1, kept columns of X2] under beta | phi ~ N(0, (phi C0)^-1)
/// with C0 = kRefitPriorScale diag(X'X), a nearly flat prior that does not depend on
/// the scale of the columns.
inline SplineRefit refit_spline(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const SplineSpec& spec,
                                const std::vector<bool>& keep_mask, const LassoPriors& priors) {
    if (static_cast<Eigen::Index>(keep_mask.size()) != spec.K())
        throw std::invalid_argument("keep mask length must equal the knot count");
    SplineRefit out;
    out.spec = {spec.degree, {}, Placement::explicit_knots};
    for (std::size_t k = 0; k < keep_mask.size(); ++k)
        if (keep_mask[k]) out.spec.knots.push_back(spec.knots[k]);
    const PartitionedDesign d = build_design(x, out.spec);
    Dataset data;
    data.y = y;
    data.X.resize(x.size(), d.X1.cols() + d.X2.cols());
    data.X << d.X1, d.X2;
    Eigen::VectorXd diag = data.X.colwise().squaredNorm().transpose();
    for (Eigen::Index j = 0; j < diag.size(); ++j) diag(j) = std::max(diag(j), 1e-300) * kRefitPriorScale;
    const double a0 = priors.jeffreys ? 1e-3 : priors.a0;
    const double b0 = priors.jeffreys ? 1e-3 : priors.b0;
    out.posterior = conjugate_fit(data, Eigen::VectorXd::Zero(data.p()), diag.asDiagonal().toDenseMatrix(), a0, b0);
    return out;
}

}  // namespace vblasso
