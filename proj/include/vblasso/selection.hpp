#pragma once

// Coefficient selection: Bayes factor, central credible interval, and
// scaled-neighborhood criteria.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/math/distributions/normal.hpp>

#include "gibbs.hpp"
#include "vb_lasso.hpp"

namespace vblasso {

enum class Criterion { bf, ci, sn };

inline const char* to_string(Criterion c) {
    switch (c) {
        case Criterion::bf: return "bf";
        case Criterion::ci: return "ci";
        case Criterion::sn: return "sn";
    }
    return "?";
}

inline Criterion parse_criterion(const std::string& s) {
    if (s == "bf" || s == "BF") return Criterion::bf;
    if (s == "ci" || s == "CI") return Criterion::ci;
    if (s == "sn" || s == "SN") return Criterion::sn;
    throw std::invalid_argument("unknown criterion '" + s + "' (expected bf, ci or sn)");
}

/// Posterior mean and sd of one coefficient.
struct CoefficientPosterior {
    double m = 0.0;
    double s = 1.0;
};

enum class Verdict { keep, exclude };

struct SelectionEntry {
    double statistic = 0.0;  // pi* (BF), P(|beta| <= s) (SN), unused for CI
    double lower = 0.0;      // CI bounds
    double upper = 0.0;
    Verdict verdict = Verdict::keep;

    bool kept() const { return verdict == Verdict::keep; }
};

struct SelectionReport {
    Criterion criterion = Criterion::bf;
    std::string source;  // "vb" or "gibbs"
    std::vector<SelectionEntry> entries;

    std::vector<bool> keep_mask() const {
        std::vector<bool> mask;
        mask.reserve(entries.size());
        for (const auto& e : entries) mask.push_back(e.kept());
        return mask;
    }
    std::size_t kept_count() const {
        return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(),
                                                      [](const SelectionEntry& e) { return e.kept(); }));
    }
};

struct BfSettings {
    double a = 1.0;
    double b = 3.0;
    double delta = 2.3;
};

/// log BF(M0, M1) at standardized effect beta* = |m|/s.
inline double log_bayes_factor(double beta_star, double delta = 2.3) {
    return 0.5 * delta * delta - beta_star * delta;
}

/// beta* at which pi* equals a/(a+b).
inline double bf_boundary(const BfSettings& cfg = {}) {
    return (0.5 * cfg.delta * cfg.delta + std::log(cfg.b / cfg.a)) / cfg.delta;
}

namespace detail {
inline void require_sd(const CoefficientPosterior& c) {
    if (!(c.s > 0.0) || !std::isfinite(c.s)) throw std::invalid_argument("posterior sd must be positive");
}
}  // namespace detail

/// Excludes coefficient j iff pi*_j = BF/(1 + BF) >= a/(a+b).
inline SelectionReport bf_select(const std::vector<CoefficientPosterior>& post, const BfSettings& cfg = {},
                                 std::string source = "vb") {
    if (!(cfg.a > 0.0 && cfg.b > 0.0)) throw std::invalid_argument("BF costs a, b must be positive");
    SelectionReport r{Criterion::bf, std::move(source), {}};
    const double threshold = cfg.a / (cfg.a + cfg.b);
    for (const auto& c : post) {
        detail::require_sd(c);
        const double log_bf = log_bayes_factor(std::abs(c.m) / c.s, cfg.delta);
        const double pi_star = 1.0 / (1.0 + std::exp(-log_bf));
        r.entries.push_back({pi_star, 0.0, 0.0, pi_star >= threshold ? Verdict::exclude : Verdict::keep});
    }
    return r;
}

/// Gaussian factors: excludes iff the central `level` interval m +- z s contains 0.
inline SelectionReport ci_select(const std::vector<CoefficientPosterior>& post, double level = 0.5,
                                 std::string source = "vb") {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("credible level must be in (0, 1)");
    const double z = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
    SelectionReport r{Criterion::ci, std::move(source), {}};
    for (const auto& c : post) {
        detail::require_sd(c);
        const double lo = c.m - z * c.s, hi = c.m + z * c.s;
        r.entries.push_back({0.0, lo, hi, (lo <= 0.0 && hi >= 0.0) ? Verdict::exclude : Verdict::keep});
    }
    return r;
}

/// Draws (rows) per coefficient (columns): empirical central interval.
inline SelectionReport ci_select(const Eigen::MatrixXd& draws, double level = 0.5, std::string source = "gibbs") {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("credible level must be in (0, 1)");
    const ChainSummary s = summarize_draws(draws, {0.5 - 0.5 * level, 0.5 + 0.5 * level});
    SelectionReport r{Criterion::ci, std::move(source), {}};
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
        const double lo = s.quantiles(j, 0), hi = s.quantiles(j, 1);
        r.entries.push_back({0.0, lo, hi, (lo <= 0.0 && hi >= 0.0) ? Verdict::exclude : Verdict::keep});
    }
    return r;
}

/// Gaussian factors: excludes iff P(-s <= beta <= s) > threshold.
inline SelectionReport sn_select(const std::vector<CoefficientPosterior>& post, double threshold = 0.5,
                                 std::string source = "vb") {
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("SN threshold must be in (0, 1)");
    const boost::math::normal std_normal;
    SelectionReport r{Criterion::sn, std::move(source), {}};
    for (const auto& c : post) {
        detail::require_sd(c);
        const double prob = boost::math::cdf(std_normal, (c.s - c.m) / c.s) -
                            boost::math::cdf(std_normal, (-c.s - c.m) / c.s);
        r.entries.push_back({prob, -c.s, c.s, prob > threshold ? Verdict::exclude : Verdict::keep});
    }
    return r;
}

/// Draws per coefficient: empirical P(|beta_j| <= sd_j).
inline SelectionReport sn_select(const Eigen::MatrixXd& draws, double threshold = 0.5, std::string source = "gibbs") {
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("SN threshold must be in (0, 1)");
    const ChainSummary s = summarize_draws(draws, {});
    SelectionReport r{Criterion::sn, std::move(source), {}};
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
        const double sd = s.sd(j);
        const double prob = (draws.col(j).array().abs() <= sd).cast<double>().mean();
        r.entries.push_back({prob, -sd, sd, prob > threshold ? Verdict::exclude : Verdict::keep});
    }
    return r;
}

/// Per-coefficient (mean, sd) from q1, with sd^2 = b/(a-1) C_jj.
inline std::vector<CoefficientPosterior> coefficient_posteriors(const VariationalState& s) {
    const Eigen::VectorXd sd = s.beta_sd();
    std::vector<CoefficientPosterior> out;
    for (Eigen::Index j = 0; j < s.p(); ++j) out.push_back({s.m_beta(j), sd(j)});
    return out;
}

/// Per-coefficient (mean, sd) from kept draws.
inline std::vector<CoefficientPosterior> coefficient_posteriors(const Eigen::MatrixXd& draws) {
    const ChainSummary s = summarize_draws(draws, {});
    std::vector<CoefficientPosterior> out;
    for (Eigen::Index j = 0; j < draws.cols(); ++j) out.push_back({s.mean(j), s.sd(j)});
    return out;
}

/// Applies a criterion with default settings to a variational fit.
inline SelectionReport select(const VariationalState& s, Criterion c) {
    const auto post = coefficient_posteriors(s);
    switch (c) {
        case Criterion::bf: return bf_select(post);
        case Criterion::ci: return ci_select(post);
        case Criterion::sn: return sn_select(post);
    }
    throw std::invalid_argument("unknown criterion");
}

/// Applies a criterion with default settings to MCMC draws.
inline SelectionReport select(const Eigen::MatrixXd& draws, Criterion c) {
    switch (c) {
        case Criterion::bf: return bf_select(coefficient_posteriors(draws), {}, "gibbs");
        case Criterion::ci: return ci_select(draws);
        case Criterion::sn: return sn_select(draws);
    }
    throw std::invalid_argument("unknown criterion");
}

}  // namespace vblasso
