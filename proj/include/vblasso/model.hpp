#pragma once

// Data containers, prior settings, and the conjugate Normal-Gamma linear
// model used as an exact reference for the variational and Gibbs fits.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "linalg.hpp"

namespace vblasso {

/// Response vector and design matrix.
struct Dataset {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    std::vector<std::string> feature_names;  // empty or one per column

    Eigen::Index n() const { return y.size(); }
    Eigen::Index p() const { return X.cols(); }

    void validate() const {
        if (y.size() < 1) throw std::invalid_argument("dataset needs at least one observation");
        if (X.cols() < 1) throw std::invalid_argument("dataset needs at least one column");
        if (X.rows() != y.size())
            throw std::invalid_argument("design has " + std::to_string(X.rows()) + " rows but y has " +
                                        std::to_string(y.size()) + " entries");
        if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != X.cols())
            throw std::invalid_argument("feature name count does not match design columns");
        if (!y.allFinite() || !X.allFinite()) throw std::invalid_argument("dataset has non-finite entries");
    }
};

/// Hyperparameters of phi ~ Ga(a0, b0) and lambda ~ Ga(g0, h0). In Jeffreys
/// mode all four are zero and the priors are p(phi) ~ 1/phi, p(lambda) ~ 1/lambda.
struct LassoPriors {
    double a0 = 0.1;
    double b0 = 0.1;
    double g0 = 0.1;
    double h0 = 0.1;
    bool jeffreys = false;

    static LassoPriors gamma(double a0, double b0, double g0, double h0) {
        LassoPriors p{a0, b0, g0, h0, false};
        p.validate();
        return p;
    }
    static LassoPriors jeffreys_prior() { return {0.0, 0.0, 0.0, 0.0, true}; }

    void validate() const {
        if (jeffreys) {
            if (a0 != 0.0 || b0 != 0.0 || g0 != 0.0 || h0 != 0.0)
                throw std::invalid_argument("Jeffreys priors require a0 = b0 = g0 = h0 = 0");
        } else if (!(a0 > 0.0 && b0 > 0.0 && g0 > 0.0 && h0 > 0.0)) {
            throw std::invalid_argument("gamma prior hyperparameters must be strictly positive");
        }
    }
};

/// beta | phi ~ N(m1, (phi C1)^-1), phi ~ Ga(a1, b1). C1 is precision-scale.
struct NormalGammaPosterior {
    Eigen::VectorXd m1;
    Eigen::MatrixXd C1;
    double a1 = 0.0;
    double b1 = 0.0;

    /// Covariance-scale matrix C1^-1 (Var(beta | phi) = C1^-1 / phi).
    Eigen::MatrixXd covariance_scale() const {
        return spd_inverse(factor_spd(C1, "C1", 1e15), C1.rows());
    }
};

/// Prior precision of post-selection refits, relative to diag(X'X). Small
/// enough that noiseless polynomial data is recovered to 1e-6.
inline constexpr double kRefitPriorScale = 1e-12;

/// Exact posterior of y ~ N(X beta, I/phi), beta | phi ~ N(m0, (phi C0)^-1),
/// phi ~ Ga(a0, b0).
inline NormalGammaPosterior conjugate_fit(const Dataset& data, const Eigen::VectorXd& m0,
                                          const Eigen::MatrixXd& C0, double a0, double b0) {
    data.validate();
    const Eigen::Index p = data.p();
    if (m0.size() != p || C0.rows() != p || C0.cols() != p)
        throw std::invalid_argument("prior dimensions do not match the design");
    if (!(a0 > 0.0 && b0 > 0.0)) throw std::invalid_argument("a0 and b0 must be positive");
    if (!C0.isApprox(C0.transpose(), 1e-10)) throw std::invalid_argument("C0 must be symmetric");
    factor_spd(C0, "C0", 1e15);

    NormalGammaPosterior post;
    post.C1 = C0 + data.X.transpose() * data.X;
    const auto llt = factor_spd(post.C1, "C1", 1e15);
    const Eigen::VectorXd C0m0 = C0 * m0;
    post.m1 = llt.solve(C0m0 + data.X.transpose() * data.y);
    post.a1 = a0 + 0.5 * static_cast<double>(data.n());
    post.b1 = b0 + 0.5 * ((data.y - data.X * post.m1).dot(data.y) + (m0 - post.m1).dot(C0m0));
    return post;
}

/// Column-standardized dataset plus the transform that produced it.
struct Standardized {
    Dataset data;
    Eigen::VectorXd centers;
    Eigen::VectorXd scales;

    /// Applies the same centering and scaling to another design.
    Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const {
        return (X.rowwise() - centers.transpose()).array().rowwise() / scales.transpose().array();
    }
    Eigen::MatrixXd inverse(const Eigen::MatrixXd& Z) const {
        return (Z.array().rowwise() * scales.transpose().array()).matrix().rowwise() + centers.transpose();
    }
};

/// Centers every column to mean 0 and scales to sample variance 1 (n - 1
/// denominator). Zero-variance columns are rejected unless flagged as the
/// intercept, which passes through unchanged.
inline Standardized standardize(const Dataset& data, std::optional<Eigen::Index> intercept = std::nullopt) {
    data.validate();
    if (data.n() < 2) throw std::invalid_argument("standardize needs at least two rows");
    Standardized out;
    out.centers = data.X.colwise().mean().transpose();
    out.scales.resize(data.p());
    for (Eigen::Index j = 0; j < data.p(); ++j) {
        if (intercept && *intercept == j) {
            out.centers(j) = 0.0;
            out.scales(j) = 1.0;
            continue;
        }
        const double ss = (data.X.col(j).array() - out.centers(j)).square().sum();
        const double sd = std::sqrt(ss / static_cast<double>(data.n() - 1));
        if (!(sd > 0.0)) {
            const std::string name =
                data.feature_names.empty() ? std::to_string(j) : data.feature_names[static_cast<std::size_t>(j)];
            throw std::invalid_argument("column " + name + " has zero variance");
        }
        out.scales(j) = sd;
    }
    out.data = data;
    out.data.X = out.transform(data.X);
    return out;
}

}  // namespace vblasso
