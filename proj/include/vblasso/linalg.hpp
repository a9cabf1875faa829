#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "errors.hpp"

namespace vblasso {

/// Cholesky factorization of an SPD matrix. Throws IllConditionedError when
/// the factorization fails or the 1-norm condition estimate exceeds
/// max_condition.
inline Eigen::LLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& A, const std::string& name,
                                              double max_condition) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) {
        throw IllConditionedError(name, std::numeric_limits<double>::infinity());
    }
    if (A.rows() > 0) {
        const double rcond = llt.rcond();
        if (!(rcond > 0.0) || 1.0 / rcond > max_condition) {
            throw IllConditionedError(name, rcond > 0.0 ? 1.0 / rcond
                                                        : std::numeric_limits<double>::infinity());
        }
    }
    return llt;
}

/// Inverse of an SPD matrix from its factorization, symmetrized.
inline Eigen::MatrixXd spd_inverse(const Eigen::LLT<Eigen::MatrixXd>& llt, Eigen::Index n) {
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    return 0.5 * (inv + inv.transpose());
}

/// log|A| from a Cholesky factor.
inline double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    const auto& L = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i));
    return 2.0 * s;
}

}  // namespace vblasso
