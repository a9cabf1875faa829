#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace vblasso {

/// Raised when a symmetric positive-definite system cannot be factored
/// reliably. Carries the reciprocal-condition based estimate.
class IllConditionedError : public std::runtime_error {
public:
    IllConditionedError(const std::string& what_matrix, double condition_estimate)
        : std::runtime_error(make_message(what_matrix, condition_estimate)),
          matrix_(what_matrix), condition_(condition_estimate) {}

    const std::string& matrix() const noexcept { return matrix_; }
    double condition_estimate() const noexcept { return condition_; }

private:
    static std::string make_message(const std::string& m, double c) {
        std::ostringstream os;
        os << "ill-conditioned matrix " << m << " (condition estimate " << c << ")";
        return os.str();
    }

    std::string matrix_;
    double condition_;
};

/// A computed quantity came out NaN or infinite.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace vblasso
