#pragma once

#include <stdexcept>
#include <string>

namespace expfbf {

// Inputs violate a precondition (non-finite data, shape mismatch, bad range).
class InvalidInputError : public std::runtime_error {
public:
    explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical routine failed (non-convergence, lost definiteness, blow-up).
// `index` carries the failing pivot / step where applicable, -1 otherwise.
class NumericFailureError : public std::runtime_error {
public:
    explicit NumericFailureError(const std::string& msg, long index = -1)
        : std::runtime_error(msg), index(index) {}
    long index;
};

// A requested construction exceeds a configured size cap.
class CapacityError : public std::runtime_error {
public:
    explicit CapacityError(const std::string& msg) : std::runtime_error(msg) {}
};

// A quadrature rule failed to meet its moment-residual threshold.
class RuleQualityError : public std::runtime_error {
public:
    RuleQualityError(const std::string& msg, double residual)
        : std::runtime_error(msg), residual(residual) {}
    double residual;
};

}  // namespace expfbf
