#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace wpt {

/// Base of every error thrown by the library. The C API maps each subclass to
/// a distinct status code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parameters, states or arguments outside their documented domain.
class ValidationError : public Error {
public:
    explicit ValidationError(std::string what)
        : Error(what), violations_{std::move(what)} {}
    explicit ValidationError(std::vector<std::string> violations);

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// The joint state space does not fit in the configured budget.
class BudgetError : public Error {
public:
    using Error::Error;
};

/// Value iteration hit its sweep cap before meeting the stopping rule.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// No modulation order fits a packet in one slot.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace wpt
