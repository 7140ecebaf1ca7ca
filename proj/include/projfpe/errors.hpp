#ifndef PROJFPE_ERRORS_HPP
#define PROJFPE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace projfpe {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// API misuse: mismatched lengths, bad arguments. Caller bug, not data.
class UsageError : public Error {
public:
    using Error::Error;
};

// Invalid experiment configuration (rejected before any computation).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Natural parameters outside the integrability domain, or a density that
// is not strictly positive where it must be.
class DomainError : public Error {
public:
    using Error::Error;
};

// Fisher (or Gram) matrix numerically singular for the requested family.
class SingularFisherError : public Error {
public:
    using Error::Error;
};

// Quadrature domain too narrow: boundary integrand not negligible.
class TailError : public Error {
public:
    using Error::Error;
};

// Iterative solver exhausted its iteration budget.
class NonConvergenceError : public Error {
public:
    using Error::Error;
};

// The square-integrability guard on the tangent vector failed.
class ConditionFError : public Error {
public:
    using Error::Error;
};

// A numerical computation left its validity envelope (mass drift,
// exploding paths, nonpositive variance, ...).
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace projfpe

#endif
