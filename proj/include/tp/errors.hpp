#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tp {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Mismatched vector/matrix dimensions.
struct DimensionError : Error {
    using Error::Error;
};

// An operation produced or encountered a non-finite value.
struct NumericError : Error {
    using Error::Error;
};

// Malformed input text; carries the 1-based line number.
struct ParseError : Error {
    ParseError(std::size_t line_no, const std::string& msg)
        : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
    std::size_t line;
};

// Invalid configuration (bad method name, missing parameter, bad flag value).
struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Iterative routine failed to reach its tolerance; carries the last estimate.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& msg, double est)
        : Error(msg), last_estimate(est) {}
    double last_estimate;
};

// Operation not defined for this objective kind (e.g. mini-batching a quadratic).
struct UnsupportedError : Error {
    using Error::Error;
};

// Observed f(x) < f*, i.e. the optimal-value certificate is wrong.
struct CertificateError : Error {
    using Error::Error;
};

// A state the math rules out (zero gradient with a positive gap on a convex f).
struct InconsistencyError : Error {
    using Error::Error;
};

// Armijo backtracking exhausted its budget; carries the last stepsize tried.
struct LineSearchError : Error {
    LineSearchError(const std::string& msg, double eta)
        : Error(msg), last_eta(eta) {}
    double last_eta;
};

// A metric is undefined for the given inputs (e.g. accuracy on an empty test set).
struct MetricError : Error {
    using Error::Error;
};

// Label set cannot be mapped to {-1,+1}.
struct NormalizationError : Error {
    using Error::Error;
};

}  // namespace tp
