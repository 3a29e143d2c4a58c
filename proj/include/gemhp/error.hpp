#pragma once

#include <stdexcept>
#include <string>

namespace gemhp {

enum class ErrorKind {
    InvalidInput,
    InvalidKernel,
    Domain,
    Accuracy,
    NumericalIntegrity,
    Explosion,
    EstimationFailed,
    Unsupported,
    Divergence,
    Internal,
};

[[nodiscard]] const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

    /// True for errors caused by bad user input (maps to CLI exit code 2).
    [[nodiscard]] bool is_input_error() const noexcept {
        return kind_ == ErrorKind::InvalidInput || kind_ == ErrorKind::InvalidKernel ||
               kind_ == ErrorKind::Domain || kind_ == ErrorKind::Unsupported;
    }

private:
    ErrorKind kind_;
};

/// Quadrature budget exhaustion; carries the best estimate obtained.
class AccuracyError : public Error {
public:
    AccuracyError(const std::string& what, double best_estimate)
        : Error(ErrorKind::Accuracy, what), best_estimate_(best_estimate) {}

    [[nodiscard]] double best_estimate() const noexcept { return best_estimate_; }

private:
    double best_estimate_;
};

} // namespace gemhp
