#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pegfx {

// Root of the library's exception hierarchy. The CLI maps each branch onto
// an exit code: DomainError -> 2, DataError -> 3, NumericalError -> 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid arguments or violated preconditions.
class DomainError : public Error {
public:
    using Error::Error;
};

// Price outside the static no-arbitrage interval of an implied-vol inversion.
class ArbitrageBoundError : public DomainError {
public:
    enum class Bound { lower, upper };

    ArbitrageBoundError(Bound which, double price, double bound, const std::string& what)
        : DomainError(what), which_(which), price_(price), bound_(bound) {}

    Bound which() const noexcept { return which_; }
    double price() const noexcept { return price_; }
    double bound() const noexcept { return bound_; }

private:
    Bound which_;
    double price_;
    double bound_;
};

// Malformed or internally inconsistent market data. `row` is 1-based when the
// failure can be attributed to an input row, 0 otherwise.
class DataError : public Error {
public:
    explicit DataError(const std::string& what, std::size_t row = 0) : Error(what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

// A numerical procedure failed to reach its tolerance.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what, double estimate = 0.0, double error_bound = 0.0)
        : Error(what), estimate_(estimate), error_bound_(error_bound) {}

    double estimate() const noexcept { return estimate_; }
    double error_bound() const noexcept { return error_bound_; }

private:
    double estimate_;
    double error_bound_;
};

// Iterative solver hit its iteration cap.
class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// No root of a delta-convention equation inside the search bracket.
class ConventionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Optimizer failure; carries the best parameter vector found and its residual.
class CalibrationError : public NumericalError {
public:
    CalibrationError(const std::string& what, std::vector<double> best, double residual)
        : NumericalError(what, residual, 0.0), best_(std::move(best)), residual_(residual) {}

    const std::vector<double>& best() const noexcept { return best_; }
    double residual() const noexcept { return residual_; }

private:
    std::vector<double> best_;
    double residual_;
};

}  // namespace pegfx
