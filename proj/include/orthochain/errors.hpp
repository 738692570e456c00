#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace orthochain {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A decomposition or integration did not converge.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Effective rank too low for an operation that inverts singular values.
class RankDeficiencyError : public Error {
public:
    using Error::Error;
};

class DegenerateRowError : public Error {
public:
    explicit DegenerateRowError(std::size_t row)
        : Error("batch_norm: row " + std::to_string(row) + " has (near) zero norm"), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// Raised by the chain simulator; carries the 1-based layer that failed.
class ChainError : public Error {
public:
    ChainError(std::size_t layer, const std::string& what)
        : Error("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}

    std::size_t layer() const noexcept { return layer_; }

private:
    std::size_t layer_;
};

}  // namespace orthochain
