#pragma once

#include <stdexcept>
#include <string>

namespace bivcal {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scale matrix singular, not symmetric positive definite, or otherwise unusable.
class InvalidDistribution : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a function (e.g. a quantile at p = 0).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Argument violates a documented precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Some training case has zero density under every mixture component.
class DegenerateLikelihood : public Error {
public:
    explicit DegenerateLikelihood(std::size_t case_index)
        : Error("zero mixture density at training case " + std::to_string(case_index)),
          case_index_(case_index) {}

    std::size_t case_index() const noexcept { return case_index_; }

private:
    std::size_t case_index_;
};

/// Regression Gram matrix is singular.
class RankDeficient : public Error {
public:
    using Error::Error;
};

/// EM produced non-finite parameters.
class Divergence : public Error {
public:
    using Error::Error;
};

class InsufficientHistory : public Error {
public:
    using Error::Error;
};

class LoadError : public Error {
public:
    LoadError(const std::string& what, std::size_t row)
        : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
    explicit LoadError(const std::string& what) : Error(what), row_(0) {}

    /// 1-based line number in the file, 0 when not tied to a row.
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

}  // namespace bivcal
