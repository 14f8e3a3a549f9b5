#pragma once

#include <stdexcept>
#include <string>

namespace cophmm {

/// Base class of every exception thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A parameter value lies outside its mathematical domain
/// (e.g. lambda <= 0, copula dependence parameter outside the family range).
struct DomainError : Error {
  using Error::Error;
};

/// Arguments are structurally inconsistent (wrong length, unknown name, ...).
struct ArgumentError : Error {
  using Error::Error;
};

/// A numerical procedure failed: series did not converge, probabilities
/// underflowed, a matrix was singular, an optimizer start was unusable.
struct NumericalError : Error {
  using Error::Error;
};

/// Malformed input: CSV data files, run configuration, stored model files.
struct ParseError : Error {
  using Error::Error;
};

}  // namespace cophmm
