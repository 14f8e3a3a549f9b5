#pragma once

#include <cmath>
#include <string>

#include "cophmm/errors.hpp"
#include "cophmm/numeric.hpp"

namespace cophmm {

// Conway-Maxwell-Poisson distribution,
//
//   P(X = x) = lambda^x / ( (x!)^nu * Z(lambda, nu) ),
//   Z(lambda, nu) = sum_{k>=0} lambda^k / (k!)^nu,
//
// a two-parameter count family that nests the Poisson (nu = 1), the
// geometric (nu = 0, lambda < 1, Z = 1/(1 - lambda)) and, as nu -> inf,
// the Bernoulli with success probability lambda / (1 + lambda).
// nu < 1 gives overdispersion, nu > 1 underdispersion.

/// Maximum number of terms accumulated for Z before giving up.
inline constexpr int kCmpTermCap = 10000;
/// A term smaller than this fraction of the running sum ends the summation.
inline constexpr double kCmpRelTol = 1e-12;

/// Validated parameter pair. nu = 0 together with lambda >= 1 is rejected
/// because the normalizing series diverges there.
struct CmpParams {
  double lambda;
  double nu;

  CmpParams(double lambda_, double nu_) : lambda(lambda_), nu(nu_) {
    if (!(std::isfinite(lambda) && lambda > 0.0))
      throw DomainError("CmpParams: lambda must be finite and positive, got " +
                        std::to_string(lambda_));
    if (!(std::isfinite(nu) && nu >= 0.0))
      throw DomainError("CmpParams: nu must be finite and non-negative, got " +
                        std::to_string(nu_));
    if (nu == 0.0 && lambda >= 1.0)
      throw DomainError(
          "CmpParams: nu = 0 with lambda >= 1 makes the normalizing sum "
          "divergent (lambda = " + std::to_string(lambda_) + ")");
  }
};

/// log Z(lambda, nu). Terms are accumulated in log space (running
/// log-sum-exp); summation stops once a term drops below kCmpRelTol times
/// the running sum and fails if kCmpTermCap terms do not get there.
inline double log_normalizing_constant(const CmpParams& p) {
  const double log_lambda = std::log(p.lambda);
  const double log_tol = std::log(kCmpRelTol);
  double lse = 0.0;  // k = 0 contributes lambda^0 / (0!)^nu = 1
  for (int k = 1; k < kCmpTermCap; ++k) {
    const double log_term = k * log_lambda - p.nu * log_factorial(k);
    lse = log_add(lse, log_term);
    if (log_term < lse + log_tol) return lse;
  }
  throw NumericalError(
      "CMP normalizing constant did not converge within " +
      std::to_string(kCmpTermCap) + " terms (lambda = " +
      std::to_string(p.lambda) + ", nu = " + std::to_string(p.nu) + ")");
}

inline double normalizing_constant(const CmpParams& p) {
  return std::exp(log_normalizing_constant(p));
}

/// log P(X = x) given a precomputed log Z (hot-path overload for callers
/// that evaluate many pmf values under the same parameters).
inline double log_pmf(const CmpParams& p, int x, double log_z) {
  if (x < 0) throw ArgumentError("cmp log_pmf: x must be >= 0, got " + std::to_string(x));
  return x * std::log(p.lambda) - p.nu * log_factorial(x) - log_z;
}

inline double log_pmf(const CmpParams& p, int x) {
  return log_pmf(p, x, log_normalizing_constant(p));
}

inline double pmf(const CmpParams& p, int x) { return std::exp(log_pmf(p, x)); }

/// P(X <= x); zero for x < 0.
inline double cdf(const CmpParams& p, int x) {
  if (x < 0) return 0.0;
  const double log_z = log_normalizing_constant(p);
  double acc = 0.0;
  for (int k = 0; k <= x; ++k) acc += std::exp(log_pmf(p, k, log_z));
  // The truncated normalizing constant slightly inflates each term, so the
  // far-tail partial sums can drift past 1; a cdf never exceeds it.
  return std::min(acc, 1.0);
}

/// E[X] approximated by the truncated sum over k = 1..truncation of
/// k * P(X = k), accumulated in log space.
inline double mean(const CmpParams& p, int truncation = 100) {
  if (truncation < 1)
    throw ArgumentError("cmp mean: truncation must be >= 1, got " +
                        std::to_string(truncation));
  const double log_z = log_normalizing_constant(p);
  const double log_lambda = std::log(p.lambda);
  double lse = kNegInf;
  for (int k = 1; k <= truncation; ++k) {
    lse = log_add(lse, std::log(double(k)) + k * log_lambda - p.nu * log_factorial(k));
  }
  return std::exp(lse - log_z);
}

}  // namespace cophmm
