#pragma once

#include <cmath>
#include <limits>
#include <vector>

namespace cophmm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

/// log(exp(z) - 1) for z > 0, stable for both small and large z.
inline double log_expm1(double z) {
  if (z > 36.0) return z + std::log1p(-std::exp(-z));
  return std::log(std::expm1(z));
}

/// lgamma(k + 1) with a cached table for small k; this sits on the hot path
/// of every pmf evaluation.
inline double log_factorial(int k) {
  static const std::vector<double> table = [] {
    std::vector<double> t(1024);
    for (int i = 0; i < 1024; ++i) t[i] = std::lgamma(double(i) + 1.0);
    return t;
  }();
  return k < 1024 ? table[k] : std::lgamma(double(k) + 1.0);
}

}  // namespace cophmm
