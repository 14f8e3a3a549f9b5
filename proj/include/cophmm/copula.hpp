#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "cophmm/cmp.hpp"
#include "cophmm/errors.hpp"
#include "cophmm/numeric.hpp"

namespace cophmm {

// One-parameter Archimedean copulas used to couple the two count margins,
// plus the independence (product) copula. The bivariate pmf of a pair of
// discrete margins follows by inclusion-exclusion over the four corners of
// the unit cell:
//
//   P(Y1 = y1, Y2 = y2) = C(F1(y1), F2(y2)) - C(F1(y1 - 1), F2(y2))
//                       - C(F1(y1), F2(y2 - 1)) + C(F1(y1 - 1), F2(y2 - 1)),
//
// with F(-1) = 0.

enum class CopulaFamily { independence, frank, clayton, amh };

inline const char* to_string(CopulaFamily f) {
  switch (f) {
    case CopulaFamily::independence: return "independence";
    case CopulaFamily::frank: return "frank";
    case CopulaFamily::clayton: return "clayton";
    case CopulaFamily::amh: return "amh";
  }
  return "?";
}

inline CopulaFamily copula_family_from_string(const std::string& s) {
  if (s == "independence") return CopulaFamily::independence;
  if (s == "frank") return CopulaFamily::frank;
  if (s == "clayton") return CopulaFamily::clayton;
  if (s == "amh") return CopulaFamily::amh;
  throw ParseError("unknown copula family '" + s +
                   "' (expected independence, frank, clayton or amh)");
}

inline void validate_copula_theta(CopulaFamily family, double theta) {
  switch (family) {
    case CopulaFamily::independence:
      return;  // theta is ignored
    case CopulaFamily::frank:
      if (!std::isfinite(theta))
        throw DomainError("frank copula: theta must be finite");
      return;
    case CopulaFamily::clayton:
      if (!(std::isfinite(theta) && theta >= -1.0))
        throw DomainError("clayton copula: theta must lie in [-1, inf), got " +
                          std::to_string(theta));
      return;
    case CopulaFamily::amh:
      if (!(std::isfinite(theta) && theta >= -1.0 && theta < 1.0))
        throw DomainError("amh copula: theta must lie in [-1, 1), got " +
                          std::to_string(theta));
      return;
  }
}

/// Family tag plus dependence parameter, validated on construction.
struct CopulaSpec {
  CopulaFamily family = CopulaFamily::independence;
  double theta = 0.0;

  CopulaSpec() = default;
  CopulaSpec(CopulaFamily family_, double theta_ = 0.0)
      : family(family_), theta(theta_) {
    validate_copula_theta(family, theta);
  }
};

/// Below this |theta| the Frank and Clayton copulas are evaluated as the
/// product copula; both families converge to independence there and the
/// direct formulas lose precision.
inline constexpr double kIndependenceThetaEps = 1e-8;

namespace detail {

// Frank: C(u, v) = -(1/theta) log(1 + (e^{-theta u} - 1)(e^{-theta v} - 1) /
//                                     (e^{-theta} - 1)).
// The direct expm1/log1p form is exact until theta * min(u, v) grows large,
// where 1 + A B / D cancels; those regions switch to a log-space form of the
// numerator N = e^{-theta u} + e^{-theta v} - e^{-theta (u+v)} - e^{-theta},
// split into two non-negative terms.
inline double frank_cdf(double theta, double u, double v) {
  if (std::abs(theta) < kIndependenceThetaEps) return u * v;
  if (theta > 0.0 && theta * std::min(u, v) > 25.0) {
    // N = e^{-theta u}(1 - e^{-theta v}) + e^{-theta v}(1 - e^{-theta (1-v)})
    const double log_n = log_add(-theta * u + std::log(-std::expm1(-theta * v)),
                                 -theta * v + std::log(-std::expm1(-theta * (1.0 - v))));
    const double log_d = std::log(-std::expm1(-theta));
    return -(log_n - log_d) / theta;
  }
  if (theta < 0.0) {
    const double s = -theta;
    if (s * std::max(1.0, u + v) > 600.0) {
      // e^s - N' with N' = e^{s u}(e^{s v} - 1) + e^{s v}(e^{s (1-v)} - 1)
      const double log_n = log_add(s * u + log_expm1(s * v),
                                   s * v + log_expm1(s * (1.0 - v)));
      const double log_d = log_expm1(s);
      return (log_n - log_d) / s;
    }
  }
  const double a = std::expm1(-theta * u);
  const double b = std::expm1(-theta * v);
  const double d = std::expm1(-theta);
  return -std::log1p(a * b / d) / theta;
}

// Clayton: C(u, v) = (max{u^{-theta} + v^{-theta} - 1, 0})^{-1/theta}.
inline double clayton_cdf(double theta, double u, double v) {
  if (std::abs(theta) < kIndependenceThetaEps) return u * v;
  if (theta > 0.0) {
    const double a = -theta * std::log(u);
    const double b = -theta * std::log(v);
    if (std::max(a, b) < 30.0) {
      const double t = std::expm1(a) + std::expm1(b);
      return std::exp(-std::log1p(t) / theta);
    }
    const double m = std::max(a, b);
    const double log_s =
        m + std::log(std::exp(a - m) + std::exp(b - m) - std::exp(-m));
    return std::exp(-log_s / theta);
  }
  // theta in [-1, 0): the max{., 0} branch can activate. Work with
  // S - 1 = expm1(-theta log u) + expm1(-theta log v) so that theta near
  // zero keeps full precision (the naive power sum loses ~6 digits there).
  const double t =
      std::expm1(-theta * std::log(u)) + std::expm1(-theta * std::log(v));
  if (t <= -1.0) return 0.0;
  return std::exp(-std::log1p(t) / theta);
}

// Ali-Mikhail-Haq: C(u, v) = u v / (1 - theta (1 - u)(1 - v)).
inline double amh_cdf(double theta, double u, double v) {
  return u * v / (1.0 - theta * (1.0 - u) * (1.0 - v));
}

}  // namespace detail

/// C(u1, u2). Inputs are probabilities; values straying outside [0, 1] by
/// more than 1e-12 are rejected, closer ones clamped. Exact boundary cases
/// (any argument 0 or 1) short-circuit so that C(u, 1) = u etc. hold exactly.
inline double copula_cdf(const CopulaSpec& c, double u1, double u2) {
  auto sanitize = [](double u) {
    if (!(u >= -1e-12 && u <= 1.0 + 1e-12))
      throw ArgumentError("copula_cdf: argument outside [0, 1]: " + std::to_string(u));
    return std::clamp(u, 0.0, 1.0);
  };
  const double u = sanitize(u1);
  const double v = sanitize(u2);
  if (u == 0.0 || v == 0.0) return 0.0;
  if (u == 1.0) return v;
  if (v == 1.0) return u;
  switch (c.family) {
    case CopulaFamily::independence: return u * v;
    case CopulaFamily::frank: return detail::frank_cdf(c.theta, u, v);
    case CopulaFamily::clayton: return detail::clayton_cdf(c.theta, u, v);
    case CopulaFamily::amh: return detail::amh_cdf(c.theta, u, v);
  }
  throw ArgumentError("copula_cdf: unknown family");
}

namespace detail {

/// Inclusion-exclusion over precomputed marginal cdf corners. f1 = F1(y1),
/// f1m = F1(y1 - 1), similarly f2/f2m. Negative results beyond -1e-12 are a
/// numerical failure; smaller excursions are clamped to [0, 1].
inline double pmf_from_corners(const CopulaSpec& c, double f1, double f1m,
                               double f2, double f2m, int y1, int y2) {
  const double val = copula_cdf(c, f1, f2) - copula_cdf(c, f1m, f2) -
                     copula_cdf(c, f1, f2m) + copula_cdf(c, f1m, f2m);
  if (val < -1e-12)
    throw NumericalError(
        "bivariate pmf came out negative (" + std::to_string(val) +
        ") for family " + to_string(c.family) + ", theta = " +
        std::to_string(c.theta) + ", y1 = " + std::to_string(y1) +
        ", y2 = " + std::to_string(y2));
  return std::clamp(val, 0.0, 1.0);
}

}  // namespace detail

/// P(Y1 = y1, Y2 = y2) for CMP margins m1, m2 coupled by c.
inline double bivariate_pmf(const CopulaSpec& c, const CmpParams& m1,
                            const CmpParams& m2, int y1, int y2) {
  if (y1 < 0 || y2 < 0)
    throw ArgumentError("bivariate_pmf: counts must be >= 0");
  // The product copula factorizes the corner differences exactly; computing
  // it directly avoids differencing near-equal cdf values in the tails.
  if (c.family == CopulaFamily::independence) return pmf(m1, y1) * pmf(m2, y2);
  const double f1 = cdf(m1, y1);
  const double f1m = y1 > 0 ? cdf(m1, y1 - 1) : 0.0;
  const double f2 = cdf(m2, y2);
  const double f2m = y2 > 0 ? cdf(m2, y2 - 1) : 0.0;
  return detail::pmf_from_corners(c, f1, f1m, f2, f2m, y1, y2);
}

}  // namespace cophmm
