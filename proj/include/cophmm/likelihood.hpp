#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "cophmm/data.hpp"
#include "cophmm/model.hpp"
#include "cophmm/numeric.hpp"

namespace cophmm {

// Scaled forward recursion for the copula HMM likelihood
//
//   L = delta diag(f(y_1)) Gamma(x_2) diag(f(y_2)) ... Gamma(x_T) diag(f(y_T)) 1,
//
// with per-step renormalization; the log scale factors accumulate into the
// log likelihood, so series of any length stay in range.

/// Per-state table of log joint pmf values over the rectangle
/// [0, max1] x [0, max2]. Building it once per parameter vector turns the
/// per-minute emission lookup into an array read.
inline std::vector<Eigen::MatrixXd> emission_log_table(const ModelSpec& spec,
                                                       const ModelParams& params,
                                                       int max1, int max2) {
  const int n = spec.n_states;
  std::vector<Eigen::MatrixXd> table(n);
  for (int s = 0; s < n; ++s) {
    const CmpParams& m1 = params.marginals[s][0];
    const CmpParams& m2 = params.marginals[s][1];
    const double lz1 = log_normalizing_constant(m1);
    const double lz2 = log_normalizing_constant(m2);
    Eigen::VectorXd lp1(max1 + 1), lp2(max2 + 1);
    for (int a = 0; a <= max1; ++a) lp1(a) = log_pmf(m1, a, lz1);
    for (int b = 0; b <= max2; ++b) lp2(b) = log_pmf(m2, b, lz2);
    Eigen::MatrixXd& t = table[s];
    t.resize(max1 + 1, max2 + 1);
    if (spec.copula_family == CopulaFamily::independence) {
      for (int a = 0; a <= max1; ++a)
        for (int b = 0; b <= max2; ++b) t(a, b) = lp1(a) + lp2(b);
      continue;
    }
    // Marginal cdf grids, with F(-1) = 0 in slot 0.
    Eigen::VectorXd f1(max1 + 2), f2(max2 + 2);
    f1(0) = 0.0;
    for (int a = 0; a <= max1; ++a) f1(a + 1) = f1(a) + std::exp(lp1(a));
    f2(0) = 0.0;
    for (int b = 0; b <= max2; ++b) f2(b + 1) = f2(b) + std::exp(lp2(b));
    const CopulaSpec c(spec.copula_family, params.thetas[s]);
    for (int a = 0; a <= max1; ++a)
      for (int b = 0; b <= max2; ++b)
        t(a, b) = std::log(
            detail::pmf_from_corners(c, f1(a + 1), f1(a), f2(b + 1), f2(b), a, b));
  }
  return table;
}

namespace detail {

inline void check_emission_fits(const MatchSeries& m,
                                const std::vector<Eigen::MatrixXd>& table) {
  const int max1 = int(table.front().rows()) - 1;
  const int max2 = int(table.front().cols()) - 1;
  if (m.y.col(0).maxCoeff() > max1 || m.y.col(1).maxCoeff() > max2)
    throw ArgumentError("log_forward: emission table too small for match '" +
                        m.match_id + "'");
}

}  // namespace detail

/// Log likelihood of one match given a prebuilt emission table.
inline double log_forward(const ModelSpec& spec, const ModelParams& params,
                          const MatchSeries& match,
                          const std::vector<Eigen::MatrixXd>& table) {
  validate_match(match);
  detail::check_emission_fits(match, table);
  const int n = spec.n_states;
  const int t_len = match.length();
  const bool homogeneous = spec.n_covariates() == 0;
  Eigen::MatrixXd gamma;
  if (homogeneous) gamma = transition_matrix(params, Eigen::VectorXd(0));

  double loglik = 0.0;
  Eigen::VectorXd phi(n), logp(n), weights(n);
  for (int t = 0; t < t_len; ++t) {
    for (int s = 0; s < n; ++s) logp(s) = table[s](match.y(t, 0), match.y(t, 1));
    const double shift = logp.maxCoeff();
    if (!std::isfinite(shift))
      throw NumericalError("log_forward: emission probabilities underflowed to "
                           "zero in every state at time index " +
                           std::to_string(t + 1) + " of match '" + match.match_id + "'");
    weights = (logp.array() - shift).exp();
    if (t == 0) {
      phi = params.delta.cwiseProduct(weights);
    } else {
      if (!homogeneous) gamma = transition_matrix(params, match.x.row(t).transpose());
      phi = (phi.transpose() * gamma).transpose().cwiseProduct(weights);
    }
    const double scale = phi.sum();
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw NumericalError("log_forward: forward probabilities vanished at time "
                           "index " + std::to_string(t + 1) + " of match '" +
                           match.match_id + "'");
    loglik += shift + std::log(scale);
    phi /= scale;
  }
  return loglik;
}

/// Convenience overload building the table for just this match.
inline double log_forward(const ModelSpec& spec, const ModelParams& params,
                          const MatchSeries& match) {
  validate_match(match);
  const auto table = emission_log_table(spec, params, match.y.col(0).maxCoeff(),
                                        match.y.col(1).maxCoeff());
  return log_forward(spec, params, match, table);
}

/// Total log likelihood over a dataset; one emission table is shared by all
/// matches.
inline double log_likelihood(const ModelSpec& spec, const ModelParams& params,
                             const Dataset& data) {
  if (data.matches.empty()) throw ArgumentError("log_likelihood: empty dataset");
  int max1 = 0, max2 = 0;
  for (const auto& m : data.matches) {
    max1 = std::max(max1, m.y.col(0).maxCoeff());
    max2 = std::max(max2, m.y.col(1).maxCoeff());
  }
  const auto table = emission_log_table(spec, params, max1, max2);
  double total = 0.0;
  for (const auto& m : data.matches) total += log_forward(spec, params, m, table);
  return total;
}

struct InfoCriteria {
  double aic = 0.0;
  double bic = 0.0;
};

inline InfoCriteria information_criteria(double loglik, int n_params, int n_obs) {
  if (n_params < 0)
    throw ArgumentError("information_criteria: negative parameter count");
  if (n_obs < 1)
    throw ArgumentError("information_criteria: n_obs must be >= 1");
  return {-2.0 * loglik + 2.0 * n_params,
          -2.0 * loglik + n_params * std::log(double(n_obs))};
}

inline InfoCriteria information_criteria(double loglik, const ModelSpec& spec,
                                         int n_obs) {
  return information_criteria(loglik, num_params(spec), n_obs);
}

}  // namespace cophmm
