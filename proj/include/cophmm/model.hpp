#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "cophmm/copula.hpp"
#include "cophmm/data.hpp"
#include "cophmm/errors.hpp"

namespace cophmm {

// N-state hidden Markov model whose state-dependent distribution is a pair
// of CMP margins tied by a copula, and whose transition probabilities may
// depend on covariates through a multinomial logit link:
//
//   gamma_ij(x) = exp(eta_ij) / sum_k exp(eta_ik),
//   eta_ii = 0,  eta_ij = beta0_ij + sum_l beta_l_ij x_l  (i != j).

/// Structural description: state count, copula family, covariate layout.
struct ModelSpec {
  int n_states = 1;
  CopulaFamily copula_family = CopulaFamily::independence;
  std::vector<CovariateStats> covariates;

  int n_covariates() const { return int(covariates.size()); }
};

inline void validate_spec(const ModelSpec& spec) {
  if (spec.n_states < 1)
    throw ArgumentError("ModelSpec: n_states must be >= 1, got " +
                        std::to_string(spec.n_states));
  std::set<std::string> names;
  for (const auto& c : spec.covariates) {
    if (c.name.empty()) throw ArgumentError("ModelSpec: empty covariate name");
    if (!names.insert(c.name).second)
      throw ArgumentError("ModelSpec: duplicate covariate '" + c.name + "'");
    if (!(std::isfinite(c.mean) && std::isfinite(c.sd) && c.sd > 0.0))
      throw ArgumentError("ModelSpec: bad standardization for '" + c.name + "'");
  }
}

/// Row index of the ordered state pair (i, j), i != j, in trans_coeffs:
/// pairs are laid out row-major with the diagonal skipped.
inline int pair_index(int i, int j, int n) { return i * (n - 1) + (j > i ? j - 1 : j); }

/// Natural-scale parameters of the model.
struct ModelParams {
  std::vector<std::array<CmpParams, 2>> marginals;  // [state][0: shots, 1: touches]
  std::vector<double> thetas;                       // per state; empty for independence
  Eigen::VectorXd delta;                            // initial state distribution
  Eigen::MatrixXd trans_coeffs;  // N(N-1) x (1 + p): intercept, then slopes

  int n_states() const { return int(delta.size()); }
};

inline void validate_params(const ModelSpec& spec, const ModelParams& params) {
  validate_spec(spec);
  const int n = spec.n_states;
  const int p = spec.n_covariates();
  if (int(params.marginals.size()) != n)
    throw ArgumentError("ModelParams: expected " + std::to_string(n) +
                        " marginal pairs, got " + std::to_string(params.marginals.size()));
  const std::size_t want_thetas =
      spec.copula_family == CopulaFamily::independence ? 0 : std::size_t(n);
  if (params.thetas.size() != want_thetas)
    throw ArgumentError("ModelParams: expected " + std::to_string(want_thetas) +
                        " copula parameters, got " + std::to_string(params.thetas.size()));
  for (double t : params.thetas) validate_copula_theta(spec.copula_family, t);
  if (int(params.delta.size()) != n)
    throw ArgumentError("ModelParams: delta has length " +
                        std::to_string(params.delta.size()) + ", expected " +
                        std::to_string(n));
  if ((params.delta.array() < 0.0).any() ||
      std::abs(params.delta.sum() - 1.0) > 1e-8)
    throw ArgumentError("ModelParams: delta must be non-negative and sum to 1");
  if (params.trans_coeffs.rows() != n * (n - 1) ||
      params.trans_coeffs.cols() != 1 + p)
    throw ArgumentError("ModelParams: trans_coeffs must be " +
                        std::to_string(n * (n - 1)) + " x " + std::to_string(1 + p));
  if (!params.trans_coeffs.allFinite() || !params.delta.allFinite())
    throw ArgumentError("ModelParams: non-finite entries");
}

/// Transition probability matrix at one covariate vector (already
/// standardized). Rows index the state left, columns the state entered.
inline Eigen::MatrixXd transition_matrix(const ModelParams& params,
                                         const Eigen::VectorXd& covariates) {
  const int n = params.n_states();
  const int p = int(params.trans_coeffs.cols()) - 1;
  if (int(covariates.size()) != p)
    throw ArgumentError("transition_matrix: got " + std::to_string(covariates.size()) +
                        " covariates, model expects " + std::to_string(p));
  Eigen::MatrixXd gamma(n, n);
  Eigen::VectorXd eta(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) {
        eta(j) = 0.0;  // reference category
      } else {
        const auto row = params.trans_coeffs.row(pair_index(i, j, n));
        double e = row(0);
        for (int l = 0; l < p; ++l) e += row(1 + l) * covariates(l);
        eta(j) = e;
      }
    }
    const double m = eta.maxCoeff();
    const Eigen::VectorXd ex = (eta.array() - m).exp();
    gamma.row(i) = ex.transpose() / ex.sum();
  }
  return gamma;
}

/// Joint state-dependent pmf of (y1, y2) in the given state (0-based).
inline double state_joint_pmf(const ModelSpec& spec, const ModelParams& params,
                              int state, int y1, int y2) {
  if (state < 0 || state >= params.n_states())
    throw ArgumentError("state_joint_pmf: state index out of range");
  const auto& m = params.marginals[state];
  if (spec.copula_family == CopulaFamily::independence)
    return pmf(m[0], y1) * pmf(m[1], y2);
  const CopulaSpec c(spec.copula_family, params.thetas[state]);
  return bivariate_pmf(c, m[0], m[1], y1, y2);
}

// ---------------------------------------------------------------------------
// Working parameterization: a bijection onto an unconstrained real vector so
// that the optimizer never leaves the valid region.
//
//   lambda     -> log lambda
//   nu         -> log max(nu, 1e-8)        (floor keeps nu = 0 usable)
//   theta      -> identity        (Frank)
//              -> log(theta + 1)  (Clayton, restricted to theta > -1)
//              -> atanh(theta)    (AMH, restricted to (-1, 1))
//   delta      -> N - 1 logits against state 1
//   trans_coeffs -> identity
//
// Layout: per state [log l1, log n1, log l2, log n2], then the per-state
// copula parameters (skipped for independence), then the delta logits, then
// trans_coeffs rows in pair_index order.
// ---------------------------------------------------------------------------

inline constexpr double kNuFloor = 1e-8;

inline double theta_to_working(CopulaFamily family, double theta) {
  validate_copula_theta(family, theta);
  switch (family) {
    case CopulaFamily::frank: return theta;
    case CopulaFamily::clayton:
      if (theta <= -1.0)
        throw DomainError("clayton working transform needs theta > -1");
      return std::log1p(theta);
    case CopulaFamily::amh:
      if (theta <= -1.0)
        throw DomainError("amh working transform needs theta > -1");
      return std::atanh(theta);
    case CopulaFamily::independence: break;
  }
  throw ArgumentError("theta_to_working: independence family has no theta");
}

inline double working_to_theta(CopulaFamily family, double w) {
  switch (family) {
    case CopulaFamily::frank: return w;
    case CopulaFamily::clayton: return std::expm1(w);
    case CopulaFamily::amh:
      // tanh saturates to exactly 1 for large w, but the AMH domain is open
      // at 1; stop at the largest representable value below it.
      return std::min(std::tanh(w), 0x1.fffffffffffffp-1);
    case CopulaFamily::independence: break;
  }
  throw ArgumentError("working_to_theta: independence family has no theta");
}

/// Total number of free parameters: 4N marginal, N copula (none under
/// independence), N - 1 initial-distribution, N(N-1)(1 + p) transition.
inline int num_params(const ModelSpec& spec) {
  validate_spec(spec);
  const int n = spec.n_states;
  const int p = spec.n_covariates();
  const int thetas = spec.copula_family == CopulaFamily::independence ? 0 : n;
  return 4 * n + thetas + (n - 1) + n * (n - 1) * (1 + p);
}

inline Eigen::VectorXd pack(const ModelSpec& spec, const ModelParams& params) {
  validate_params(spec, params);
  const int n = spec.n_states;
  Eigen::VectorXd w(num_params(spec));
  int k = 0;
  for (int s = 0; s < n; ++s) {
    for (int v = 0; v < 2; ++v) {
      w(k++) = std::log(params.marginals[s][v].lambda);
      w(k++) = std::log(std::max(params.marginals[s][v].nu, kNuFloor));
    }
  }
  if (spec.copula_family != CopulaFamily::independence)
    for (int s = 0; s < n; ++s) w(k++) = theta_to_working(spec.copula_family, params.thetas[s]);
  for (int s = 1; s < n; ++s) {
    if (!(params.delta(0) > 0.0 && params.delta(s) > 0.0))
      throw DomainError("pack: delta entries must be positive to form logits");
    w(k++) = std::log(params.delta(s) / params.delta(0));
  }
  for (int r = 0; r < params.trans_coeffs.rows(); ++r)
    for (int c = 0; c < params.trans_coeffs.cols(); ++c) w(k++) = params.trans_coeffs(r, c);
  return w;
}

inline ModelParams unpack(const ModelSpec& spec, const Eigen::VectorXd& w) {
  validate_spec(spec);
  const int n = spec.n_states;
  const int p = spec.n_covariates();
  if (int(w.size()) != num_params(spec))
    throw ArgumentError("unpack: working vector has length " +
                        std::to_string(w.size()) + ", expected " +
                        std::to_string(num_params(spec)));
  ModelParams params;
  int k = 0;
  for (int s = 0; s < n; ++s) {
    const double l1 = std::exp(w(k++));
    const double n1 = std::exp(w(k++));
    const double l2 = std::exp(w(k++));
    const double n2 = std::exp(w(k++));
    params.marginals.push_back({CmpParams(l1, n1), CmpParams(l2, n2)});
  }
  if (spec.copula_family != CopulaFamily::independence)
    for (int s = 0; s < n; ++s)
      params.thetas.push_back(working_to_theta(spec.copula_family, w(k++)));
  Eigen::VectorXd logits(n);
  logits(0) = 0.0;
  for (int s = 1; s < n; ++s) logits(s) = w(k++);
  const double m = logits.maxCoeff();
  const Eigen::VectorXd ex = (logits.array() - m).exp();
  params.delta = ex / ex.sum();
  params.trans_coeffs.resize(n * (n - 1), 1 + p);
  for (int r = 0; r < params.trans_coeffs.rows(); ++r)
    for (int c = 0; c < params.trans_coeffs.cols(); ++c) params.trans_coeffs(r, c) = w(k++);
  validate_params(spec, params);
  return params;
}

}  // namespace cophmm
