#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cophmm/estimation.hpp"
#include "cophmm/likelihood.hpp"
#include "cophmm/model.hpp"

namespace cophmm {

/// Most likely state sequence of one match. States are reported 1-based.
struct DecodedSequence {
  std::string match_id;
  std::vector<int> states;  // values in 1..N
  double log_joint = 0.0;   // log of the maximized joint density
};

/// Viterbi decoding in log space. Ties in the argmax are broken toward the
/// lower state index (both along the recursion and at the end).
inline DecodedSequence viterbi(const ModelSpec& spec, const ModelParams& params,
                               const MatchSeries& match) {
  validate_match(match);
  validate_params(spec, params);
  const int n = spec.n_states;
  const int t_len = match.length();
  const auto table = emission_log_table(spec, params, match.y.col(0).maxCoeff(),
                                        match.y.col(1).maxCoeff());
  const bool homogeneous = spec.n_covariates() == 0;
  Eigen::MatrixXd log_gamma;
  if (homogeneous)
    log_gamma = transition_matrix(params, Eigen::VectorXd(0)).array().log();

  Eigen::MatrixXd dp(t_len, n);
  Eigen::MatrixXi back(t_len, n);
  for (int s = 0; s < n; ++s)
    dp(0, s) = std::log(params.delta(s)) + table[s](match.y(0, 0), match.y(0, 1));
  if (!(dp.row(0).maxCoeff() > kNegInf))
    throw NumericalError("viterbi: all paths vanished at time index 1 of match '" +
                         match.match_id + "'");
  for (int t = 1; t < t_len; ++t) {
    if (!homogeneous)
      log_gamma = transition_matrix(params, match.x.row(t).transpose()).array().log();
    for (int s = 0; s < n; ++s) {
      double best = kNegInf;
      int arg = 0;
      for (int r = 0; r < n; ++r) {
        const double cand = dp(t - 1, r) + log_gamma(r, s);
        if (cand > best) {
          best = cand;
          arg = r;
        }
      }
      dp(t, s) = best + table[s](match.y(t, 0), match.y(t, 1));
      back(t, s) = arg;
    }
    if (!(dp.row(t).maxCoeff() > kNegInf))
      throw NumericalError("viterbi: all paths vanished at time index " +
                           std::to_string(t + 1) + " of match '" + match.match_id + "'");
  }

  DecodedSequence out;
  out.match_id = match.match_id;
  out.states.resize(t_len);
  int s = 0;
  double best = dp(t_len - 1, 0);
  for (int r = 1; r < n; ++r)
    if (dp(t_len - 1, r) > best) {
      best = dp(t_len - 1, r);
      s = r;
    }
  if (!(best > kNegInf))
    throw NumericalError("viterbi: no admissible path for match '" + match.match_id + "'");
  out.log_joint = best;
  for (int t = t_len - 1; t >= 0; --t) {
    out.states[t] = s + 1;
    if (t > 0) s = back(t, s);
  }
  return out;
}

/// Stationary distribution of a transition matrix: the probability vector
/// solving delta' Gamma = delta'. Solved as a bordered linear system, with a
/// short power-iteration polish to push the residual under 1e-12.
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& gamma) {
  const int n = int(gamma.rows());
  if (gamma.cols() != n || n < 1)
    throw ArgumentError("stationary_distribution: matrix must be square");
  if ((gamma.array() < -1e-12).any())
    throw ArgumentError("stationary_distribution: negative entries");
  for (int i = 0; i < n; ++i)
    if (std::abs(gamma.row(i).sum() - 1.0) > 1e-8)
      throw ArgumentError("stationary_distribution: row " + std::to_string(i + 1) +
                          " does not sum to 1");

  // (Gamma^T - I) delta = 0 with the last equation replaced by sum = 1.
  Eigen::MatrixXd a = gamma.transpose() - Eigen::MatrixXd::Identity(n, n);
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible())
    throw NumericalError(
        "stationary_distribution: chain has no unique stationary distribution "
        "(transition matrix is reducible or degenerate)");
  Eigen::VectorXd delta = lu.solve(b);

  auto residual = [&](const Eigen::VectorXd& d) {
    return (d.transpose() * gamma - d.transpose()).cwiseAbs().maxCoeff();
  };
  for (int iter = 0; iter < 1000 && residual(delta) >= 1e-12; ++iter) {
    delta = (delta.transpose() * gamma).transpose();
    delta /= delta.sum();
  }
  if (delta.minCoeff() < -1e-10 || residual(delta) >= 1e-12)
    throw NumericalError("stationary_distribution: solution failed to reach the "
                         "1e-12 residual tolerance");
  delta = delta.cwiseMax(0.0);
  delta /= delta.sum();
  return delta;
}

/// Stationary state distribution as one raw covariate sweeps a grid, the
/// remaining covariates held at fixed raw values.
struct ProfileRow {
  double value = 0.0;
  Eigen::VectorXd distribution;
};

inline std::vector<ProfileRow> covariate_profile(
    const ModelSpec& spec, const ModelParams& params, const std::string& sweep_name,
    const std::vector<double>& values, const std::map<std::string, double>& fixed_raw) {
  validate_params(spec, params);
  std::vector<ProfileRow> rows;
  rows.reserve(values.size());
  for (double v : values) {
    std::map<std::string, double> raw = fixed_raw;
    raw[sweep_name] = v;
    const Eigen::VectorXd x = standardize_covariates(spec, raw);
    rows.push_back({v, stationary_distribution(transition_matrix(params, x))});
  }
  return rows;
}

}  // namespace cophmm
