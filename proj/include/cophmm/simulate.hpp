#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "cophmm/estimation.hpp"
#include "cophmm/model.hpp"
#include "cophmm/rng.hpp"

namespace cophmm {

// Forward simulation of the fitted process: hidden states move through the
// (possibly covariate-driven) transition matrix, emissions are drawn from
// the state's bivariate count distribution by inverse cdf — first the shot
// count from its marginal, then the touch count from the conditional
// distribution given the shots, using the copula corner differences
//
//   P(Y2 <= b | Y1 = a) = [C(F1(a), F2(b)) - C(F1(a-1), F2(b))] / P(Y1 = a).

/// How covariates evolve during a simulated match. Covariates named
/// "score_diff" and "minute" are generated (running score difference and the
/// 1-based minute index); everything else must be listed in constants.
/// Goals are attached to the simulated shot counts: each own shot scores
/// with probability goal_conversion, the unmodelled opponent scores with
/// probability opp_goal_rate per minute.
struct CovariateGenerator {
  std::map<std::string, double> constants;
  double goal_conversion = 0.10;
  double opp_goal_rate = 0.025;
};

/// A simulated match: the observable series plus the quantities that
/// generated it (hidden states 1-based, per-minute raw score difference).
struct SimulatedMatch {
  MatchSeries series;
  std::vector<int> states;
  std::vector<int> score_diff;
};

namespace detail {

/// Per-state marginal grids truncated where the tail mass drops below 1e-10.
struct MarginGrid {
  std::vector<double> pmf;
  std::vector<double> cdf;  // cdf[k] = F(k - 1), so cdf[0] = 0
};

inline MarginGrid margin_grid(const CmpParams& m) {
  constexpr int cap = 100000;
  const double log_z = log_normalizing_constant(m);
  MarginGrid g;
  g.cdf.push_back(0.0);
  double acc = 0.0;
  for (int k = 0; k < cap; ++k) {
    const double p = std::exp(log_pmf(m, k, log_z));
    g.pmf.push_back(p);
    acc += p;
    g.cdf.push_back(acc);
    if (1.0 - acc < 1e-10) return g;
  }
  throw NumericalError("simulate: marginal truncation bound exceeded (lambda = " +
                       std::to_string(m.lambda) + ", nu = " + std::to_string(m.nu) + ")");
}

}  // namespace detail

inline SimulatedMatch simulate_match(const ModelSpec& spec, const ModelParams& params,
                                     int n_minutes, const CovariateGenerator& gen,
                                     const std::string& match_id, Rng& rng) {
  validate_params(spec, params);
  if (n_minutes < 1) throw ArgumentError("simulate_match: n_minutes must be >= 1");
  const int n = spec.n_states;
  const int p = spec.n_covariates();

  std::vector<detail::MarginGrid> grid1(n), grid2(n);
  for (int s = 0; s < n; ++s) {
    grid1[s] = detail::margin_grid(params.marginals[s][0]);
    grid2[s] = detail::margin_grid(params.marginals[s][1]);
  }

  SimulatedMatch out;
  out.series.match_id = match_id;
  out.series.y.resize(n_minutes, 2);
  out.series.x.resize(n_minutes, p);
  out.states.reserve(n_minutes);
  out.score_diff.reserve(n_minutes);

  std::vector<double> delta(n);
  for (int s = 0; s < n; ++s) delta[s] = params.delta(s);

  int own_goals = 0, opp_goals = 0;
  int state = 0;
  for (int t = 1; t <= n_minutes; ++t) {
    const int score = own_goals - opp_goals;
    // Raw covariates entering the transition into minute t.
    std::map<std::string, double> raw = gen.constants;
    raw["minute"] = double(t);
    raw["score_diff"] = double(score);
    Eigen::VectorXd x(p);
    for (int i = 0; i < p; ++i) {
      const auto it = raw.find(spec.covariates[i].name);
      if (it == raw.end())
        throw ArgumentError("simulate_match: no value for covariate '" +
                            spec.covariates[i].name + "'");
      x(i) = (it->second - spec.covariates[i].mean) / spec.covariates[i].sd;
    }

    if (t == 1) {
      state = rng.categorical(delta);
    } else {
      const Eigen::MatrixXd gamma = transition_matrix(params, x);
      std::vector<double> row(n);
      for (int j = 0; j < n; ++j) row[j] = gamma(state, j);
      state = rng.categorical(row);
    }

    // Shot count by marginal inverse cdf.
    const auto& g1 = grid1[state];
    const auto& g2 = grid2[state];
    const double u1 = rng.uniform();
    int y1 = int(g1.pmf.size()) - 1;
    for (std::size_t k = 1; k < g1.cdf.size(); ++k)
      if (u1 < g1.cdf[k]) {
        y1 = int(k) - 1;
        break;
      }

    // Touch count from the conditional distribution given y1.
    int y2 = int(g2.pmf.size()) - 1;
    const double p1 = g1.pmf[y1];
    const double u2 = rng.uniform();
    if (spec.copula_family == CopulaFamily::independence) {
      for (std::size_t k = 1; k < g2.cdf.size(); ++k)
        if (u2 < g2.cdf[k]) {
          y2 = int(k) - 1;
          break;
        }
    } else {
      const CopulaSpec cop(spec.copula_family, params.thetas[state]);
      const double f1 = std::min(g1.cdf[y1 + 1], 1.0);
      const double f1m = g1.cdf[y1];
      for (std::size_t k = 1; k < g2.cdf.size(); ++k) {
        const double f2 = std::min(g2.cdf[k], 1.0);
        const double cond =
            (copula_cdf(cop, f1, f2) - copula_cdf(cop, f1m, f2)) / p1;
        if (u2 < cond) {
          y2 = int(k) - 1;
          break;
        }
      }
    }

    out.series.minutes.push_back(t);
    out.series.y(t - 1, 0) = y1;
    out.series.y(t - 1, 1) = y2;
    out.series.x.row(t - 1) = x.transpose();
    out.states.push_back(state + 1);
    out.score_diff.push_back(score);

    own_goals += rng.binomial(y1, gen.goal_conversion);
    if (rng.bernoulli(gen.opp_goal_rate)) ++opp_goals;
  }
  return out;
}

/// Simulate a whole dataset; matches are generated sequentially from one
/// seeded stream, so results are reproducible given (seed, n_matches,
/// n_minutes).
inline std::vector<SimulatedMatch> simulate_dataset(const ModelSpec& spec,
                                                    const ModelParams& params,
                                                    int n_matches, int n_minutes,
                                                    const CovariateGenerator& gen,
                                                    std::uint64_t seed) {
  if (n_matches < 1) throw ArgumentError("simulate_dataset: n_matches must be >= 1");
  Rng rng(seed);
  std::vector<SimulatedMatch> out;
  out.reserve(n_matches);
  for (int i = 0; i < n_matches; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "sim%04d", i + 1);
    out.push_back(simulate_match(spec, params, n_minutes, gen, id, rng));
  }
  return out;
}

/// Bundle simulated matches into a Dataset sharing the generating model's
/// covariate layout.
inline Dataset to_dataset(const ModelSpec& spec, const std::vector<SimulatedMatch>& sims) {
  Dataset d;
  d.covariates = spec.covariates;
  for (const auto& s : sims) d.matches.push_back(s.series);
  validate_dataset(d);
  return d;
}

}  // namespace cophmm
