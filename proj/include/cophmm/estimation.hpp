#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "cophmm/likelihood.hpp"
#include "cophmm/model.hpp"
#include "cophmm/optimize.hpp"
#include "cophmm/rng.hpp"

namespace cophmm {

// Maximum likelihood estimation over the working parameterization, with
// multiple random starts to cope with the multimodal likelihood surface.

/// Uniform sampling ranges (natural scale) for random starting points.
/// Defaults reflect per-minute count data: shots well below one per minute,
/// touches a handful per minute.
struct StartRanges {
  double lambda_shots_lo = 0.05, lambda_shots_hi = 0.5;
  double lambda_touches_lo = 0.5, lambda_touches_hi = 5.0;
  double nu_lo = 0.05, nu_hi = 1.5;
  double frank_theta_lo = -3.0, frank_theta_hi = 3.0;
  double clayton_theta_lo = -0.5, clayton_theta_hi = 3.0;
  double amh_theta_lo = -0.9, amh_theta_hi = 0.9;
  double delta_logit_lo = -1.0, delta_logit_hi = 1.0;
  double trans_intercept_lo = -3.0, trans_intercept_hi = -1.0;
  double trans_slope_lo = -0.5, trans_slope_hi = 0.5;
};

struct FitSettings {
  OptimOptions optim;
  bool compute_covariance = false;  // multi_start_fit enables it for the winner
};

struct FitResult {
  ModelSpec spec;
  ModelParams params;
  Eigen::VectorXd working;
  double loglik = -std::numeric_limits<double>::infinity();
  double aic = 0.0;
  double bic = 0.0;
  Eigen::MatrixXd working_cov;  // empty until a covariance is estimated
  bool converged = false;
  int iterations = 0;
  int n_evals = 0;
  int n_starts = 1;
  int best_start_index = 0;
  bool cov_pseudo_inverse = false;
  bool hessian_indefinite = false;
};

namespace detail {

/// Negative log likelihood in working coordinates; +inf where the model or
/// its likelihood cannot be evaluated (invalid region for the line search).
inline Objective make_objective(const ModelSpec& spec, const Dataset& data) {
  return [&spec, &data](const Eigen::VectorXd& w) -> double {
    try {
      return -log_likelihood(spec, unpack(spec, w), data);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
}

}  // namespace detail

/// Covariance of the working parameter estimate from the inverse of the
/// numerical Hessian of the negative log likelihood.
struct CovarianceEstimate {
  Eigen::MatrixXd working_cov;
  bool used_pseudo_inverse = false;
  bool indefinite = false;
};

/// Single local optimization from one working-space starting point.
inline FitResult fit(const ModelSpec& spec, const Dataset& data,
                     const Eigen::VectorXd& start, const FitSettings& settings = {}) {
  validate_spec(spec);
  validate_dataset(data);
  const Objective obj = detail::make_objective(spec, data);
  const double f0 = obj(start);
  if (!std::isfinite(f0))
    throw NumericalError("fit: start rejected, objective is not finite there");

  OptimOutcome best = minimize_bfgs(obj, start, settings.optim);
  if (!best.converged && best.iterations <= 1) {
    // Quasi-Newton got stuck immediately; let a simplex walk out of the
    // corner, then polish.
    OptimOptions nm = settings.optim;
    nm.max_iter = 400;
    const OptimOutcome rough = minimize_nelder_mead(obj, start, nm);
    OptimOutcome polished = minimize_bfgs(obj, rough.x, settings.optim);
    polished.n_evals += best.n_evals + rough.n_evals;
    if (polished.f <= best.f) best = polished;
  }

  FitResult r;
  r.spec = spec;
  r.working = best.x;
  r.params = unpack(spec, best.x);
  r.loglik = -best.f;
  const InfoCriteria ic = information_criteria(r.loglik, spec, data.n_obs());
  r.aic = ic.aic;
  r.bic = ic.bic;
  r.converged = best.converged;
  r.iterations = best.iterations;
  r.n_evals = best.n_evals;
  return r;
}

/// Random working-space starting point. Draw order (fixed for
/// reproducibility): per state lambda1, nu1, lambda2, nu2; then per-state
/// theta; then delta logits; then per transition pair intercept and slopes.
inline Eigen::VectorXd random_start(const ModelSpec& spec, const StartRanges& ranges,
                                    Rng& rng) {
  const int n = spec.n_states;
  const int p = spec.n_covariates();
  Eigen::VectorXd w(num_params(spec));
  int k = 0;
  for (int s = 0; s < n; ++s) {
    w(k++) = std::log(rng.uniform(ranges.lambda_shots_lo, ranges.lambda_shots_hi));
    w(k++) = std::log(rng.uniform(ranges.nu_lo, ranges.nu_hi));
    w(k++) = std::log(rng.uniform(ranges.lambda_touches_lo, ranges.lambda_touches_hi));
    w(k++) = std::log(rng.uniform(ranges.nu_lo, ranges.nu_hi));
  }
  if (spec.copula_family != CopulaFamily::independence) {
    for (int s = 0; s < n; ++s) {
      double theta = 0.0;
      switch (spec.copula_family) {
        case CopulaFamily::frank:
          theta = rng.uniform(ranges.frank_theta_lo, ranges.frank_theta_hi);
          break;
        case CopulaFamily::clayton:
          theta = rng.uniform(ranges.clayton_theta_lo, ranges.clayton_theta_hi);
          break;
        case CopulaFamily::amh:
          theta = rng.uniform(ranges.amh_theta_lo, ranges.amh_theta_hi);
          break;
        case CopulaFamily::independence:
          break;
      }
      w(k++) = theta_to_working(spec.copula_family, theta);
    }
  }
  for (int s = 1; s < n; ++s)
    w(k++) = rng.uniform(ranges.delta_logit_lo, ranges.delta_logit_hi);
  for (int r = 0; r < n * (n - 1); ++r) {
    w(k++) = rng.uniform(ranges.trans_intercept_lo, ranges.trans_intercept_hi);
    for (int l = 0; l < p; ++l)
      w(k++) = rng.uniform(ranges.trans_slope_lo, ranges.trans_slope_hi);
  }
  return w;
}

inline CovarianceEstimate covariance_estimate(const FitResult& fitted,
                                              const Dataset& data);

/// Multi-start estimation: n_starts random starting points drawn from the
/// given ranges, independently optimized; the best log likelihood wins, ties
/// resolved toward the lowest start index. Deterministic given the seed.
inline FitResult multi_start_fit(const ModelSpec& spec, const Dataset& data,
                                 int n_starts, std::uint64_t seed,
                                 const StartRanges& ranges = {},
                                 const FitSettings& settings = {}) {
  if (n_starts < 1) throw ArgumentError("multi_start_fit: n_starts must be >= 1");
  validate_spec(spec);
  validate_dataset(data);
  Rng rng(seed);
  std::vector<Eigen::VectorXd> starts(n_starts);
  for (int i = 0; i < n_starts; ++i) starts[i] = random_start(spec, ranges, rng);

  FitResult best;
  bool have_best = false;
  std::vector<std::string> failures;
  for (int i = 0; i < n_starts; ++i) {
    try {
      FitResult r = fit(spec, data, starts[i], settings);
      if (!have_best || r.loglik > best.loglik) {
        best = r;
        best.best_start_index = i;
        have_best = true;
      }
    } catch (const Error& e) {
      failures.push_back("start " + std::to_string(i) + ": " + e.what());
    }
  }
  if (!have_best) {
    std::string msg = "multi_start_fit: every start failed";
    for (const auto& s : failures) msg += "\n  " + s;
    throw NumericalError(msg);
  }
  best.n_starts = n_starts;
  if (settings.compute_covariance) {
    const CovarianceEstimate cov = covariance_estimate(best, data);
    best.working_cov = cov.working_cov;
    best.cov_pseudo_inverse = cov.used_pseudo_inverse;
    best.hessian_indefinite = cov.indefinite;
  }
  return best;
}

inline CovarianceEstimate covariance_estimate(const FitResult& fitted,
                                              const Dataset& data) {
  const Objective obj = detail::make_objective(fitted.spec, data);
  const Eigen::MatrixXd hess = numeric_hessian(obj, fitted.working);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
  if (eig.info() != Eigen::Success)
    throw NumericalError("covariance_estimate: eigendecomposition failed");
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double ev_max = ev.cwiseAbs().maxCoeff();
  const double ev_min = ev.cwiseAbs().minCoeff();

  CovarianceEstimate out;
  out.indefinite = (ev.minCoeff() <= 0.0);
  const bool ill_conditioned =
      !(ev_min > 0.0) || ev_max / ev_min > 1e12 || out.indefinite;
  Eigen::VectorXd inv_ev(ev.size());
  if (ill_conditioned) {
    out.used_pseudo_inverse = true;
    for (int i = 0; i < ev.size(); ++i)
      inv_ev(i) = ev(i) > ev_max * 1e-12 ? 1.0 / ev(i) : 0.0;
  } else {
    for (int i = 0; i < ev.size(); ++i) inv_ev(i) = 1.0 / ev(i);
  }
  out.working_cov =
      eig.eigenvectors() * inv_ev.asDiagonal() * eig.eigenvectors().transpose();
  return out;
}

/// Standardize a raw named covariate map into the model's covariate vector.
inline Eigen::VectorXd standardize_covariates(const ModelSpec& spec,
                                              const std::map<std::string, double>& raw) {
  Eigen::VectorXd x(spec.n_covariates());
  for (int i = 0; i < spec.n_covariates(); ++i) {
    const auto& c = spec.covariates[i];
    const auto it = raw.find(c.name);
    if (it == raw.end())
      throw ArgumentError("covariate '" + c.name + "' missing from the supplied values");
    x(i) = (it->second - c.mean) / c.sd;
  }
  for (const auto& [name, value] : raw) {
    (void)value;
    bool known = false;
    for (const auto& c : spec.covariates) known |= (c.name == name);
    if (!known)
      throw ArgumentError("covariate '" + name + "' is not part of the model");
  }
  return x;
}

/// One grid point of a transition-probability curve with a percentile band.
struct CurvePoint {
  double value = 0.0;          // raw sweep covariate value
  Eigen::MatrixXd estimate;    // N x N plug-in transition matrix
  Eigen::MatrixXd lower;       // 2.5% percentile per entry
  Eigen::MatrixXd upper;       // 97.5% percentile per entry
};

/// Pointwise 95% confidence curves for transition probabilities as one raw
/// covariate sweeps a grid: multivariate normal draws around the working
/// estimate are pushed through the transition link and summarized per entry
/// by percentiles. Deterministic given the seed; a zero covariance collapses
/// the band onto the point estimate.
inline std::vector<CurvePoint> transition_curve_ci(
    const FitResult& fitted, const std::string& sweep_name,
    const std::vector<double>& grid, const std::map<std::string, double>& fixed_raw,
    int n_draws = 1000, std::uint64_t seed = 1) {
  if (fitted.working_cov.size() == 0)
    throw ArgumentError("transition_curve_ci: fit carries no covariance estimate");
  if (n_draws < 1) throw ArgumentError("transition_curve_ci: n_draws must be >= 1");
  const int n = fitted.spec.n_states;
  const int pw = int(fitted.working.size());
  if (fitted.working_cov.rows() != pw || fitted.working_cov.cols() != pw)
    throw ArgumentError("transition_curve_ci: covariance dimension mismatch");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fitted.working_cov);
  if (eig.info() != Eigen::Success)
    throw NumericalError("transition_curve_ci: eigendecomposition failed");
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double ev_max = std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  if (ev.minCoeff() < -1e-8 * std::max(ev_max, 1.0))
    throw NumericalError(
        "transition_curve_ci: covariance is not positive semidefinite; "
        "re-estimate it with pseudo-inverse regularization");
  Eigen::VectorXd scale(ev.size());
  for (int i = 0; i < ev.size(); ++i) scale(i) = std::sqrt(std::max(ev(i), 0.0));
  const Eigen::MatrixXd root = eig.eigenvectors() * scale.asDiagonal();

  Rng rng(seed);
  std::vector<ModelParams> draws;
  draws.reserve(n_draws);
  for (int d = 0; d < n_draws; ++d) {
    Eigen::VectorXd z(pw);
    for (int i = 0; i < pw; ++i) z(i) = rng.normal();
    const Eigen::VectorXd w = fitted.working + root * z;
    try {
      draws.push_back(unpack(fitted.spec, w));
    } catch (const Error&) {
      // A draw far in the tail can leave the representable region; skip it.
    }
  }
  if (draws.empty())
    throw NumericalError("transition_curve_ci: no usable parameter draws");

  auto percentile = [](std::vector<double>& v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const std::size_t lo = std::size_t(std::floor(pos));
    const std::size_t hi = std::size_t(std::ceil(pos));
    const double frac = pos - double(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
  };

  std::vector<CurvePoint> curve;
  curve.reserve(grid.size());
  for (double value : grid) {
    std::map<std::string, double> raw = fixed_raw;
    raw[sweep_name] = value;
    const Eigen::VectorXd x = standardize_covariates(fitted.spec, raw);
    CurvePoint pt;
    pt.value = value;
    pt.estimate = transition_matrix(fitted.params, x);
    pt.lower.resize(n, n);
    pt.upper.resize(n, n);
    std::vector<Eigen::MatrixXd> samples;
    samples.reserve(draws.size());
    for (const auto& d : draws) samples.push_back(transition_matrix(d, x));
    std::vector<double> entry(samples.size());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (std::size_t s = 0; s < samples.size(); ++s) entry[s] = samples[s](i, j);
        pt.lower(i, j) = percentile(entry, 0.025);
        pt.upper(i, j) = percentile(entry, 0.975);
      }
    }
    curve.push_back(std::move(pt));
  }
  return curve;
}

/// Relabel states so that the expected ball-touch count increases with the
/// state index; a reporting convention applied before results are written
/// out. The permutation is pushed through every parameter block and the
/// working vector is re-packed; any covariance estimate must be computed
/// after this reordering.
inline FitResult order_states_by_touch_mean(const FitResult& fitted) {
  const int n = fitted.spec.n_states;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> touch_mean(n);
  for (int s = 0; s < n; ++s) touch_mean[s] = mean(fitted.params.marginals[s][1]);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](int a, int b) { return touch_mean[a] < touch_mean[b]; });

  ModelParams q;
  q.delta.resize(n);
  q.trans_coeffs.resize(fitted.params.trans_coeffs.rows(),
                        fitted.params.trans_coeffs.cols());
  for (int s = 0; s < n; ++s) {
    q.marginals.push_back(fitted.params.marginals[perm[s]]);
    if (!fitted.params.thetas.empty()) q.thetas.push_back(fitted.params.thetas[perm[s]]);
    q.delta(s) = fitted.params.delta(perm[s]);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j)
        q.trans_coeffs.row(pair_index(i, j, n)) =
            fitted.params.trans_coeffs.row(pair_index(perm[i], perm[j], n));

  FitResult out = fitted;
  out.params = q;
  out.working = pack(fitted.spec, q);
  out.working_cov.resize(0, 0);  // invalidated by the relabeling
  out.cov_pseudo_inverse = false;
  out.hessian_indefinite = false;
  return out;
}

}  // namespace cophmm
