#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cophmm/errors.hpp"

namespace cophmm {

// Local optimization for numerically differentiated objectives: BFGS with a
// backtracking line search, plus a Nelder-Mead simplex as fallback for starts
// where the quasi-Newton iteration cannot get moving. Objectives may return
// +inf to mark invalid regions; line searches simply back off.

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct OptimOptions {
  int max_iter = 2000;
  double grad_tol = 1e-5;   // infinity norm of the gradient
  double step_tol = 1e-9;   // relative infinity norm of the step
};

struct OptimOutcome {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  int n_evals = 0;
  std::string message;
};

/// Central-difference gradient; falls back to a one-sided difference when a
/// probe point returns a non-finite value.
inline Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x,
                                        double f_x, int* n_evals = nullptr) {
  const int n = int(x.size());
  Eigen::VectorXd g(n), xp = x;
  int evals = 0;
  for (int i = 0; i < n; ++i) {
    const double h = 6e-6 * (1.0 + std::abs(x(i)));
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    evals += 2;
    if (std::isfinite(fp) && std::isfinite(fm)) {
      g(i) = (fp - fm) / (2.0 * h);
    } else if (std::isfinite(fp)) {
      g(i) = (fp - f_x) / h;
    } else if (std::isfinite(fm)) {
      g(i) = (f_x - fm) / h;
    } else {
      throw NumericalError("numeric_gradient: objective non-finite on both "
                           "sides of coordinate " + std::to_string(i));
    }
  }
  if (n_evals) *n_evals += evals;
  return g;
}

/// Numerical Hessian by central differences, symmetric by construction.
/// Step per coordinate: rel_step * |x_i| floored at abs_floor.
inline Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x,
                                       double rel_step = 1e-4,
                                       double abs_floor = 1e-6) {
  const int n = int(x.size());
  Eigen::VectorXd h(n);
  for (int i = 0; i < n; ++i) h(i) = std::max(rel_step * std::abs(x(i)), abs_floor);
  const double f0 = f(x);
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd xp = x;
  for (int i = 0; i < n; ++i) {
    xp(i) = x(i) + h(i);
    const double fp = f(xp);
    xp(i) = x(i) - h(i);
    const double fm = f(xp);
    xp(i) = x(i);
    hess(i, i) = (fp - 2.0 * f0 + fm) / (h(i) * h(i));
    for (int j = i + 1; j < n; ++j) {
      xp(i) = x(i) + h(i); xp(j) = x(j) + h(j);
      const double fpp = f(xp);
      xp(j) = x(j) - h(j);
      const double fpm = f(xp);
      xp(i) = x(i) - h(i); xp(j) = x(j) + h(j);
      const double fmp = f(xp);
      xp(j) = x(j) - h(j);
      const double fmm = f(xp);
      xp(i) = x(i); xp(j) = x(j);
      hess(i, j) = hess(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h(i) * h(j));
    }
  }
  if (!hess.allFinite())
    throw NumericalError("numeric_hessian: non-finite entries (objective "
                         "undefined near the evaluation point)");
  return hess;
}

/// BFGS with backtracking Armijo line search on the inverse-Hessian form.
inline OptimOutcome minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                                  const OptimOptions& opts = {}) {
  const int n = int(x0.size());
  OptimOutcome out;
  out.x = x0;
  out.f = f(x0);
  out.n_evals = 1;
  if (!std::isfinite(out.f)) {
    out.message = "objective not finite at the start";
    return out;
  }
  Eigen::VectorXd g = numeric_gradient(f, out.x, out.f, &out.n_evals);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    out.iterations = iter;
    if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
      out.converged = true;
      out.message = "gradient tolerance reached";
      return out;
    }
    Eigen::VectorXd d = -(hinv * g);
    double slope = d.dot(g);
    if (!(slope < 0.0)) {  // curvature information went bad: restart
      hinv.setIdentity();
      d = -g;
      slope = d.dot(g);
    }
    double alpha = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      x_new = out.x + alpha * d;
      f_new = f(x_new);
      ++out.n_evals;
      if (std::isfinite(f_new) && f_new <= out.f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      out.message = "line search found no acceptable step";
      return out;
    }
    const Eigen::VectorXd s = x_new - out.x;
    const Eigen::VectorXd g_new = numeric_gradient(f, x_new, f_new, &out.n_evals);
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);
      hinv = (ident - rho * s * y.transpose()) * hinv *
                 (ident - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }
    const double step_size = s.lpNorm<Eigen::Infinity>();
    out.x = x_new;
    out.f = f_new;
    g = g_new;
    if (step_size <= opts.step_tol * (1.0 + out.x.lpNorm<Eigen::Infinity>())) {
      out.converged = true;
      out.message = "step tolerance reached";
      return out;
    }
  }
  out.iterations = opts.max_iter;
  out.message = "iteration limit reached";
  return out;
}

/// Nelder-Mead simplex, used as a fallback when BFGS stalls immediately.
inline OptimOutcome minimize_nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                                         const OptimOptions& opts = {}) {
  const int n = int(x0.size());
  OptimOutcome out;
  std::vector<Eigen::VectorXd> pts(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (int i = 1; i <= n; ++i) pts[i](i - 1) += 0.1 * (1.0 + std::abs(x0(i - 1)));
  for (int i = 0; i <= n; ++i) fv[i] = f(pts[i]);
  out.n_evals = n + 1;
  const int max_evals = std::max(200, opts.max_iter) * std::max(1, n);
  auto order = [&] {
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    std::vector<Eigen::VectorXd> p2(n + 1);
    std::vector<double> f2(n + 1);
    for (int i = 0; i <= n; ++i) { p2[i] = pts[idx[i]]; f2[i] = fv[idx[i]]; }
    pts.swap(p2);
    fv.swap(f2);
  };
  order();
  while (out.n_evals < max_evals) {
    ++out.iterations;
    if (std::isfinite(fv[n]) &&
        fv[n] - fv[0] <= 1e-10 * (1.0 + std::abs(fv[0]))) {
      out.converged = true;
      out.message = "simplex collapsed";
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += pts[i];
    centroid /= double(n);
    auto eval = [&](const Eigen::VectorXd& p) { ++out.n_evals; return f(p); };
    const Eigen::VectorXd xr = centroid + (centroid - pts[n]);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[n]);
      const double fe = eval(xe);
      if (fe < fr) { pts[n] = xe; fv[n] = fe; } else { pts[n] = xr; fv[n] = fr; }
    } else if (fr < fv[n - 1]) {
      pts[n] = xr; fv[n] = fr;
    } else {
      const Eigen::VectorXd xc = centroid + 0.5 * (pts[n] - centroid);
      const double fc = eval(xc);
      if (fc < fv[n]) {
        pts[n] = xc; fv[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          fv[i] = eval(pts[i]);
        }
      }
    }
    order();
  }
  if (!out.converged) out.message = "evaluation budget exhausted";
  out.x = pts[0];
  out.f = fv[0];
  return out;
}

}  // namespace cophmm
