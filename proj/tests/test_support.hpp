#pragma once

// Shared fixtures for the test suite: the published three-state model,
// brute-force reference implementations of the forward and Viterbi
// recursions, random model/data generators, and temp-file helpers.

#include <cophmm/cophmm.hpp>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace test_support {

using namespace cophmm;

// Intercept-only coefficient block reproducing a fixed transition matrix
// through the multinomial logit link (eta_ii = 0, so beta0_ij = log g_ij/g_ii),
// padded with p zero slope columns.
inline Eigen::MatrixXd coeffs_from_matrix(const Eigen::MatrixXd& gamma, int p = 0) {
  const int n = int(gamma.rows());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n * (n - 1), 1 + p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) c(pair_index(i, j, n), 0) = std::log(gamma(i, j) / gamma(i, i));
  return c;
}

// Fitted transition matrix of the published three-state model, diagonal
// 0.471 / 0.988 / 0.805.
inline Eigen::MatrixXd table3_gamma() {
  Eigen::MatrixXd g(3, 3);
  g << 0.471, 0.054, 0.475,
       0.006, 0.988, 0.006,
       0.1945, 0.0005, 0.805;
  return g;
}

inline ModelSpec table3_spec(CopulaFamily family = CopulaFamily::clayton) {
  ModelSpec spec;
  spec.n_states = 3;
  spec.copula_family = family;
  return spec;
}

// Published three-state Clayton estimates: per-state (shots, touches)
// margins, dependence parameters, homogeneous chain, stationary initial
// distribution.
inline ModelParams table3_params(CopulaFamily family = CopulaFamily::clayton) {
  ModelParams p;
  p.marginals.push_back({CmpParams(0.212, 0.631), CmpParams(0.670, 0.0)});
  p.marginals.push_back({CmpParams(0.117, 0.0), CmpParams(1.093, 0.149)});
  p.marginals.push_back({CmpParams(0.128, 0.002), CmpParams(2.145, 0.352)});
  if (family == CopulaFamily::clayton) p.thetas = {1.721, 0.510, -0.048};
  else if (family == CopulaFamily::frank) p.thetas = {1.721, 0.510, -0.048};
  else if (family == CopulaFamily::amh) p.thetas = {0.9, 0.51, -0.048};
  p.trans_coeffs = coeffs_from_matrix(table3_gamma(), 0);
  p.delta = stationary_distribution(table3_gamma());
  return p;
}

// Log joint density of one fixed state path (1-based states).
inline double path_log_joint(const ModelSpec& spec, const ModelParams& params,
                             const MatchSeries& match, const std::vector<int>& states) {
  const bool homogeneous = spec.n_covariates() == 0;
  Eigen::MatrixXd gamma;
  if (homogeneous) gamma = transition_matrix(params, Eigen::VectorXd(0));
  double lp = std::log(params.delta(states[0] - 1));
  for (int t = 0; t < match.length(); ++t) {
    const int s = states[t] - 1;
    if (t > 0) {
      if (!homogeneous) gamma = transition_matrix(params, match.x.row(t).transpose());
      lp += std::log(gamma(states[t - 1] - 1, s));
    }
    lp += std::log(state_joint_pmf(spec, params, s, match.y(t, 0), match.y(t, 1)));
  }
  return lp;
}

// Likelihood by explicit enumeration of all N^T state paths, summed with
// log-sum-exp. Deliberately shares nothing with the scaled recursion.
inline double brute_force_loglik(const ModelSpec& spec, const ModelParams& params,
                                 const MatchSeries& match) {
  const int n = spec.n_states;
  const int t_len = match.length();
  std::vector<int> path(t_len, 1);
  double total = kNegInf;
  while (true) {
    total = log_add(total, path_log_joint(spec, params, match, path));
    int d = t_len - 1;
    while (d >= 0 && path[d] == n) path[d--] = 1;
    if (d < 0) break;
    ++path[d];
  }
  return total;
}

// Maximum log joint over all N^T paths.
inline double brute_force_best_log_joint(const ModelSpec& spec,
                                         const ModelParams& params,
                                         const MatchSeries& match) {
  const int n = spec.n_states;
  const int t_len = match.length();
  std::vector<int> path(t_len, 1);
  double best = kNegInf;
  while (true) {
    best = std::max(best, path_log_joint(spec, params, match, path));
    int d = t_len - 1;
    while (d >= 0 && path[d] == n) path[d--] = 1;
    if (d < 0) break;
    ++path[d];
  }
  return best;
}

struct RandomCase {
  ModelSpec spec;
  ModelParams params;
  MatchSeries match;
};

// Random valid model plus a random count series; covariate_linked adds one
// covariate with nonzero slopes, otherwise the chain is homogeneous. The
// ranges keep normalizing constants cheap and probabilities comfortably
// representable.
inline RandomCase random_case(int n_states, int t_len, bool covariate_linked,
                              CopulaFamily family, Rng& rng) {
  RandomCase c;
  c.spec.n_states = n_states;
  c.spec.copula_family = family;
  if (covariate_linked) c.spec.covariates = {{"z", 0.0, 1.0}};
  const int p = c.spec.n_covariates();

  for (int s = 0; s < n_states; ++s)
    c.params.marginals.push_back(
        {CmpParams(rng.uniform(0.1, 1.2), rng.uniform(0.3, 1.3)),
         CmpParams(rng.uniform(0.5, 3.0), rng.uniform(0.3, 1.3))});
  for (int s = 0; s < n_states && family != CopulaFamily::independence; ++s) {
    switch (family) {
      case CopulaFamily::frank: c.params.thetas.push_back(rng.uniform(-4.0, 4.0)); break;
      case CopulaFamily::clayton: c.params.thetas.push_back(rng.uniform(-0.8, 3.0)); break;
      default: c.params.thetas.push_back(rng.uniform(-0.95, 0.95)); break;
    }
  }
  c.params.delta.resize(n_states);
  for (int s = 0; s < n_states; ++s) c.params.delta(s) = rng.uniform(0.1, 1.0);
  c.params.delta /= c.params.delta.sum();
  c.params.trans_coeffs.resize(n_states * (n_states - 1), 1 + p);
  for (int r = 0; r < c.params.trans_coeffs.rows(); ++r) {
    c.params.trans_coeffs(r, 0) = rng.uniform(-2.0, 0.5);
    for (int k = 1; k <= p; ++k) c.params.trans_coeffs(r, k) = rng.uniform(-0.8, 0.8);
  }

  c.match.match_id = "case";
  c.match.y.resize(t_len, 2);
  c.match.x.resize(t_len, p);
  for (int t = 0; t < t_len; ++t) {
    c.match.minutes.push_back(t + 1);
    c.match.y(t, 0) = int(rng.uniform() * 5.0);
    c.match.y(t, 1) = int(rng.uniform() * 8.0);
    for (int k = 0; k < p; ++k) c.match.x(t, k) = rng.uniform(-1.5, 1.5);
  }
  return c;
}

// Self-deleting scratch directory for file-based tests.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    const auto base = std::filesystem::temp_directory_path();
    do {
      path_ = base / ("cophmm_test_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++));
    } while (std::filesystem::exists(path_));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline int count_lines(const std::string& text) {
  int n = 0;
  for (char ch : text)
    if (ch == '\n') ++n;
  return n;
}

}  // namespace test_support
