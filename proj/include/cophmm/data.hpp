#pragma once

#include <Eigen/Dense>
#include <set>
#include <string>
#include <vector>

#include "cophmm/errors.hpp"

namespace cophmm {

/// Name plus the statistics used to scale a covariate before it enters the
/// transition model: value -> (value - mean) / sd. Dummy covariates keep
/// (mean, sd) = (0, 1) so they pass through untouched.
struct CovariateStats {
  std::string name;
  double mean = 0.0;
  double sd = 1.0;
};

/// One match: per-minute count pairs plus the (already standardized)
/// covariate rows aligned with them. Column 0 of y holds shots, column 1
/// ball touches. The covariates in row t drive the transition into minute t.
struct MatchSeries {
  std::string match_id;
  std::vector<int> minutes;  // strictly increasing within the match
  Eigen::MatrixXi y;         // T x 2 counts
  Eigen::MatrixXd x;         // T x p standardized covariates

  int length() const { return int(y.rows()); }
};

inline void validate_match(const MatchSeries& m) {
  if (m.y.rows() < 1) throw ArgumentError("MatchSeries '" + m.match_id + "': empty series");
  if (m.y.cols() != 2)
    throw ArgumentError("MatchSeries '" + m.match_id + "': y must have 2 columns");
  if (m.x.rows() != m.y.rows())
    throw ArgumentError("MatchSeries '" + m.match_id + "': covariate rows (" +
                        std::to_string(m.x.rows()) + ") do not match count rows (" +
                        std::to_string(m.y.rows()) + ")");
  if (int(m.minutes.size()) != m.length())
    throw ArgumentError("MatchSeries '" + m.match_id + "': minute column length mismatch");
  if ((m.y.array() < 0).any())
    throw ArgumentError("MatchSeries '" + m.match_id + "': negative counts");
  for (std::size_t i = 1; i < m.minutes.size(); ++i)
    if (m.minutes[i] <= m.minutes[i - 1])
      throw ArgumentError("MatchSeries '" + m.match_id + "': minutes not strictly increasing");
}

/// A collection of matches sharing one covariate layout.
struct Dataset {
  std::vector<MatchSeries> matches;
  std::vector<CovariateStats> covariates;

  int n_obs() const {
    int n = 0;
    for (const auto& m : matches) n += m.length();
    return n;
  }
};

inline void validate_dataset(const Dataset& d) {
  std::set<std::string> ids;
  for (const auto& m : d.matches) {
    validate_match(m);
    if (m.x.cols() != int(d.covariates.size()))
      throw ArgumentError("Dataset: match '" + m.match_id + "' has " +
                          std::to_string(m.x.cols()) + " covariate columns, expected " +
                          std::to_string(d.covariates.size()));
    if (!ids.insert(m.match_id).second)
      throw ArgumentError("Dataset: duplicate match_id '" + m.match_id + "'");
  }
}

}  // namespace cophmm
