#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cophmm/data.hpp"
#include "cophmm/decode.hpp"
#include "cophmm/estimation.hpp"
#include "cophmm/model.hpp"
#include "cophmm/simulate.hpp"

namespace cophmm {

// File formats:
//   - match data    CSV with columns match_id, minute, shots, touches,
//                   score_diff, home, opp_market_value (extras ignored)
//   - fitted models versioned JSON, doubles kept at full precision
//   - result tables CSV, written atomically (temp file + rename)

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' '))
      field.pop_back();
    std::size_t b = 0;
    while (b < field.size() && field[b] == ' ') ++b;
    out.push_back(field.substr(b));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

// line_no 0 means the value came from somewhere without lines (a flag, say).
inline std::string line_prefix(int line_no) {
  return line_no > 0 ? "line " + std::to_string(line_no) + ": " : "";
}

inline long parse_long(const std::string& s, const std::string& what, int line_no) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != s.size() || s.empty())
    throw ParseError(line_prefix(line_no) + what + " is not an integer: '" + s + "'");
  return v;
}

inline double parse_double(const std::string& s, const std::string& what, int line_no) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != s.size() || s.empty())
    throw ParseError(line_prefix(line_no) + what + " is not a number: '" + s + "'");
  return v;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Write content to path via a temporary file so that readers never observe
/// a half-written table.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  // Device and pipe targets such as /dev/null cannot take the rename dance
  // (it would replace the node itself); write straight through to them.
  std::error_code ec;
  const auto status = std::filesystem::status(path, ec);
  if (!ec && std::filesystem::exists(status) &&
      !std::filesystem::is_regular_file(status)) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    out << content;
    if (!out.flush()) throw ParseError("write to '" + path + "' failed");
    return;
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open '" + tmp + "' for writing");
    out << content;
    if (!out.flush()) throw ParseError("write to '" + tmp + "' failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ParseError("cannot move '" + tmp + "' to '" + path + "'");
}

/// JSON has no non-finite numbers, so the writer stores them as null; map
/// null back to the one non-finite value the field can legitimately hold.
inline double double_or(const nlohmann::json& v, double if_null) {
  return v.is_null() ? if_null : v.get<double>();
}

}  // namespace detail

/// Load match data. covariate_names selects which columns feed the
/// transition model (any of score_diff, home, opp_market_value, minute, or
/// another numeric column present in the file). If preset_stats is given
/// (decoding with an already-fitted model), those standardization constants
/// are applied; otherwise they are computed from this file, with the home
/// dummy left untouched at (mean 0, sd 1).
inline Dataset load_dataset(const std::string& path,
                            const std::vector<std::string>& covariate_names = {},
                            const std::vector<CovariateStats>* preset_stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open data file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ParseError("'" + path + "': empty file");
  const std::vector<std::string> header = detail::split_csv_line(line);
  std::map<std::string, int> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = int(i);
  for (const char* required :
       {"match_id", "minute", "shots", "touches", "score_diff", "home",
        "opp_market_value"})
    if (!col.count(required))
      throw ParseError("'" + path + "': missing required column '" +
                       std::string(required) + "'");
  for (const auto& name : covariate_names)
    if (name != "minute" && !col.count(name))
      throw ParseError("'" + path + "': covariate column '" + name + "' not found");

  struct Row {
    std::string match_id;
    int minute, shots, touches;
    std::vector<double> cov;  // aligned with covariate_names
    int line_no;
  };
  std::vector<Row> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = detail::split_csv_line(line);
    if (f.size() < header.size())
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(f.size()));
    Row r;
    r.line_no = line_no;
    r.match_id = f[col["match_id"]];
    if (r.match_id.empty())
      throw ParseError("line " + std::to_string(line_no) + ": empty match_id");
    r.minute = int(detail::parse_long(f[col["minute"]], "minute", line_no));
    r.shots = int(detail::parse_long(f[col["shots"]], "shots", line_no));
    r.touches = int(detail::parse_long(f[col["touches"]], "touches", line_no));
    if (r.shots < 0 || r.touches < 0)
      throw ParseError("line " + std::to_string(line_no) + ": negative count");
    const long home = detail::parse_long(f[col["home"]], "home", line_no);
    if (home != 0 && home != 1)
      throw ParseError("line " + std::to_string(line_no) +
                       ": home must be 0 or 1, got " + std::to_string(home));
    detail::parse_long(f[col["score_diff"]], "score_diff", line_no);
    detail::parse_double(f[col["opp_market_value"]], "opp_market_value", line_no);
    for (const auto& name : covariate_names) {
      if (name == "minute")
        r.cov.push_back(double(r.minute));
      else
        r.cov.push_back(detail::parse_double(f[col[name]], name, line_no));
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ParseError("'" + path + "': no data rows");

  // Group rows by match, keeping first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<const Row*>> groups;
  for (const auto& r : rows) {
    if (!groups.count(r.match_id)) order.push_back(r.match_id);
    groups[r.match_id].push_back(&r);
  }
  for (const auto& id : order) {
    const auto& g = groups[id];
    for (std::size_t i = 1; i < g.size(); ++i) {
      if (g[i]->minute == g[i - 1]->minute)
        throw ParseError("line " + std::to_string(g[i]->line_no) +
                         ": duplicate minute " + std::to_string(g[i]->minute) +
                         " in match '" + id + "' (previous at line " +
                         std::to_string(g[i - 1]->line_no) + ")");
      if (g[i]->minute < g[i - 1]->minute)
        throw ParseError("line " + std::to_string(g[i]->line_no) +
                         ": minutes not increasing in match '" + id +
                         "' (minute " + std::to_string(g[i]->minute) + " after " +
                         std::to_string(g[i - 1]->minute) + ")");
    }
  }

  // Standardization statistics.
  std::vector<CovariateStats> stats;
  for (std::size_t c = 0; c < covariate_names.size(); ++c) {
    const std::string& name = covariate_names[c];
    CovariateStats st;
    st.name = name;
    if (preset_stats) {
      const auto it = std::find_if(preset_stats->begin(), preset_stats->end(),
                                   [&](const CovariateStats& s) { return s.name == name; });
      if (it == preset_stats->end())
        throw ArgumentError("no preset standardization for covariate '" + name + "'");
      st = *it;
    } else if (name != "home") {
      double m = 0.0;
      for (const auto& r : rows) m += r.cov[c];
      m /= double(rows.size());
      double ss = 0.0;
      for (const auto& r : rows) ss += (r.cov[c] - m) * (r.cov[c] - m);
      double sd = rows.size() > 1 ? std::sqrt(ss / double(rows.size() - 1)) : 1.0;
      if (!(sd > 1e-12)) sd = 1.0;  // constant column: center only
      st.mean = m;
      st.sd = sd;
    }
    stats.push_back(st);
  }

  Dataset d;
  d.covariates = stats;
  for (const auto& id : order) {
    const auto& g = groups[id];
    MatchSeries m;
    m.match_id = id;
    m.y.resize(int(g.size()), 2);
    m.x.resize(int(g.size()), int(covariate_names.size()));
    for (std::size_t i = 0; i < g.size(); ++i) {
      m.minutes.push_back(g[i]->minute);
      m.y(int(i), 0) = g[i]->shots;
      m.y(int(i), 1) = g[i]->touches;
      for (std::size_t c = 0; c < covariate_names.size(); ++c)
        m.x(int(i), int(c)) = (g[i]->cov[c] - stats[c].mean) / stats[c].sd;
    }
    d.matches.push_back(std::move(m));
  }
  validate_dataset(d);
  return d;
}

// --------------------------------------------------------------------------
// Model persistence
// --------------------------------------------------------------------------

inline constexpr const char* kModelFormat = "cophmm-model";
inline constexpr int kModelVersion = 1;

inline void save_model(const FitResult& fitted, const std::string& path) {
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["n_states"] = fitted.spec.n_states;
  j["copula_family"] = to_string(fitted.spec.copula_family);
  j["covariates"] = nlohmann::json::array();
  for (const auto& c : fitted.spec.covariates)
    j["covariates"].push_back({{"name", c.name}, {"mean", c.mean}, {"sd", c.sd}});

  nlohmann::json states = nlohmann::json::array();
  for (int s = 0; s < fitted.spec.n_states; ++s) {
    nlohmann::json st;
    st["shots"] = {{"lambda", fitted.params.marginals[s][0].lambda},
                   {"nu", fitted.params.marginals[s][0].nu}};
    st["touches"] = {{"lambda", fitted.params.marginals[s][1].lambda},
                     {"nu", fitted.params.marginals[s][1].nu}};
    if (!fitted.params.thetas.empty()) st["theta"] = fitted.params.thetas[s];
    states.push_back(st);
  }
  j["parameters"]["states"] = states;
  j["parameters"]["delta"] =
      std::vector<double>(fitted.params.delta.data(),
                          fitted.params.delta.data() + fitted.params.delta.size());
  nlohmann::json trans = nlohmann::json::array();
  const int n = fitted.spec.n_states;
  for (int i = 0; i < n; ++i)
    for (int jj = 0; jj < n; ++jj) {
      if (i == jj) continue;
      const auto row = fitted.params.trans_coeffs.row(pair_index(i, jj, n));
      std::vector<double> coeffs(row.size());
      for (int c = 0; c < int(row.size()); ++c) coeffs[c] = row(c);
      trans.push_back({{"from", i + 1}, {"to", jj + 1}, {"coefficients", coeffs}});
    }
  j["parameters"]["transition_coefficients"] = trans;
  j["working"] = std::vector<double>(fitted.working.data(),
                                     fitted.working.data() + fitted.working.size());

  j["fit"] = {{"loglik", fitted.loglik},
              {"aic", fitted.aic},
              {"bic", fitted.bic},
              {"converged", fitted.converged},
              {"n_starts", fitted.n_starts},
              {"best_start_index", fitted.best_start_index},
              {"covariance_pseudo_inverse", fitted.cov_pseudo_inverse},
              {"hessian_indefinite", fitted.hessian_indefinite}};
  if (fitted.working_cov.size() > 0) {
    nlohmann::json cov = nlohmann::json::array();
    for (int r = 0; r < fitted.working_cov.rows(); ++r) {
      std::vector<double> rowv(fitted.working_cov.cols());
      for (int c = 0; c < fitted.working_cov.cols(); ++c)
        rowv[c] = fitted.working_cov(r, c);
      cov.push_back(rowv);
    }
    j["working_covariance"] = cov;
  }
  detail::write_file_atomic(path, j.dump(2) + "\n");
}

inline FitResult load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    if (!j.contains("format") || j.at("format").get<std::string>() != kModelFormat)
      throw ParseError("'" + path + "' is not a model file");
    if (j.at("version").get<int>() != kModelVersion)
      throw ParseError("'" + path + "': unsupported model version " +
                       j.at("version").dump());
    FitResult f;
    f.spec.n_states = j.at("n_states").get<int>();
    f.spec.copula_family =
        copula_family_from_string(j.at("copula_family").get<std::string>());
    for (const auto& c : j.at("covariates"))
      f.spec.covariates.push_back({c.at("name").get<std::string>(),
                                   c.at("mean").get<double>(),
                                   c.at("sd").get<double>()});

    const auto& par = j.at("parameters");
    const int n = f.spec.n_states;
    const auto& states = par.at("states");
    if (int(states.size()) != n)
      throw ParseError("'" + path + "': expected " + std::to_string(n) + " states");
    for (const auto& st : states) {
      f.params.marginals.push_back(
          {CmpParams(st.at("shots").at("lambda").get<double>(),
                     st.at("shots").at("nu").get<double>()),
           CmpParams(st.at("touches").at("lambda").get<double>(),
                     st.at("touches").at("nu").get<double>())});
      if (f.spec.copula_family != CopulaFamily::independence)
        f.params.thetas.push_back(st.at("theta").get<double>());
    }
    const auto delta = par.at("delta").get<std::vector<double>>();
    f.params.delta = Eigen::Map<const Eigen::VectorXd>(delta.data(), delta.size());
    const int p = f.spec.n_covariates();
    f.params.trans_coeffs.resize(n * (n - 1), 1 + p);
    int seen = 0;
    for (const auto& tc : par.at("transition_coefficients")) {
      const int from = tc.at("from").get<int>() - 1;
      const int to = tc.at("to").get<int>() - 1;
      if (from < 0 || from >= n || to < 0 || to >= n || from == to)
        throw ParseError("'" + path + "': bad transition pair");
      const auto coeffs = tc.at("coefficients").get<std::vector<double>>();
      if (int(coeffs.size()) != 1 + p)
        throw ParseError("'" + path + "': transition row needs " +
                         std::to_string(1 + p) + " coefficients");
      for (int c = 0; c <= p; ++c)
        f.params.trans_coeffs(pair_index(from, to, n), c) = coeffs[c];
      ++seen;
    }
    if (seen != n * (n - 1))
      throw ParseError("'" + path + "': expected " + std::to_string(n * (n - 1)) +
                       " transition rows, got " + std::to_string(seen));
    validate_params(f.spec, f.params);

    // A Clayton theta at the -1 boundary packs to -inf, which the writer
    // stored as null.
    const auto& working_json = j.at("working");
    std::vector<double> working(working_json.size());
    for (std::size_t i = 0; i < working_json.size(); ++i)
      working[i] = detail::double_or(working_json.at(i),
                                     -std::numeric_limits<double>::infinity());
    if (int(working.size()) != num_params(f.spec))
      throw ParseError("'" + path + "': working vector length mismatch");
    f.working = Eigen::Map<const Eigen::VectorXd>(working.data(), working.size());

    const auto& fit = j.at("fit");
    // -inf marks a model saved before any fit.
    f.loglik =
        detail::double_or(fit.at("loglik"), -std::numeric_limits<double>::infinity());
    f.aic = detail::double_or(fit.at("aic"), std::numeric_limits<double>::quiet_NaN());
    f.bic = detail::double_or(fit.at("bic"), std::numeric_limits<double>::quiet_NaN());
    f.converged = fit.at("converged").get<bool>();
    f.n_starts = fit.at("n_starts").get<int>();
    f.best_start_index = fit.at("best_start_index").get<int>();
    f.cov_pseudo_inverse = fit.at("covariance_pseudo_inverse").get<bool>();
    f.hessian_indefinite = fit.at("hessian_indefinite").get<bool>();

    if (j.contains("working_covariance")) {
      const auto& cov = j.at("working_covariance");
      const int pw = int(working.size());
      if (int(cov.size()) != pw)
        throw ParseError("'" + path + "': covariance dimension mismatch");
      f.working_cov.resize(pw, pw);
      for (int r = 0; r < pw; ++r) {
        const auto rowv = cov.at(r).get<std::vector<double>>();
        if (int(rowv.size()) != pw)
          throw ParseError("'" + path + "': covariance row length mismatch");
        for (int c = 0; c < pw; ++c) f.working_cov(r, c) = rowv[c];
      }
    }
    return f;
  } catch (const ParseError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file '" + path + "' is malformed: " + e.what());
  } catch (const Error& e) {
    throw ParseError("model file '" + path + "' holds invalid parameters: " + e.what());
  }
}

// --------------------------------------------------------------------------
// Result tables
// --------------------------------------------------------------------------

inline void write_decoded_csv(const std::vector<MatchSeries>& matches,
                              const std::vector<DecodedSequence>& decoded,
                              const std::string& path) {
  if (matches.size() != decoded.size())
    throw ArgumentError("write_decoded_csv: size mismatch");
  std::string out = "match_id,minute,shots,touches,state\n";
  for (std::size_t m = 0; m < matches.size(); ++m) {
    const auto& ms = matches[m];
    for (int t = 0; t < ms.length(); ++t) {
      out += ms.match_id + "," + std::to_string(ms.minutes[t]) + "," +
             std::to_string(ms.y(t, 0)) + "," + std::to_string(ms.y(t, 1)) + "," +
             std::to_string(decoded[m].states[t]) + "\n";
    }
  }
  detail::write_file_atomic(path, out);
}

inline void write_profile_csv(const std::vector<ProfileRow>& rows,
                              const std::string& sweep_name, const std::string& path) {
  if (rows.empty()) throw ArgumentError("write_profile_csv: no rows");
  std::string out = sweep_name;
  for (int s = 1; s <= int(rows.front().distribution.size()); ++s)
    out += ",state_" + std::to_string(s);
  out += "\n";
  for (const auto& r : rows) {
    out += detail::format_double(r.value);
    for (int s = 0; s < int(r.distribution.size()); ++s)
      out += "," + detail::format_double(r.distribution(s));
    out += "\n";
  }
  detail::write_file_atomic(path, out);
}

inline void write_curves_csv(const std::vector<CurvePoint>& curve,
                             const std::string& sweep_name, const std::string& path) {
  if (curve.empty()) throw ArgumentError("write_curves_csv: no points");
  std::string out = sweep_name + ",from,to,estimate,lower,upper\n";
  for (const auto& pt : curve) {
    const int n = int(pt.estimate.rows());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out += detail::format_double(pt.value) + "," + std::to_string(i + 1) + "," +
               std::to_string(j + 1) + "," + detail::format_double(pt.estimate(i, j)) +
               "," + detail::format_double(pt.lower(i, j)) + "," +
               detail::format_double(pt.upper(i, j)) + "\n";
  }
  detail::write_file_atomic(path, out);
}

/// Model comparison table: one row per state count, AIC/BIC per family.
struct SelectionRow {
  int n_states = 0;
  std::vector<std::string> families;
  std::vector<double> aic;
  std::vector<double> bic;
};

inline void write_selection_csv(const std::vector<SelectionRow>& rows,
                                const std::string& path) {
  if (rows.empty()) throw ArgumentError("write_selection_csv: no rows");
  // A NaN cell marks a model the caller could not fit; spell it the way
  // numeric CSV readers expect.
  const auto cell = [](double v) {
    return std::isnan(v) ? std::string("NaN") : detail::format_double(v);
  };
  std::string out = "states";
  for (const auto& fam : rows.front().families) out += ",aic_" + fam + ",bic_" + fam;
  out += "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n_states);
    for (std::size_t f = 0; f < r.families.size(); ++f)
      out += "," + cell(r.aic[f]) + "," + cell(r.bic[f]);
    out += "\n";
  }
  detail::write_file_atomic(path, out);
}

/// Per-state joint pmf values over a count rectangle, long format.
inline void write_pmf_grid_csv(const ModelSpec& spec, const ModelParams& params,
                               int max1, int max2, const std::string& path) {
  std::string out = "state,shots,touches,probability\n";
  for (int s = 0; s < spec.n_states; ++s)
    for (int a = 0; a <= max1; ++a)
      for (int b = 0; b <= max2; ++b)
        out += std::to_string(s + 1) + "," + std::to_string(a) + "," +
               std::to_string(b) + "," +
               detail::format_double(state_joint_pmf(spec, params, s, a, b)) + "\n";
  detail::write_file_atomic(path, out);
}

/// Simulated matches in the input data schema (plus the generating state as
/// an extra trailing column, which load_dataset ignores).
inline void write_simulated_csv(const std::vector<SimulatedMatch>& sims,
                                double home, double opp_market_value,
                                const std::string& path) {
  std::string out =
      "match_id,minute,shots,touches,score_diff,home,opp_market_value,state\n";
  for (const auto& sm : sims) {
    for (int t = 0; t < sm.series.length(); ++t) {
      out += sm.series.match_id + "," + std::to_string(sm.series.minutes[t]) + "," +
             std::to_string(sm.series.y(t, 0)) + "," +
             std::to_string(sm.series.y(t, 1)) + "," +
             std::to_string(sm.score_diff[t]) + "," +
             std::to_string(int(home)) + "," +
             detail::format_double(opp_market_value) + "," +
             std::to_string(sm.states[t]) + "\n";
    }
  }
  detail::write_file_atomic(path, out);
}

}  // namespace cophmm
