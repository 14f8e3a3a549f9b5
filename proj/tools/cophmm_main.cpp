// Command line front end: fit / select / decode / profile / curves / simulate.
//
// Exit codes: 0 success, 2 argument/configuration/data-format errors,
// 3 numerical failures (non-convergence, underflow, singular systems).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cophmm/decode.hpp"
#include "cophmm/estimation.hpp"
#include "cophmm/io.hpp"
#include "cophmm/likelihood.hpp"
#include "cophmm/model.hpp"
#include "cophmm/simulate.hpp"

namespace {

using namespace cophmm;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_value_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s))
    out.push_back(detail::parse_double(item, "value", 0));
  return out;
}

// Catch an unwritable output location before the expensive work starts, not
// after it.
void require_out_dir(const std::string& path) {
  const std::filesystem::path dir = std::filesystem::path(path).parent_path();
  if (dir.empty()) return;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw ArgumentError("output directory '" + dir.string() + "' does not exist");
}

std::map<std::string, double> parse_fixes(const std::vector<std::string>& fixes) {
  std::map<std::string, double> out;
  for (const auto& f : fixes) {
    const auto eq = f.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ArgumentError("--fix expects name=value, got '" + f + "'");
    out[f.substr(0, eq)] = detail::parse_double(f.substr(eq + 1), "fix value", 0);
  }
  return out;
}

std::vector<double> parse_grid(const std::string& s) {
  const auto a = s.find(':');
  const auto b = s.rfind(':');
  if (a == std::string::npos || b == a)
    throw ArgumentError("--grid expects lo:hi:count, got '" + s + "'");
  const double lo = detail::parse_double(s.substr(0, a), "grid lo", 0);
  const double hi = detail::parse_double(s.substr(a + 1, b - a - 1), "grid hi", 0);
  const long count = detail::parse_long(s.substr(b + 1), "grid count", 0);
  if (count < 1) throw ArgumentError("--grid count must be >= 1");
  std::vector<double> g;
  for (long i = 0; i < count; ++i)
    g.push_back(count == 1 ? lo : lo + (hi - lo) * double(i) / double(count - 1));
  return g;
}

// ---------------------------------------------------------------------------
// Run configuration for fitting: defaults < config file < command line flags.
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string data;
  std::string out;
  int states = 2;
  std::string copula = "independence";
  std::vector<std::string> covariates;
  int starts = 50;
  std::optional<std::uint64_t> seed;
  OptimOptions optim;
  StartRanges ranges;
  std::string pmf_grid;
};

void apply_range_pair(const nlohmann::json& j, const char* key, double& lo, double& hi) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2)
    throw ParseError(std::string("config: '") + key + "' must be [lo, hi]");
  lo = v.at(0).get<double>();
  hi = v.at(1).get<double>();
}

void load_run_config(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "data") cfg.data = value.get<std::string>();
      else if (key == "out") cfg.out = value.get<std::string>();
      else if (key == "states") cfg.states = value.get<int>();
      else if (key == "copula") cfg.copula = value.get<std::string>();
      else if (key == "covariates") cfg.covariates = value.get<std::vector<std::string>>();
      else if (key == "starts") cfg.starts = value.get<int>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "pmf_grid") cfg.pmf_grid = value.get<std::string>();
      else if (key == "optim") {
        const auto& o = value;
        if (o.contains("max_iter")) cfg.optim.max_iter = o.at("max_iter").get<int>();
        if (o.contains("grad_tol")) cfg.optim.grad_tol = o.at("grad_tol").get<double>();
        if (o.contains("step_tol")) cfg.optim.step_tol = o.at("step_tol").get<double>();
      } else if (key == "start_ranges") {
        const auto& r = value;
        apply_range_pair(r, "lambda_shots", cfg.ranges.lambda_shots_lo, cfg.ranges.lambda_shots_hi);
        apply_range_pair(r, "lambda_touches", cfg.ranges.lambda_touches_lo, cfg.ranges.lambda_touches_hi);
        apply_range_pair(r, "nu", cfg.ranges.nu_lo, cfg.ranges.nu_hi);
        apply_range_pair(r, "theta_frank", cfg.ranges.frank_theta_lo, cfg.ranges.frank_theta_hi);
        apply_range_pair(r, "theta_clayton", cfg.ranges.clayton_theta_lo, cfg.ranges.clayton_theta_hi);
        apply_range_pair(r, "theta_amh", cfg.ranges.amh_theta_lo, cfg.ranges.amh_theta_hi);
        apply_range_pair(r, "delta_logit", cfg.ranges.delta_logit_lo, cfg.ranges.delta_logit_hi);
        apply_range_pair(r, "trans_intercept", cfg.ranges.trans_intercept_lo, cfg.ranges.trans_intercept_hi);
        apply_range_pair(r, "trans_slope", cfg.ranges.trans_slope_lo, cfg.ranges.trans_slope_hi);
      } else {
        throw ParseError("config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config file '" + path + "': " + e.what());
  }
}

void print_fit_summary(const FitResult& f) {
  std::cout << "fitted " << to_string(f.spec.copula_family) << " model, N = "
            << f.spec.n_states << ", covariates:";
  if (f.spec.covariates.empty()) std::cout << " none";
  for (const auto& c : f.spec.covariates) std::cout << " " << c.name;
  std::cout << "\n";
  std::cout << "  loglik " << f.loglik << "  AIC " << f.aic << "  BIC " << f.bic
            << "\n";
  std::cout << "  best start " << (f.best_start_index + 1) << "/" << f.n_starts
            << ", converged " << (f.converged ? "yes" : "no") << "\n";
  for (int s = 0; s < f.spec.n_states; ++s) {
    const auto& m = f.params.marginals[s];
    std::cout << "  state " << (s + 1) << ": shots lambda=" << m[0].lambda
              << " nu=" << m[0].nu << " | touches lambda=" << m[1].lambda
              << " nu=" << m[1].nu;
    if (!f.params.thetas.empty()) std::cout << " | theta=" << f.params.thetas[s];
    std::cout << "\n";
  }
  std::cout << "  delta:";
  for (int s = 0; s < f.params.delta.size(); ++s) std::cout << " " << f.params.delta(s);
  std::cout << "\n";
}

FitResult run_fit(const ModelSpec& spec, const Dataset& data, const RunConfig& cfg) {
  FitSettings settings;
  settings.optim = cfg.optim;
  FitResult best = multi_start_fit(spec, data, cfg.starts, *cfg.seed, cfg.ranges, settings);
  best = order_states_by_touch_mean(best);
  try {
    const CovarianceEstimate cov = covariance_estimate(best, data);
    best.working_cov = cov.working_cov;
    best.cov_pseudo_inverse = cov.used_pseudo_inverse;
    best.hessian_indefinite = cov.indefinite;
  } catch (const Error& e) {
    std::cerr << "warning: covariance estimation failed (" << e.what()
              << "); model saved without one\n";
  }
  return best;
}

int cmd_fit(RunConfig cfg) {
  if (!cfg.seed) throw ArgumentError("a seed is required (--seed or config)");
  if (cfg.data.empty()) throw ArgumentError("--data is required");
  if (cfg.out.empty()) throw ArgumentError("--out is required");
  require_out_dir(cfg.out);
  if (!cfg.pmf_grid.empty()) require_out_dir(cfg.pmf_grid);
  const Dataset data = load_dataset(cfg.data, cfg.covariates);
  ModelSpec spec;
  spec.n_states = cfg.states;
  spec.copula_family = copula_family_from_string(cfg.copula);
  spec.covariates = data.covariates;
  const FitResult best = run_fit(spec, data, cfg);
  print_fit_summary(best);
  save_model(best, cfg.out);
  std::cout << "model written to " << cfg.out << "\n";
  if (!cfg.pmf_grid.empty()) {
    write_pmf_grid_csv(spec, best.params, 3, 28, cfg.pmf_grid);
    std::cout << "joint pmf grid written to " << cfg.pmf_grid << "\n";
  }
  return 0;
}

int cmd_select(const std::string& data_path, const std::string& states_list,
               const std::string& copulas_list, const std::string& covariates_list,
               int starts, std::optional<std::uint64_t> seed, const std::string& out) {
  if (!seed) throw ArgumentError("a seed is required (--seed)");
  require_out_dir(out);
  const std::vector<std::string> families = split_list(copulas_list);
  std::vector<int> state_counts;
  for (const auto& s : split_list(states_list))
    state_counts.push_back(int(detail::parse_long(s, "states", 0)));
  if (families.empty() || state_counts.empty())
    throw ArgumentError("--states and --copulas must be non-empty");
  // Resolve family names up front so a typo fails the run, not one cell.
  std::vector<CopulaFamily> fams;
  for (const auto& fam : families) fams.push_back(copula_family_from_string(fam));
  const std::vector<std::string> covariates = split_list(covariates_list);
  const Dataset data = load_dataset(data_path, covariates);

  std::vector<SelectionRow> rows;
  int n_fitted = 0;
  for (int n : state_counts) {
    SelectionRow row;
    row.n_states = n;
    row.families = families;
    for (std::size_t fi = 0; fi < families.size(); ++fi) {
      RunConfig cfg;
      cfg.states = n;
      cfg.copula = families[fi];
      cfg.starts = starts;
      cfg.seed = seed;
      ModelSpec spec;
      spec.n_states = n;
      spec.copula_family = fams[fi];
      spec.covariates = data.covariates;
      FitSettings settings;
      settings.optim = cfg.optim;
      try {
        const FitResult f =
            multi_start_fit(spec, data, starts, *seed, cfg.ranges, settings);
        row.aic.push_back(f.aic);
        row.bic.push_back(f.bic);
        ++n_fitted;
        std::cout << "N=" << n << " " << families[fi] << ": loglik " << f.loglik
                  << "  AIC " << f.aic << "  BIC " << f.bic << "\n";
      } catch (const NumericalError& e) {
        // One infeasible cell should not cost the rest of the grid; its
        // entries become NaN in the table.
        row.aic.push_back(std::numeric_limits<double>::quiet_NaN());
        row.bic.push_back(std::numeric_limits<double>::quiet_NaN());
        const std::string what = e.what();
        std::cerr << "warning: N=" << n << " " << families[fi]
                  << " failed: " << what.substr(0, what.find('\n')) << "\n";
      }
    }
    rows.push_back(row);
  }
  if (n_fitted == 0) throw NumericalError("no model in the grid could be fitted");
  write_selection_csv(rows, out);
  std::cout << "selection table written to " << out << "\n";
  return 0;
}

int cmd_decode(const std::string& model_path, const std::string& data_path,
               const std::string& match_id, const std::string& out) {
  require_out_dir(out);
  const FitResult model = load_model(model_path);
  std::vector<std::string> names;
  for (const auto& c : model.spec.covariates) names.push_back(c.name);
  const Dataset data = load_dataset(data_path, names, &model.spec.covariates);

  std::vector<MatchSeries> selected;
  for (const auto& m : data.matches)
    if (match_id.empty() || m.match_id == match_id) selected.push_back(m);
  if (selected.empty())
    throw ArgumentError(match_id.empty() ? "no matches in the data"
                                         : "match '" + match_id + "' not found");
  std::vector<DecodedSequence> decoded;
  for (const auto& m : selected) {
    decoded.push_back(viterbi(model.spec, model.params, m));
    std::cout << "match " << m.match_id << ": T=" << m.length()
              << ", log joint = " << decoded.back().log_joint << "\n";
  }
  write_decoded_csv(selected, decoded, out);
  std::cout << "decoded sequences written to " << out << "\n";
  return 0;
}

std::map<std::string, double> default_raw_values(const ModelSpec& spec,
                                                 const std::string& sweep,
                                                 const std::map<std::string, double>& fixes) {
  bool sweep_known = false;
  for (const auto& c : spec.covariates) sweep_known |= (c.name == sweep);
  if (!sweep_known)
    throw ArgumentError("sweep covariate '" + sweep + "' is not part of the model");
  std::map<std::string, double> raw;
  for (const auto& c : spec.covariates)
    if (c.name != sweep) raw[c.name] = c.mean;  // center unless fixed
  for (const auto& [name, value] : fixes) {
    if (name == sweep) throw ArgumentError("cannot fix the sweep covariate");
    bool known = false;
    for (const auto& c : spec.covariates) known |= (c.name == name);
    if (!known) throw ArgumentError("fixed covariate '" + name + "' is not part of the model");
    raw[name] = value;
  }
  return raw;
}

int cmd_profile(const std::string& model_path, const std::string& sweep,
                const std::string& values_list, const std::vector<std::string>& fixes,
                const std::string& out) {
  require_out_dir(out);
  const FitResult model = load_model(model_path);
  const std::vector<double> values = parse_value_list(values_list);
  if (values.empty()) throw ArgumentError("--values must be non-empty");
  const auto raw = default_raw_values(model.spec, sweep, parse_fixes(fixes));
  const auto rows = covariate_profile(model.spec, model.params, sweep, values, raw);
  for (const auto& r : rows) {
    std::cout << sweep << " = " << r.value << ": ";
    for (int s = 0; s < r.distribution.size(); ++s) std::cout << r.distribution(s) << " ";
    std::cout << "\n";
  }
  write_profile_csv(rows, sweep, out);
  std::cout << "profile written to " << out << "\n";
  return 0;
}

int cmd_curves(const std::string& model_path, const std::string& sweep,
               const std::string& grid_expr, const std::vector<std::string>& fixes,
               int draws, std::uint64_t seed, const std::string& out) {
  require_out_dir(out);
  const FitResult model = load_model(model_path);
  const auto raw = default_raw_values(model.spec, sweep, parse_fixes(fixes));
  std::vector<double> grid;
  if (!grid_expr.empty()) {
    grid = parse_grid(grid_expr);
  } else {
    for (const auto& c : model.spec.covariates)
      if (c.name == sweep) {
        const int points = 41;
        for (int i = 0; i < points; ++i)
          grid.push_back(c.mean - 2.0 * c.sd +
                         4.0 * c.sd * double(i) / double(points - 1));
      }
  }
  const auto curve = transition_curve_ci(model, sweep, grid, raw, draws, seed);
  write_curves_csv(curve, sweep, out);
  std::cout << "transition curves (" << curve.size() << " grid points, " << draws
            << " draws) written to " << out << "\n";
  return 0;
}

int cmd_simulate(const std::string& model_path, int matches, int minutes,
                 std::uint64_t seed, const std::vector<std::string>& fixes,
                 double goal_conversion, double opp_goal_rate, const std::string& out) {
  require_out_dir(out);
  const FitResult model = load_model(model_path);
  CovariateGenerator gen;
  gen.goal_conversion = goal_conversion;
  gen.opp_goal_rate = opp_goal_rate;
  // Constants default to the standardization center for model covariates,
  // and to plain reference values for the output columns.
  double home = 1.0, market = 100.0;
  for (const auto& c : model.spec.covariates) {
    if (c.name == "home") home = c.mean;
    if (c.name == "opp_market_value") market = c.mean;
  }
  for (const auto& [name, value] : parse_fixes(fixes)) {
    if (name == "home") home = value;
    else if (name == "opp_market_value") market = value;
    else gen.constants[name] = value;
  }
  gen.constants["home"] = home;
  gen.constants["opp_market_value"] = market;

  const auto sims =
      simulate_dataset(model.spec, model.params, matches, minutes, gen, seed);
  write_simulated_csv(sims, home, market, out);
  std::cout << matches << " matches x " << minutes << " minutes written to " << out
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Copula-linked hidden Markov models for bivariate in-match count series"};
  app.require_subcommand(1);

  // fit ----------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model by multi-start maximum likelihood");
  std::string fit_data, fit_out, fit_copula, fit_covariates, fit_config, fit_pmf_grid;
  int fit_states = 0, fit_starts = 0, fit_max_iter = 0;
  std::uint64_t fit_seed = 0;
  fit_cmd->add_option("--data", fit_data, "input CSV");
  fit_cmd->add_option("--out", fit_out, "output model file (JSON)");
  fit_cmd->add_option("--states", fit_states, "number of hidden states");
  fit_cmd->add_option("--copula", fit_copula, "independence, frank, clayton or amh");
  fit_cmd->add_option("--covariates", fit_covariates,
                      "comma list of transition covariates");
  fit_cmd->add_option("--starts", fit_starts, "number of random starts");
  auto* fit_seed_opt = fit_cmd->add_option("--seed", fit_seed, "random seed (required)");
  fit_cmd->add_option("--max-iter", fit_max_iter, "optimizer iteration cap");
  fit_cmd->add_option("--config", fit_config, "JSON run configuration");
  fit_cmd->add_option("--pmf-grid", fit_pmf_grid, "write per-state joint pmf grid CSV");

  // select -------------------------------------------------------------
  auto* sel_cmd = app.add_subcommand("select", "Fit a grid of models and tabulate AIC/BIC");
  std::string sel_data, sel_states = "2,3,4,5", sel_copulas = "frank,clayton,amh";
  std::string sel_covariates, sel_out;
  int sel_starts = 50;
  std::uint64_t sel_seed = 0;
  sel_cmd->add_option("--data", sel_data, "input CSV")->required();
  sel_cmd->add_option("--states", sel_states, "comma list of state counts");
  sel_cmd->add_option("--copulas", sel_copulas, "comma list of copula families");
  sel_cmd->add_option("--covariates", sel_covariates, "comma list of transition covariates");
  sel_cmd->add_option("--starts", sel_starts, "number of random starts per model");
  auto* sel_seed_opt = sel_cmd->add_option("--seed", sel_seed, "random seed (required)");
  sel_cmd->add_option("--out", sel_out, "output CSV table")->required();

  // decode ---------------------------------------------------------------
  auto* dec_cmd = app.add_subcommand("decode", "Viterbi-decode state sequences");
  std::string dec_model, dec_data, dec_match, dec_out;
  dec_cmd->add_option("--model", dec_model, "fitted model file")->required();
  dec_cmd->add_option("--data", dec_data, "input CSV")->required();
  dec_cmd->add_option("--match-id", dec_match, "restrict to one match");
  dec_cmd->add_option("--out", dec_out, "output CSV")->required();

  // profile --------------------------------------------------------------
  auto* prof_cmd = app.add_subcommand(
      "profile", "Stationary state distribution along a covariate sweep");
  std::string prof_model, prof_sweep, prof_values, prof_out;
  std::vector<std::string> prof_fixes;
  prof_cmd->add_option("--model", prof_model, "fitted model file")->required();
  prof_cmd->add_option("--sweep", prof_sweep, "covariate to sweep")->required();
  prof_cmd->add_option("--values", prof_values, "comma list of raw sweep values")->required();
  prof_cmd->add_option("--fix", prof_fixes, "name=value for the other covariates");
  prof_cmd->add_option("--out", prof_out, "output CSV")->required();

  // curves -----------------------------------------------------------------
  auto* cur_cmd = app.add_subcommand(
      "curves", "Transition probabilities with 95% bands along a covariate sweep");
  std::string cur_model, cur_sweep, cur_grid, cur_out;
  std::vector<std::string> cur_fixes;
  int cur_draws = 1000;
  std::uint64_t cur_seed = 1;
  cur_cmd->add_option("--model", cur_model, "fitted model file")->required();
  cur_cmd->add_option("--sweep", cur_sweep, "covariate to sweep")->required();
  cur_cmd->add_option("--grid", cur_grid, "lo:hi:count raw sweep grid "
                      "(default: mean +/- 2 sd, 41 points)");
  cur_cmd->add_option("--fix", cur_fixes, "name=value for the other covariates");
  cur_cmd->add_option("--draws", cur_draws, "number of parameter draws");
  cur_cmd->add_option("--seed", cur_seed, "seed for the parameter draws");
  cur_cmd->add_option("--out", cur_out, "output CSV")->required();

  // simulate -----------------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate matches from a fitted model");
  std::string sim_model, sim_out;
  std::vector<std::string> sim_fixes;
  int sim_matches = 34, sim_minutes = 95;
  std::uint64_t sim_seed = 0;
  double sim_conv = 0.10, sim_opp = 0.025;
  sim_cmd->add_option("--model", sim_model, "fitted model file")->required();
  sim_cmd->add_option("--matches", sim_matches, "number of matches");
  sim_cmd->add_option("--minutes", sim_minutes, "minutes per match");
  sim_cmd->add_option("--seed", sim_seed, "random seed")->required();
  sim_cmd->add_option("--fix", sim_fixes, "name=value covariate constants");
  sim_cmd->add_option("--goal-conversion", sim_conv, "per-shot scoring probability");
  sim_cmd->add_option("--opp-goal-rate", sim_opp, "opponent goals per minute");
  sim_cmd->add_option("--out", sim_out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fit_cmd) {
      RunConfig cfg;
      if (!fit_config.empty()) load_run_config(fit_config, cfg);
      if (!fit_data.empty()) cfg.data = fit_data;
      if (!fit_out.empty()) cfg.out = fit_out;
      if (fit_cmd->count("--states")) cfg.states = fit_states;
      if (!fit_copula.empty()) cfg.copula = fit_copula;
      if (fit_cmd->count("--covariates")) cfg.covariates = split_list(fit_covariates);
      if (fit_cmd->count("--starts")) cfg.starts = fit_starts;
      if (fit_seed_opt->count()) cfg.seed = fit_seed;
      if (fit_cmd->count("--max-iter")) cfg.optim.max_iter = fit_max_iter;
      if (!fit_pmf_grid.empty()) cfg.pmf_grid = fit_pmf_grid;
      return cmd_fit(std::move(cfg));
    }
    if (*sel_cmd) {
      std::optional<std::uint64_t> seed;
      if (sel_seed_opt->count()) seed = sel_seed;
      return cmd_select(sel_data, sel_states, sel_copulas, sel_covariates, sel_starts,
                        seed, sel_out);
    }
    if (*dec_cmd) return cmd_decode(dec_model, dec_data, dec_match, dec_out);
    if (*prof_cmd) return cmd_profile(prof_model, prof_sweep, prof_values, prof_fixes, prof_out);
    if (*cur_cmd)
      return cmd_curves(cur_model, cur_sweep, cur_grid, cur_fixes, cur_draws, cur_seed,
                        cur_out);
    if (*sim_cmd)
      return cmd_simulate(sim_model, sim_matches, sim_minutes, sim_seed, sim_fixes,
                          sim_conv, sim_opp, sim_out);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
