// Command-line driver: ingest a long-format panel, then fit, test, select,
// simulate, compute critical values or dump scores.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "panelmix/asymdist.hpp"
#include "panelmix/dgp.hpp"
#include "panelmix/em.hpp"
#include "panelmix/errors.hpp"
#include "panelmix/experiment.hpp"
#include "panelmix/io.hpp"
#include "panelmix/penalty.hpp"
#include "panelmix/scores.hpp"
#include "panelmix/sht.hpp"
#include "panelmix/testing.hpp"

using namespace panelmix;
using nlohmann::json;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitNumeric = 4;

struct Options {
  // data
  std::string input;
  std::string unit_col = "unit", period_col = "period", y_col = "y";
  std::vector<std::string> x_cols, z_cols;
  std::string delimiter = ",";
  // model / test
  int M = 2;
  int m0 = 1;
  int mbar = 7;
  std::string method = "em";
  double level = 0.05;
  bool shrinking = false;
  int bootstrap = 0;
  int draws = 2000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::optional<double> an;
  std::optional<double> epsilon;
  int starts = 10;
  int max_iter = 2000;
  bool weights = false;
  // output
  std::string format = "json";
  std::string output;
  // simulate
  std::string config;
  std::vector<double> alpha, mu, sigma, beta, gamma;
  int n = 0, T = 0;
  // crit
  bool an_table = false;
  std::string samples_out;
};

PanelDataset load(const Options& o) {
  if (o.input.empty()) throw InputError("--input is required");
  if (o.delimiter.size() != 1) throw InputError("--delimiter must be a single character");
  IngestSpec spec;
  spec.unit_col = o.unit_col;
  spec.period_col = o.period_col;
  spec.y_col = o.y_col;
  spec.x_cols = o.x_cols;
  spec.z_cols = o.z_cols;
  spec.delimiter = o.delimiter[0];
  return ingest(o.input, spec);
}

EMConfig em_config(const Options& o) {
  EMConfig c;
  c.seed = o.seed;
  c.threads = o.threads;
  c.n_starts = o.starts;
  c.max_iter = o.max_iter;
  if (o.epsilon) c.epsilon_alpha = *o.epsilon;
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  return c;
}

PenaltyConfig test_penalty(const Options& o) {
  PenaltyConfig p;
  if (o.an) {
    if (*o.an < 0) throw InputError("--an must be non-negative");
    p.a_n = *o.an;
    p.an_mode = AnMode::user_fixed;
  } else {
    p.an_mode = AnMode::formula;
  }
  return p;
}

TestMethod test_method(const std::string& m) {
  if (m == "em") return TestMethod::em_test;
  if (m == "plrt") return TestMethod::plrt;
  throw InputError("--method must be em or plrt");
}

json echo(const Options& o, const std::string& cmd) {
  json j{{"command", cmd}, {"seed", o.seed}, {"threads", o.threads}};
  if (!o.input.empty()) {
    j["input"] = o.input;
    j["columns"] = {{"unit", o.unit_col}, {"period", o.period_col}, {"y", o.y_col}, {"x", o.x_cols},
                    {"z", o.z_cols}};
  }
  return j;
}

void emit(const Options& o, const std::string& text) {
  if (o.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(o.output);
  if (!f) throw InputError("cannot write '" + o.output + "'");
  f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

std::string params_table(const MixtureParams& p) {
  std::ostringstream os;
  os << std::left << std::setw(6) << "j" << std::setw(12) << "alpha" << std::setw(12) << "mu" << std::setw(12)
     << "sigma" << "beta\n";
  for (int j = 0; j < p.M(); ++j) {
    const auto& c = p.components[j];
    os << std::setw(6) << j + 1 << std::setw(12) << fmt(p.alpha(j)) << std::setw(12) << fmt(c.mu) << std::setw(12)
       << fmt(std::sqrt(c.sigma_sq));
    for (int k = 0; k < c.beta.size(); ++k) os << fmt(c.beta(k)) << " ";
    os << "\n";
  }
  if (p.p() > 0) {
    os << "gamma:";
    for (int k = 0; k < p.p(); ++k) os << " " << fmt(p.gamma(k));
    os << "\n";
  }
  return os.str();
}

std::string params_csv(const MixtureParams& p) {
  std::ostringstream os;
  os << std::setprecision(17) << "component,alpha,mu,sigma_sq";
  for (int k = 0; k < p.q(); ++k) os << ",beta" << k + 1;
  for (int k = 0; k < p.p(); ++k) os << ",gamma" << k + 1;
  os << "\n";
  for (int j = 0; j < p.M(); ++j) {
    const auto& c = p.components[j];
    os << j + 1 << "," << p.alpha(j) << "," << c.mu << "," << c.sigma_sq;
    for (int k = 0; k < c.beta.size(); ++k) os << "," << c.beta(k);
    for (int k = 0; k < p.p(); ++k) os << "," << p.gamma(k);
    os << "\n";
  }
  return os.str();
}

int cmd_fit(const Options& o) {
  const PanelDataset data = load(o);
  const EMConfig cfg = em_config(o);
  PenaltyConfig pen = plain_penalty(data);
  if (o.an) {
    if (*o.an < 0) throw InputError("--an must be non-negative");
    pen.a_n = *o.an;
    pen.an_mode = AnMode::user_fixed;
  }
  if (o.M < 1) throw InputError("--m must be at least 1");
  const FitResult f = fit_pmle(data, o.M, pen, cfg);
  if (o.format == "table") {
    std::ostringstream os;
    os << "M = " << o.M << "  n = " << data.n() << "  T = " << data.T() << "\n"
       << "loglik = " << fmt(f.loglik) << "  penalized = " << fmt(f.penalized_loglik)
       << "  iterations = " << f.iterations << (f.converged ? "" : "  (not converged)") << "\n"
       << "a_n = " << pen.a_n << " (" << (o.an ? "user" : "1/n") << ")\n"
       << params_table(f.params);
    emit(o, os.str());
  } else if (o.format == "csv") {
    emit(o, params_csv(f.params));
  } else {
    json j = to_json(f, o.weights);
    j["inputs"] = echo(o, "fit");
    j["inputs"]["M"] = o.M;
    j["a_n"] = {{"value", pen.a_n}, {"source", o.an ? "user_fixed" : "plain_1_over_n"}};
    j["sigma0_sq"] = pen.anchor(0);
    emit(o, dump(j));
  }
  return f.converged ? 0 : kExitConvergence;
}

std::string test_table(const TestOutcome& t) {
  std::ostringstream os;
  os << to_string(t.method) << "  H0: M = " << t.M0 << " vs " << t.M0 + 1 << "\n"
     << "statistic = " << fmt(t.statistic) << stars(t) << "  p = " << fmt(t.p_value) << " ("
     << to_string(t.p_source) << ")\n";
  for (const auto& [lvl, cv] : t.crit) os << "critical value at " << lvl * 100 << "%: " << fmt(cv) << "\n";
  os << "a_n = " << t.diagnostics.a_n << " (" << t.diagnostics.an_source << ")\n";
  os << "null fit:\n" << params_table(t.null_fit.params);
  for (const auto& d : t.diagnostics.dropped_cells) os << "dropped cell: " << d << "\n";
  return os.str();
}

int cmd_test(const Options& o) {
  const PanelDataset data = load(o);
  const EMConfig cfg = em_config(o);
  TestOptions topts;
  topts.n_draws = o.draws;
  const TestMethod m = test_method(o.method);
  const TestOutcome t = o.bootstrap > 0 ? bootstrap_test(data, o.m0, test_penalty(o), cfg, o.bootstrap, m, topts)
                                        : run_test(m, data, o.m0, test_penalty(o), cfg, topts);
  if (o.format == "table") {
    emit(o, test_table(t));
  } else if (o.format == "csv") {
    std::ostringstream os;
    os << std::setprecision(17) << "method,M0,statistic,p_value,p_source,cv10,cv05,cv01,stars,a_n,a_n_source\n"
       << to_string(t.method) << "," << t.M0 << "," << t.statistic << "," << t.p_value << ","
       << to_string(t.p_source);
    for (double lvl : {0.10, 0.05, 0.01}) {
      auto it = t.crit.find(lvl);
      os << ",";
      if (it != t.crit.end()) os << it->second;
    }
    os << "," << stars(t) << "," << t.diagnostics.a_n << "," << t.diagnostics.an_source << "\n";
    emit(o, os.str());
  } else {
    json j = to_json(t);
    j["inputs"] = echo(o, "test");
    j["inputs"]["M0"] = o.m0;
    j["inputs"]["method"] = o.method;
    j["inputs"]["draws"] = o.draws;
    j["inputs"]["bootstrap"] = o.bootstrap;
    emit(o, dump(j));
  }
  return 0;
}

int cmd_select(const Options& o) {
  const PanelDataset data = load(o);
  const EMConfig cfg = em_config(o);
  if (o.mbar < 1) throw InputError("--mbar must be at least 1");
  std::vector<SelectionResult> results;
  std::vector<FitResult> fits;
  const bool want_ic = o.method == "aic" || o.method == "bic" || o.method == "all";
  if (want_ic) {
    auto [a, b] = information_criteria(data, o.mbar, plain_penalty(data), cfg, &fits);
    if (o.method != "bic") results.push_back(a);
    if (o.method != "aic") results.push_back(b);
  }
  if (o.method == "em" || o.method == "plrt" || o.method == "all") {
    LevelSchedule lvl;
    lvl.fixed = o.level;
    lvl.shrinking = o.shrinking;
    TestOptions topts;
    topts.n_draws = o.draws;
    const TestMethod m = o.method == "plrt" ? TestMethod::plrt : TestMethod::em_test;
    results.push_back(select_sht(data, o.mbar, lvl, m, test_penalty(o), cfg, topts, fits.empty() ? nullptr : &fits));
  }
  if (results.empty()) throw InputError("--method must be em, plrt, aic, bic or all");

  if (o.format == "table") {
    std::ostringstream os;
    for (const auto& r : results) {
      os << to_string(r.method) << ": M_hat = " << r.M_hat << (r.censored ? " (censored)" : "") << "\n";
      for (const auto& s : r.per_M)
        os << "  M=" << s.M << "  value=" << fmt(s.statistic) << "  threshold=" << fmt(s.threshold) << "  "
           << s.decision << "\n";
    }
    emit(o, os.str());
  } else if (o.format == "csv") {
    std::ostringstream os;
    os << std::setprecision(17) << "method,M,statistic,threshold,p_value,decision,M_hat\n";
    for (const auto& r : results)
      for (const auto& s : r.per_M)
        os << to_string(r.method) << "," << s.M << "," << s.statistic << "," << s.threshold << "," << s.p_value << ","
           << s.decision << "," << r.M_hat << "\n";
    emit(o, os.str());
  } else {
    json j{{"schema_version", kSchemaVersion}, {"inputs", echo(o, "select")}};
    j["inputs"]["Mbar"] = o.mbar;
    j["inputs"]["method"] = o.method;
    j["inputs"]["level"] = o.level;
    j["inputs"]["shrinking"] = o.shrinking;
    j["results"] = json::array();
    for (const auto& r : results) j["results"].push_back(to_json(r));
    emit(o, dump(j));
  }
  return 0;
}

MixtureParams params_from_flags(const Options& o) {
  const std::size_t M = o.alpha.size();
  if (M == 0 || o.mu.size() != M || o.sigma.size() != M)
    throw InputError("--alpha, --mu and --sigma need the same positive length");
  MixtureParams p;
  p.alpha = Eigen::Map<const Eigen::VectorXd>(o.alpha.data(), M);
  // Published proportions are rounded; accept and renormalize small drift.
  if (std::abs(p.alpha.sum() - 1.0) <= 1e-6) p.alpha /= p.alpha.sum();
  const std::size_t q = o.beta.size() / M;
  if (o.beta.size() % M != 0) throw InputError("--beta needs q values per component");
  for (std::size_t j = 0; j < M; ++j) {
    ComponentParams c;
    c.mu = o.mu[j];
    c.sigma_sq = o.sigma[j] * o.sigma[j];
    c.beta = Eigen::Map<const Eigen::VectorXd>(o.beta.data() + j * q, q);
    p.components.push_back(c);
  }
  p.gamma = Eigen::Map<const Eigen::VectorXd>(o.gamma.data(), o.gamma.size());
  try {
    validate(p);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  return p;
}

int cmd_simulate(const Options& o) {
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw InputError("cannot open '" + o.config + "'");
    json cfg;
    try {
      cfg = json::parse(in);
    } catch (const json::exception& e) {
      throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!cfg.contains("seed")) cfg["seed"] = o.seed;
    if (!cfg.contains("threads")) cfg["threads"] = o.threads;
    const ExperimentDesign design = parse_design(cfg);
    const auto summaries = run_experiment(design, [](int c, int r) {
      std::fprintf(stderr, "\rcell %d rep %d", c + 1, r + 1);
    });
    std::fprintf(stderr, "\n");
    if (o.format == "csv") {
      std::ostringstream os;
      write_summary_csv(summaries, os);
      emit(o, os.str());
    } else {
      json j = to_json(summaries);
      j["inputs"] = {{"command", "simulate"}, {"config", cfg}};
      emit(o, dump(j));
    }
    return 0;
  }
  if (o.n < 1 || o.T < 1) throw InputError("--n and --T must be positive");
  DGPSpec spec;
  spec.params = params_from_flags(o);
  spec.n = o.n;
  spec.T = o.T;
  spec.seed = o.seed;
  const PanelDataset data = generate(spec);
  std::ostringstream os;
  write_panel_csv(data, os, o.delimiter.empty() ? ',' : o.delimiter[0]);
  emit(o, os.str());
  return 0;
}

int cmd_crit(const Options& o) {
  if (o.an_table) {
    std::ostringstream os;
    const auto& tab = an_coefficient_table();
    const auto& cov = an_covariate_constants();
    if (o.format == "json") {
      json rows = json::array();
      for (std::size_t k = 0; k < tab.size(); ++k)
        rows.push_back({{"M0", k + 1},
                        {"constant", tab[k].constant},
                        {"inv_T", tab[k].inv_T},
                        {"inv_n", tab[k].inv_n},
                        {"logit_an", tab[k].logit_an},
                        {"logit_omega", tab[k].logit_omega}});
      json j{{"schema_version", kSchemaVersion}, {"formula", rows}, {"covariate_constants", cov}};
      if (o.n > 0 && o.T > 0) {
        json v = json::array();
        for (int M0 = 1; M0 <= 5; ++M0)
          v.push_back({{"M0", M0}, {"a_n_no_covariates_omega_0.1", compute_an(M0, o.n, o.T, 0.1, false)},
                       {"a_n_covariates", compute_an(M0, o.n, o.T, 0.1, true)}});
        j["evaluated"] = {{"n", o.n}, {"T", o.T}, {"values", v}};
      }
      emit(o, dump(j));
    } else {
      os << "M0,constant,inv_T,inv_n,logit_an,logit_omega,covariate_constant\n";
      for (std::size_t k = 0; k < tab.size(); ++k)
        os << k + 1 << "," << tab[k].constant << "," << tab[k].inv_T << "," << tab[k].inv_n << ","
           << tab[k].logit_an << "," << tab[k].logit_omega << "," << cov[k] << "\n";
      os << ">=5,,,,,," << cov.back() << "\n";
      emit(o, os.str());
    }
    return 0;
  }
  const PanelDataset data = load(o);
  const EMConfig cfg = em_config(o);
  const FitResult null = fit_null(data, o.m0, cfg);
  const InformationBlocks info = information(scores_at(data, null.params));
  NullDistribution dist = simulate_null(info, o.m0, o.draws, o.seed, o.threads);
  attach_levels(dist);
  if (!o.samples_out.empty()) {
    std::ofstream f(o.samples_out);
    if (!f) throw InputError("cannot write '" + o.samples_out + "'");
    write_samples_csv(dist, f);
  }
  if (o.format == "table") {
    std::ostringstream os;
    os << "simulated null, M0 = " << o.m0 << ", draws = " << o.draws << ", seed = " << o.seed << "\n";
    for (const auto& [lvl, cv] : dist.levels) os << lvl * 100 << "%: " << fmt(cv) << "\n";
    emit(o, os.str());
  } else if (o.format == "csv") {
    std::ostringstream os;
    os << std::setprecision(17) << "level,critical_value\n";
    for (const auto& [lvl, cv] : dist.levels) os << lvl << "," << cv << "\n";
    emit(o, os.str());
  } else {
    json j{{"schema_version", kSchemaVersion}, {"inputs", echo(o, "crit")}};
    j["inputs"]["M0"] = o.m0;
    j["inputs"]["draws"] = o.draws;
    json cv = json::object();
    for (const auto& [lvl, v] : dist.levels) {
      std::ostringstream k;
      k << lvl;
      cv[k.str()] = v;
    }
    j["critical_values"] = cv;
    j["complementarity_failures"] = dist.complementarity_failures;
    j["clipped_eigenvalues"] = dist.clipped_eigenvalues;
    j["null_fit"] = to_json(null);
    emit(o, dump(j));
  }
  return 0;
}

int cmd_dump_scores(const Options& o) {
  const PanelDataset data = load(o);
  const EMConfig cfg = em_config(o);
  const FitResult null = fit_null(data, o.m0, cfg);
  const ScoreBundle s = scores_at(data, null.params);
  if (o.format == "csv") {
    std::ostringstream os;
    os << std::setprecision(17) << "unit";
    for (int k = 0; k < s.d_eta; ++k) os << ",eta" << k + 1;
    for (int k = 0; k < s.s_lambda.cols(); ++k) os << ",lambda" << k + 1;
    os << "\n";
    for (int i = 0; i < s.n(); ++i) {
      os << (i < static_cast<int>(data.unit_ids.size()) ? data.unit_ids[i] : std::to_string(i + 1));
      for (int k = 0; k < s.s_eta.cols(); ++k) os << "," << s.s_eta(i, k);
      for (int k = 0; k < s.s_lambda.cols(); ++k) os << "," << s.s_lambda(i, k);
      os << "\n";
    }
    emit(o, os.str());
    return 0;
  }
  const InformationBlocks info = information(s);
  json j{{"schema_version", kSchemaVersion}, {"inputs", echo(o, "dump-scores")}};
  j["inputs"]["M0"] = o.m0;
  j["null_fit"] = to_json(null);
  j["d_eta"] = s.d_eta;
  j["d_lambda"] = s.d_lam;
  j["s_eta"] = to_json(s.s_eta);
  j["s_lambda"] = to_json(s.s_lambda);
  j["I_full"] = to_json(info.I_full);
  j["I_schur"] = to_json(info.I_schur);
  emit(o, dump(j));
  return 0;
}

void add_data_options(CLI::App* sub, Options& o) {
  sub->add_option("-i,--input", o.input, "long-format delimited file")->required();
  sub->add_option("--unit", o.unit_col, "unit id column");
  sub->add_option("--period", o.period_col, "period column");
  sub->add_option("--y", o.y_col, "outcome column");
  sub->add_option("--x", o.x_cols, "component-specific regressor columns");
  sub->add_option("--z", o.z_cols, "common regressor columns");
  sub->add_option("--delimiter", o.delimiter, "field delimiter");
}

void add_em_options(CLI::App* sub, Options& o) {
  sub->add_option("--starts", o.starts, "EM starting values")->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", o.max_iter, "EM iteration cap")->check(CLI::PositiveNumber);
  sub->add_option("--epsilon", o.epsilon, "mixing-proportion floor of the EM test");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite mixture panel regressions: penalized EM, tests for the number of components, selection"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  Options o;
  app.add_option("--seed", o.seed, "seed of every random draw");
  app.add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", o.format, "output format")->check(CLI::IsMember({"json", "table", "csv"}));
  app.add_option("-o,--output", o.output, "output file (default stdout)");

  auto* fit = app.add_subcommand("fit", "penalized MLE with M components");
  add_data_options(fit, o);
  add_em_options(fit, o);
  fit->add_option("-m,--m", o.M, "number of components");
  fit->add_option("--an", o.an, "penalty strength (default 1/n)");
  fit->add_flag("--weights", o.weights, "include posterior weights in the JSON report");

  auto* test = app.add_subcommand("test", "test H0: M = M0 against M0 + 1");
  add_data_options(test, o);
  add_em_options(test, o);
  test->add_option("--m0", o.m0, "null number of components")->check(CLI::PositiveNumber);
  test->add_option("--method", o.method, "em or plrt")->check(CLI::IsMember({"em", "plrt"}));
  test->add_option("--bootstrap", o.bootstrap, "bootstrap replications (0 = asymptotic)");
  test->add_option("--draws", o.draws, "draws from the asymptotic null")->check(CLI::PositiveNumber);
  test->add_option("--an", o.an, "penalty strength override");

  auto* select = app.add_subcommand("select", "estimate the number of components");
  add_data_options(select, o);
  add_em_options(select, o);
  select->add_option("--mbar", o.mbar, "largest number of components")->check(CLI::PositiveNumber);
  select->add_option("--method", o.method, "em, plrt, aic, bic or all")
      ->check(CLI::IsMember({"em", "plrt", "aic", "bic", "all"}));
  select->add_option("--level", o.level, "significance level of each test");
  select->add_flag("--shrinking", o.shrinking, "use the level min(0.05, 0.25 / log n)");
  select->add_option("--draws", o.draws, "draws from the asymptotic null")->check(CLI::PositiveNumber);
  select->add_option("--an", o.an, "penalty strength override");

  auto* sim = app.add_subcommand("simulate", "simulate a panel, or run an experiment design");
  sim->add_option("--config", o.config, "JSON experiment design");
  sim->add_option("--alpha", o.alpha, "mixing proportions");
  sim->add_option("--mu", o.mu, "component intercepts");
  sim->add_option("--sigma", o.sigma, "component standard deviations");
  sim->add_option("--beta", o.beta, "component slopes, q per component");
  sim->add_option("--gamma", o.gamma, "common slopes");
  sim->add_option("--n", o.n, "units");
  sim->add_option("--T", o.T, "periods");
  sim->add_option("--delimiter", o.delimiter, "field delimiter");

  auto* crit = app.add_subcommand("crit", "simulated critical values, or the a_n table");
  crit->add_option("-i,--input", o.input, "long-format delimited file");
  crit->add_option("--unit", o.unit_col, "unit id column");
  crit->add_option("--period", o.period_col, "period column");
  crit->add_option("--y", o.y_col, "outcome column");
  crit->add_option("--x", o.x_cols, "component-specific regressor columns");
  crit->add_option("--z", o.z_cols, "common regressor columns");
  crit->add_option("--delimiter", o.delimiter, "field delimiter");
  add_em_options(crit, o);
  crit->add_option("--m0", o.m0, "null number of components")->check(CLI::PositiveNumber);
  crit->add_option("--draws", o.draws, "draws")->check(CLI::PositiveNumber);
  crit->add_option("--samples-out", o.samples_out, "write the simulated sample as CSV");
  crit->add_flag("--an-table", o.an_table, "print the a_n coefficient table");
  crit->add_option("--n", o.n, "evaluate a_n at this n (with --an-table)");
  crit->add_option("--T", o.T, "evaluate a_n at this T (with --an-table)");

  auto* scores = app.add_subcommand("dump-scores", "per-unit scores and information at the null fit");
  add_data_options(scores, o);
  add_em_options(scores, o);
  scores->add_option("--m0", o.m0, "null number of components")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (*fit) return cmd_fit(o);
    if (*test) return cmd_test(o);
    if (*select) return cmd_select(o);
    if (*sim) return cmd_simulate(o);
    if (*crit) return cmd_crit(o);
    if (*scores) return cmd_dump_scores(o);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ContractViolation& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitInput;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
