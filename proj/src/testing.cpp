#include "panelmix/testing.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

#include "panelmix/dgp.hpp"
#include "panelmix/parallel.hpp"
#include "panelmix/rng.hpp"
#include "panelmix/scores.hpp"

namespace panelmix {

std::string to_string(TestMethod m) { return m == TestMethod::em_test ? "em_test" : "plrt"; }

std::string to_string(PSource s) {
  switch (s) {
    case PSource::asymptotic: return "asymptotic";
    case PSource::bootstrap: return "bootstrap";
    case PSource::none: return "none";
  }
  return "none";
}

bool TestOutcome::rejects(double significance) const {
  if (reference) return statistic >= critical_value(*reference, 1.0 - significance);
  const auto it = crit.find(significance);
  detail::require(it != crit.end(), "no critical value for this significance level");
  return statistic >= it->second;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Stream tags for derived seeds.
constexpr std::uint64_t kTagOmega = 0x6f6d6567ULL;
constexpr std::uint64_t kTagNull = 0x6e756c6cULL;
constexpr std::uint64_t kTagBoot = 0x626f6f74ULL;

struct LocalStats {
  std::vector<double> local;
  FitResult best_alt;
  int best_h = 1;
  int cells_total = 0;
  std::vector<std::string> dropped;
};

std::string cell_name(int h, double tau) {
  std::ostringstream os;
  os << "h=" << h;
  if (tau > 0) os << ",tau0=" << tau;
  return os.str();
}

void finish(LocalStats& ls, std::vector<FitResult>& fits, std::vector<double>& vals, std::vector<int>& hs,
            std::vector<std::string>& errs, const std::vector<std::string>& names, int M0) {
  ls.local.assign(M0, kNegInf);
  int best = -1;
  for (std::size_t c = 0; c < vals.size(); ++c) {
    if (!errs[c].empty()) {
      ls.dropped.push_back(names[c] + ": " + errs[c]);
      continue;
    }
    const int h = hs[c];
    ls.local[h - 1] = std::max(ls.local[h - 1], vals[c]);
    if (best < 0 || vals[c] > vals[best]) best = static_cast<int>(c);
  }
  for (const auto& d : ls.dropped) std::cerr << "warning: dropped cell " << d << "\n";
  if (best < 0) throw ConvergenceError("every alternative cell failed to fit");
  ls.best_alt = std::move(fits[best]);
  ls.best_h = hs[best];
}

LocalStats em_local_stats(const PanelDataset& data, const FitResult& null_fit, double a_n, const EMConfig& cfg) {
  const int M0 = null_fit.params.M();
  const double L0 = null_fit.loglik;
  // The floor never excludes the null itself.
  const double eps = std::min(cfg.epsilon_alpha, null_fit.params.alpha.minCoeff());
  const int nt = static_cast<int>(cfg.tau_set.size());
  const int C = M0 * nt;
  std::vector<FitResult> fits(C);
  std::vector<double> vals(C, kNegInf);
  std::vector<int> hs(C);
  std::vector<std::string> errs(C), names(C);
  EMConfig inner = cfg;
  inner.threads = 1;
  parallel_for(C, cfg.threads, [&](int c) {
    const int h = c / nt + 1;
    const double tau0 = cfg.tau_set[c % nt];
    hs[c] = h;
    names[c] = cell_name(h, tau0);
    try {
      RestrictionSpec spec = build_restriction(null_fit.params, h, eps);
      spec.tau0 = tau0;
      const PenaltyConfig pen = restricted_penalty(spec, a_n);
      const FitResult step1 = fit_restricted(data, M0 + 1, spec, pen, inner);
      auto [fitK, taus] = em_k_steps(data, step1, spec, cfg.K, pen);
      vals[c] = 2.0 * (fitK.penalized_loglik - L0);
      fits[c] = std::move(fitK);
    } catch (const std::exception& e) {
      errs[c] = e.what();
    }
  });
  LocalStats ls;
  ls.cells_total = C;
  finish(ls, fits, vals, hs, errs, names, M0);
  return ls;
}

LocalStats plrt_local_stats(const PanelDataset& data, const FitResult& null_fit, double a_n, double eps,
                            const EMConfig& cfg) {
  const int M0 = null_fit.params.M();
  const double L0 = null_fit.loglik;
  std::vector<FitResult> fits(M0);
  std::vector<double> vals(M0, kNegInf);
  std::vector<int> hs(M0);
  std::vector<std::string> errs(M0), names(M0);
  EMConfig inner = cfg;
  inner.threads = 1;
  parallel_for(M0, cfg.threads, [&](int c) {
    const int h = c + 1;
    hs[c] = h;
    names[c] = cell_name(h, 0.0);
    try {
      RestrictionSpec spec = build_restriction(null_fit.params, h, eps);
      spec.tau_penalty = false;
      const PenaltyConfig pen = restricted_penalty(spec, a_n);
      FitResult fit = fit_restricted(data, M0 + 1, spec, pen, inner);
      vals[c] = 2.0 * (fit.loglik + fit.penalty_value - L0);
      fits[c] = std::move(fit);
    } catch (const std::exception& e) {
      errs[c] = e.what();
    }
  });
  LocalStats ls;
  ls.cells_total = M0;
  finish(ls, fits, vals, hs, errs, names, M0);
  return ls;
}

// Null fit, a_n and local statistics without any reference distribution.
TestOutcome statistic_only(TestMethod method, const PanelDataset& data, int M0, const PenaltyConfig& penalty,
                           const EMConfig& cfg, const TestOptions& opts) {
  cfg.validate();
  detail::require(M0 >= 1, "M0 must be at least 1");
  TestOutcome out;
  out.M0 = M0;
  out.method = method;
  out.null_fit = opts.null_fit ? *opts.null_fit : fit_null(data, M0, cfg, opts.parent);
  detail::require(out.null_fit.params.M() == M0, "supplied null fit has the wrong number of components");
  auto& diag = out.diagnostics;
  diag.null_converged = out.null_fit.converged;
  diag.tau_set = cfg.tau_set;
  diag.K = cfg.K;
  double an = resolve_an(data, M0, out.null_fit.params, penalty, cfg, opts, diag);
  LocalStats ls;
  if (method == TestMethod::em_test) {
    diag.epsilon = std::min(cfg.epsilon_alpha, out.null_fit.params.alpha.minCoeff());
    ls = em_local_stats(data, out.null_fit, an, cfg);
  } else {
    if (penalty.an_mode != AnMode::user_fixed) an *= opts.plrt_an_factor;
    diag.a_n = an;
    diag.epsilon = opts.plrt_epsilon;
    diag.K = 0;
    diag.tau_set.clear();
    ls = plrt_local_stats(data, out.null_fit, an, opts.plrt_epsilon, cfg);
  }
  out.local_stats = ls.local;
  out.statistic = *std::max_element(ls.local.begin(), ls.local.end());
  out.best_alt_fit = std::move(ls.best_alt);
  out.best_h = ls.best_h;
  diag.cells_total = ls.cells_total;
  diag.dropped_cells = std::move(ls.dropped);
  return out;
}

void attach_asymptotic(TestOutcome& out, const PanelDataset& data, const EMConfig& cfg, const TestOptions& opts) {
  const ScoreBundle bundle = scores_at(data, out.null_fit.params);
  const InformationBlocks info = information(bundle);
  auto dist = std::make_shared<NullDistribution>(
      simulate_null(info, out.M0, opts.n_draws, derive_seed(cfg.seed, {kTagNull, static_cast<std::uint64_t>(out.M0)}),
                    cfg.threads));
  out.diagnostics.complementarity_failures = dist->complementarity_failures;
  out.crit = dist->levels;
  out.p_value = p_value(*dist, out.statistic);
  out.p_source = PSource::asymptotic;
  out.reference = std::move(dist);
}

}  // namespace

FitResult fit_null(const PanelDataset& data, int M0, const EMConfig& cfg, const MixtureParams* parent) {
  FitResult fit = fit_pmle(data, M0, plain_penalty(data), cfg, parent);
  if (!fit.converged) {
    std::ostringstream os;
    os << "null fit with " << M0 << " components did not converge in " << cfg.max_iter << " iterations";
    throw ConvergenceError(os.str());
  }
  return fit;
}

double resolve_an(const PanelDataset& data, int M0, const MixtureParams& null_params, const PenaltyConfig& penalty,
                  const EMConfig& cfg, const TestOptions& opts, TestDiagnostics& diag) {
  double an;
  const bool has_cov = data.q() + data.p() > 0;
  if (penalty.an_mode == AnMode::user_fixed) {
    an = penalty.a_n;
    diag.an_source = "user_fixed";
  } else if (has_cov || penalty.an_mode == AnMode::covariate_constants) {
    an = compute_an(M0, data.n(), data.T(), std::numeric_limits<double>::quiet_NaN(), true);
    diag.an_source = "covariate_constants";
  } else {
    double omega = std::numeric_limits<double>::quiet_NaN();
    if (M0 >= 2 && M0 <= 4) {
      omega = misclassification(null_params, data.T(), opts.misclass_draws,
                                derive_seed(cfg.seed, {kTagOmega, static_cast<std::uint64_t>(M0)}));
      diag.omega = omega;
    }
    an = compute_an(M0, data.n(), data.T(), omega, false);
    diag.an_source = "formula";
  }
  if (!(an > 0)) throw DomainError("a_n must be positive");
  diag.a_n = an;
  return an;
}

TestOutcome em_test(const PanelDataset& data, int M0, const PenaltyConfig& penalty, const EMConfig& cfg,
                    const TestOptions& opts) {
  TestOutcome out = statistic_only(TestMethod::em_test, data, M0, penalty, cfg, opts);
  if (opts.simulate) attach_asymptotic(out, data, cfg, opts);
  return out;
}

TestOutcome plrt(const PanelDataset& data, int M0, const PenaltyConfig& penalty, const EMConfig& cfg,
                 const TestOptions& opts) {
  TestOutcome out = statistic_only(TestMethod::plrt, data, M0, penalty, cfg, opts);
  if (opts.simulate) attach_asymptotic(out, data, cfg, opts);
  return out;
}

TestOutcome run_test(TestMethod method, const PanelDataset& data, int M0, const PenaltyConfig& penalty,
                     const EMConfig& cfg, const TestOptions& opts) {
  return method == TestMethod::em_test ? em_test(data, M0, penalty, cfg, opts) : plrt(data, M0, penalty, cfg, opts);
}

TestOutcome bootstrap_test(const PanelDataset& data, int M0, const PenaltyConfig& penalty, const EMConfig& cfg,
                           int B, TestMethod method, const TestOptions& opts) {
  detail::require(B >= 99, "bootstrap needs B >= 99");
  TestOutcome out = statistic_only(method, data, M0, penalty, cfg, opts);

  std::vector<double> stats(B, std::numeric_limits<double>::quiet_NaN());
  EMConfig inner = cfg;
  inner.threads = 1;
  TestOptions bopts = opts;
  bopts.null_fit = nullptr;
  bopts.parent = nullptr;
  bopts.simulate = false;
  parallel_for(B, cfg.threads, [&](int b) {
    const std::uint64_t s = derive_seed(cfg.seed, {kTagBoot, static_cast<std::uint64_t>(b)});
    const PanelDataset sim = generate_conditional(out.null_fit.params, data, s);
    EMConfig c = inner;
    c.seed = s;
    try {
      stats[b] = statistic_only(method, sim, M0, penalty, c, bopts).statistic;
    } catch (const std::exception&) {
    }
  });
  auto dist = std::make_shared<NullDistribution>();
  for (double s : stats)
    if (std::isfinite(s)) dist->samples.push_back(s);
  const int dropped = B - static_cast<int>(dist->samples.size());
  out.diagnostics.bootstrap_dropped = dropped;
  if (dropped > B / 10) {
    std::ostringstream os;
    os << dropped << " of " << B << " bootstrap replications failed to fit";
    throw ConvergenceError(os.str());
  }
  if (dropped > 0) std::cerr << "warning: dropped " << dropped << " bootstrap replication(s)\n";
  std::sort(dist->samples.begin(), dist->samples.end());
  dist->n_draws = static_cast<int>(dist->samples.size());
  dist->M0 = M0;
  dist->seed = cfg.seed;
  attach_levels(*dist);
  out.crit = dist->levels;
  const auto k = std::count_if(dist->samples.begin(), dist->samples.end(), [&](double s) { return s >= out.statistic; });
  out.p_value = (1.0 + static_cast<double>(k)) / (dist->n_draws + 1.0);
  out.p_source = PSource::bootstrap;
  out.reference = std::move(dist);
  return out;
}

UnboundednessReport demonstrate_unboundedness(const PanelDataset& data, double a_n) {
  detail::require(data.T() >= 2, "the within-unit variance needs T >= 2");
  detail::require(data.q() == 0 && data.p() == 0, "the demonstration is defined without covariates");
  const int n = data.n(), T = data.T();
  UnboundednessReport rep;
  rep.a_n = a_n > 0 ? a_n : compute_an(1, n, T, 0.0, false);

  const Eigen::VectorXd ybar = data.y.rowwise().mean();
  const Eigen::VectorXd s2 = (data.y.colwise() - ybar).array().square().rowwise().sum() / (T - 1);
  s2.minCoeff(&rep.i_star);
  rep.s2_star = s2(rep.i_star);

  const double mu0 = data.y.mean();
  const double sig0 = (data.y.array() - mu0).square().mean();
  rep.sigma0_sq = sig0;
  if (!(rep.s2_star > 0)) {
    rep.lr_degenerate = std::numeric_limits<double>::infinity();
    rep.lr_penalized = -std::numeric_limits<double>::infinity();
    return rep;
  }

  MixtureParams two;
  two.alpha.resize(2);
  two.alpha << 1.0 / n, 1.0 - 1.0 / n;
  two.components = {ComponentParams{ybar(rep.i_star), rep.s2_star, Eigen::VectorXd()},
                    ComponentParams{mu0, sig0, Eigen::VectorXd()}};
  two.gamma = Eigen::VectorXd();
  MixtureParams one;
  one.alpha = Eigen::VectorXd::Ones(1);
  one.components = {two.components[1]};
  one.gamma = Eigen::VectorXd();

  const double L2 = mixture_loglik(data, two);
  const double L1 = mixture_loglik(data, one);
  const double pen = pn_sigma(rep.s2_star, sig0, rep.a_n) + pn_sigma(sig0, sig0, rep.a_n);
  rep.lr_degenerate = 2.0 * (L2 - L1);
  rep.lr_penalized = 2.0 * (L2 + pen - L1);
  return rep;
}

}  // namespace panelmix
