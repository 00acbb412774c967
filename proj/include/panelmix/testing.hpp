#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "panelmix/asymdist.hpp"
#include "panelmix/dataset.hpp"
#include "panelmix/em.hpp"
#include "panelmix/penalty.hpp"

namespace panelmix {

enum class TestMethod { em_test, plrt };
enum class PSource { asymptotic, bootstrap, none };

std::string to_string(TestMethod m);
std::string to_string(PSource s);

struct TestOptions {
  int n_draws = 2000;            // asymptotic null draws
  int misclass_draws = 10000;    // Monte Carlo draws for omega
  double plrt_epsilon = 0.1;     // alpha floor of the PLRT
  double plrt_an_factor = 10.0;  // PLRT a_n relative to the EM-test a_n
  bool simulate = true;          // attach asymptotic critical values and p-value
  const FitResult* null_fit = nullptr;  // reuse a null fit computed elsewhere
  const MixtureParams* parent = nullptr;  // (M0-1)-component fit for split starts
};

struct TestDiagnostics {
  double a_n = 0.0;
  std::string an_source;  // formula, covariate_constants or user_fixed
  double omega = 0.0;     // misclassification rate (0 when unused)
  std::vector<double> tau_set;
  int K = 0;
  double epsilon = 0.0;
  bool null_converged = false;
  int cells_total = 0;
  std::vector<std::string> dropped_cells;
  int complementarity_failures = 0;
  int bootstrap_dropped = 0;
};

struct TestOutcome {
  int M0 = 1;
  double statistic = 0.0;
  std::vector<double> local_stats;  // per h; -inf when every cell of h failed
  TestMethod method = TestMethod::em_test;
  std::map<double, double> crit;    // significance level -> critical value
  double p_value = 1.0;
  PSource p_source = PSource::none;
  FitResult null_fit;
  FitResult best_alt_fit;
  int best_h = 1;
  TestDiagnostics diagnostics;
  std::shared_ptr<const NullDistribution> reference;  // null sample behind crit / p

  /// True when the statistic reaches the critical value at `significance`.
  bool rejects(double significance) const;
};

/// Null fit used by the tests: plain-estimation penalty, split starts from
/// `parent` when given. Throws ConvergenceError if EM does not converge.
FitResult fit_null(const PanelDataset& data, int M0, const EMConfig& cfg, const MixtureParams* parent = nullptr);

/// a_n for the alternative model given the null fit; records its provenance.
double resolve_an(const PanelDataset& data, int M0, const MixtureParams& null_params, const PenaltyConfig& penalty,
                  const EMConfig& cfg, const TestOptions& opts, TestDiagnostics& diag);

/// EM test of H0: M = M0 against M0 + 1.
TestOutcome em_test(const PanelDataset& data, int M0, const PenaltyConfig& penalty, const EMConfig& cfg,
                    const TestOptions& opts = {});

/// Penalized likelihood ratio test with alpha_j in [eps, 1 - eps].
TestOutcome plrt(const PanelDataset& data, int M0, const PenaltyConfig& penalty, const EMConfig& cfg,
                 const TestOptions& opts = {});

/// Dispatches on method.
TestOutcome run_test(TestMethod method, const PanelDataset& data, int M0, const PenaltyConfig& penalty,
                     const EMConfig& cfg, const TestOptions& opts = {});

/// Parametric bootstrap from the fitted null, conditioning on the observed
/// covariates. Throws ConvergenceError if more than 10% of replications fail.
TestOutcome bootstrap_test(const PanelDataset& data, int M0, const PenaltyConfig& penalty, const EMConfig& cfg,
                           int B, TestMethod method = TestMethod::em_test, const TestOptions& opts = {});

struct UnboundednessReport {
  double lr_degenerate = 0.0;  // 2 (L2 - L1) at the degenerate point
  double lr_penalized = 0.0;   // 2 (L2 + penalty - L1) at the same point
  int i_star = 0;
  double s2_star = 0.0;
  double sigma0_sq = 0.0;
  double a_n = 0.0;
};

/// Evaluates the two-component likelihood ratio at alpha = 1/n, theta_1 =
/// (mean, sample variance with divisor T - 1) of the unit with the smallest
/// within-unit variance and theta_2 = the one-component MLE. a_n <= 0 selects
/// compute_an(1, n, T).
UnboundednessReport demonstrate_unboundedness(const PanelDataset& data, double a_n = -1.0);

}  // namespace panelmix
