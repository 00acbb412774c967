#pragma once

#include <string>
#include <utility>
#include <vector>

#include "panelmix/em.hpp"
#include "panelmix/testing.hpp"

namespace panelmix {

enum class SelectionMethod { sht_em, sht_plrt, aic, bic };

std::string to_string(SelectionMethod m);

/// Significance level of each sequential test: fixed, or min(0.05, c / log n).
struct LevelSchedule {
  double fixed = 0.05;
  bool shrinking = false;
  double c = 0.25;

  double level(int n) const;
  std::string describe() const;
};

struct SelectionStep {
  int M = 0;
  double statistic = 0.0;  // test statistic, or the criterion value
  double threshold = 0.0;  // critical value (SHT) or the criterion value (IC)
  double p_value = 1.0;    // SHT only
  std::string decision;    // reject / fail_to_reject / candidate / skipped
};

struct SelectionResult {
  int M_hat = 1;
  std::vector<SelectionStep> per_M;
  SelectionMethod method = SelectionMethod::sht_em;
  std::string level_schedule;
  bool censored = false;
  std::vector<std::string> warnings;
};

/// Tests M0 = 1, 2, ... against M0 + 1 and stops at the first non-rejection.
/// All Mbar tests rejecting gives M_hat = Mbar with the censored flag.
/// `fits`, when non-null, holds plain-penalty fits indexed by M - 1 for reuse.
SelectionResult select_sht(const PanelDataset& data, int Mbar, const LevelSchedule& level, TestMethod method,
                           const PenaltyConfig& penalty, const EMConfig& cfg, const TestOptions& opts = {},
                           const std::vector<FitResult>* fits = nullptr);

/// AIC = -2 l + 2k and BIC = -2 l + k log n over M = 1..Mbar with
/// k = (M-1) + M(q+2) + p. Returns {aic, bic}. The fitted models are stored in
/// `fits` (index M - 1) when non-null.
std::pair<SelectionResult, SelectionResult> information_criteria(const PanelDataset& data, int Mbar,
                                                                 const PenaltyConfig& penalty, const EMConfig& cfg,
                                                                 std::vector<FitResult>* fits = nullptr);

double aic(double loglik, int k);
double bic(double loglik, int k, int n);

}  // namespace panelmix
