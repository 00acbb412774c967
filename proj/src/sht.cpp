#include "panelmix/sht.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

namespace panelmix {

std::string to_string(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::sht_em: return "sht_em";
    case SelectionMethod::sht_plrt: return "sht_plrt";
    case SelectionMethod::aic: return "aic";
    case SelectionMethod::bic: return "bic";
  }
  return "unknown";
}

double LevelSchedule::level(int n) const {
  if (!shrinking) return fixed;
  detail::require(n >= 2, "shrinking schedule needs n >= 2");
  return std::min(0.05, c / std::log(static_cast<double>(n)));
}

std::string LevelSchedule::describe() const {
  std::ostringstream os;
  if (shrinking) os << "min(0.05, " << c << "/log n)";
  else os << "fixed " << fixed;
  return os.str();
}

double aic(double loglik, int k) { return -2.0 * loglik + 2.0 * k; }

double bic(double loglik, int k, int n) { return -2.0 * loglik + k * std::log(static_cast<double>(n)); }

SelectionResult select_sht(const PanelDataset& data, int Mbar, const LevelSchedule& level, TestMethod method,
                           const PenaltyConfig& penalty, const EMConfig& cfg, const TestOptions& opts,
                           const std::vector<FitResult>* fits) {
  detail::require(Mbar >= 1, "Mbar must be at least 1");
  const double lvl = level.level(data.n());
  detail::require(lvl > 0 && lvl < 1, "significance level must lie in (0,1)");
  SelectionResult res;
  res.method = method == TestMethod::em_test ? SelectionMethod::sht_em : SelectionMethod::sht_plrt;
  res.level_schedule = level.describe();

  MixtureParams parent;
  bool have_parent = false;
  for (int M0 = 1; M0 <= Mbar; ++M0) {
    TestOptions o = opts;
    o.simulate = true;
    if (fits && static_cast<int>(fits->size()) >= M0 && (*fits)[M0 - 1].converged &&
        (*fits)[M0 - 1].params.M() == M0)
      o.null_fit = &(*fits)[M0 - 1];
    o.parent = have_parent ? &parent : nullptr;
    SelectionStep step;
    step.M = M0;
    try {
      const TestOutcome t = run_test(method, data, M0, penalty, cfg, o);
      step.statistic = t.statistic;
      step.threshold = critical_value(*t.reference, 1.0 - lvl);
      step.p_value = t.p_value;
      const bool reject = t.rejects(lvl);
      step.decision = reject ? "reject" : "fail_to_reject";
      res.per_M.push_back(step);
      parent = t.null_fit.params;
      have_parent = true;
      if (!reject) {
        res.M_hat = M0;
        return res;
      }
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "test of M0=" << M0 << " failed (" << e.what() << "); stopping with M_hat=" << M0;
      res.warnings.push_back(os.str());
      std::cerr << "warning: " << os.str() << "\n";
      step.decision = "failed";
      res.per_M.push_back(step);
      res.M_hat = M0;
      return res;
    }
  }
  res.M_hat = Mbar;
  res.censored = true;
  return res;
}

std::pair<SelectionResult, SelectionResult> information_criteria(const PanelDataset& data, int Mbar,
                                                                 const PenaltyConfig& penalty, const EMConfig& cfg,
                                                                 std::vector<FitResult>* fits) {
  detail::require(Mbar >= 1, "Mbar must be at least 1");
  SelectionResult a, b;
  a.method = SelectionMethod::aic;
  b.method = SelectionMethod::bic;
  std::vector<FitResult> local;
  std::vector<FitResult>& store = fits ? *fits : local;
  store.clear();
  store.reserve(Mbar);
  double best_a = std::numeric_limits<double>::infinity(), best_b = best_a;
  const MixtureParams* parent = nullptr;
  for (int M = 1; M <= Mbar; ++M) {
    store.push_back(fit_pmle(data, M, penalty, cfg, parent));
    const FitResult& f = store.back();
    parent = &f.params;
    SelectionStep sa, sb;
    sa.M = sb.M = M;
    if (!f.converged) {
      std::ostringstream os;
      os << "fit with M=" << M << " did not converge; skipped";
      a.warnings.push_back(os.str());
      b.warnings.push_back(os.str());
      std::cerr << "warning: " << os.str() << "\n";
      sa.decision = sb.decision = "skipped";
      a.per_M.push_back(sa);
      b.per_M.push_back(sb);
      continue;
    }
    const int k = parameter_count(M, data.q(), data.p());
    sa.statistic = sa.threshold = aic(f.loglik, k);
    sb.statistic = sb.threshold = bic(f.loglik, k, data.n());
    sa.decision = sb.decision = "candidate";
    if (sa.statistic < best_a) {
      best_a = sa.statistic;
      a.M_hat = M;
    }
    if (sb.statistic < best_b) {
      best_b = sb.statistic;
      b.M_hat = M;
    }
    a.per_M.push_back(sa);
    b.per_M.push_back(sb);
  }
  for (auto* r : {&a, &b})
    for (auto& s : r->per_M)
      if (s.M == r->M_hat) s.decision = "selected";
  return {a, b};
}

}  // namespace panelmix
