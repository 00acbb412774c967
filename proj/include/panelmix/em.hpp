#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "panelmix/dataset.hpp"
#include "panelmix/model.hpp"
#include "panelmix/penalty.hpp"

namespace panelmix {

struct EMConfig {
  int max_iter = 2000;
  double tol = 1e-8;          // relative change of the penalized log-likelihood
  int n_starts = 10;          // restricted fits; a PMLE with M components uses n_starts * (M - 1)
  double epsilon_alpha = 0.05;
  int K = 3;
  std::vector<double> tau_set{0.1, 0.3, 0.5};
  std::uint64_t seed = 0;
  int threads = 1;
  int burn_iter = 50;         // iterations every start receives before ranking
  int n_polish = 2;           // best starts run on to convergence
  bool record_trace = false;  // keep the objective after every iteration

  /// Throws ContractViolation on inconsistent settings.
  void validate() const;
};

struct FitResult {
  MixtureParams params;
  double loglik = 0.0;
  double penalized_loglik = 0.0;
  double penalty_value = 0.0;  // variance penalty plus p(tau) where it applies
  int iterations = 0;
  bool converged = false;
  Eigen::MatrixXd weights;     // n x M posterior probabilities
  bool ridge_used = false;     // a weighted design needed the ridge fallback
  bool clamp_binding = false;  // an interval constraint was active at the end
  std::vector<double> trace;
};

/// Restricted space for the local test of merging components h and h+1
/// (1-based) of an (M0+1)-component model.
struct RestrictionSpec {
  int h = 1;
  std::vector<std::pair<double, double>> mu_intervals;  // one per null component
  std::optional<double> tau0;                           // fixed within-pair share
  double alpha_floor = 0.0;
  bool tau_penalty = true;   // add p(tau) when tau is free
  bool degenerate = false;   // adjacent null means tie
  MixtureParams null_params;

  int M0() const { return null_params.M(); }
  /// Null component that alternative component j (0-based) descends from.
  int source(int j) const { return j < h ? j : j - 1; }
};

/// Posterior type probabilities, rows summing to one.
Eigen::MatrixXd e_step(const PanelDataset& data, const MixtureParams& params);

/// One ECM update of all parameters from posterior weights. The gamma step
/// conditions on `current` (means and variances), then (mu, beta), then
/// sigma^2 in closed form, then alpha.
MixtureParams m_step(const PanelDataset& data, const Eigen::MatrixXd& weights, const PenaltyConfig& penalty,
                     const MixtureParams& current, bool* ridge_used = nullptr);

/// Penalty for plain estimation: a_n = 1/n, anchor = pooled least-squares
/// residual variance of y on (1, x, z).
PenaltyConfig plain_penalty(const PanelDataset& data);

/// Pooled least-squares residual variance of y on (1, x, z).
double pooled_residual_variance(const PanelDataset& data);

/// Penalized MLE with M components. `parent`, an (M-1)-component fit, adds
/// split starts. The result is canonicalized.
FitResult fit_pmle(const PanelDataset& data, int M, const PenaltyConfig& penalty, const EMConfig& cfg,
                   const MixtureParams* parent = nullptr);

/// Midpoint intervals around the null means and the split index h (1-based).
RestrictionSpec build_restriction(const MixtureParams& null_fit, int h, double epsilon_alpha);

/// Penalty for the (M0+1)-component model: components h and h+1 share the
/// anchor of null component h.
PenaltyConfig restricted_penalty(const RestrictionSpec& spec, double a_n);

/// Restricted PMLE over the space described by the restriction.
FitResult fit_restricted(const PanelDataset& data, int M0_plus_1, const RestrictionSpec& spec,
                         const PenaltyConfig& penalty, const EMConfig& cfg);

/// K unrestricted EM rounds with tau updated by maximizing the p(tau)
/// penalized objective. Returns the final fit and tau after each round.
std::pair<FitResult, std::vector<double>> em_k_steps(const PanelDataset& data, const FitResult& start,
                                                     const RestrictionSpec& spec, int K,
                                                     const PenaltyConfig& penalty);

/// argmax over tau of W_h log tau + W_h1 log(1 - tau) + p(tau).
double update_tau(double W_h, double W_h1);

/// argmax of sum_j W_j log alpha_j over the simplex with lo <= alpha_j <= hi.
Eigen::VectorXd project_alpha(const Eigen::VectorXd& W, double lo, double hi);

}  // namespace panelmix
