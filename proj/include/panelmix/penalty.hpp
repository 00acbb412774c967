#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "panelmix/errors.hpp"
#include "panelmix/model.hpp"

namespace panelmix {

enum class AnMode { formula, covariate_constants, user_fixed };

std::string to_string(AnMode mode);

/// Penalty strength a_n and variance anchors sigma0^2. A single anchor is
/// broadcast to every component.
struct PenaltyConfig {
  double a_n = 0.0;
  Eigen::VectorXd sigma0_sq;
  AnMode an_mode = AnMode::user_fixed;

  /// Throws DomainError if a_n < 0 or any anchor is non-positive.
  void validate() const;
  /// Anchor for component j (broadcast when one anchor is stored).
  double anchor(int j) const;
};

/// -a_n (s0/s + log(s/s0) - 1); non-positive, zero only at sigma_sq == sigma0_sq.
template <typename Scalar>
Scalar pn_sigma(Scalar sigma_sq, Scalar sigma0_sq, Scalar a_n) {
  using std::log;
  if (!(sigma_sq > Scalar(0)) || !(sigma0_sq > Scalar(0))) throw DomainError("variance must be positive");
  const Scalar r = sigma0_sq / sigma_sq;
  return -a_n * (r - log(r) - Scalar(1));
}

/// log(2 min(tau, 1 - tau)).
template <typename Scalar>
Scalar p_tau(Scalar tau) {
  using std::log;
  if (!(tau > Scalar(0)) || !(tau < Scalar(1))) throw DomainError("tau must lie in (0,1)");
  const Scalar m = tau < Scalar(1) - tau ? tau : Scalar(1) - tau;
  return log(Scalar(2) * m);
}

/// Sum over components of pn_sigma with the component's anchor.
double total_penalty(const MixtureParams& params, const PenaltyConfig& cfg);

/// Penalty for a vector of variances with matching anchors.
double total_penalty(const Eigen::VectorXd& sigma_sq, const PenaltyConfig& cfg);

/// Coefficients of the calibrated logistic formula for a_n, one row per M0 in 1..4.
struct AnCoefficients {
  double constant, inv_T, inv_n, logit_an, logit_omega;
};

const std::vector<AnCoefficients>& an_coefficient_table();
const std::vector<double>& an_covariate_constants();

/// Data-dependent tuning constant for testing H0: M = M0. `omega` is only read
/// when M0 is 2..4 and there are no covariates. Result clamped to [0.005, 0.5].
double compute_an(int M0, int n, int T, double omega, bool has_covariates);

/// Monte Carlo Bayes misclassification rate of the posterior-argmax rule under
/// params with T periods and standard normal covariates; clamped to [1e-3, 0.5].
double misclassification(const MixtureParams& params, int T, int n_draws, std::uint64_t seed);

}  // namespace panelmix
