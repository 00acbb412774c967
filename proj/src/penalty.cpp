#include "panelmix/penalty.hpp"

#include <algorithm>
#include <cmath>

#include "panelmix/dgp.hpp"

namespace panelmix {

std::string to_string(AnMode mode) {
  switch (mode) {
    case AnMode::formula: return "formula";
    case AnMode::covariate_constants: return "covariate_constants";
    case AnMode::user_fixed: return "user_fixed";
  }
  return "unknown";
}

void PenaltyConfig::validate() const {
  if (!(a_n >= 0) || !std::isfinite(a_n)) throw DomainError("a_n must be a non-negative finite number");
  detail::require(sigma0_sq.size() >= 1, "penalty needs at least one variance anchor");
  for (Eigen::Index j = 0; j < sigma0_sq.size(); ++j)
    if (!(sigma0_sq(j) > 0)) throw DomainError("variance anchors must be positive");
}

double PenaltyConfig::anchor(int j) const {
  if (sigma0_sq.size() == 1) return sigma0_sq(0);
  detail::require(j >= 0 && j < sigma0_sq.size(), "no variance anchor for this component");
  return sigma0_sq(j);
}

double total_penalty(const Eigen::VectorXd& sigma_sq, const PenaltyConfig& cfg) {
  detail::require(cfg.sigma0_sq.size() == 1 || cfg.sigma0_sq.size() == sigma_sq.size(),
                  "anchor count must be 1 or match the number of components");
  double s = 0.0;
  for (Eigen::Index j = 0; j < sigma_sq.size(); ++j)
    s += pn_sigma(sigma_sq(j), cfg.anchor(static_cast<int>(j)), cfg.a_n);
  return s;
}

double total_penalty(const MixtureParams& params, const PenaltyConfig& cfg) {
  Eigen::VectorXd s2(params.M());
  for (int j = 0; j < params.M(); ++j) s2(j) = params.components[j].sigma_sq;
  return total_penalty(s2, cfg);
}

const std::vector<AnCoefficients>& an_coefficient_table() {
  // Rows M0 = 1..4: constant, 1/T, 1/n, logit(a_n), logit(omega).
  static const std::vector<AnCoefficients> table = {
      {-0.616, 0.776, 28.143, -0.016, 0.0},
      {-0.811, -0.288, 4.637, -0.101, -0.197},
      {-0.680, 0.611, 21.156, -0.111, 0.002},
      {-0.735, 0.258, 8.585, -0.128, -0.013},
  };
  return table;
}

const std::vector<double>& an_covariate_constants() {
  // M0 = 1, 2, 3, 4 and >= 5.
  static const std::vector<double> c = {0.1617, 0.0025, 0.0567, 0.4858, 0.5};
  return c;
}

double compute_an(int M0, int n, int T, double omega, bool has_covariates) {
  if (M0 < 1) throw DomainError("M0 must be at least 1");
  detail::require(n >= 1 && T >= 1, "n and T must be positive");
  if (has_covariates) {
    const auto& c = an_covariate_constants();
    return c[std::min(M0, 5) - 1];
  }
  if (M0 >= 5) return 0.5;
  const auto& r = an_coefficient_table()[M0 - 1];
  double e = r.constant / r.logit_an + (r.inv_T / r.logit_an) / T + (r.inv_n / r.logit_an) / n;
  if (M0 >= 2) {
    if (!std::isfinite(omega)) throw DomainError("omega is required for M0 >= 2 without covariates");
    const double w = std::clamp(omega, 1e-3, 0.5);
    e += (r.logit_omega / r.logit_an) * std::log(w / (1.0 - w));
  }
  // 1/(1+exp(e)) evaluated without overflow.
  const double an = e > 0 ? std::exp(-e) / (1.0 + std::exp(-e)) : 1.0 / (1.0 + std::exp(e));
  return std::clamp(an, 0.005, 0.5);
}

double misclassification(const MixtureParams& params, int T, int n_draws, std::uint64_t seed) {
  validate(params);
  if (params.M() < 2) throw DomainError("misclassification needs at least two components");
  detail::require(n_draws >= 1 && T >= 1, "misclassification needs positive draws and periods");
  DGPSpec spec{params, n_draws, T, {}, seed};
  std::vector<int> types;
  const PanelDataset sim = generate(spec, &types);
  const Eigen::MatrixXd lw = weighted_component_logliks(sim, params);
  int wrong = 0;
  for (int i = 0; i < n_draws; ++i) {
    Eigen::Index best;
    lw.row(i).maxCoeff(&best);
    if (best != types[i]) ++wrong;
  }
  return std::clamp(static_cast<double>(wrong) / n_draws, 1e-3, 0.5);
}

}  // namespace panelmix
