#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "panelmix/dataset.hpp"
#include "panelmix/errors.hpp"
#include "panelmix/model.hpp"

namespace panelmix {

/// Probabilists' Hermite polynomial of order 1..4.
template <typename Scalar>
Scalar hermite(int j, Scalar t) {
  switch (j) {
    case 1: return t;
    case 2: return t * t - Scalar(1);
    case 3: return t * t * t - Scalar(3) * t;
    case 4: {
      const Scalar t2 = t * t;
      return t2 * t2 - Scalar(6) * t2 + Scalar(3);
    }
    default: throw ContractViolation("hermite order must be 1..4");
  }
}

/// H^b(u/sigma) / (b! sigma^b). With this scaling the derivative of the normal
/// density satisfies d_mu g / g = H^{1*} and d_{sigma^2} g / g = H^{2*}.
template <typename Scalar>
Scalar hermite_scaled(int b, Scalar residual, Scalar sigma) {
  detail::require(b >= 1 && b <= 4, "hermite order must be 1..4");
  if (!(sigma > Scalar(0))) throw DomainError("sigma must be positive");
  static constexpr int fact[] = {1, 1, 2, 6, 24};
  Scalar sb(1);
  for (int k = 0; k < b; ++k) sb *= sigma;
  return hermite(b, residual / sigma) / (Scalar(fact[b]) * sb);
}

/// Per-unit score rows split into the eta part and the lambda part.
///
/// Lambda columns of one block follow the order
///   mu.mu, mu.s2, s2.s2, mu.beta_k (k<q), s2.beta_k (k<q),
///   beta_k.beta_k (k<q), beta_k.beta_l (k<l).
/// Use lambda_pairs() for the coordinate pair behind each column.
struct ScoreBundle {
  Eigen::MatrixXd s_eta;
  Eigen::MatrixXd s_lambda;
  int M0 = 1;
  int q = 0;
  int p = 0;
  int d_eta = 0;
  int d_lam = 0;
  std::vector<std::pair<int, int>> block_index;  // (first column, width) per h

  int n() const { return static_cast<int>(s_eta.rows()); }
};

/// Empirical information and its eta / lambda partition.
struct InformationBlocks {
  Eigen::MatrixXd I_full;
  Eigen::MatrixXd I_eta;
  Eigen::MatrixXd I_lambda_eta;
  Eigen::MatrixXd I_lambda_lambda;
  Eigen::MatrixXd I_schur;
  std::vector<Eigen::MatrixXd> per_h;
  int M0 = 1;
  int q = 0;
  int d_eta = 0;
  int d_lam = 0;
};

/// (q+2)(q+3)/2.
inline int lambda_dim(int q) { return (q + 2) * (q + 3) / 2; }

/// Coordinate pair (a, b), a <= b, of each lambda column within a block.
/// Coordinates: 0 = mu, 1 = sigma^2, 2 + k = beta_k.
std::vector<std::pair<int, int>> lambda_pairs(int q);

/// Scores for the homogeneity test at the one-component fit (gamma, theta).
ScoreBundle score_homogeneity(const PanelDataset& data, const Eigen::VectorXd& gamma,
                              const ComponentParams& theta);

/// Scores for H0: M = M0 >= 2 at a canonical null fit.
ScoreBundle score_general(const PanelDataset& data, const MixtureParams& null_fit);

/// Dispatches to score_homogeneity for M0 = 1 and score_general otherwise.
ScoreBundle scores_at(const PanelDataset& data, const MixtureParams& null_fit);

/// Information matrix and Schur complement of the lambda block given eta.
InformationBlocks information(const ScoreBundle& bundle);

}  // namespace panelmix
