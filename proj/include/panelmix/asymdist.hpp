#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "panelmix/scores.hpp"

namespace panelmix {

/// Unique entries of lambda lambda': all squares, then products lambda_a lambda_b
/// for a < b in row-major order.
Eigen::VectorXd vmap(const Eigen::VectorXd& lambda);

/// For each vmap position, the lambda-score column (see lambda_pairs) holding
/// the same coordinate pair.
std::vector<int> vmap_from_score_order(int q);

struct ConeProjection {
  Eigen::VectorXd t_hat;
  double r_min = 0.0;
  Eigen::VectorXd direction;  // unit u with t_hat = c vmap(u), c >= 0
};

/// Projection of G onto {c vmap(u): c >= 0} in the metric of I:
/// argmin (t - G)' I (t - G). Directions are searched by multi-start BFGS
/// (leading eigenvector of the matrix form of G plus n_random random starts,
/// and a one-degree grid when d = 2); the scale is closed form.
ConeProjection project_cone(const Eigen::VectorXd& G, const Eigen::MatrixXd& I, int d, std::uint64_t seed = 0,
                            int n_random = 32);

/// Monte Carlo sample of max_h t_h' I_h t_h under the null.
struct NullDistribution {
  std::vector<double> samples;  // sorted ascending
  int n_draws = 0;
  int M0 = 1;
  std::map<double, double> levels;  // significance level -> critical value
  std::uint64_t seed = 0;
  int complementarity_failures = 0;
  int clipped_eigenvalues = 0;
};

/// Simulates the limiting null distribution from the information at the null
/// fit. Draw k uses its own stream derived from (seed, k), so the result does
/// not depend on `threads`.
NullDistribution simulate_null(const InformationBlocks& info, int M0, int n_draws, std::uint64_t seed,
                               int threads = 1);

/// Right-continuous empirical quantile: the smallest sample s with
/// ECDF(s) >= level.
double critical_value(const NullDistribution& dist, double level);

/// (k + 1) / (n_draws + 1) with k the number of samples >= stat.
double p_value(const NullDistribution& dist, double stat);

/// Fills `levels` for significance 0.10, 0.05 and 0.01.
void attach_levels(NullDistribution& dist);

void write_samples_csv(const NullDistribution& dist, std::ostream& os);
NullDistribution read_samples_csv(std::istream& is);

}  // namespace panelmix
