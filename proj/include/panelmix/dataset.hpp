#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace panelmix {

/// Balanced panel: n units observed over T periods, with q component-specific
/// regressors x and p common regressors z.
///
/// Covariates are stored per regressor as n x T matrices, so x[k](i, t) is the
/// k-th component-specific regressor of unit i in period t.
struct PanelDataset {
  Eigen::MatrixXd y;                 // n x T
  std::vector<Eigen::MatrixXd> x;    // q matrices, each n x T
  std::vector<Eigen::MatrixXd> z;    // p matrices, each n x T
  std::vector<std::string> unit_ids;

  int n() const { return static_cast<int>(y.rows()); }
  int T() const { return static_cast<int>(y.cols()); }
  int q() const { return static_cast<int>(x.size()); }
  int p() const { return static_cast<int>(z.size()); }

  /// Throws InputError unless the panel is rectangular and finite.
  void validate() const;

  /// Copy with units reordered; perm[i] is the source unit of new unit i.
  PanelDataset permuted(const std::vector<int>& perm) const;
};

/// Builds a dataset with no covariates from an n x T outcome matrix.
PanelDataset make_panel(Eigen::MatrixXd y);

}  // namespace panelmix
