#include "panelmix/dataset.hpp"

#include <cmath>
#include <sstream>

#include "panelmix/errors.hpp"

namespace panelmix {

namespace {

void check_block(const Eigen::MatrixXd& m, int n, int T, const char* what, int k) {
  if (m.rows() != n || m.cols() != T) {
    std::ostringstream os;
    os << what << "[" << k << "] is " << m.rows() << "x" << m.cols() << ", expected " << n << "x" << T;
    throw InputError(os.str());
  }
  if (!m.allFinite()) {
    std::ostringstream os;
    os << what << "[" << k << "] contains non-finite values";
    throw InputError(os.str());
  }
}

}  // namespace

void PanelDataset::validate() const {
  if (n() < 1 || T() < 1) throw InputError("panel needs at least one unit and one period");
  if (!y.allFinite()) throw InputError("outcome contains non-finite values");
  for (int k = 0; k < q(); ++k) check_block(x[k], n(), T(), "x", k);
  for (int k = 0; k < p(); ++k) check_block(z[k], n(), T(), "z", k);
  if (!unit_ids.empty() && static_cast<int>(unit_ids.size()) != n())
    throw InputError("unit_ids length does not match the number of units");
}

PanelDataset PanelDataset::permuted(const std::vector<int>& perm) const {
  detail::require(static_cast<int>(perm.size()) == n(), "permutation length must equal n");
  PanelDataset out;
  out.y.resize(n(), T());
  out.x.assign(q(), Eigen::MatrixXd(n(), T()));
  out.z.assign(p(), Eigen::MatrixXd(n(), T()));
  if (!unit_ids.empty()) out.unit_ids.resize(n());
  std::vector<char> seen(n(), 0);
  for (int i = 0; i < n(); ++i) {
    const int s = perm[i];
    detail::require(s >= 0 && s < n() && !seen[s], "perm is not a permutation");
    seen[s] = 1;
    out.y.row(i) = y.row(s);
    for (int k = 0; k < q(); ++k) out.x[k].row(i) = x[k].row(s);
    for (int k = 0; k < p(); ++k) out.z[k].row(i) = z[k].row(s);
    if (!unit_ids.empty()) out.unit_ids[i] = unit_ids[s];
  }
  return out;
}

PanelDataset make_panel(Eigen::MatrixXd y) {
  PanelDataset d;
  d.y = std::move(y);
  d.validate();
  return d;
}

}  // namespace panelmix
