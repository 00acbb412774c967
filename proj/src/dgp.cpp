#include "panelmix/dgp.hpp"

#include <cmath>
#include <random>

#include "panelmix/errors.hpp"
#include "panelmix/rng.hpp"

namespace panelmix {

void DGPSpec::validate() const {
  detail::require(n >= 1 && T >= 1, "DGP needs n >= 1 and T >= 1");
  panelmix::validate(params);
  if (!(covariate_law.sd >= 0)) throw DomainError("covariate sd must be non-negative");
}

namespace {

int draw_type(const Eigen::VectorXd& alpha, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  const int M = static_cast<int>(alpha.size());
  for (int j = 0; j < M; ++j) {
    acc += alpha(j);
    if (u < acc) return j;
  }
  // Rounding: fall back to the last component with positive mass.
  for (int j = M - 1; j >= 0; --j)
    if (alpha(j) > 0) return j;
  return M - 1;
}

void fill_outcome(PanelDataset& d, int i, const MixtureParams& params, int type, Rng& rng) {
  std::normal_distribution<double> norm(0.0, 1.0);
  const auto& th = params.components[type];
  const double sigma = std::sqrt(th.sigma_sq);
  for (int t = 0; t < d.T(); ++t) {
    double m = th.mu;
    for (int k = 0; k < d.q(); ++k) m += th.beta(k) * d.x[k](i, t);
    for (int k = 0; k < d.p(); ++k) m += params.gamma(k) * d.z[k](i, t);
    d.y(i, t) = m + sigma * norm(rng);
  }
}

}  // namespace

PanelDataset generate(const DGPSpec& spec, std::vector<int>* types) {
  spec.validate();
  const int n = spec.n, T = spec.T, q = spec.params.q(), p = spec.params.p();
  PanelDataset d;
  d.y.resize(n, T);
  d.x.assign(q, Eigen::MatrixXd(n, T));
  d.z.assign(p, Eigen::MatrixXd(n, T));
  if (types) types->assign(n, 0);
  std::normal_distribution<double> cov(spec.covariate_law.mean, spec.covariate_law.sd);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(i)}));
    const int type = draw_type(spec.params.alpha, rng);
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < q; ++k) d.x[k](i, t) = cov(rng);
      for (int k = 0; k < p; ++k) d.z[k](i, t) = cov(rng);
    }
    fill_outcome(d, i, spec.params, type, rng);
    if (types) (*types)[i] = type;
  }
  return d;
}

PanelDataset generate_conditional(const MixtureParams& params, const PanelDataset& design,
                                  std::uint64_t seed, std::vector<int>* types) {
  validate(params);
  detail::require(params.q() == design.q() && params.p() == design.p(),
                  "parameter dimensions do not match the design covariates");
  PanelDataset d = design;
  if (types) types->assign(d.n(), 0);
  for (int i = 0; i < d.n(); ++i) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    const int type = draw_type(params.alpha, rng);
    fill_outcome(d, i, params, type, rng);
    if (types) (*types)[i] = type;
  }
  return d;
}

}  // namespace panelmix
