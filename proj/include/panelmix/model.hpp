#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "panelmix/dataset.hpp"
#include "panelmix/errors.hpp"

namespace panelmix {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// theta_j = (mu_j, sigma_j^2, beta_j) of one mixture component.
template <typename Scalar>
struct BasicComponentParams {
  Scalar mu{0};
  Scalar sigma_sq{1};
  VectorX<Scalar> beta;

  bool operator==(const BasicComponentParams&) const = default;
};

/// Mixing proportions, component parameters and the shared slope gamma.
template <typename Scalar>
struct BasicMixtureParams {
  VectorX<Scalar> alpha;
  std::vector<BasicComponentParams<Scalar>> components;
  VectorX<Scalar> gamma;

  int M() const { return static_cast<int>(components.size()); }
  int q() const { return components.empty() ? 0 : static_cast<int>(components.front().beta.size()); }
  int p() const { return static_cast<int>(gamma.size()); }

  bool operator==(const BasicMixtureParams&) const = default;
};

using ComponentParams = BasicComponentParams<double>;
using MixtureParams = BasicMixtureParams<double>;

namespace detail {

template <typename Scalar>
Scalar half_log_two_pi() {
  using std::atan;
  using std::log;
  // pi from the scalar type itself so extended precision stays exact.
  return log(Scalar(8) * atan(Scalar(1))) / Scalar(2);
}

template <typename Scalar>
void check_dims(const PanelDataset& data, const VectorX<Scalar>& gamma,
                const BasicComponentParams<Scalar>& theta) {
  require(gamma.size() == data.p(), "gamma length does not match the number of z regressors");
  require(theta.beta.size() == data.q(), "beta length does not match the number of x regressors");
}

}  // namespace detail

/// Throws DomainError unless alpha is a probability vector and every variance
/// is positive; ContractViolation on inconsistent dimensions.
template <typename Scalar>
void validate(const BasicMixtureParams<Scalar>& params) {
  using std::abs;
  detail::require(params.M() >= 1, "mixture needs at least one component");
  detail::require(params.alpha.size() == params.M(), "alpha length must equal the number of components");
  Scalar total(0);
  for (int j = 0; j < params.M(); ++j) {
    if (!(params.alpha(j) >= Scalar(0)) || params.alpha(j) > Scalar(1))
      throw DomainError("mixing proportion outside [0,1]");
    total += params.alpha(j);
    if (!(params.components[j].sigma_sq > Scalar(0)))
      throw DomainError("component variance must be positive");
    detail::require(params.components[j].beta.size() == params.q(), "components disagree on beta length");
  }
  if (abs(total - Scalar(1)) > Scalar(1e-12)) throw DomainError("mixing proportions must sum to one");
}

/// log f(W_i; gamma, theta): sum over periods of log phi(u/sigma) - log sigma.
template <typename Scalar>
Scalar component_loglik(const PanelDataset& data, int unit, const VectorX<Scalar>& gamma,
                        const BasicComponentParams<Scalar>& theta) {
  using std::log;
  detail::require(unit >= 0 && unit < data.n(), "unit index out of range");
  detail::check_dims(data, gamma, theta);
  if (!(theta.sigma_sq > Scalar(0))) throw DomainError("component variance must be positive");

  Scalar ssr(0);
  for (int t = 0; t < data.T(); ++t) {
    Scalar u = Scalar(data.y(unit, t)) - theta.mu;
    for (int k = 0; k < data.q(); ++k) u -= Scalar(data.x[k](unit, t)) * theta.beta(k);
    for (int k = 0; k < data.p(); ++k) u -= Scalar(data.z[k](unit, t)) * gamma(k);
    ssr += u * u;
  }
  const Scalar T(data.T());
  return -T * detail::half_log_two_pi<Scalar>() - T * log(theta.sigma_sq) / Scalar(2) -
         ssr / (Scalar(2) * theta.sigma_sq);
}

/// n x M matrix of log alpha_j + log f(W_i; gamma, theta_j). Components with
/// alpha_j = 0 get -infinity.
template <typename Scalar>
MatrixX<Scalar> weighted_component_logliks(const PanelDataset& data,
                                           const BasicMixtureParams<Scalar>& params) {
  using std::log;
  const int n = data.n(), T = data.T(), M = params.M();
  detail::require(params.gamma.size() == data.p(), "gamma length does not match the number of z regressors");
  detail::require(params.q() == data.q(), "beta length does not match the number of x regressors");

  // Common part y - z'gamma, shared by all components.
  MatrixX<Scalar> base = data.y.template cast<Scalar>();
  for (int k = 0; k < data.p(); ++k) base -= data.z[k].template cast<Scalar>() * params.gamma(k);

  MatrixX<Scalar> out(n, M);
  const Scalar c = -Scalar(T) * detail::half_log_two_pi<Scalar>();
  for (int j = 0; j < M; ++j) {
    const auto& th = params.components[j];
    if (!(th.sigma_sq > Scalar(0))) throw DomainError("component variance must be positive");
    MatrixX<Scalar> u = base.array() - th.mu;
    for (int k = 0; k < data.q(); ++k) u -= data.x[k].template cast<Scalar>() * th.beta(k);
    const VectorX<Scalar> ssr = u.array().square().rowwise().sum();
    const Scalar la = params.alpha(j) > Scalar(0) ? log(params.alpha(j))
                                                   : -std::numeric_limits<Scalar>::infinity();
    const Scalar lc = c - Scalar(T) * log(th.sigma_sq) / Scalar(2) + la;
    out.col(j) = (lc - ssr.array() / (Scalar(2) * th.sigma_sq)).matrix();
  }
  return out;
}

/// Row-wise log-sum-exp of a matrix of log terms.
template <typename Scalar>
VectorX<Scalar> log_sum_exp_rows(const MatrixX<Scalar>& logs) {
  using std::exp;
  using std::log;
  VectorX<Scalar> out(logs.rows());
  for (Eigen::Index i = 0; i < logs.rows(); ++i) {
    const Scalar m = logs.row(i).maxCoeff();
    if (!(m > -std::numeric_limits<Scalar>::infinity())) {
      out(i) = m;
      continue;
    }
    Scalar s(0);
    for (Eigen::Index j = 0; j < logs.cols(); ++j) s += exp(logs(i, j) - m);
    out(i) = m + log(s);
  }
  return out;
}

/// Per-unit log f_M(W_i; params).
template <typename Scalar>
VectorX<Scalar> unit_mixture_logliks(const PanelDataset& data, const BasicMixtureParams<Scalar>& params) {
  validate(params);
  return log_sum_exp_rows<Scalar>(weighted_component_logliks(data, params));
}

/// Sum over units of log sum_j alpha_j f(W_i; gamma, theta_j), via log-sum-exp.
template <typename Scalar>
Scalar mixture_loglik(const PanelDataset& data, const BasicMixtureParams<Scalar>& params) {
  return unit_mixture_logliks(data, params).sum();
}

/// Components sorted by ascending mu; ties by sigma^2, then lexicographic beta.
template <typename Scalar>
BasicMixtureParams<Scalar> canonicalize(const BasicMixtureParams<Scalar>& params) {
  std::vector<int> order(params.M());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ca = params.components[a];
    const auto& cb = params.components[b];
    if (ca.mu != cb.mu) return ca.mu < cb.mu;
    if (ca.sigma_sq != cb.sigma_sq) return ca.sigma_sq < cb.sigma_sq;
    return std::lexicographical_compare(ca.beta.data(), ca.beta.data() + ca.beta.size(), cb.beta.data(),
                                        cb.beta.data() + cb.beta.size());
  });
  BasicMixtureParams<Scalar> out;
  out.gamma = params.gamma;
  out.alpha.resize(params.M());
  out.components.reserve(params.M());
  for (int j = 0; j < params.M(); ++j) {
    out.alpha(j) = params.alpha(order[j]);
    out.components.push_back(params.components[order[j]]);
  }
  return out;
}

/// Number of free parameters: (M-1) + M(q+2) + p.
inline int parameter_count(int M, int q, int p) { return (M - 1) + M * (q + 2) + p; }

template <typename Scalar>
std::string describe(const BasicMixtureParams<Scalar>& params) {
  std::ostringstream os;
  for (int j = 0; j < params.M(); ++j) {
    const auto& c = params.components[j];
    os << "[a=" << params.alpha(j) << " mu=" << c.mu << " s2=" << c.sigma_sq;
    if (c.beta.size() > 0) os << " beta=" << c.beta.transpose();
    os << "]";
  }
  if (params.gamma.size() > 0) os << " gamma=" << params.gamma.transpose();
  return os.str();
}

}  // namespace panelmix
