#include "panelmix/scores.hpp"

#include <cmath>
#include <iostream>

namespace panelmix {

std::vector<std::pair<int, int>> lambda_pairs(int q) {
  std::vector<std::pair<int, int>> out;
  out.reserve(lambda_dim(q));
  out.emplace_back(0, 0);
  out.emplace_back(0, 1);
  out.emplace_back(1, 1);
  for (int k = 0; k < q; ++k) out.emplace_back(0, 2 + k);
  for (int k = 0; k < q; ++k) out.emplace_back(1, 2 + k);
  for (int k = 0; k < q; ++k) out.emplace_back(2 + k, 2 + k);
  for (int k = 0; k < q; ++k)
    for (int l = k + 1; l < q; ++l) out.emplace_back(2 + k, 2 + l);
  return out;
}

namespace {

// Score pieces of one unit under one component: d = q+2 first-order terms
// (mu, s2, beta), p gamma terms, and the lambda block.
struct UnitScore {
  Eigen::VectorXd first;   // d
  Eigen::VectorXd gamma;   // p
  Eigen::VectorXd lambda;  // d_lam
};

class UnitScorer {
 public:
  UnitScorer(const PanelDataset& data, const Eigen::VectorXd& gamma)
      : data_(data), gamma_(gamma), q_(data.q()), d_(data.q() + 2), pairs_(lambda_pairs(data.q())) {}

  void operator()(int i, const ComponentParams& th, UnitScore& out) const {
    const int T = data_.T();
    const double sigma = std::sqrt(th.sigma_sq);
    Eigen::VectorXd sum_a = Eigen::VectorXd::Zero(d_);
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(d_, d_);
    out.gamma.setZero(data_.p());
    Eigen::VectorXd a(d_), xv(q_);
    for (int t = 0; t < T; ++t) {
      double u = data_.y(i, t) - th.mu;
      for (int k = 0; k < q_; ++k) {
        xv(k) = data_.x[k](i, t);
        u -= xv(k) * th.beta(k);
      }
      for (int k = 0; k < data_.p(); ++k) u -= data_.z[k](i, t) * gamma_(k);
      const double h1 = hermite_scaled(1, u, sigma), h2 = hermite_scaled(2, u, sigma);
      const double h3 = hermite_scaled(3, u, sigma), h4 = hermite_scaled(4, u, sigma);

      a(0) = h1;
      a(1) = h2;
      for (int k = 0; k < q_; ++k) a(2 + k) = h1 * xv(k);
      sum_a += a;
      F.noalias() -= a * a.transpose();

      // Per-period second derivatives of the normal density over the density.
      F(0, 0) += 2 * h2;
      F(0, 1) += 3 * h3;
      F(1, 1) += 6 * h4;
      for (int k = 0; k < q_; ++k) {
        F(0, 2 + k) += 2 * h2 * xv(k);
        F(1, 2 + k) += 3 * h3 * xv(k);
        for (int l = k; l < q_; ++l) F(2 + k, 2 + l) += 2 * h2 * xv(k) * xv(l);
      }
      for (int k = 0; k < data_.p(); ++k) out.gamma(k) += h1 * data_.z[k](i, t);
    }
    // Cross-period products: sum_t sum_{s != t} a_t a_s'.
    F.noalias() += sum_a * sum_a.transpose();
    out.first = sum_a;
    out.lambda.resize(pairs_.size());
    for (std::size_t c = 0; c < pairs_.size(); ++c) {
      const auto [r, s] = pairs_[c];
      out.lambda(c) = r == s ? 0.5 * F(r, s) : F(r, s);
    }
  }

 private:
  const PanelDataset& data_;
  const Eigen::VectorXd& gamma_;
  int q_, d_;
  std::vector<std::pair<int, int>> pairs_;
};

void check_fit_dims(const PanelDataset& data, const MixtureParams& fit) {
  detail::require(fit.p() == data.p(), "gamma length does not match the number of z regressors");
  detail::require(fit.q() == data.q(), "beta length does not match the number of x regressors");
}

}  // namespace

ScoreBundle score_homogeneity(const PanelDataset& data, const Eigen::VectorXd& gamma,
                              const ComponentParams& theta) {
  detail::require(gamma.size() == data.p(), "gamma length does not match the number of z regressors");
  detail::require(theta.beta.size() == data.q(), "beta length does not match the number of x regressors");
  if (!(theta.sigma_sq > 0)) throw DomainError("component variance must be positive");

  const int n = data.n(), q = data.q(), p = data.p();
  ScoreBundle b;
  b.M0 = 1;
  b.q = q;
  b.p = p;
  b.d_eta = q + p + 2;
  b.d_lam = lambda_dim(q);
  b.block_index = {{0, b.d_lam}};
  b.s_eta.resize(n, b.d_eta);
  b.s_lambda.resize(n, b.d_lam);

  UnitScorer scorer(data, gamma);
  UnitScore us;
  for (int i = 0; i < n; ++i) {
    scorer(i, theta, us);
    b.s_eta.row(i).head(q + 2) = us.first.transpose();
    b.s_eta.row(i).tail(p) = us.gamma.transpose();
    b.s_lambda.row(i) = us.lambda.transpose();
  }
  return b;
}

ScoreBundle score_general(const PanelDataset& data, const MixtureParams& fit) {
  validate(fit);
  check_fit_dims(data, fit);
  const int M0 = fit.M();
  detail::require(M0 >= 2, "score_general needs M0 >= 2");
  for (int j = 0; j + 1 < M0; ++j)
    detail::require(fit.components[j].mu <= fit.components[j + 1].mu, "null fit must be canonical");

  const int n = data.n(), q = data.q(), p = data.p(), d = q + 2;
  ScoreBundle b;
  b.M0 = M0;
  b.q = q;
  b.p = p;
  b.d_eta = (M0 - 1) + M0 * d + p;
  b.d_lam = lambda_dim(q);
  for (int h = 0; h < M0; ++h) b.block_index.emplace_back(h * b.d_lam, b.d_lam);
  b.s_eta.setZero(n, b.d_eta);
  b.s_lambda.setZero(n, M0 * b.d_lam);

  // log f_j and log f_mix per unit; unit_ratio(i, j) = f_j / f_mix.
  MixtureParams ones = fit;
  ones.alpha.setConstant(1.0 / M0);
  const Eigen::MatrixXd logf =
      weighted_component_logliks(data, ones).array() + std::log(static_cast<double>(M0));
  const Eigen::VectorXd logmix = unit_mixture_logliks(data, fit);

  UnitScorer scorer(data, fit.gamma);
  UnitScore us;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd ratio(M0);
    for (int j = 0; j < M0; ++j) ratio(j) = std::exp(logf(i, j) - logmix(i));
    for (int j = 0; j + 1 < M0; ++j) b.s_eta(i, j) = ratio(j) - ratio(M0 - 1);
    for (int j = 0; j < M0; ++j) {
      const double w = fit.alpha(j) * ratio(j);
      if (w == 0.0) continue;
      scorer(i, fit.components[j], us);
      b.s_eta.row(i).segment(M0 - 1 + j * d, d) = w * us.first.transpose();
      if (p > 0) b.s_eta.row(i).tail(p) += w * us.gamma.transpose();
      b.s_lambda.row(i).segment(j * b.d_lam, b.d_lam) = w * us.lambda.transpose();
    }
  }
  return b;
}

ScoreBundle scores_at(const PanelDataset& data, const MixtureParams& null_fit) {
  if (null_fit.M() == 1) return score_homogeneity(data, null_fit.gamma, null_fit.components.front());
  return score_general(data, null_fit);
}

InformationBlocks information(const ScoreBundle& bundle) {
  const int n = bundle.n();
  if (n < 2) throw DomainError("information needs at least two score rows");
  const int de = bundle.d_eta, dl = static_cast<int>(bundle.s_lambda.cols());
  if (n <= de + dl)
    std::cerr << "warning: information estimated from " << n << " rows for " << de + dl << " parameters\n";

  Eigen::MatrixXd s(n, de + dl);
  s << bundle.s_eta, bundle.s_lambda;
  InformationBlocks info;
  info.M0 = bundle.M0;
  info.q = bundle.q;
  info.d_eta = de;
  info.d_lam = bundle.d_lam;
  info.I_full = (s.transpose() * s) / static_cast<double>(n);
  info.I_full = 0.5 * (info.I_full + info.I_full.transpose()).eval();
  info.I_eta = info.I_full.topLeftCorner(de, de);
  info.I_lambda_eta = info.I_full.bottomLeftCorner(dl, de);
  info.I_lambda_lambda = info.I_full.bottomRightCorner(dl, dl);

  // The Schur complement is the Gram matrix of the residuals from regressing
  // s_lambda on s_eta, which keeps it positive semidefinite in floating point.
  // Directions of s_eta below a relative singular-value floor are dropped.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(bundle.s_eta);
  cod.setThreshold(1e-5);
  const Eigen::MatrixXd resid = bundle.s_lambda - bundle.s_eta * cod.solve(bundle.s_lambda);
  info.I_schur = (resid.transpose() * resid) / static_cast<double>(n);
  info.I_schur = 0.5 * (info.I_schur + info.I_schur.transpose()).eval();

  for (const auto& [first, width] : bundle.block_index)
    info.per_h.push_back(info.I_schur.block(first, first, width, width));
  return info;
}

}  // namespace panelmix
