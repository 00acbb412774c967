#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <boost/math/differentiation/autodiff.hpp>

#include "panelmix/asymdist.hpp"
#include "panelmix/errors.hpp"
#include "panelmix/scores.hpp"
#include "properties.hpp"

using namespace panelmix;
namespace ad = boost::math::differentiation;

namespace {

// Unit density of one component with q = 1, p = 1, differentiated exactly by
// forward-mode autodiff in (mu, sigma^2, beta). Returns f and the Hessian of f
// divided by f.
struct UnitHessian {
  double f;
  Eigen::Matrix3d H;  // d^2 f / (f d a d b), coordinates mu, s2, beta
};

UnitHessian unit_hessian(const PanelDataset& d, int i, const ComponentParams& th, double gamma) {
  const auto vars = ad::make_ftuple<double, 2, 2, 2>(th.mu, th.sigma_sq, th.beta(0));
  const auto& m = std::get<0>(vars);
  const auto& s2 = std::get<1>(vars);
  const auto& b = std::get<2>(vars);
  auto resid = [&](int t) { return d.y(i, t) - gamma * d.z[0](i, t) - m - d.x[0](i, t) * b; };
  auto r0 = resid(0);
  auto ss = r0 * r0;
  for (int t = 1; t < d.T(); ++t) {
    auto r = resid(t);
    ss = ss + r * r;
  }
  const auto f = exp(-ss / (2 * s2)) * pow(2 * M_PI * s2, -0.5 * d.T());
  UnitHessian out;
  out.f = f.derivative(0, 0, 0);
  const int idx[3][3][3] = {{{2, 0, 0}, {1, 1, 0}, {1, 0, 1}},
                            {{1, 1, 0}, {0, 2, 0}, {0, 1, 1}},
                            {{1, 0, 1}, {0, 1, 1}, {0, 0, 2}}};
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < 3; ++c) out.H(a, c) = f.derivative(idx[a][c][0], idx[a][c][1], idx[a][c][2]) / out.f;
  return out;
}

double lambda_oracle(const UnitHessian& u, std::pair<int, int> pr) {
  const double h = u.H(pr.first, pr.second);
  return pr.first == pr.second ? 0.5 * h : h;
}

// n-th derivative of the normal kernel in mu over the kernel itself.
double kernel_derivative_ratio(int order, double y, double mu, double sigma) {
  const auto m = ad::make_fvar<double, 4>(mu);
  const auto g = exp(-(y - m) * (y - m) / (2 * sigma * sigma));
  return g.derivative(order) / g.derivative(0);
}

}  // namespace

TEST_CASE("Hermite polynomials") {
  const double t = 1.7;
  CHECK(hermite(1, t) == t);
  CHECK(hermite(2, t) == doctest::Approx(t * t - 1));
  CHECK(hermite(3, t) == doctest::Approx(t * t * t - 3 * t));
  CHECK(hermite(4, t) == doctest::Approx(t * t * t * t - 6 * t * t + 3));
  CHECK_THROWS_AS(hermite(5, t), ContractViolation);
  CHECK_THROWS_AS(hermite_scaled(2, 1.0, 0.0), DomainError);
}

TEST_CASE("scaled Hermite terms are normalized derivatives of the normal kernel") {
  const int fact[] = {1, 1, 2, 6, 24};
  for (double y : {-2.0, 0.3, 1.9})
    for (double sigma : {0.5, 1.0, 1.7})
      for (int b = 1; b <= 4; ++b) {
        const double mu = 0.2;
        const double want = kernel_derivative_ratio(b, y, mu, sigma) / fact[b];
        CHECK(hermite_scaled(b, y - mu, sigma) == doctest::Approx(want).epsilon(1e-12));
      }
  // d/d(sigma^2) of the normal density over the density.
  const double y = 0.9, mu = -0.1, s2 = 1.4;
  const auto v = ad::make_fvar<double, 2>(s2);
  const auto g = exp(-(y - mu) * (y - mu) / (2 * v)) / sqrt(v);
  CHECK(hermite_scaled(2, y - mu, std::sqrt(s2)) == doctest::Approx(g.derivative(1) / g.derivative(0)).epsilon(1e-12));
  CHECK(6 * hermite_scaled(4, y - mu, std::sqrt(s2)) ==
        doctest::Approx(g.derivative(2) / g.derivative(0)).epsilon(1e-12));
}

TEST_CASE("lambda column order") {
  const std::vector<std::pair<int, int>> want = {{0, 0}, {0, 1}, {1, 1}, {0, 2}, {0, 3},
                                                 {1, 2}, {1, 3}, {2, 2}, {3, 3}, {2, 3}};
  CHECK(lambda_pairs(2) == want);
  CHECK(lambda_pairs(0).size() == 3u);
  for (int q = 0; q <= 4; ++q) CHECK(static_cast<int>(lambda_pairs(q).size()) == lambda_dim(q));
  CHECK(vmap_from_score_order(1) == std::vector<int>{0, 2, 5, 1, 3, 4});
  for (int q = 0; q <= 3; ++q) {
    const auto perm = vmap_from_score_order(q);
    std::vector<int> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < static_cast<int>(sorted.size()); ++k) CHECK(sorted[k] == k);
  }
}

TEST_CASE("homogeneity lambda scores match exact second derivatives") {
  const MixtureParams p = props::make_params({1.0}, {0.3}, {0.9}, {{0.5}}, {-0.4});
  const PanelDataset d = props::simulate(p, 12, 3, 21);
  const ScoreBundle s = score_homogeneity(d, p.gamma, p.components[0]);
  const auto pairs = lambda_pairs(1);
  double worst = 0;
  for (int i = 0; i < d.n(); ++i) {
    const UnitHessian u = unit_hessian(d, i, p.components[0], p.gamma(0));
    for (std::size_t c = 0; c < pairs.size(); ++c) {
      const double want = lambda_oracle(u, pairs[c]);
      worst = std::max(worst, std::abs(s.s_lambda(i, c) - want) / (1 + std::abs(want)));
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("general lambda scores weight each block by the posterior ratio") {
  const MixtureParams p = props::make_params({0.35, 0.65}, {-0.8, 0.9}, {0.8, 1.2}, {{0.4}, {-0.3}}, {0.2});
  const PanelDataset d = props::simulate(p, 10, 2, 5);
  const ScoreBundle s = score_general(d, p);
  CHECK(s.s_lambda.cols() == 2 * lambda_dim(1));
  const auto pairs = lambda_pairs(1);
  double worst = 0;
  for (int i = 0; i < d.n(); ++i) {
    const UnitHessian u0 = unit_hessian(d, i, p.components[0], p.gamma(0));
    const UnitHessian u1 = unit_hessian(d, i, p.components[1], p.gamma(0));
    const double mix = p.alpha(0) * u0.f + p.alpha(1) * u1.f;
    for (int h = 0; h < 2; ++h) {
      const UnitHessian& u = h == 0 ? u0 : u1;
      const double w = p.alpha(h) * u.f / mix;
      for (std::size_t c = 0; c < pairs.size(); ++c) {
        const double want = w * lambda_oracle(u, pairs[c]);
        worst = std::max(worst, std::abs(s.s_lambda(i, h * lambda_dim(1) + c) - want) / (1 + std::abs(want)));
      }
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("eta scores match central differences") {
  const props::Verdict v = props::score_finite_difference();
  INFO(v.detail);
  CHECK(v.pass);
}

TEST_CASE("eta scores sum to zero at the closed-form one-component fit") {
  const MixtureParams truth = props::make_params({1.0}, {0.5}, {1.3});
  const PanelDataset d = props::simulate(truth, 200, 4, 2);
  const double mu = d.y.mean();
  const double s2 = (d.y.array() - mu).square().mean();
  const ScoreBundle s = score_homogeneity(d, Eigen::VectorXd(), {mu, s2, Eigen::VectorXd()});
  const Eigen::VectorXd total = s.s_eta.colwise().sum();
  CHECK(total.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("information blocks") {
  const props::Verdict v = props::information_singularity();
  INFO(v.detail);
  CHECK(v.pass);

  // Where I_eta is well conditioned the Schur complement matches the textbook formula.
  const MixtureParams p = props::make_params({0.4, 0.6}, {-1.0, 1.0}, {0.9, 1.1});
  const PanelDataset d = props::simulate(p, 3000, 3, 8);
  const InformationBlocks info = information(score_general(d, p));
  const Eigen::MatrixXd classic =
      info.I_lambda_lambda - info.I_lambda_eta * info.I_eta.ldlt().solve(info.I_lambda_eta.transpose());
  CHECK((info.I_schur - classic).cwiseAbs().maxCoeff() < 1e-8 * (1 + classic.cwiseAbs().maxCoeff()));
  CHECK((info.I_schur - info.I_schur.transpose()).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info.I_schur);
  CHECK(es.eigenvalues().minCoeff() > 0);
  CHECK(info.per_h.size() == 2u);
  CHECK(info.I_full.rows() == info.d_eta + 2 * info.d_lam);
}

TEST_CASE("score input validation") {
  const MixtureParams p = props::make_params({0.5, 0.5}, {1.0, -1.0}, {1.0, 1.0});
  const PanelDataset d = props::simulate(props::make_params({1.0}, {0.0}, {1.0}), 20, 2, 1);
  CHECK_THROWS_AS(score_general(d, p), ContractViolation);
  CHECK_THROWS_AS(score_homogeneity(d, Eigen::VectorXd(), {0.0, -1.0, Eigen::VectorXd()}), DomainError);
  CHECK_THROWS_AS(score_homogeneity(d, Eigen::VectorXd::Zero(1), {0.0, 1.0, Eigen::VectorXd()}), ContractViolation);
}
