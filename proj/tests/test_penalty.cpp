#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "panelmix/errors.hpp"
#include "panelmix/penalty.hpp"
#include "properties.hpp"

using namespace panelmix;

namespace {

// Bayes error for two components from the sufficient statistics of a unit:
// the period mean is N(mu_j, s_j^2 / T) and the within sum of squares is
// s_j^2 chi^2_{T-1}, independent of each other.
double bayes_error_quadrature(double a1, double mu1, double sd1, double mu2, double sd2, int T) {
  using boost::math::quadrature::gauss_kronrod;
  const boost::math::normal_distribution<double> m1(mu1, sd1 / std::sqrt(T)), m2(mu2, sd2 / std::sqrt(T));
  const boost::math::chi_squared_distribution<double> chi(T - 1);
  auto inner = [&](double S) {
    const double g1 = boost::math::pdf(chi, S / (sd1 * sd1)) / (sd1 * sd1);
    const double g2 = boost::math::pdf(chi, S / (sd2 * sd2)) / (sd2 * sd2);
    auto f = [&](double ybar) {
      return std::max(a1 * boost::math::pdf(m1, ybar) * g1, (1 - a1) * boost::math::pdf(m2, ybar) * g2);
    };
    return gauss_kronrod<double, 61>::integrate(f, -12.0, 12.0, 15, 1e-12);
  };
  const double correct = gauss_kronrod<double, 61>::integrate(inner, 0.0, 80.0, 15, 1e-10);
  return 1.0 - correct;
}

// Solves the calibration regression at nominal size for logit(a_n) by bisection.
double an_by_bisection(double r1, double r2, double r3, double r4, double r5, int n, int T, double omega) {
  auto f = [&](double a) {
    return r1 + r2 / T + r3 / n + r4 * std::log(a / (1 - a)) + r5 * std::log(omega / (1 - omega));
  };
  boost::math::tools::eps_tolerance<double> tol(50);
  const auto [lo, hi] = boost::math::tools::bisect(f, 1e-12, 1 - 1e-12, tol);
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("variance penalty values") {
  CHECK(pn_sigma(1.7, 1.7, 0.3) == 0.0);
  CHECK(pn_sigma(2.0, 1.0, 1.0) == doctest::Approx(-(0.5 + std::log(2.0) - 1.0)).epsilon(1e-14));
  CHECK(pn_sigma(2.0, 1.0, 1.0) == doctest::Approx(-0.19315).epsilon(1e-4));
  CHECK(pn_sigma(1e-7, 1.0, 1.0) < -1e6);
  CHECK_THROWS_AS(pn_sigma(0.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(pn_sigma(1.0, -1.0, 1.0), DomainError);
}

TEST_CASE("variance penalty shape") {
  for (double s0 : {0.2, 1.0, 7.5}) {
    CHECK(pn_sigma(s0 * 1.1, s0, 0.4) < 0.0);
    CHECK(pn_sigma(s0 * 0.9, s0, 0.4) < 0.0);
    for (double r : {0.01, 0.5, 0.99, 1.5, 30.0}) {
      const double v = pn_sigma(r * s0, s0, 0.25);
      CHECK(v <= 0.0);
      CHECK(pn_sigma(r * s0, s0, 0.5) == doctest::Approx(2 * v).epsilon(1e-14));
    }
  }
}

TEST_CASE("mixing share penalty") {
  CHECK(p_tau(0.5) == 0.0);
  CHECK(p_tau(0.25) == doctest::Approx(std::log(0.5)).epsilon(1e-14));
  CHECK(p_tau(1e-9) < -19.0);
  for (double t : {0.01, 0.2, 0.37, 0.49}) CHECK(p_tau(t) == doctest::Approx(p_tau(1 - t)).epsilon(1e-14));
  CHECK_THROWS_AS(p_tau(0.0), DomainError);
  CHECK_THROWS_AS(p_tau(1.0), DomainError);
  CHECK_THROWS_AS(p_tau(-0.3), DomainError);
}

TEST_CASE("total penalty is additive") {
  PenaltyConfig cfg;
  cfg.a_n = 0.3;
  cfg.sigma0_sq = Eigen::Vector3d(0.5, 1.0, 2.0);
  Eigen::Vector3d s2 = cfg.sigma0_sq;
  CHECK(total_penalty(s2, cfg) == 0.0);
  s2 << 0.5, 3.0, 0.7;
  CHECK(total_penalty(s2, cfg) == doctest::Approx(pn_sigma(3.0, 1.0, 0.3) + pn_sigma(0.7, 2.0, 0.3)));
  s2 << 0.1, 3.0, 0.7;
  CHECK(total_penalty(s2, cfg) ==
        doctest::Approx(pn_sigma(0.1, 0.5, 0.3) + pn_sigma(3.0, 1.0, 0.3) + pn_sigma(0.7, 2.0, 0.3)));

  PenaltyConfig shared{0.3, Eigen::VectorXd::Constant(1, 1.0)};
  const MixtureParams p = props::make_params({0.5, 0.5}, {0, 1}, {1.0, 2.0});
  CHECK(total_penalty(p, shared) == doctest::Approx(pn_sigma(4.0, 1.0, 0.3)));

  PenaltyConfig two{0.3, Eigen::Vector2d(1.0, 1.0)};
  CHECK_THROWS_AS(total_penalty(s2, two), ContractViolation);
}

TEST_CASE("penalty config validation") {
  PenaltyConfig c{0.1, Eigen::Vector2d(1.0, 0.0)};
  CHECK_THROWS_AS(c.validate(), DomainError);
  c.sigma0_sq << 1.0, 2.0;
  CHECK_NOTHROW(c.validate());
  c.a_n = -1;
  CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("tuning constant with covariates") {
  const double want[] = {0.1617, 0.0025, 0.0567, 0.4858, 0.5, 0.5};
  for (int m = 1; m <= 6; ++m) CHECK(compute_an(m, 100, 3, 0.2, true) == want[m - 1]);
}

TEST_CASE("tuning constant formula against an independent solve") {
  // Hand evaluation: exponent (-0.616 + 0.388 + 0.28143) / (-0.016) = -3.339.
  const double raw = 1.0 / (1.0 + std::exp((-0.616 + 0.776 / 2 + 28.143 / 100) / -0.016));
  CHECK(raw == doctest::Approx(0.966).epsilon(1e-3));
  CHECK(compute_an(1, 100, 2, std::nan(""), false) == 0.5);

  const double a2 = an_by_bisection(-0.811, -0.288, 4.637, -0.101, -0.197, 500, 5, 0.3);
  CHECK(compute_an(2, 500, 5, 0.3, false) == doctest::Approx(std::clamp(a2, 0.005, 0.5)).epsilon(1e-9));

  // Unclamped cases from every row.
  struct Row { int M0; double r[5]; int n, T; double w; };
  const Row rows[] = {{3, {-0.680, 0.611, 21.156, -0.111, 0.002}, 200, 4, 0.1},
                      {4, {-0.735, 0.258, 8.585, -0.128, -0.013}, 300, 2, 0.05},
                      {2, {-0.811, -0.288, 4.637, -0.101, -0.197}, 100, 2, 0.02}};
  for (const auto& r : rows) {
    const double oracle = an_by_bisection(r.r[0], r.r[1], r.r[2], r.r[3], r.r[4], r.n, r.T, r.w);
    CHECK(compute_an(r.M0, r.n, r.T, r.w, false) == doctest::Approx(std::clamp(oracle, 0.005, 0.5)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(compute_an(0, 100, 2, 0.1, false), DomainError);
  CHECK_THROWS_AS(compute_an(2, 100, 2, std::nan(""), false), DomainError);
}

TEST_CASE("tuning constant stays in range") {
  for (int m = 1; m <= 5; ++m)
    for (int n : {10, 100, 1000, 100000})
      for (int T : {1, 2, 5, 20})
        for (double w : {1e-6, 0.01, 0.2, 0.5}) {
          const double a = compute_an(m, n, T, w, false);
          CHECK(a >= 0.005);
          CHECK(a <= 0.5);
          CHECK(a == compute_an(m, n, T, w, false));
        }
}

TEST_CASE("misclassification rate") {
  const MixtureParams same = props::make_params({0.5, 0.5}, {0.0, 0.0}, {1.0, 1.0});
  CHECK(std::abs(misclassification(same, 3, 10000, 1) - 0.5) <= 0.02);

  const MixtureParams far = props::make_params({0.5, 0.5}, {-10.0, 10.0}, {1.0, 1.0});
  CHECK(misclassification(far, 3, 10000, 2) <= 1e-3 + 1e-15);

  const MixtureParams mid = props::make_params({0.5, 0.5}, {-0.5, 0.5}, {0.8, 1.2});
  const double oracle = bayes_error_quadrature(0.5, -0.5, 0.8, 0.5, 1.2, 3);
  const double mc = misclassification(mid, 3, 100000, 3);
  INFO("oracle " << oracle << " mc " << mc);
  CHECK(std::abs(mc - oracle) <= 0.01);

  CHECK(misclassification(mid, 3, 5000, 9) == misclassification(mid, 3, 5000, 9));

  double prev = 1.0;
  for (double d : {0.3, 0.8, 1.5}) {
    const double w = misclassification(props::make_params({0.5, 0.5}, {-d, d}, {1.0, 1.0}), 2, 20000, 4);
    CHECK(w < prev);
    prev = w;
  }

  CHECK_THROWS_AS(misclassification(props::make_params({1.0}, {0.0}, {1.0}), 3, 100, 1), DomainError);
}
