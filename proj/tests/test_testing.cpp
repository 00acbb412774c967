#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "panelmix/errors.hpp"
#include "panelmix/sht.hpp"
#include "panelmix/testing.hpp"
#include "properties.hpp"

using namespace panelmix;

namespace {

PenaltyConfig formula_penalty() {
  PenaltyConfig p;
  p.an_mode = AnMode::formula;
  return p;
}

EMConfig config(std::uint64_t seed) {
  EMConfig c;
  c.seed = seed;
  return c;
}

TestOptions quick() {
  TestOptions o;
  o.n_draws = 1000;
  o.misclass_draws = 2000;
  return o;
}

const MixtureParams kTwo = props::make_params({0.5, 0.5}, {-2.0, 2.0}, {1.0, 1.0});
const MixtureParams kOne = props::make_params({1.0}, {0.0}, {1.0});

double log_normal_pdf(double y, double mu, double s2) { return -0.5 * std::log(2 * M_PI * s2) - (y - mu) * (y - mu) / (2 * s2); }

}  // namespace

TEST_CASE("EM test rejects homogeneity for separated components") {
  const PanelDataset d = props::simulate(kTwo, 200, 3, 1);
  const TestOutcome t = em_test(d, 1, formula_penalty(), config(1), quick());
  CHECK(t.p_source == PSource::asymptotic);
  CHECK(t.p_value < 0.01);
  CHECK(t.rejects(0.01));
  CHECK(t.statistic >= t.crit.at(0.01));
  CHECK(t.crit.at(0.10) <= t.crit.at(0.05));
  CHECK(t.crit.at(0.05) <= t.crit.at(0.01));
  CHECK(t.local_stats.size() == 1u);
  CHECK(t.diagnostics.an_source == "formula");
  CHECK(t.diagnostics.K == 3);
}

TEST_CASE("EM test rarely rejects on homogeneous panels") {
  int rejections = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const PanelDataset d = props::simulate(kOne, 150, 3, 100 + s);
    const TestOutcome t = em_test(d, 1, formula_penalty(), config(s), quick());
    CHECK(t.statistic >= 0);
    rejections += t.rejects(0.05) ? 1 : 0;
  }
  // Binomial(10, 0.05): four or more rejections has probability about 0.001.
  CHECK(rejections <= 3);
}

TEST_CASE("PLRT uses the scaled penalty and the alpha floor") {
  const PanelDataset d = props::simulate(kTwo, 200, 3, 2);
  const TestOutcome e = em_test(d, 1, formula_penalty(), config(2), quick());
  const TestOutcome p = plrt(d, 1, formula_penalty(), config(2), quick());
  CHECK(p.method == TestMethod::plrt);
  CHECK(p.diagnostics.a_n == doctest::Approx(10 * e.diagnostics.a_n));
  CHECK(p.diagnostics.epsilon == 0.1);
  CHECK(p.p_value < 0.01);
  const double floor = p.best_alt_fit.params.alpha.minCoeff();
  CHECK(floor >= 0.1 - 1e-12);

  PenaltyConfig fixed{0.2, Eigen::VectorXd(), AnMode::user_fixed};
  const TestOutcome q = plrt(d, 1, fixed, config(2), quick());
  CHECK(q.diagnostics.a_n == 0.2);
  CHECK(q.diagnostics.an_source == "user_fixed");
}

TEST_CASE("parametric bootstrap") {
  const PanelDataset d = props::simulate(kTwo, 100, 2, 3);
  EMConfig c = config(3);
  c.n_starts = 4;
  const TestOutcome t = bootstrap_test(d, 1, formula_penalty(), c, 99, TestMethod::em_test, quick());
  CHECK(t.p_source == PSource::bootstrap);
  CHECK(t.p_value <= 0.02);
  CHECK(t.p_value >= 0.01);
  REQUIRE(t.reference);
  CHECK(t.reference->samples.size() + t.diagnostics.bootstrap_dropped == 99u);
}

TEST_CASE("a_n provenance") {
  const PanelDataset d = props::simulate(kTwo, 120, 3, 4);
  const EMConfig c = config(4);
  const TestOptions o = quick();
  const FitResult null2 = fit_null(d, 2, c);
  TestDiagnostics diag;

  PenaltyConfig fixed{0.37, Eigen::VectorXd(), AnMode::user_fixed};
  CHECK(resolve_an(d, 2, null2.params, fixed, c, o, diag) == 0.37);
  CHECK(diag.an_source == "user_fixed");

  const double a = resolve_an(d, 2, null2.params, formula_penalty(), c, o, diag);
  CHECK(diag.an_source == "formula");
  CHECK(diag.omega > 0);
  CHECK(diag.omega <= 0.5);
  CHECK(a == compute_an(2, d.n(), d.T(), diag.omega, false));

  const MixtureParams cov = props::make_params({0.5, 0.5}, {-2.0, 2.0}, {1.0, 1.0}, {{0.3}, {0.3}});
  const PanelDataset dx = props::simulate(cov, 120, 3, 5);
  const FitResult nx = fit_null(dx, 2, c);
  CHECK(resolve_an(dx, 2, nx.params, formula_penalty(), c, o, diag) == 0.0025);
  CHECK(diag.an_source == "covariate_constants");
}

TEST_CASE("degenerate likelihood ratio against a direct evaluation") {
  const PanelDataset d = props::simulate(kOne, 400, 2, 6);
  const UnboundednessReport r = demonstrate_unboundedness(d, 0.3);
  const int n = d.n(), T = d.T();
  int istar = 0;
  double smin = 1e300;
  for (int i = 0; i < n; ++i) {
    const double m = 0.5 * (d.y(i, 0) + d.y(i, 1));
    const double s = (d.y(i, 0) - m) * (d.y(i, 0) - m) + (d.y(i, 1) - m) * (d.y(i, 1) - m);
    if (s < smin) {
      smin = s;
      istar = i;
    }
  }
  CHECK(r.i_star == istar);
  CHECK(r.s2_star == doctest::Approx(smin / (T - 1)));
  const double mu1 = d.y.row(istar).mean();
  const double mu0 = d.y.mean(), s0 = (d.y.array() - mu0).square().mean();
  double lr = 0;
  for (int i = 0; i < n; ++i) {
    double l1 = 0, l0 = 0;
    for (int t = 0; t < T; ++t) {
      l1 += log_normal_pdf(d.y(i, t), mu1, r.s2_star);
      l0 += log_normal_pdf(d.y(i, t), mu0, s0);
    }
    const double mix = std::log(std::exp(l1 - l0) / n + (1.0 - 1.0 / n));
    lr += 2 * mix;
  }
  CHECK(r.lr_degenerate == doctest::Approx(lr).epsilon(1e-9));
  const double pen = -0.3 * (s0 / r.s2_star - std::log(s0 / r.s2_star) - 1);
  CHECK(r.lr_penalized == doctest::Approx(lr + 2 * pen).epsilon(1e-9));
  CHECK_THROWS_AS(demonstrate_unboundedness(props::simulate(kOne, 10, 1, 1)), ContractViolation);
}

TEST_CASE("sequential selection and information criteria") {
  const PanelDataset two = props::simulate(kTwo, 200, 3, 7);
  const PanelDataset one = props::simulate(kOne, 200, 3, 8);
  const EMConfig c = config(7);
  const LevelSchedule lvl;

  const SelectionResult s2 = select_sht(two, 4, lvl, TestMethod::em_test, formula_penalty(), c, quick());
  CHECK(s2.M_hat == 2);
  CHECK_FALSE(s2.censored);
  REQUIRE(s2.per_M.size() == 2u);
  CHECK(s2.per_M[0].decision == "reject");
  CHECK(s2.per_M[1].decision == "fail_to_reject");

  const SelectionResult s1 = select_sht(one, 4, lvl, TestMethod::em_test, formula_penalty(), c, quick());
  CHECK(s1.M_hat == 1);

  const SelectionResult cens = select_sht(two, 1, lvl, TestMethod::em_test, formula_penalty(), c, quick());
  CHECK(cens.M_hat == 1);
  CHECK(cens.censored);

  std::vector<FitResult> fits;
  const auto [a, b] = information_criteria(two, 3, plain_penalty(two), c, &fits);
  CHECK(fits.size() == 3u);
  CHECK(b.M_hat == 2);
  CHECK(a.M_hat >= 2);
  for (int M = 1; M <= 3; ++M) {
    const int k = parameter_count(M, 0, 0);
    CHECK(a.per_M[M - 1].statistic == doctest::Approx(-2 * fits[M - 1].loglik + 2 * k));
    CHECK(b.per_M[M - 1].statistic == doctest::Approx(-2 * fits[M - 1].loglik + k * std::log(200.0)));
  }
  const auto [a1, b1] = information_criteria(one, 3, plain_penalty(one), c);
  CHECK(b1.M_hat == 1);
}

TEST_CASE("criteria and level schedule") {
  CHECK(aic(-100.0, 5) == 210.0);
  CHECK(bic(-100.0, 5, 100) == doctest::Approx(200.0 + 5 * std::log(100.0)));
  LevelSchedule s;
  CHECK(s.level(1000) == 0.05);
  s.shrinking = true;
  CHECK(s.level(100) == 0.05);
  CHECK(s.level(1000) == doctest::Approx(0.25 / std::log(1000.0)));
}

TEST_CASE("statistics are non-negative across random designs") {
  const props::Verdict v = props::statistic_nonnegativity(6);
  INFO(v.detail);
  CHECK(v.pass);
}
