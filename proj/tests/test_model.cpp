#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>
#include <boost/math/constants/constants.hpp>

#include "panelmix/dataset.hpp"
#include "panelmix/errors.hpp"
#include "panelmix/model.hpp"
#include "properties.hpp"

using namespace panelmix;
using Big = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<256>, boost::multiprecision::et_off>;

namespace {

// Direct evaluation in 256-bit arithmetic, written from the density formula
// without the library's log-sum-exp path.
Big oracle_loglik(const PanelDataset& d, const MixtureParams& p) {
  const Big pi = boost::math::constants::pi<Big>();
  Big total = 0;
  for (int i = 0; i < d.n(); ++i) {
    Big mix = 0;
    for (int j = 0; j < p.M(); ++j) {
      const auto& c = p.components[j];
      Big dens = 1;
      for (int t = 0; t < d.T(); ++t) {
        Big m = Big(c.mu);
        for (int k = 0; k < d.q(); ++k) m += Big(d.x[k](i, t)) * Big(c.beta(k));
        for (int k = 0; k < d.p(); ++k) m += Big(d.z[k](i, t)) * Big(p.gamma(k));
        const Big u = Big(d.y(i, t)) - m;
        const Big s2 = Big(c.sigma_sq);
        dens *= exp(-u * u / (2 * s2)) / sqrt(2 * pi * s2);
      }
      mix += Big(p.alpha(j)) * dens;
    }
    total += log(mix);
  }
  return total;
}

BasicMixtureParams<Big> to_big(const MixtureParams& p) {
  BasicMixtureParams<Big> b;
  b.alpha = p.alpha.cast<Big>();
  for (const auto& c : p.components) b.components.push_back({Big(c.mu), Big(c.sigma_sq), c.beta.cast<Big>()});
  b.gamma = p.gamma.cast<Big>();
  return b;
}

}  // namespace

TEST_CASE("dataset validation") {
  PanelDataset d = make_panel(Eigen::MatrixXd::Ones(3, 2));
  CHECK(d.n() == 3);
  CHECK(d.T() == 2);
  CHECK_NOTHROW(d.validate());
  d.y(1, 1) = std::nan("");
  CHECK_THROWS_AS(d.validate(), InputError);
  PanelDataset e = make_panel(Eigen::MatrixXd::Ones(3, 2));
  e.x.push_back(Eigen::MatrixXd::Ones(2, 2));
  CHECK_THROWS_AS(e.validate(), InputError);
}

TEST_CASE("permuted reorders units and rejects bad permutations") {
  Eigen::MatrixXd y(3, 2);
  y << 1, 2, 3, 4, 5, 6;
  const PanelDataset d = make_panel(y);
  const PanelDataset p = d.permuted({2, 0, 1});
  CHECK(p.y(0, 0) == 5);
  CHECK(p.y(1, 1) == 2);
  CHECK_THROWS_AS(d.permuted({0, 0, 1}), ContractViolation);
  CHECK_THROWS_AS(d.permuted({0, 1}), ContractViolation);
}

TEST_CASE("log-likelihood matches a 256-bit direct evaluation") {
  const MixtureParams p = props::make_params({0.3, 0.7}, {-1.0, 0.8}, {0.7, 1.3}, {{0.5}, {-0.4}}, {0.25});
  const PanelDataset d = props::simulate(p, 40, 3, 11);
  const double got = mixture_loglik(d, p);
  const Big want = oracle_loglik(d, p);
  CHECK(std::abs(got - want.convert_to<double>()) <= 1e-10 * std::abs(got));

  // The templated path evaluated in 256-bit arithmetic agrees far beyond double.
  const Big big = mixture_loglik(d, to_big(p));
  CHECK(abs(big - want) < Big(1e-40) * abs(want));
}

TEST_CASE("log-sum-exp stays finite where direct evaluation underflows") {
  // A unit 60 standard deviations away: densities underflow in double.
  Eigen::MatrixXd y(1, 2);
  y << 60.0, 60.5;
  const PanelDataset d = make_panel(y);
  const MixtureParams p = props::make_params({0.5, 0.5}, {-1.0, 0.0}, {1.0, 1.0});
  const double got = mixture_loglik(d, p);
  CHECK(std::isfinite(got));
  const Big want = oracle_loglik(d, p);
  CHECK(std::abs(got - want.convert_to<double>()) <= 1e-12 * std::abs(got));
}

TEST_CASE("zero mixing proportion contributes nothing") {
  const MixtureParams p = props::make_params({1.0, 0.0}, {0.0, 5.0}, {1.0, 1.0});
  const MixtureParams one = props::make_params({1.0}, {0.0}, {1.0});
  const PanelDataset d = props::simulate(one, 30, 2, 3);
  CHECK(mixture_loglik(d, p) == doctest::Approx(mixture_loglik(d, one)).epsilon(1e-14));
  const Eigen::MatrixXd w = weighted_component_logliks(d, p);
  CHECK(std::isinf(w(0, 1)));
}

TEST_CASE("parameter validation") {
  MixtureParams p = props::make_params({0.5, 0.5}, {0.0, 1.0}, {1.0, 1.0});
  CHECK_NOTHROW(validate(p));
  p.alpha << 0.6, 0.5;
  CHECK_THROWS_AS(validate(p), DomainError);
  p.alpha << 1.2, -0.2;
  CHECK_THROWS_AS(validate(p), DomainError);
  p.alpha << 0.5, 0.5;
  p.components[1].sigma_sq = 0.0;
  CHECK_THROWS_AS(validate(p), DomainError);
  p.components[1].sigma_sq = 1.0;
  p.components[1].beta = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(validate(p), ContractViolation);
}

TEST_CASE("canonical order sorts by mean, then variance, then slopes") {
  MixtureParams p = props::make_params({0.2, 0.3, 0.5}, {1.0, -1.0, 1.0}, {2.0, 1.0, 1.0});
  const MixtureParams c = canonicalize(p);
  CHECK(c.components[0].mu == -1.0);
  CHECK(c.alpha(0) == 0.3);
  CHECK(c.components[1].sigma_sq == 1.0);
  CHECK(c.alpha(1) == 0.5);
  CHECK(c.components[2].sigma_sq == 4.0);
  CHECK(canonicalize(c) == c);

  MixtureParams b = props::make_params({0.4, 0.6}, {0.0, 0.0}, {1.0, 1.0}, {{0.9}, {0.1}});
  CHECK(canonicalize(b).components[0].beta(0) == 0.1);
}

TEST_CASE("relabeling invariance of the likelihood") {
  const MixtureParams p = props::make_params({0.2, 0.3, 0.5}, {1.0, -1.0, 0.2}, {2.0, 1.0, 0.6});
  const PanelDataset d = props::simulate(p, 50, 2, 9);
  CHECK(mixture_loglik(d, canonicalize(p)) == doctest::Approx(mixture_loglik(d, p)).epsilon(1e-13));
}

TEST_CASE("parameter count") {
  CHECK(parameter_count(1, 0, 0) == 2);
  CHECK(parameter_count(2, 0, 0) == 5);
  CHECK(parameter_count(5, 1, 0) == 4 + 15);
  CHECK(parameter_count(3, 2, 1) == 2 + 12 + 1);
}

TEST_CASE("unit likelihood of a single normal component") {
  // Hand computation for T = 2, mu = 0, sigma^2 = 1 at y = (1, -1).
  Eigen::MatrixXd y(1, 2);
  y << 1.0, -1.0;
  const PanelDataset d = make_panel(y);
  const MixtureParams p = props::make_params({1.0}, {0.0}, {1.0});
  CHECK(mixture_loglik(d, p) == doctest::Approx(-std::log(2 * M_PI) - 1.0).epsilon(1e-15));
}
