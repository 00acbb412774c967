#include "panelmix/asymdist.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "panelmix/errors.hpp"
#include "panelmix/parallel.hpp"
#include "panelmix/rng.hpp"

namespace panelmix {

Eigen::VectorXd vmap(const Eigen::VectorXd& lambda) {
  const Eigen::Index d = lambda.size();
  detail::require(d >= 1, "vmap needs a non-empty vector");
  Eigen::VectorXd v(d * (d + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index a = 0; a < d; ++a) v(k++) = lambda(a) * lambda(a);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = a + 1; b < d; ++b) v(k++) = lambda(a) * lambda(b);
  return v;
}

std::vector<int> vmap_from_score_order(int q) {
  const auto pairs = lambda_pairs(q);
  const int d = q + 2;
  std::vector<std::pair<int, int>> order;
  for (int a = 0; a < d; ++a) order.emplace_back(a, a);
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b) order.emplace_back(a, b);
  std::vector<int> out;
  for (const auto& pr : order) out.push_back(static_cast<int>(std::find(pairs.begin(), pairs.end(), pr) - pairs.begin()));
  return out;
}

namespace {

// phi(u) = max(0, v'b)^2 / v'Iv with v = vmap(u), b = I G; degree 0 in u.
struct ConeObjective {
  const Eigen::VectorXd& b;
  const Eigen::MatrixXd& I;
  int d;

  double value(const Eigen::VectorXd& u, Eigen::VectorXd* grad) const {
    const Eigen::VectorXd v = vmap(u);
    const Eigen::VectorXd Iv = I * v;
    const double a = v.dot(b), den = v.dot(Iv);
    if (grad) grad->setZero(d);
    if (a <= 0 || !(den > 1e-300)) return 0.0;
    const double phi = a * a / den;
    if (grad) {
      const Eigen::VectorXd dv = (2.0 * a / den) * b - (2.0 * phi / den) * Iv;
      int k = 0;
      for (int i = 0; i < d; ++i, ++k) (*grad)(i) += 2.0 * u(i) * dv(k);
      for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j, ++k) {
          (*grad)(i) += u(j) * dv(k);
          (*grad)(j) += u(i) * dv(k);
        }
    }
    return phi;
  }
};

// BFGS ascent of phi from u0; returns the best unit direction found.
double bfgs_ascent(const ConeObjective& f, Eigen::VectorXd& u) {
  const int d = f.d;
  u.normalize();
  Eigen::VectorXd g(d), g_new(d), u_new(d);
  double phi = f.value(u, &g);
  if (phi <= 0) return phi;
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d) / std::max(g.norm(), 1e-12);
  for (int it = 0; it < 200; ++it) {
    if (g.norm() <= 1e-13 * std::max(1.0, phi)) break;
    Eigen::VectorXd step = H * g;
    if (step.dot(g) <= 0) {
      H = Eigen::MatrixXd::Identity(d, d) / std::max(g.norm(), 1e-12);
      step = H * g;
    }
    double t = 1.0, phi_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      u_new = u + t * step;
      const double nrm = u_new.norm();
      if (nrm > 0) {
        u_new /= nrm;
        phi_new = f.value(u_new, &g_new);
        if (phi_new >= phi + 1e-4 * t * step.dot(g) / std::max(1.0, nrm)) {
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) break;
    const Eigen::VectorXd s = u_new - u, y = g - g_new;  // ascent: curvature of -phi
    const double sy = s.dot(y);
    const double gain = phi_new - phi;
    u = u_new;
    g = g_new;
    phi = phi_new;
    if (sy > 1e-16) {
      const Eigen::VectorXd Hy = H * y;
      const double rho = 1.0 / sy;
      H += (1.0 + rho * y.dot(Hy)) * rho * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
    }
    if (gain <= 1e-15 * std::max(1.0, phi)) break;
  }
  return phi;
}

ConeProjection project_impl(const Eigen::VectorXd& G, const Eigen::MatrixXd& I, int d, Rng& rng, int n_random) {
  const Eigen::VectorXd b = I * G;
  const double gig = G.dot(b);
  ConeObjective f{b, I, d};

  std::vector<Eigen::VectorXd> starts;
  {
    Eigen::MatrixXd A(d, d);
    int k = 0;
    for (int i = 0; i < d; ++i) A(i, i) = G(k++);
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j, ++k) A(i, j) = A(j, i) = 0.5 * G(k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    starts.push_back(es.eigenvectors().col(d - 1));
  }
  std::normal_distribution<double> norm(0.0, 1.0);
  for (int s = 0; s < n_random; ++s) {
    Eigen::VectorXd u(d);
    for (int i = 0; i < d; ++i) u(i) = norm(rng);
    if (u.norm() == 0) u(0) = 1.0;
    starts.push_back(u);
  }
  if (d == 2) {
    double best = -1.0;
    Eigen::VectorXd arg(2);
    for (int deg = 0; deg < 180; ++deg) {
      const double th = deg * M_PI / 180.0;
      Eigen::VectorXd u(2);
      u << std::cos(th), std::sin(th);
      const double v = f.value(u, nullptr);
      if (v > best) {
        best = v;
        arg = u;
      }
    }
    starts.push_back(arg);
  }

  ConeProjection out;
  out.direction = Eigen::VectorXd::Unit(d, 0);
  double best = 0.0;
  for (auto& u : starts) {
    const double phi = bfgs_ascent(f, u);
    if (phi > best) {
      best = phi;
      out.direction = u;
    }
  }
  const Eigen::VectorXd v = vmap(out.direction);
  const double den = v.dot(I * v);
  const double a = v.dot(b);
  const double scale = (a > 0 && den > 1e-300) ? a / den : 0.0;
  out.t_hat = scale * v;
  out.r_min = std::max(0.0, gig - (scale > 0 ? a * a / den : 0.0));
  return out;
}

// Symmetric eigen decomposition with eigenvalues below 1e-12 lambda_max set
// to zero. Throws if the matrix is indefinite beyond 1e-8 lambda_max.
Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> clipped_eigen(const Eigen::MatrixXd& A, Eigen::VectorXd& lam,
                                                             int& clipped, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (A + A.transpose()));
  lam = es.eigenvalues();
  const double lmax = std::max(lam.maxCoeff(), 0.0);
  if (lam.minCoeff() < -1e-8 * lmax) {
    std::ostringstream os;
    os << what << " is not positive semidefinite (min eigenvalue " << lam.minCoeff() << ", max " << lmax
       << "); the sample is likely too small for this null model";
    throw NumericError(os.str());
  }
  for (Eigen::Index k = 0; k < lam.size(); ++k)
    if (lam(k) < 1e-12 * lmax) {
      if (lam(k) != 0.0) ++clipped;
      lam(k) = 0.0;
    }
  return es;
}

}  // namespace

ConeProjection project_cone(const Eigen::VectorXd& G, const Eigen::MatrixXd& I, int d, std::uint64_t seed,
                            int n_random) {
  detail::require(d >= 1, "lambda dimension must be positive");
  detail::require(G.size() == d * (d + 1) / 2, "G must have d(d+1)/2 entries");
  detail::require(I.rows() == G.size() && I.cols() == G.size(), "I must be square and match G");
  Eigen::VectorXd lam;
  int clipped = 0;
  const auto es = clipped_eigen(I, lam, clipped, "projection metric");
  Eigen::MatrixXd Ic = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  if (clipped > 0) std::cerr << "warning: clipped " << clipped << " eigenvalue(s) of the projection metric\n";
  Rng rng(seed);
  return project_impl(G, Ic, d, rng, n_random);
}

void attach_levels(NullDistribution& dist) {
  dist.levels.clear();
  for (double sig : {0.10, 0.05, 0.01}) dist.levels[sig] = critical_value(dist, 1.0 - sig);
}

NullDistribution simulate_null(const InformationBlocks& info, int M0, int n_draws, std::uint64_t seed,
                               int threads) {
  detail::require(n_draws >= 1, "n_draws must be positive");
  detail::require(info.M0 == M0 && static_cast<int>(info.per_h.size()) == M0, "information does not match M0");
  const int q = info.q, d = q + 2, dl = info.d_lam;
  detail::require(dl == d * (d + 1) / 2, "lambda block size mismatch");

  NullDistribution dist;
  dist.M0 = M0;
  dist.n_draws = n_draws;
  dist.seed = seed;

  Eigen::VectorXd lam;
  const auto es = clipped_eigen(info.I_schur, lam, dist.clipped_eigenvalues, "Schur complement of the information");
  const Eigen::MatrixXd root = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();

  const std::vector<int> perm = vmap_from_score_order(q);
  std::vector<Eigen::MatrixXd> Ih(M0), Ih_pinv(M0);
  for (int h = 0; h < M0; ++h) {
    Eigen::MatrixXd P(dl, dl);
    for (int a = 0; a < dl; ++a)
      for (int b = 0; b < dl; ++b) P(a, b) = info.per_h[h](perm[a], perm[b]);
    Eigen::VectorXd lh;
    const auto eh = clipped_eigen(P, lh, dist.clipped_eigenvalues, "local information block");
    Eigen::VectorXd inv = lh;
    for (Eigen::Index k = 0; k < inv.size(); ++k) inv(k) = lh(k) > 0 ? 1.0 / lh(k) : 0.0;
    Ih[h] = eh.eigenvectors() * lh.asDiagonal() * eh.eigenvectors().transpose();
    Ih_pinv[h] = eh.eigenvectors() * inv.asDiagonal() * eh.eigenvectors().transpose();
  }
  if (dist.clipped_eigenvalues > 0)
    std::cerr << "warning: clipped " << dist.clipped_eigenvalues << " near-zero eigenvalue(s) in the null information\n";

  std::vector<double> draws(n_draws);
  std::vector<char> bad(n_draws, 0);
  const int dim = static_cast<int>(root.rows());
  parallel_for(n_draws, threads, [&](int k) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
    std::normal_distribution<double> norm(0.0, 1.0);
    Eigen::VectorXd z(dim);
    for (int i = 0; i < dim; ++i) z(i) = norm(rng);
    const Eigen::VectorXd S = root * z;
    double best = 0.0;
    Eigen::VectorXd Sh(dl);
    for (int h = 0; h < M0; ++h) {
      for (int a = 0; a < dl; ++a) Sh(a) = S(h * dl + perm[a]);
      const Eigen::VectorXd G = Ih_pinv[h] * Sh;
      const ConeProjection pr = project_impl(G, Ih[h], d, rng, 32);
      const double gig = G.dot(Ih[h] * G);
      const double tit = pr.t_hat.dot(Ih[h] * pr.t_hat);
      if (std::abs(tit - (gig - pr.r_min)) > 1e-6 * (1.0 + gig)) bad[k] = 1;
      best = std::max(best, tit);
    }
    draws[k] = best;
  });
  dist.complementarity_failures = static_cast<int>(std::count(bad.begin(), bad.end(), 1));
  std::sort(draws.begin(), draws.end());
  dist.samples = std::move(draws);
  attach_levels(dist);
  return dist;
}

double critical_value(const NullDistribution& dist, double level) {
  detail::require(level > 0 && level < 1, "level must lie in (0,1)");
  detail::require(!dist.samples.empty(), "null distribution is empty");
  const double N = static_cast<double>(dist.samples.size());
  long long idx = static_cast<long long>(std::ceil(level * N - 1e-9)) - 1;
  idx = std::clamp<long long>(idx, 0, static_cast<long long>(dist.samples.size()) - 1);
  return dist.samples[idx];
}

double p_value(const NullDistribution& dist, double stat) {
  detail::require(!dist.samples.empty(), "null distribution is empty");
  const auto it = std::lower_bound(dist.samples.begin(), dist.samples.end(), stat);
  const double k = static_cast<double>(dist.samples.end() - it);
  return (k + 1.0) / (static_cast<double>(dist.samples.size()) + 1.0);
}

void write_samples_csv(const NullDistribution& dist, std::ostream& os) {
  os << "# M0=" << dist.M0 << " n_draws=" << dist.n_draws << " seed=" << dist.seed << "\n";
  os << "draw\n";
  os.precision(17);
  for (double s : dist.samples) os << s << "\n";
}

NullDistribution read_samples_csv(std::istream& is) {
  NullDistribution dist;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string tok;
      while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "M0") dist.M0 = std::stoi(val);
        else if (key == "seed") dist.seed = std::stoull(val);
      }
      continue;
    }
    if (line == "draw") continue;
    try {
      dist.samples.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw InputError("null distribution file has a non-numeric line: " + line);
    }
  }
  if (dist.samples.empty()) throw InputError("null distribution file has no samples");
  std::sort(dist.samples.begin(), dist.samples.end());
  dist.n_draws = static_cast<int>(dist.samples.size());
  attach_levels(dist);
  return dist;
}

}  // namespace panelmix
