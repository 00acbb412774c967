#include "panelmix/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "panelmix/parallel.hpp"
#include "panelmix/rng.hpp"

namespace panelmix {

void EMConfig::validate() const {
  detail::require(max_iter >= 1, "max_iter must be positive");
  detail::require(tol > 0, "tol must be positive");
  detail::require(n_starts >= 1, "n_starts must be positive");
  detail::require(epsilon_alpha > 0 && epsilon_alpha < 0.5, "epsilon_alpha must lie in (0, 0.5)");
  detail::require(K >= 1, "K must be at least 1");
  detail::require(!tau_set.empty(), "tau_set must not be empty");
  bool has_half = false;
  for (double t : tau_set) {
    detail::require(t > 0 && t <= 0.5, "tau_set entries must lie in (0, 0.5]");
    has_half = has_half || t == 0.5;
  }
  detail::require(has_half, "tau_set must contain 0.5");
  detail::require(burn_iter >= 1 && n_polish >= 1, "burn_iter and n_polish must be positive");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class TauMode { none, fixed, free_penalized, free_plain };

struct Constraints {
  std::vector<std::pair<double, double>> intervals;  // per component; empty means none
  int pair = -1;                                     // 0-based first index of the split pair
  TauMode tau_mode = TauMode::none;
  double tau0 = 0.5;
  double floor = 0.0;
};

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

double pair_tau(const MixtureParams& p, const Constraints& c) {
  if (c.tau_mode == TauMode::fixed) return c.tau0;
  const double s = p.alpha(c.pair) + p.alpha(c.pair + 1);
  if (!(s > 0)) throw NumericError("split pair lost all mass");
  return p.alpha(c.pair) / s;
}

bool tau_penalized(const Constraints& c) {
  return c.pair >= 0 && (c.tau_mode == TauMode::fixed || c.tau_mode == TauMode::free_penalized);
}

struct State {
  MixtureParams params;
  Eigen::MatrixXd weights;
  double loglik = -kInf;
  double penalty = 0.0;
  double objective = -kInf;
  int iterations = 0;
  bool converged = false;
  bool ridge = false;
  bool clamped = false;
  bool failed = false;
  std::vector<double> trace;
};

void evaluate(const PanelDataset& data, const PenaltyConfig& penalty, const Constraints& cons, State& st) {
  const Eigen::MatrixXd lw = weighted_component_logliks(data, st.params);
  const Eigen::VectorXd lse = log_sum_exp_rows<double>(lw);
  st.loglik = lse.sum();
  st.weights = (lw.colwise() - lse).array().exp().matrix();
  st.penalty = total_penalty(st.params, penalty);
  if (tau_penalized(cons)) st.penalty += p_tau(pair_tau(st.params, cons));
  st.objective = st.loglik + st.penalty;
  if (!std::isfinite(st.objective)) throw NumericError("penalized log-likelihood is not finite");
}

// Solves A x = b for symmetric A; falls back to a ridge of 1e-10 trace(A).
Eigen::VectorXd solve_sym(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, bool& ridge) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  const double tr = A.trace();
  const double dmin = ldlt.info() == Eigen::Success ? ldlt.vectorD().minCoeff() : -1.0;
  if (ldlt.info() == Eigen::Success && dmin > 1e-12 * std::max(tr, 1e-300)) return ldlt.solve(b);
  ridge = true;
  const double jitter = 1e-10 * std::max(tr, 1.0);
  Eigen::MatrixXd R = A;
  R.diagonal().array() += jitter;
  return R.ldlt().solve(b);
}

Eigen::VectorXd alpha_update(const Eigen::VectorXd& W, double n, const Constraints& c) {
  const int M = static_cast<int>(W.size());
  if (c.pair < 0 || c.tau_mode == TauMode::none || c.tau_mode == TauMode::free_plain) {
    if (c.floor > 0) return project_alpha(W, c.floor, 1.0);
    return W / n;
  }
  const int h = c.pair;
  if (c.tau_mode == TauMode::fixed) {
    Eigen::VectorXd m(M - 1);
    for (int k = 0; k < M - 1; ++k) m(k) = k < h ? W(k) : (k == h ? W(h) + W(h + 1) : W(k + 1));
    const Eigen::VectorXd a = c.floor > 0 ? project_alpha(m, c.floor, 1.0) : Eigen::VectorXd(m / n);
    Eigen::VectorXd out(M);
    for (int k = 0; k < M - 1; ++k) {
      if (k < h) out(k) = a(k);
      else if (k > h) out(k + 1) = a(k);
    }
    out(h) = c.tau0 * a(h);
    out(h + 1) = (1.0 - c.tau0) * a(h);
    return out;
  }
  Eigen::VectorXd out = W / n;
  const double pi = (W(h) + W(h + 1)) / n;
  const double tau = update_tau(W(h), W(h + 1));
  out(h) = tau * pi;
  out(h + 1) = (1.0 - tau) * pi;
  return out;
}

MixtureParams constrained_m_step(const PanelDataset& data, const Eigen::MatrixXd& Wt,
                                 const PenaltyConfig& penalty, const MixtureParams& cur,
                                 const Constraints& cons, bool& ridge, bool& clamped) {
  const int n = data.n(), T = data.T(), q = data.q(), p = data.p(), M = cur.M();
  detail::require(Wt.rows() == n && Wt.cols() == M, "weight matrix has the wrong shape");
  const Eigen::VectorXd Wsum = Wt.colwise().sum().transpose();
  MixtureParams next = cur;
  clamped = false;

  // gamma given the current means and variances.
  if (p > 0) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd inv_s2(M);
    for (int j = 0; j < M; ++j) inv_s2(j) = 1.0 / cur.components[j].sigma_sq;
    const Eigen::VectorXd c = Wt * inv_s2;
    Eigen::VectorXd zt(p);
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < n; ++i) {
        double target = c(i) * data.y(i, t);
        for (int j = 0; j < M; ++j) {
          double m = cur.components[j].mu;
          for (int k = 0; k < q; ++k) m += data.x[k](i, t) * cur.components[j].beta(k);
          target -= Wt(i, j) * inv_s2(j) * m;
        }
        for (int k = 0; k < p; ++k) zt(k) = data.z[k](i, t);
        A.noalias() += c(i) * zt * zt.transpose();
        b.noalias() += target * zt;
      }
    }
    next.gamma = solve_sym(A, b, ridge);
  }

  Eigen::MatrixXd ytil = data.y;
  for (int k = 0; k < p; ++k) ytil -= data.z[k] * next.gamma(k);

  const double an = penalty.a_n;
  Eigen::VectorXd xr(q + 1);
  for (int j = 0; j < M; ++j) {
    auto& th = next.components[j];
    const double Wj = Wsum(j);
    if (Wj > 1e-10) {
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(q + 1, q + 1);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(q + 1);
      for (int t = 0; t < T; ++t) {
        for (int i = 0; i < n; ++i) {
          const double w = Wt(i, j);
          if (w == 0.0) continue;
          xr(0) = 1.0;
          for (int k = 0; k < q; ++k) xr(k + 1) = data.x[k](i, t);
          A.noalias() += w * xr * xr.transpose();
          b.noalias() += (w * ytil(i, t)) * xr;
        }
      }
      Eigen::VectorXd sol = solve_sym(A, b, ridge);
      if (!cons.intervals.empty()) {
        const auto [lo, hi] = cons.intervals[j];
        const double mu = std::clamp(sol(0), lo, hi);
        if (mu != sol(0)) {
          clamped = true;
          sol(0) = mu;
          if (q > 0) {
            const Eigen::VectorXd rhs = b.tail(q) - A.block(1, 0, q, 1) * mu;
            sol.tail(q) = solve_sym(A.bottomRightCorner(q, q), rhs, ridge);
          }
        }
      }
      th.mu = sol(0);
      th.beta = sol.tail(q);
    }
    double ssr = 0.0;
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < n; ++i) {
        const double w = Wt(i, j);
        if (w == 0.0) continue;
        double u = ytil(i, t) - th.mu;
        for (int k = 0; k < q; ++k) u -= data.x[k](i, t) * th.beta(k);
        ssr += w * u * u;
      }
    }
    const double s0 = penalty.anchor(j);
    const double den = Wj * T + 2.0 * an;
    if (den > 0) th.sigma_sq = (ssr + 2.0 * an * s0) / den;
    if (!(th.sigma_sq > 0) || !std::isfinite(th.sigma_sq)) throw NumericError("variance update collapsed");
  }

  next.alpha = alpha_update(Wsum, n, cons);
  return next;
}

void make_feasible(MixtureParams& p, const Constraints& c, double n) {
  if (!c.intervals.empty())
    for (int j = 0; j < p.M(); ++j)
      p.components[j].mu = std::clamp(p.components[j].mu, c.intervals[j].first, c.intervals[j].second);
  if (c.tau_mode == TauMode::fixed || (c.tau_mode != TauMode::free_penalized && c.floor > 0))
    p.alpha = alpha_update(p.alpha * n, n, c);
}

State init_state(const PanelDataset& data, MixtureParams start, const PenaltyConfig& penalty,
                 const Constraints& cons, bool record) {
  State st;
  make_feasible(start, cons, data.n());
  st.params = std::move(start);
  evaluate(data, penalty, cons, st);
  if (record) st.trace.push_back(st.objective);
  return st;
}

// Runs up to `iters` more EM iterations; with fixed_steps the tolerance is ignored.
void advance(const PanelDataset& data, const PenaltyConfig& penalty, const Constraints& cons, State& st,
             int iters, double tol, bool record, bool fixed_steps = false) {
  for (int it = 0; it < iters && !st.converged; ++it) {
    State next;
    bool ridge = false, clamped = false;
    next.params = constrained_m_step(data, st.weights, penalty, st.params, cons, ridge, clamped);
    evaluate(data, penalty, cons, next);
    const double change = next.objective - st.objective;
    st.params = std::move(next.params);
    st.weights = std::move(next.weights);
    st.loglik = next.loglik;
    st.penalty = next.penalty;
    st.objective = next.objective;
    st.ridge = st.ridge || ridge;
    st.clamped = clamped;
    ++st.iterations;
    if (record) st.trace.push_back(st.objective);
    if (!fixed_steps && std::abs(change) <= tol * std::max(1.0, std::abs(st.objective))) st.converged = true;
  }
}

FitResult to_result(State&& st, bool canonical) {
  FitResult r;
  if (canonical) {
    std::vector<int> order(st.params.M());
    std::iota(order.begin(), order.end(), 0);
    const MixtureParams sorted = canonicalize(st.params);
    // Recover the permutation to reorder weight columns.
    std::vector<char> used(order.size(), 0);
    Eigen::MatrixXd w(st.weights.rows(), st.weights.cols());
    for (int j = 0; j < sorted.M(); ++j) {
      for (int s = 0; s < st.params.M(); ++s) {
        if (!used[s] && st.params.components[s] == sorted.components[j] && st.params.alpha(s) == sorted.alpha(j)) {
          used[s] = 1;
          w.col(j) = st.weights.col(s);
          break;
        }
      }
    }
    st.params = sorted;
    st.weights = w;
  }
  r.params = std::move(st.params);
  r.weights = std::move(st.weights);
  r.loglik = st.loglik;
  r.penalty_value = st.penalty;
  r.penalized_loglik = st.objective;
  r.iterations = st.iterations;
  r.converged = st.converged;
  r.ridge_used = st.ridge;
  r.clamp_binding = st.clamped;
  r.trace = std::move(st.trace);
  return r;
}

// Burn-in of every start, then the best n_polish continue to convergence.
State multistart(const PanelDataset& data, const std::vector<MixtureParams>& starts, const PenaltyConfig& penalty,
                 const Constraints& cons, const EMConfig& cfg) {
  const int S = static_cast<int>(starts.size());
  std::vector<State> runs(S);
  const int burn = std::min(cfg.burn_iter, cfg.max_iter);
  parallel_for(S, cfg.threads, [&](int s) {
    try {
      runs[s] = init_state(data, starts[s], penalty, cons, cfg.record_trace);
      advance(data, penalty, cons, runs[s], burn, cfg.tol, cfg.record_trace);
    } catch (const NumericError&) {
      runs[s] = State{};
      runs[s].failed = true;
    } catch (const DomainError&) {
      runs[s] = State{};
      runs[s].failed = true;
    }
  });
  std::vector<int> order;
  for (int s = 0; s < S; ++s)
    if (!runs[s].failed) order.push_back(s);
  if (order.empty()) throw ConvergenceError("every EM start failed numerically");
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return runs[a].objective > runs[b].objective; });
  const int P = std::min<int>(cfg.n_polish, static_cast<int>(order.size()));
  parallel_for(P, cfg.threads, [&](int k) {
    State& st = runs[order[k]];
    State backup = st;
    try {
      advance(data, penalty, cons, st, cfg.max_iter - st.iterations, cfg.tol, cfg.record_trace);
    } catch (const NumericError&) {
      st = std::move(backup);
    } catch (const DomainError&) {
      st = std::move(backup);
    }
  });
  int best = order.front();
  for (int s : order)
    if (runs[s].objective > runs[best].objective) best = s;
  return std::move(runs[best]);
}

struct PooledOLS {
  double intercept = 0.0;
  Eigen::VectorXd beta, gamma;
  double s2 = 1.0;
  Eigen::MatrixXd resid;  // y - x'beta - z'gamma (intercept kept)
};

PooledOLS pooled_ols(const PanelDataset& data) {
  const int n = data.n(), T = data.T(), q = data.q(), p = data.p(), d = 1 + q + p;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d), r(d);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < n; ++i) {
      r(0) = 1.0;
      for (int k = 0; k < q; ++k) r(1 + k) = data.x[k](i, t);
      for (int k = 0; k < p; ++k) r(1 + q + k) = data.z[k](i, t);
      A.noalias() += r * r.transpose();
      b.noalias() += data.y(i, t) * r;
    }
  bool ridge = false;
  const Eigen::VectorXd c = solve_sym(A, b, ridge);
  PooledOLS o;
  o.intercept = c(0);
  o.beta = c.segment(1, q);
  o.gamma = c.tail(p);
  o.resid = data.y;
  for (int k = 0; k < q; ++k) o.resid -= data.x[k] * o.beta(k);
  for (int k = 0; k < p; ++k) o.resid -= data.z[k] * o.gamma(k);
  o.s2 = (o.resid.array() - o.intercept).square().sum() / (static_cast<double>(n) * T);
  return o;
}

MixtureParams one_component(const PanelDataset& data, const PooledOLS& o, const PenaltyConfig& penalty) {
  MixtureParams m;
  m.alpha = Eigen::VectorXd::Ones(1);
  ComponentParams c;
  c.mu = o.intercept;
  c.beta = o.beta;
  const double nT = static_cast<double>(data.n()) * data.T();
  c.sigma_sq = (o.s2 * nT + 2.0 * penalty.a_n * penalty.anchor(0)) / (nT + 2.0 * penalty.a_n);
  m.components.push_back(c);
  m.gamma = o.gamma;
  return m;
}

std::vector<MixtureParams> pmle_starts(const PanelDataset& data, int M, const PooledOLS& o,
                                       const MixtureParams* parent, const EMConfig& cfg) {
  const int n = data.n(), T = data.T();
  const Eigen::VectorXd r = o.resid.rowwise().mean();
  const double floor_s2 = 1e-2 * o.s2;
  // Larger mixtures have more local optima; the budget grows with M.
  const int total = cfg.n_starts * std::max(1, M - 1);
  std::vector<MixtureParams> starts;

  auto base = [&] {
    MixtureParams m;
    m.alpha = Eigen::VectorXd::Constant(M, 1.0 / M);
    m.gamma = o.gamma;
    m.components.assign(M, ComponentParams{o.intercept, o.s2, o.beta});
    return m;
  };

  // Quantile seeding on residualized unit means.
  {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return r(a) < r(b); });
    MixtureParams m = base();
    for (int g = 0; g < M; ++g) {
      const int lo = static_cast<int>(static_cast<long long>(g) * n / M);
      const int hi = static_cast<int>(static_cast<long long>(g + 1) * n / M);
      if (hi <= lo) continue;
      double mu = 0.0;
      for (int k = lo; k < hi; ++k) mu += r(idx[k]);
      mu /= (hi - lo);
      double ss = 0.0;
      for (int k = lo; k < hi; ++k) ss += (o.resid.row(idx[k]).array() - mu).square().sum();
      m.components[g].mu = mu;
      m.components[g].sigma_sq = std::max(ss / ((hi - lo) * static_cast<double>(T)), floor_s2);
      m.alpha(g) = static_cast<double>(hi - lo) / n;
    }
    m.alpha /= m.alpha.sum();
    starts.push_back(std::move(m));
  }

  // Splits of each component of the smaller fit.
  if (parent && parent->M() == M - 1) {
    for (int j = 0; j < parent->M() && static_cast<int>(starts.size()) < total; ++j) {
      MixtureParams m;
      m.gamma = parent->gamma;
      m.alpha.resize(M);
      for (int k = 0, dst = 0; k < parent->M(); ++k) {
        const auto& c = parent->components[k];
        if (k == j) {
          const double s = std::sqrt(c.sigma_sq);
          ComponentParams a = c, b = c;
          a.mu -= 0.5 * s;
          b.mu += 0.5 * s;
          m.components.push_back(a);
          m.components.push_back(b);
          m.alpha(dst++) = parent->alpha(k) / 2;
          m.alpha(dst++) = parent->alpha(k) / 2;
        } else {
          m.components.push_back(c);
          m.alpha(dst++) = parent->alpha(k);
        }
      }
      starts.push_back(std::move(m));
    }
  }

  Rng rng(derive_seed(cfg.seed, {0x706d6c65ULL, static_cast<std::uint64_t>(M)}));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double rmin = r.minCoeff(), rmax = r.maxCoeff();
  while (static_cast<int>(starts.size()) < total) {
    MixtureParams m = base();
    for (int j = 0; j < M; ++j) {
      m.components[j].mu = rmin + (rmax - rmin) * unif(rng);
      m.components[j].sigma_sq = std::max(o.s2 * (0.1 + 0.9 * unif(rng)), floor_s2);
    }
    starts.push_back(std::move(m));
  }
  return starts;
}

std::vector<MixtureParams> restricted_starts(const RestrictionSpec& spec, double tau_start, bool random_tau,
                                             int n_starts, std::uint64_t seed) {
  const MixtureParams& nul = spec.null_params;
  const int M = nul.M() + 1, h = spec.h - 1;
  MixtureParams emb;
  emb.gamma = nul.gamma;
  emb.alpha.resize(M);
  for (int j = 0; j < M; ++j) {
    emb.components.push_back(nul.components[spec.source(j)]);
    emb.alpha(j) = nul.alpha(spec.source(j));
  }
  auto with_tau = [&](MixtureParams m, double tau) {
    const double a = nul.alpha(h);
    m.alpha(h) = tau * a;
    m.alpha(h + 1) = (1.0 - tau) * a;
    return m;
  };
  const auto& c = nul.components[h];
  const double s = std::sqrt(c.sigma_sq);

  std::vector<MixtureParams> starts;
  starts.push_back(with_tau(emb, tau_start));
  auto variant = [&](double dmu_a, double dmu_b, double fs_a, double fs_b) {
    MixtureParams m = with_tau(emb, tau_start);
    m.components[h].mu += dmu_a * s;
    m.components[h + 1].mu += dmu_b * s;
    m.components[h].sigma_sq *= fs_a;
    m.components[h + 1].sigma_sq *= fs_b;
    return m;
  };
  const MixtureParams fixed[] = {variant(-0.5, 0.5, 1.0, 1.0), variant(-1.0, 1.0, 1.0, 1.0),
                                 variant(0.0, 0.0, 0.5, 1.5), variant(-0.5, 0.5, 1.5, 0.5)};
  for (const auto& m : fixed)
    if (static_cast<int>(starts.size()) < n_starts) starts.push_back(m);

  Rng rng(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.1, 0.9);
  while (static_cast<int>(starts.size()) < n_starts) {
    MixtureParams m = with_tau(emb, random_tau ? unif(rng) : tau_start);
    for (int j : {h, h + 1}) {
      auto& cj = m.components[j];
      cj.mu += s * norm(rng);
      cj.sigma_sq *= std::exp(0.5 * norm(rng));
      for (Eigen::Index k = 0; k < cj.beta.size(); ++k)
        cj.beta(k) += 0.3 * (std::abs(cj.beta(k)) + 0.1) * norm(rng);
    }
    starts.push_back(std::move(m));
  }
  return starts;
}

Constraints restricted_constraints(const RestrictionSpec& spec) {
  Constraints c;
  const int M = spec.M0() + 1;
  for (int j = 0; j < M; ++j) c.intervals.push_back(spec.mu_intervals[spec.source(j)]);
  c.pair = spec.h - 1;
  if (spec.tau0) {
    c.tau_mode = TauMode::fixed;
    c.tau0 = *spec.tau0;
  } else {
    c.tau_mode = spec.tau_penalty ? TauMode::free_penalized : TauMode::free_plain;
  }
  c.floor = spec.alpha_floor;
  return c;
}

}  // namespace

double update_tau(double W_h, double W_h1) {
  detail::require(W_h >= 0 && W_h1 >= 0 && W_h + W_h1 > 0, "pair weights must be non-negative with positive sum");
  const double tl = std::min((W_h + 1.0) / (W_h + W_h1 + 1.0), 0.5);
  const double tr = std::max(W_h / (W_h + W_h1 + 1.0), 0.5);
  auto g = [&](double t) { return xlogy(W_h, t) + xlogy(W_h1, 1.0 - t) + p_tau(t); };
  return g(tr) > g(tl) ? tr : tl;
}

Eigen::VectorXd project_alpha(const Eigen::VectorXd& W, double lo, double hi) {
  const int M = static_cast<int>(W.size());
  detail::require(M >= 1, "project_alpha needs at least one entry");
  if (!(lo >= 0 && lo <= hi && M * lo <= 1.0 + 1e-12 && M * hi >= 1.0 - 1e-12))
    throw DomainError("alpha bounds leave no feasible mixing proportions");
  auto fill = [&](double c, Eigen::VectorXd& a) {
    for (int j = 0; j < M; ++j) a(j) = std::clamp(W(j) / c, lo, hi);
    return a.sum();
  };
  Eigen::VectorXd a(M);
  const double total = W.sum();
  if (!(total > 0)) return Eigen::VectorXd::Constant(M, 1.0 / M);
  // Positive entries all at hi and zero entries at lo still short of one: the
  // zero-weight entries (which do not move the objective) take the rest.
  int zeros = 0;
  for (int j = 0; j < M; ++j) zeros += W(j) > 0 ? 0 : 1;
  const double cap = (M - zeros) * hi;
  if (zeros > 0 && cap + zeros * lo < 1.0) {
    for (int j = 0; j < M; ++j) a(j) = W(j) > 0 ? hi : (1.0 - cap) / zeros;
    return a;
  }
  // The sum is non-increasing in c; bracket then bisect in log space.
  double clo = total * 1e-3, chi = total * 1e3;
  while (fill(clo, a) < 1.0) clo *= 0.5;
  while (fill(chi, a) > 1.0) chi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(clo * chi);
    if (fill(mid, a) > 1.0) clo = mid;
    else chi = mid;
    if (chi / clo - 1.0 < 1e-15) break;
  }
  fill(std::sqrt(clo * chi), a);
  // Remove the residual rounding from the entries strictly inside the box.
  double inner = 0.0, fixed = 0.0;
  for (int j = 0; j < M; ++j) (a(j) > lo && a(j) < hi ? inner : fixed) += a(j);
  if (inner > 0) {
    const double scale = (1.0 - fixed) / inner;
    for (int j = 0; j < M; ++j)
      if (a(j) > lo && a(j) < hi) a(j) *= scale;
  }
  return a;
}

Eigen::MatrixXd e_step(const PanelDataset& data, const MixtureParams& params) {
  validate(params);
  const Eigen::MatrixXd lw = weighted_component_logliks(data, params);
  const Eigen::VectorXd lse = log_sum_exp_rows<double>(lw);
  return (lw.colwise() - lse).array().exp().matrix();
}

MixtureParams m_step(const PanelDataset& data, const Eigen::MatrixXd& weights, const PenaltyConfig& penalty,
                     const MixtureParams& current, bool* ridge_used) {
  penalty.validate();
  bool ridge = false, clamped = false;
  MixtureParams out = constrained_m_step(data, weights, penalty, current, Constraints{}, ridge, clamped);
  if (ridge_used) *ridge_used = ridge;
  return out;
}

double pooled_residual_variance(const PanelDataset& data) { return pooled_ols(data).s2; }

PenaltyConfig plain_penalty(const PanelDataset& data) {
  PenaltyConfig p;
  p.a_n = 1.0 / data.n();
  p.sigma0_sq = Eigen::VectorXd::Constant(1, std::max(pooled_residual_variance(data), 1e-300));
  p.an_mode = AnMode::user_fixed;
  return p;
}

FitResult fit_pmle(const PanelDataset& data, int M, const PenaltyConfig& penalty, const EMConfig& cfg,
                   const MixtureParams* parent) {
  cfg.validate();
  penalty.validate();
  detail::require(M >= 1, "M must be at least 1");
  detail::require(penalty.sigma0_sq.size() == 1 || penalty.sigma0_sq.size() == M,
                  "anchor count must be 1 or M");
  const PooledOLS o = pooled_ols(data);
  const Constraints none;
  if (M == 1) {
    State st = init_state(data, one_component(data, o, penalty), penalty, none, cfg.record_trace);
    st.converged = true;
    return to_result(std::move(st), true);
  }
  const auto starts = pmle_starts(data, M, o, parent, cfg);
  return to_result(multistart(data, starts, penalty, none, cfg), true);
}

RestrictionSpec build_restriction(const MixtureParams& null_fit, int h, double epsilon_alpha) {
  validate(null_fit);
  const int M0 = null_fit.M();
  detail::require(h >= 1 && h <= M0, "split index h must lie in 1..M0");
  RestrictionSpec spec;
  spec.h = h;
  spec.alpha_floor = epsilon_alpha;
  spec.null_params = null_fit;
  for (int j = 0; j < M0; ++j) {
    const double lo = j == 0 ? -kInf : 0.5 * (null_fit.components[j - 1].mu + null_fit.components[j].mu);
    const double hi = j == M0 - 1 ? kInf : 0.5 * (null_fit.components[j].mu + null_fit.components[j + 1].mu);
    detail::require(lo <= hi, "null fit must be canonical (ascending means)");
    spec.mu_intervals.emplace_back(lo, hi);
    if (j + 1 < M0) {
      const double a = null_fit.components[j].mu, b = null_fit.components[j + 1].mu;
      if (b - a <= 1e-10 * (1.0 + std::abs(a))) spec.degenerate = true;
    }
  }
  return spec;
}

PenaltyConfig restricted_penalty(const RestrictionSpec& spec, double a_n) {
  PenaltyConfig p;
  p.a_n = a_n;
  p.an_mode = AnMode::user_fixed;
  const int M = spec.M0() + 1;
  p.sigma0_sq.resize(M);
  for (int j = 0; j < M; ++j) p.sigma0_sq(j) = spec.null_params.components[spec.source(j)].sigma_sq;
  return p;
}

FitResult fit_restricted(const PanelDataset& data, int M0_plus_1, const RestrictionSpec& spec,
                         const PenaltyConfig& penalty, const EMConfig& cfg) {
  cfg.validate();
  penalty.validate();
  detail::require(M0_plus_1 == spec.M0() + 1, "restricted model must have M0 + 1 components");
  detail::require(static_cast<int>(spec.mu_intervals.size()) == spec.M0(), "one interval per null component");
  if (spec.degenerate)
    throw DomainError("null fit has tied component means, so the split intervals are degenerate; reduce M0");
  if (spec.tau0) detail::require(*spec.tau0 > 0 && *spec.tau0 < 1, "tau0 must lie in (0,1)");
  const Constraints cons = restricted_constraints(spec);
  const double tau_start = spec.tau0.value_or(0.5);
  const std::uint64_t seed =
      derive_seed(cfg.seed, {0x72737472ULL, static_cast<std::uint64_t>(spec.h),
                             static_cast<std::uint64_t>(std::llround(tau_start * 1e6))});
  const auto starts = restricted_starts(spec, tau_start, !spec.tau0.has_value(), cfg.n_starts, seed);
  return to_result(multistart(data, starts, penalty, cons, cfg), false);
}

std::pair<FitResult, std::vector<double>> em_k_steps(const PanelDataset& data, const FitResult& start,
                                                     const RestrictionSpec& spec, int K,
                                                     const PenaltyConfig& penalty) {
  detail::require(K >= 1, "K must be at least 1");
  detail::require(start.params.M() == spec.M0() + 1, "start must have M0 + 1 components");
  Constraints cons;
  cons.pair = spec.h - 1;
  cons.tau_mode = spec.tau_penalty ? TauMode::free_penalized : TauMode::free_plain;
  State st = init_state(data, start.params, penalty, cons, true);
  std::vector<double> taus;
  for (int k = 0; k < K; ++k) {
    advance(data, penalty, cons, st, 1, 0.0, true, true);
    taus.push_back(pair_tau(st.params, cons));
  }
  st.converged = start.converged;
  return {to_result(std::move(st), false), taus};
}

}  // namespace panelmix
