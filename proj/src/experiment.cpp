#include "panelmix/experiment.hpp"

#include <cmath>
#include <mutex>
#include <ostream>
#include <sstream>

#include "panelmix/errors.hpp"
#include "panelmix/parallel.hpp"
#include "panelmix/rng.hpp"

namespace panelmix {

std::string to_string(ExperimentTask t) {
  switch (t) {
    case ExperimentTask::em_test: return "em_test";
    case ExperimentTask::plrt: return "plrt";
    case ExperimentTask::select: return "select";
  }
  return "unknown";
}

namespace {

ExperimentTask parse_task(const std::string& s) {
  if (s == "em_test" || s == "em") return ExperimentTask::em_test;
  if (s == "plrt") return ExperimentTask::plrt;
  if (s == "select") return ExperimentTask::select;
  throw InputError("unknown experiment task '" + s + "'");
}

Eigen::VectorXd vec(const nlohmann::json& j) {
  if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ExperimentCell parse_cell(const nlohmann::json& j, int index) {
  ExperimentCell c;
  c.label = j.value("label", "cell" + std::to_string(index));
  const Eigen::VectorXd alpha = vec(j.at("alpha"));
  const Eigen::VectorXd mu = vec(j.at("mu"));
  const Eigen::VectorXd sigma = vec(j.at("sigma"));
  const int M = static_cast<int>(alpha.size());
  if (mu.size() != M || sigma.size() != M)
    throw InputError("cell '" + c.label + "': alpha, mu and sigma must have equal length");
  c.params.alpha = alpha;
  // Rounded proportions: accept and renormalize small drift.
  if (std::abs(alpha.sum() - 1.0) <= 1e-6) c.params.alpha /= alpha.sum();
  c.params.components.resize(M);
  for (int k = 0; k < M; ++k) {
    c.params.components[k].mu = mu(k);
    c.params.components[k].sigma_sq = sigma(k) * sigma(k);
  }
  if (j.contains("beta")) {
    const auto& b = j.at("beta");
    if (!b.is_array() || static_cast<int>(b.size()) != M)
      throw InputError("cell '" + c.label + "': beta needs one entry per component");
    for (int k = 0; k < M; ++k) c.params.components[k].beta = vec(b[k]);
  } else {
    for (auto& comp : c.params.components) comp.beta = Eigen::VectorXd(0);
  }
  c.params.gamma = j.contains("gamma") ? vec(j.at("gamma")) : Eigen::VectorXd(0);
  c.n = j.at("n").get<int>();
  c.T = j.at("T").get<int>();
  c.covariate_law.mean = j.value("covariate_mean", 0.0);
  c.covariate_law.sd = j.value("covariate_sd", 1.0);
  c.task = parse_task(j.value("task", std::string("em_test")));
  c.M0 = j.value("M0", M);
  c.Mbar = j.value("Mbar", 7);
  c.level = j.value("level", 0.05);
  c.bootstrap = j.value("bootstrap", 0);
  validate(c.params);
  return c;
}

struct RepOutcome {
  bool ok = false;
  bool reject = false;
  std::map<std::string, int> chosen;
  std::string error;
};

RepOutcome run_rep(const ExperimentDesign& design, const ExperimentCell& cell, int c, int r) {
  RepOutcome out;
  try {
    DGPSpec spec;
    spec.params = cell.params;
    spec.n = cell.n;
    spec.T = cell.T;
    spec.covariate_law = cell.covariate_law;
    spec.seed = derive_seed(design.seed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(r), 0});
    const PanelDataset data = generate(spec);

    EMConfig cfg = design.em;
    cfg.threads = 1;
    cfg.seed = derive_seed(design.seed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(r), 1});
    PenaltyConfig pen;
    if (design.a_n) {
      pen.a_n = *design.a_n;
      pen.an_mode = AnMode::user_fixed;
    } else {
      pen.an_mode = AnMode::formula;
    }

    if (cell.task == ExperimentTask::select) {
      std::vector<FitResult> fits;
      const auto [a, b] = information_criteria(data, cell.Mbar, plain_penalty(data), cfg, &fits);
      LevelSchedule lvl;
      lvl.fixed = cell.level;
      const SelectionResult s = select_sht(data, cell.Mbar, lvl, TestMethod::em_test, pen, cfg, design.options, &fits);
      out.chosen["sht_em"] = s.M_hat;
      out.chosen["aic"] = a.M_hat;
      out.chosen["bic"] = b.M_hat;
    } else {
      const TestMethod m = cell.task == ExperimentTask::plrt ? TestMethod::plrt : TestMethod::em_test;
      const TestOutcome t = cell.bootstrap > 0
                                ? bootstrap_test(data, cell.M0, pen, cfg, cell.bootstrap, m, design.options)
                                : run_test(m, data, cell.M0, pen, cfg, design.options);
      out.reject = t.rejects(cell.level);
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

ExperimentDesign parse_design(const nlohmann::json& j) {
  ExperimentDesign d;
  try {
    d.reps = j.value("reps", 100);
    d.seed = j.value("seed", std::uint64_t{0});
    d.em.threads = j.value("threads", 1);
    if (j.contains("em")) {
      const auto& e = j.at("em");
      d.em.max_iter = e.value("max_iter", d.em.max_iter);
      d.em.tol = e.value("tol", d.em.tol);
      d.em.n_starts = e.value("n_starts", d.em.n_starts);
      d.em.K = e.value("K", d.em.K);
      d.em.epsilon_alpha = e.value("epsilon", d.em.epsilon_alpha);
      d.em.burn_iter = e.value("burn_iter", d.em.burn_iter);
      d.em.n_polish = e.value("n_polish", d.em.n_polish);
      if (e.contains("tau_set")) d.em.tau_set = e.at("tau_set").get<std::vector<double>>();
    }
    d.options.n_draws = j.value("draws", d.options.n_draws);
    d.options.misclass_draws = j.value("misclass_draws", d.options.misclass_draws);
    if (j.contains("a_n")) d.a_n = j.at("a_n").get<double>();
    const auto& cells = j.at("cells");
    for (std::size_t k = 0; k < cells.size(); ++k) d.cells.push_back(parse_cell(cells[k], static_cast<int>(k)));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad experiment design: ") + e.what());
  }
  if (d.reps < 1) throw InputError("reps must be at least 1");
  if (d.cells.empty()) throw InputError("experiment design has no cells");
  d.em.validate();
  return d;
}

std::vector<CellSummary> run_experiment(const ExperimentDesign& design, const ProgressFn& progress) {
  detail::require(design.reps >= 1, "reps must be at least 1");
  const int C = static_cast<int>(design.cells.size());
  const int R = design.reps;
  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(C) * R);
  std::mutex mu;
  parallel_for(C * R, std::max(1, design.em.threads), [&](int k) {
    const int c = k / R, r = k % R;
    outcomes[k] = run_rep(design, design.cells[c], c, r);
    if (progress) {
      std::lock_guard<std::mutex> lock(mu);
      progress(c, r);
    }
  });

  std::vector<CellSummary> out(C);
  for (int c = 0; c < C; ++c) {
    CellSummary& s = out[c];
    s.label = design.cells[c].label;
    s.task = design.cells[c].task;
    s.reps = R;
    for (int r = 0; r < R; ++r) {
      const RepOutcome& o = outcomes[static_cast<std::size_t>(c) * R + r];
      if (!o.ok) {
        ++s.failures;
        s.failure_messages.push_back("rep " + std::to_string(r) + ": " + o.error);
        continue;
      }
      ++s.completed;
      if (o.reject) ++s.rejections;
      for (const auto& [m, M] : o.chosen) ++s.selections[m][M];
    }
    if (s.completed > 0 && s.task != ExperimentTask::select) {
      s.rate = static_cast<double>(s.rejections) / s.completed;
      s.se = std::sqrt(s.rate * (1.0 - s.rate) / s.completed);
    }
  }
  return out;
}

void write_summary_csv(const std::vector<CellSummary>& summaries, std::ostream& os) {
  os << "cell,task,reps,completed,failures,statistic,value,count,rate,se\n";
  for (const auto& s : summaries) {
    const std::string head = s.label + "," + to_string(s.task) + "," + std::to_string(s.reps) + "," +
                             std::to_string(s.completed) + "," + std::to_string(s.failures);
    if (s.task != ExperimentTask::select) {
      os << head << ",rejection,," << s.rejections << "," << s.rate << "," << s.se << "\n";
      continue;
    }
    for (const auto& [method, counts] : s.selections)
      for (const auto& [M, k] : counts) {
        const double f = s.completed > 0 ? static_cast<double>(k) / s.completed : 0.0;
        os << head << "," << method << "," << M << "," << k << "," << f << ","
           << (s.completed > 0 ? std::sqrt(f * (1 - f) / s.completed) : 0.0) << "\n";
      }
  }
}

nlohmann::json to_json(const std::vector<CellSummary>& summaries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : summaries) {
    nlohmann::json j{{"cell", s.label},   {"task", to_string(s.task)},  {"reps", s.reps},
                     {"completed", s.completed}, {"failures", s.failures}, {"failure_messages", s.failure_messages}};
    if (s.task == ExperimentTask::select) {
      nlohmann::json sel = nlohmann::json::object();
      for (const auto& [method, counts] : s.selections) {
        nlohmann::json m = nlohmann::json::object();
        for (const auto& [M, k] : counts) m[std::to_string(M)] = k;
        sel[method] = m;
      }
      j["selections"] = sel;
    } else {
      j["rejections"] = s.rejections;
      j["rate"] = s.rate;
      j["se"] = s.se;
    }
    arr.push_back(j);
  }
  return {{"schema_version", 1}, {"cells", arr}};
}

}  // namespace panelmix
