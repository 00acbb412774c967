#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "panelmix/dgp.hpp"
#include "panelmix/em.hpp"
#include "panelmix/sht.hpp"
#include "panelmix/testing.hpp"

namespace panelmix {

enum class ExperimentTask { em_test, plrt, select };

std::string to_string(ExperimentTask t);

/// One design cell: a data-generating process and what to run on each draw.
struct ExperimentCell {
  std::string label;
  MixtureParams params;
  int n = 0;
  int T = 0;
  CovariateLaw covariate_law;
  ExperimentTask task = ExperimentTask::em_test;
  int M0 = 1;          // tested null order (em_test / plrt)
  int Mbar = 7;        // largest order considered (select)
  double level = 0.05;
  int bootstrap = 0;   // B > 0 replaces asymptotic critical values
};

struct ExperimentDesign {
  std::vector<ExperimentCell> cells;
  int reps = 100;
  std::uint64_t seed = 0;
  EMConfig em;
  TestOptions options;
  std::optional<double> a_n;  // user override
};

/// Aggregate over replications. Tests count rejections; selection counts the
/// chosen order per method.
struct CellSummary {
  std::string label;
  ExperimentTask task = ExperimentTask::em_test;
  int reps = 0;
  int completed = 0;
  int failures = 0;
  int rejections = 0;
  double rate = 0.0;
  double se = 0.0;
  std::map<std::string, std::map<int, int>> selections;  // method -> M_hat -> count
  std::vector<std::string> failure_messages;
};

/// Reads a design from its JSON form (see README for the schema). sigma
/// entries are standard deviations.
ExperimentDesign parse_design(const nlohmann::json& j);

using ProgressFn = std::function<void(int cell, int rep)>;

/// Runs every cell for design.reps replications. Replication r of cell c
/// simulates from derive_seed(seed, {c, r, 0}) and tests with derive_seed(seed, {c, r, 1}),
/// so results do not depend on the order of execution.
std::vector<CellSummary> run_experiment(const ExperimentDesign& design, const ProgressFn& progress = {});

void write_summary_csv(const std::vector<CellSummary>& summaries, std::ostream& os);
nlohmann::json to_json(const std::vector<CellSummary>& summaries);

}  // namespace panelmix
