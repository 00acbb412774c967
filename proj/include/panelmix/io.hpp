#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "panelmix/asymdist.hpp"
#include "panelmix/dataset.hpp"
#include "panelmix/em.hpp"
#include "panelmix/scores.hpp"
#include "panelmix/sht.hpp"
#include "panelmix/testing.hpp"

namespace panelmix {

inline constexpr int kSchemaVersion = 1;

/// Column names of a long-format panel file: one row per (unit, period).
struct IngestSpec {
  std::string unit_col = "unit";
  std::string period_col = "period";
  std::string y_col = "y";
  std::vector<std::string> x_cols;
  std::vector<std::string> z_cols;
  char delimiter = ',';
};

/// Reads a balanced long-format panel, sorted by (unit, period). Throws
/// InputError naming the offending units, rows or columns.
PanelDataset ingest(const std::string& path, const IngestSpec& spec);
PanelDataset ingest(std::istream& is, const IngestSpec& spec);

/// Writes a dataset in the long format accepted by ingest (columns unit,
/// period, y, x1.., z1..).
void write_panel_csv(const PanelDataset& data, std::ostream& os, char delimiter = ',');

nlohmann::json to_json(const MixtureParams& p);
nlohmann::json to_json(const FitResult& f, bool with_weights = false);
nlohmann::json to_json(const TestOutcome& t);
nlohmann::json to_json(const SelectionResult& s);
nlohmann::json to_json(const UnboundednessReport& r);
nlohmann::json to_json(const Eigen::MatrixXd& m);

/// Significance stars: * 10%, ** 5%, *** 1%.
std::string stars(const TestOutcome& t);

}  // namespace panelmix
