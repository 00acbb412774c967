#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panelmix/dataset.hpp"
#include "panelmix/model.hpp"

namespace panelmix {

/// Law of every covariate entry: iid normal with the given mean and sd.
struct CovariateLaw {
  double mean = 0.0;
  double sd = 1.0;
};

struct DGPSpec {
  MixtureParams params;
  int n = 0;
  int T = 0;
  CovariateLaw covariate_law;
  std::uint64_t seed = 0;

  /// Throws ContractViolation / DomainError on an unusable spec.
  void validate() const;
};

/// Simulates a panel. Unit i uses its own seeded stream, so the first n units
/// of a larger draw with the same seed coincide with a smaller draw.
PanelDataset generate(const DGPSpec& spec, std::vector<int>* types = nullptr);

/// Redraws types and errors from params keeping the covariates of `design`.
PanelDataset generate_conditional(const MixtureParams& params, const PanelDataset& design,
                                  std::uint64_t seed, std::vector<int>* types = nullptr);

}  // namespace panelmix
