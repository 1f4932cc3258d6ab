#pragma once

// Finite-difference input/output sensitivity dh/du of one controller.

#include <string>
#include <vector>

#include "flex/grid.hpp"
#include "flex/linalg.hpp"
#include "flex/powerflow.hpp"
#include "flex/vectors.hpp"

namespace flex {

struct SensitivityMatrix {
  std::string controller_id;
  RowMatrix matrix;                  // measurement_size x input_size
  std::vector<std::string> row_ids;  // v:<bus>, s:<branch>, p:<pcc branch>
  std::vector<std::string> col_ids;  // P:<actor>, Q:<actor>
  SetpointVector base_point;
  double delta = 0.0;
};

struct SensitivityOptions {
  double delta = 1e-4;
  bool parallel = true;
  PowerFlowOptions power_flow{};
};

std::vector<std::string> measurement_ids(const GridNetwork& network, const ControllerScope& scope);
std::vector<std::string> input_ids(const ControllerScope& scope);

// Current value of every scoped input at an operating point. PCC-actors read
// the signed branch flow from `solution`.
SetpointVector current_setpoints(const GridNetwork& network, const ControllerScope& scope,
                                 const OperatingPoint& op, const PowerFlowSolution& solution);

// Moves input `column` of the scope by `amount` (per-unit). A PCC-actor is
// moved by injecting at the child-side bus of its branch so that the
// from->to flow rises by roughly `amount`.
void shift_input(const GridNetwork& network, const ControllerScope& scope, OperatingPoint& op,
                 std::size_t column, double amount);

// Central differences around `base`. Every perturbed solve is a plain power
// flow: autonomous droop Q stays frozen at its value in `base`.
SensitivityMatrix compute_sensitivity(const GridNetwork& network, const OperatingPoint& base,
                                      const ControllerScope& scope, SensitivityOptions options = {});

// max |(h(u + du) - h(u)) - dh/du du| over all measurement entries.
double verify_sensitivity(const SensitivityMatrix& matrix, const GridNetwork& network,
                          const OperatingPoint& base, const ControllerScope& scope,
                          const std::vector<double>& probe, PowerFlowOptions options = {});

}  // namespace flex
