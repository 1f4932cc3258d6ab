#pragma once

// Controller-facing vectors, all per-unit.

#include <cstddef>
#include <string>
#include <vector>

namespace flex {

// y = [V_1..V_n, S_1..S_i, P_pcc_1..P_pcc_k]
struct MeasurementVector {
  std::vector<double> values;
  double timestamp = 0.0;  // seconds
};

// u = [P_1..P_m, Q_1..Q_m] for the m flexible inputs of one controller.
struct SetpointVector {
  std::vector<std::string> actor_ids;
  std::vector<double> values;

  SetpointVector() = default;
  explicit SetpointVector(std::vector<std::string> ids)
      : actor_ids(std::move(ids)), values(2 * actor_ids.size(), 0.0) {}

  std::size_t actors() const { return actor_ids.size(); }
  std::size_t size() const { return values.size(); }
  double& p(std::size_t i) { return values[i]; }
  double& q(std::size_t i) { return values[actor_ids.size() + i]; }
  double p(std::size_t i) const { return values[i]; }
  double q(std::size_t i) const { return values[actor_ids.size() + i]; }
};

}  // namespace flex
