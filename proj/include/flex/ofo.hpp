#pragma once

// One Online Feedback Optimization controller: objective gradients, the
// projection problem built from the latest measurement, and the update
// u <- u + alpha * w.

#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "flex/grid.hpp"
#include "flex/qp.hpp"
#include "flex/sensitivity.hpp"
#include "flex/vectors.hpp"

namespace flex {

// Sum of (P_j - P_ref,j)^2 over the P coordinates. PCC-actors take the
// requested flow as their reference.
struct CurtailmentObjective {
  std::vector<double> p_reference;
};

// (P_set - P_pcc)^2 on the controller's own PCC measurement.
struct TrackingObjective {
  double p_set = 0.0;
  std::size_t pcc_index = 0;  // position inside the measurement vector
};

using ObjectiveSpec = std::variant<CurtailmentObjective, TrackingObjective>;

struct ConstraintBounds {
  std::vector<double> v_min, v_max;  // per scoped bus
  std::vector<double> s_max;         // per scoped branch
  std::vector<double> u_min, u_max;  // per input, [P..., Q...]
};

struct ControllerState {
  std::string id;
  ControllerScope scope;
  SetpointVector u;
  SensitivityMatrix sensitivity;
  ObjectiveSpec objective;
  double alpha = 0.0;
  double cycle_time = 0.0;
  ConstraintBounds bounds;
};

// Checks alpha and every dimension against the scope. Throws
// DimensionError / PreconditionError.
void check_state(const ControllerState& state);

// Bounds from the network limits for the physical part of the scope. PCC
// inputs get an empty box at their current value until the hierarchy
// supplies an envelope.
ConstraintBounds scope_bounds(const GridNetwork& network, const ControllerScope& scope,
                              const SetpointVector& u);

struct ObjectiveGradient {
  std::vector<double> grad_u;
  std::vector<double> grad_y;
};

ObjectiveGradient objective_gradient(const ObjectiveSpec& objective, const SetpointVector& u,
                                     const MeasurementVector& y);

// g = grad_u + dh/du^T grad_y
std::vector<double> compose_gradient(const ControllerState& state,
                                     const std::vector<double>& grad_u,
                                     const std::vector<double>& grad_y);

// Objective value at (u, y); used by tests and diagnostics.
double objective_value(const ObjectiveSpec& objective, const SetpointVector& u,
                       const MeasurementVector& y);

LeastDistanceProblem build_problem(const ControllerState& state, const MeasurementVector& y);

struct StepResult {
  SetpointVector u;
  QpResult qp;
};

// Throws StalenessError when `now - y.timestamp` exceeds one cycle.
StepResult ofo_step(const ControllerState& state, const MeasurementVector& y, double now);
inline StepResult ofo_step(const ControllerState& state, const MeasurementVector& y) {
  return ofo_step(state, y, y.timestamp);
}

// Secondary controllers only; throws VariantError otherwise.
ControllerState update_setpoint_request(ControllerState state, double p_set);

// Primary controllers only: sets the reference of one P coordinate.
void set_reference(ControllerState& state, std::string_view input_id, double p_reference);

// |p_set - p_pcc| / |p_set|; throws MetricError for p_set == 0.
double tracking_error(double p_set, double p_pcc);

}  // namespace flex
