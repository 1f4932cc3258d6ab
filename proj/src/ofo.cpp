#include "flex/ofo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flex/error.hpp"
#include "flex/simd/kernels.hpp"

namespace flex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t bus_rows(const ControllerState& s) { return s.scope.buses.size(); }
std::size_t branch_rows(const ControllerState& s) { return s.scope.branches.size(); }

}  // namespace

void check_state(const ControllerState& s) {
  if (!(s.alpha > 0.0) || !std::isfinite(s.alpha))
    throw PreconditionError("controller " + s.id + ": alpha must be positive");
  const std::size_t p = s.scope.input_size();
  const std::size_t n = s.scope.measurement_size();
  if (s.u.size() != p) throw DimensionError("controller " + s.id + ": set-point length mismatch");
  if (static_cast<std::size_t>(s.sensitivity.matrix.rows()) != n ||
      static_cast<std::size_t>(s.sensitivity.matrix.cols()) != p)
    throw DimensionError("controller " + s.id + ": sensitivity does not match the scope");
  const auto& b = s.bounds;
  if (b.v_min.size() != bus_rows(s) || b.v_max.size() != bus_rows(s) ||
      b.s_max.size() != branch_rows(s) || b.u_min.size() != p || b.u_max.size() != p)
    throw DimensionError("controller " + s.id + ": constraint bounds do not match the scope");
  if (const auto* t = std::get_if<TrackingObjective>(&s.objective); t && t->pcc_index >= n)
    throw DimensionError("controller " + s.id + ": PCC index outside the measurement vector");
  if (const auto* c = std::get_if<CurtailmentObjective>(&s.objective);
      c && c->p_reference.size() != s.u.actors())
    throw DimensionError("controller " + s.id + ": one P reference per input is required");
}

ConstraintBounds scope_bounds(const GridNetwork& net, const ControllerScope& scope,
                              const SetpointVector& u) {
  ConstraintBounds b;
  for (std::size_t k : scope.buses) {
    b.v_min.push_back(net.buses()[k].v_min);
    b.v_max.push_back(net.buses()[k].v_max);
  }
  for (std::size_t k : scope.branches) b.s_max.push_back(net.branches()[k].s_max);
  const std::size_t m = scope.actors.size();
  b.u_min.assign(2 * m, 0.0);
  b.u_max.assign(2 * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const ScopeActor& a = scope.actors[i];
    if (a.is_pcc) {
      b.u_min[i] = b.u_max[i] = u.p(i);
      b.u_min[m + i] = b.u_max[m + i] = u.q(i);
      continue;
    }
    const Actor& act = net.actors()[a.actor_index];
    b.u_min[i] = act.p_min;
    b.u_max[i] = act.p_max;
    b.u_min[m + i] = act.q_min;
    b.u_max[m + i] = act.q_max;
  }
  return b;
}

ObjectiveGradient objective_gradient(const ObjectiveSpec& obj, const SetpointVector& u,
                                     const MeasurementVector& y) {
  ObjectiveGradient g;
  g.grad_u.assign(u.size(), 0.0);
  g.grad_y.assign(y.values.size(), 0.0);
  if (const auto* c = std::get_if<CurtailmentObjective>(&obj)) {
    if (c->p_reference.size() != u.actors())
      throw DimensionError("curtailment objective needs one reference per input");
    for (std::size_t i = 0; i < u.actors(); ++i) g.grad_u[i] = 2.0 * (u.p(i) - c->p_reference[i]);
  } else {
    const auto& t = std::get<TrackingObjective>(obj);
    if (t.pcc_index >= y.values.size())
      throw DimensionError("PCC index outside the measurement vector");
    g.grad_y[t.pcc_index] = -2.0 * (t.p_set - y.values[t.pcc_index]);
  }
  return g;
}

std::vector<double> compose_gradient(const ControllerState& s, const std::vector<double>& grad_u,
                                     const std::vector<double>& grad_y) {
  const auto& h = s.sensitivity.matrix;
  const auto rows = static_cast<std::size_t>(h.rows());
  const auto cols = static_cast<std::size_t>(h.cols());
  if (grad_u.size() != cols || grad_y.size() != rows)
    throw DimensionError("gradient lengths do not match the sensitivity matrix");
  std::vector<double> g(cols, 0.0);
  if (rows > 0 && cols > 0) simd::kernels().gemv_t(h.data(), cols, rows, cols, grad_y.data(), g.data());
  for (std::size_t j = 0; j < cols; ++j) g[j] += grad_u[j];
  return g;
}

double objective_value(const ObjectiveSpec& obj, const SetpointVector& u,
                       const MeasurementVector& y) {
  if (const auto* c = std::get_if<CurtailmentObjective>(&obj)) {
    double f = 0.0;
    for (std::size_t i = 0; i < u.actors(); ++i) {
      const double d = u.p(i) - c->p_reference.at(i);
      f += d * d;
    }
    return f;
  }
  const auto& t = std::get<TrackingObjective>(obj);
  const double d = t.p_set - y.values.at(t.pcc_index);
  return d * d;
}

LeastDistanceProblem build_problem(const ControllerState& s, const MeasurementVector& y) {
  check_state(s);
  if (y.values.size() != s.scope.measurement_size())
    throw DimensionError("controller " + s.id + ": measurement length mismatch");
  for (double v : y.values)
    if (!std::isfinite(v)) throw PreconditionError("controller " + s.id + ": non-finite measurement");

  const auto grad = objective_gradient(s.objective, s.u, y);
  LeastDistanceProblem pr;
  pr.g = compose_gradient(s, grad.grad_u, grad.grad_y);
  pr.alpha = s.alpha;
  const std::size_t p = s.u.size();
  pr.input_lower.resize(p);
  pr.input_upper.resize(p);
  for (std::size_t i = 0; i < p; ++i) {
    pr.input_lower[i] = s.bounds.u_min[i] - s.u.values[i];
    pr.input_upper[i] = s.bounds.u_max[i] - s.u.values[i];
  }

  // Voltage rows are two-sided, branch rows upper-bounded; PCC flow rows
  // carry no constraint.
  const std::size_t nb = bus_rows(s), nbr = branch_rows(s);
  const std::size_t rows = nb + nbr;
  pr.output_rows = s.alpha * s.sensitivity.matrix.topRows(static_cast<Eigen::Index>(rows));
  pr.output_lower.resize(rows);
  pr.output_upper.resize(rows);
  for (std::size_t r = 0; r < nb; ++r) {
    pr.output_lower[r] = s.bounds.v_min[r] - y.values[r];
    pr.output_upper[r] = s.bounds.v_max[r] - y.values[r];
  }
  for (std::size_t r = 0; r < nbr; ++r) {
    pr.output_lower[nb + r] = -kInf;
    pr.output_upper[nb + r] = s.bounds.s_max[r] - y.values[nb + r];
  }
  return pr;
}

StepResult ofo_step(const ControllerState& s, const MeasurementVector& y, double now) {
  if (now - y.timestamp > s.cycle_time)
    throw StalenessError("controller " + s.id + ": measurement from t=" +
                         std::to_string(y.timestamp) + " is older than one cycle at t=" +
                         std::to_string(now));
  const LeastDistanceProblem pr = build_problem(s, y);
  StepResult out{s.u, solve_least_distance(pr)};
  for (std::size_t i = 0; i < out.u.size(); ++i) {
    const double next = s.u.values[i] + s.alpha * out.qp.w[i];
    out.u.values[i] = std::clamp(next, s.bounds.u_min[i], std::max(s.bounds.u_min[i], s.bounds.u_max[i]));
  }
  return out;
}

ControllerState update_setpoint_request(ControllerState s, double p_set) {
  auto* t = std::get_if<TrackingObjective>(&s.objective);
  if (t == nullptr)
    throw VariantError("controller " + s.id + " has no tracking objective to receive a request");
  t->p_set = p_set;
  return s;
}

void set_reference(ControllerState& s, std::string_view input_id, double p_reference) {
  auto* c = std::get_if<CurtailmentObjective>(&s.objective);
  if (c == nullptr) throw VariantError("controller " + s.id + " has no curtailment objective");
  for (std::size_t i = 0; i < s.u.actors(); ++i) {
    if (s.u.actor_ids[i] == input_id) {
      c->p_reference.at(i) = p_reference;
      return;
    }
  }
  throw ScopeError("controller " + s.id + " has no input " + std::string(input_id));
}

double tracking_error(double p_set, double p_pcc) {
  if (p_set == 0.0) throw MetricError("tracking error is undefined for a zero set point");
  return std::abs(p_set - p_pcc) / std::abs(p_set);
}

}  // namespace flex
