#include "flex/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "flex/error.hpp"

namespace flex {

std::vector<std::string> measurement_ids(const GridNetwork& net, const ControllerScope& scope) {
  std::vector<std::string> ids;
  ids.reserve(scope.measurement_size());
  for (std::size_t b : scope.buses) ids.push_back("v:" + net.buses()[b].id);
  for (std::size_t k : scope.branches) ids.push_back("s:" + net.branches()[k].id);
  for (std::size_t k : scope.pcc_branches) ids.push_back("p:" + net.branches()[k].id);
  return ids;
}

std::vector<std::string> input_ids(const ControllerScope& scope) {
  std::vector<std::string> ids;
  ids.reserve(scope.input_size());
  for (const auto& a : scope.actors) ids.push_back("P:" + a.id);
  for (const auto& a : scope.actors) ids.push_back("Q:" + a.id);
  return ids;
}

SetpointVector current_setpoints(const GridNetwork& net, const ControllerScope& scope,
                                 const OperatingPoint& op, const PowerFlowSolution& sol) {
  (void)net;
  std::vector<std::string> ids;
  for (const auto& a : scope.actors) ids.push_back(a.id);
  SetpointVector u(std::move(ids));
  for (std::size_t i = 0; i < scope.actors.size(); ++i) {
    const ScopeActor& a = scope.actors[i];
    if (a.is_pcc) {
      u.p(i) = sol.branch_p.at(a.pcc_branch);
      u.q(i) = sol.branch_q.at(a.pcc_branch);
    } else {
      u.p(i) = op.actor_p.at(a.actor_index);
      u.q(i) = op.actor_q.at(a.actor_index);
    }
  }
  return u;
}

void shift_input(const GridNetwork& net, const ControllerScope& scope, OperatingPoint& op,
                 std::size_t column, double amount) {
  const std::size_t m = scope.actors.size();
  if (column >= 2 * m) throw DimensionError("input column out of range");
  const bool reactive = column >= m;
  const ScopeActor& a = scope.actors[reactive ? column - m : column];
  if (!a.is_pcc) {
    (reactive ? op.actor_q : op.actor_p)[a.actor_index] += amount;
    return;
  }
  const Branch& br = net.branches()[a.pcc_branch];
  const std::size_t child_bus = net.bus_index(a.orientation > 0 ? br.to_bus : br.from_bus);
  auto& bus = reactive ? op.bus_q : op.bus_p;
  bus.resize(net.buses().size(), 0.0);
  bus[child_bus] -= a.orientation * amount;
}

namespace {

std::vector<double> measure(const PowerFlowSolver& solver, const ControllerScope& scope,
                            const OperatingPoint& op) {
  const PowerFlowSolution sol = solver.solve(assemble_injections(solver.network(), op));
  return extract_measurements(sol, scope).values;
}

}  // namespace

SensitivityMatrix compute_sensitivity(const GridNetwork& net, const OperatingPoint& base,
                                      const ControllerScope& scope, SensitivityOptions options) {
  if (!(options.delta > 0.0) || !std::isfinite(options.delta))
    throw PreconditionError("sensitivity delta must be positive");
  const PowerFlowSolver solver(net, options.power_flow);

  SensitivityMatrix out;
  out.controller_id = scope.controller_id;
  out.delta = options.delta;
  out.row_ids = measurement_ids(net, scope);
  out.col_ids = input_ids(scope);

  PowerFlowSolution base_sol;
  try {
    base_sol = solver.solve(assemble_injections(net, base));
  } catch (const NumericalError& e) {
    throw SensitivityError(std::string("base operating point: ") + e.what(), "base");
  }
  out.base_point = current_setpoints(net, scope, base, base_sol);

  const std::size_t rows = scope.measurement_size();
  const std::size_t cols = scope.input_size();
  out.matrix.setZero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));

  auto column = [&](std::size_t j) {
    OperatingPoint plus = base, minus = base;
    shift_input(net, scope, plus, j, options.delta);
    shift_input(net, scope, minus, j, -options.delta);
    std::vector<double> yp, ym;
    try {
      yp = measure(solver, scope, plus);
      ym = measure(solver, scope, minus);
    } catch (const NumericalError& e) {
      throw SensitivityError("perturbed solve for " + out.col_ids[j] + " failed: " + e.what(),
                             out.col_ids[j]);
    }
    std::vector<double> col(rows);
    for (std::size_t i = 0; i < rows; ++i) col[i] = (yp[i] - ym[i]) / (2.0 * options.delta);
    return col;
  };

  std::vector<std::vector<double>> columns(cols);
  if (options.parallel && cols > 1) {
    std::vector<std::future<std::vector<double>>> jobs;
    jobs.reserve(cols);
    for (std::size_t j = 0; j < cols; ++j) jobs.push_back(std::async(std::launch::async, column, j));
    // Collect everything first so the first failing column (by index) is reported.
    std::vector<std::exception_ptr> errors(cols);
    for (std::size_t j = 0; j < cols; ++j) {
      try {
        columns[j] = jobs[j].get();
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (std::size_t j = 0; j < cols; ++j) columns[j] = column(j);
  }

  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i)
      out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = columns[j][i];
  if (!out.matrix.allFinite()) throw SensitivityError("non-finite sensitivity entry", "matrix");
  return out;
}

double verify_sensitivity(const SensitivityMatrix& m, const GridNetwork& net,
                          const OperatingPoint& base, const ControllerScope& scope,
                          const std::vector<double>& probe, PowerFlowOptions options) {
  if (probe.size() != scope.input_size() || static_cast<std::size_t>(m.matrix.cols()) != probe.size() ||
      static_cast<std::size_t>(m.matrix.rows()) != scope.measurement_size())
    throw DimensionError("probe or matrix does not match the controller scope");
  double largest = 0.0;
  for (double d : probe) largest = std::max(largest, std::abs(d));
  if (largest > 10.0 * m.delta * (1.0 + 1e-9))
    throw PreconditionError("probe exceeds ten times the sensitivity delta");

  const PowerFlowSolver solver(net, options);
  const std::vector<double> y0 = measure(solver, scope, base);
  if (largest == 0.0) return 0.0;
  OperatingPoint moved = base;
  for (std::size_t j = 0; j < probe.size(); ++j)
    if (probe[j] != 0.0) shift_input(net, scope, moved, j, probe[j]);
  const std::vector<double> y1 = measure(solver, scope, moved);

  double err = 0.0;
  for (std::size_t i = 0; i < y0.size(); ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < probe.size(); ++j)
      pred += m.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * probe[j];
    err = std::max(err, std::abs((y1[i] - y0[i]) - pred));
  }
  return err;
}

}  // namespace flex
