#pragma once

// Steady-state AC power flow: the simulated plant y = h(u).

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "flex/grid.hpp"
#include "flex/vectors.hpp"

namespace flex {

// Net per-bus injection, per-unit, injection sign. The slack entry is
// ignored by the solver.
struct InjectionProfile {
  std::vector<double> p;
  std::vector<double> q;
};

// Physical operating point of every actor plus bus-level load offsets.
// Injection sign throughout.
struct OperatingPoint {
  std::vector<double> actor_p;
  std::vector<double> actor_q;
  std::vector<bool> actor_online;
  std::vector<double> bus_p;  // extra injection per bus (load steps enter negative)
  std::vector<double> bus_q;
};

// Controllables at p_reference (clamped to their box) and zero Q, fixed
// loads at their references, voltvar actors at p_reference with Q = 0.
OperatingPoint nominal_operating_point(const GridNetwork& network);

InjectionProfile assemble_injections(const GridNetwork& network, const OperatingPoint& op);

struct PowerFlowSolution {
  std::vector<double> vm;        // per-unit
  std::vector<double> va;        // radians
  std::vector<double> branch_s;  // |S| at the from end
  std::vector<double> branch_p;  // signed P from -> to, at the from end
  std::vector<double> branch_q;
  double slack_p = 0.0;
  double slack_q = 0.0;
  int iterations = 0;
  double max_mismatch = 0.0;
};

struct PowerFlowOptions {
  double tolerance = 1e-8;
  int max_iterations = 30;
};

// Dense polar Newton-Raphson. Holds the bus admittance matrix so repeated
// solves on one network skip the assembly.
class PowerFlowSolver {
 public:
  explicit PowerFlowSolver(const GridNetwork& network, PowerFlowOptions options = {});

  PowerFlowSolution solve(const InjectionProfile& injections,
                          const PowerFlowSolution* warm_start = nullptr) const;

  const GridNetwork& network() const { return *network_; }
  const PowerFlowOptions& options() const { return options_; }

 private:
  const GridNetwork* network_;
  PowerFlowOptions options_;
  std::size_t n_ = 0;
  std::size_t slack_ = 0;
  std::vector<std::size_t> pq_;
  std::vector<double> y_re_;  // n x n row-major
  std::vector<double> y_im_;
  std::vector<double> br_g_;  // series admittance per branch
  std::vector<double> br_b_;
  std::vector<std::size_t> br_from_;
  std::vector<std::size_t> br_to_;
};

PowerFlowSolution solve_ac_power_flow(const GridNetwork& network, const InjectionProfile& injections,
                                      const PowerFlowSolution* warm_start = nullptr,
                                      PowerFlowOptions options = {});

// Records which buses/branches a measurement extraction touched.
struct MeasurementAccessLog {
  std::vector<std::size_t> buses;
  std::vector<std::size_t> branches;
};

MeasurementVector extract_measurements(const PowerFlowSolution& solution,
                                       const ControllerScope& scope, double timestamp = 0.0,
                                       MeasurementAccessLog* log = nullptr);

// Sum of series losses over all branches.
double total_losses(const GridNetwork& network, const PowerFlowSolution& solution);

}  // namespace flex
