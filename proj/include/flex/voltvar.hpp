#pragma once

// Autonomous volt/var droop inverters acting outside the OFO loop.

#include "flex/grid.hpp"
#include "flex/powerflow.hpp"

namespace flex {

// Reactive injection of a droop inverter at measured voltage `v_meas`.
// Zero inside the deadband, linear ramp to the available headroom
// q_max_fraction * sqrt(s_rated^2 - p^2) at v_saturation, flat beyond.
// Injection sign: overvoltage gives negative (absorbed) Q.
double droop_reactive_power(double v_meas, const DroopCurve& curve, double s_rated,
                            double p_current);

struct DroopClosureOptions {
  int max_rounds = 20;
  double voltage_tolerance = 1e-6;
};

struct PlantResolution {
  PowerFlowSolution solution;
  int rounds = 0;
};

// Solves the plant with the droop inverters settled at their quasi-static
// equilibrium: power flow and droop response are iterated until the bus
// voltages move by less than the tolerance. Updates the voltvar entries of
// `op.actor_q` in place.
PlantResolution resolve_plant(const PowerFlowSolver& solver, OperatingPoint& op,
                              const PowerFlowSolution* warm_start = nullptr,
                              DroopClosureOptions options = {});

}  // namespace flex
