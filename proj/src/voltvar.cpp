#include "flex/voltvar.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flex/error.hpp"

namespace flex {

double droop_reactive_power(double v, const DroopCurve& c, double s_rated, double p) {
  if (!(std::abs(p) <= s_rated * (1.0 + 1e-12)))
    throw PreconditionError("droop: |p_current| exceeds s_rated");
  const double upper = 1.0 + c.deadband;
  const double lower = 1.0 - c.deadband;
  if (v <= upper && v >= lower) return 0.0;
  const double span = c.v_saturation - c.deadband;
  const double headroom = c.q_max_fraction * std::sqrt(std::max(0.0, s_rated * s_rated - p * p));
  if (v > upper) return -headroom * std::min(1.0, (v - upper) / span);
  return headroom * std::min(1.0, (lower - v) / span);
}

PlantResolution resolve_plant(const PowerFlowSolver& solver, OperatingPoint& op,
                              const PowerFlowSolution* warm, DroopClosureOptions options) {
  const GridNetwork& net = solver.network();
  std::vector<std::size_t> droop_actors;
  std::vector<std::size_t> droop_bus;
  for (std::size_t i = 0; i < net.actors().size(); ++i) {
    const Actor& a = net.actors()[i];
    if (a.kind != ActorKind::voltvar || !a.droop) continue;
    if (i < op.actor_online.size() && !op.actor_online[i]) continue;
    droop_actors.push_back(i);
    droop_bus.push_back(net.bus_index(a.bus));
  }

  PlantResolution out;
  out.solution = solver.solve(assemble_injections(net, op), warm);
  out.rounds = 1;
  if (droop_actors.empty()) return out;

  for (int round = 1; round <= options.max_rounds; ++round) {
    bool changed = false;
    for (std::size_t k = 0; k < droop_actors.size(); ++k) {
      const Actor& a = net.actors()[droop_actors[k]];
      const double q = droop_reactive_power(out.solution.vm[droop_bus[k]], *a.droop, a.s_rated,
                                            op.actor_p[droop_actors[k]]);
      changed = changed || q != op.actor_q[droop_actors[k]];
      op.actor_q[droop_actors[k]] = q;
    }
    if (!changed) return out;
    PowerFlowSolution next = solver.solve(assemble_injections(net, op), &out.solution);
    double dv = 0.0;
    for (std::size_t b = 0; b < next.vm.size(); ++b)
      dv = std::max(dv, std::abs(next.vm[b] - out.solution.vm[b]));
    out.solution = std::move(next);
    out.rounds = round + 1;
    if (dv < options.voltage_tolerance) return out;
  }
  throw DivergenceError("droop closure did not settle within " +
                            std::to_string(options.max_rounds) + " rounds",
                        0.0, options.max_rounds);
}

}  // namespace flex
