#pragma once

// Discrete-time scenario engine. One global tick; on every tick the due
// events are applied, due controllers step top-down against the previous
// plant solution, the plant is re-solved once with droop closure and the
// result is recorded.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "flex/error.hpp"
#include "flex/grid.hpp"
#include "flex/powerflow.hpp"

namespace flex {

enum class EventKind { set_point_request, load_step, actor_outage };

struct ScenarioEvent {
  double time = 0.0;  // seconds
  EventKind kind = EventKind::set_point_request;
  std::string target;  // controller, bus or actor id
  double p = 0.0;      // W: requested PCC flow, or added load
  double q = 0.0;      // var: added load
};

struct ActorSetpoint {
  double p = 0.0;  // W
  double q = 0.0;  // var
};

struct Scenario {
  std::filesystem::path network;
  double duration = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> tick;
  double sensitivity_delta = 1e-4;
  std::map<std::string, ActorSetpoint> initial;
  std::vector<ScenarioEvent> events;
};

// Relative network paths resolve against `base_dir`.
Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

// Nominal operating point with the listed actors moved to the given SI set
// points. Throws ScopeError for unknown actors.
OperatingPoint operating_point_with(const GridNetwork& network,
                                    const std::map<std::string, ActorSetpoint>& setpoints);
// {"actors": {"<id>": {"p": W, "q": var}}}
std::map<std::string, ActorSetpoint> parse_actor_setpoints(std::string_view json_text);

struct TraceRecord {
  double time = 0.0;
  std::string kind;  // setpoint | measurement | request | qp_status | metric
  std::string subject;
  std::string field;
  double value = 0.0;
};

using Trace = std::vector<TraceRecord>;

class SimulationAborted : public NumericalError {
 public:
  SimulationAborted(const std::string& what, Trace partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const Trace& partial_trace() const { return partial_; }

 private:
  Trace partial_;
};

// Global tick in milliseconds: explicit tick, or the gcd of every cycle time
// and event time.
std::int64_t scenario_tick_ms(const Scenario& scenario, const HierarchySpec& hierarchy);

// Throws ValidationError on bad events or ids.
void validate_scenario(const Scenario& scenario, const NetworkDocument& doc);

struct RunOptions {
  bool parallel_sensitivity = true;
};

Trace run_scenario(const Scenario& scenario, const NetworkDocument& doc, RunOptions options = {});
Trace run_scenario(const Scenario& scenario, RunOptions options = {});

std::string format_number(double value);
void write_trace_csv(std::ostream& out, const Trace& trace);
void write_trace_jsonl(std::ostream& out, const Trace& trace);
Trace read_trace_csv(std::istream& in);

struct Metrics {
  std::string subject;
  double p_set = 0.0;  // W
  double p_pcc = 0.0;  // W, latest measurement at or before `at`
  double at = 0.0;
  double measured_at = 0.0;
  double epsilon = 0.0;
  double v_violation_max = 0.0;  // p.u., over records up to `at`
  std::optional<double> time_to_90;
  std::optional<int> samples_to_90;
};

// `subject` selects the PCC branch; empty picks the first requested PCC,
// else the first PCC seen. Throws MetricError on missing records.
Metrics compute_metrics(const Trace& trace, double p_set_watts, double at,
                        std::string_view subject = {});

}  // namespace flex
