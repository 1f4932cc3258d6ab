#include "flex/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "flex/hierarchy.hpp"
#include "flex/sensitivity.hpp"
#include "flex/voltvar.hpp"
#include "json.hpp"

namespace flex {

using json = nlohmann::json;

namespace {

EventKind parse_event_kind(const std::string& s) {
  if (s == "set_point_request") return EventKind::set_point_request;
  if (s == "load_step") return EventKind::load_step;
  if (s == "actor_outage") return EventKind::actor_outage;
  throw ParseError("unknown event kind '" + s + "'");
}

std::map<std::string, ActorSetpoint> setpoints_from(const json& j) {
  std::map<std::string, ActorSetpoint> out;
  for (const auto& [id, v] : j.items()) out[id] = {v.value("p", 0.0), v.value("q", 0.0)};
  return out;
}

std::int64_t to_ms(double seconds, const std::string& what) {
  const double ms = seconds * 1000.0;
  const double r = std::round(ms);
  if (!std::isfinite(ms) || std::abs(ms - r) > 1e-6)
    throw ValidationError(what + " must be a whole number of milliseconds");
  return static_cast<std::int64_t>(r);
}

}  // namespace

Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir) {
  try {
    const json j = json::parse(text);
    Scenario s;
    std::filesystem::path net = j.at("network").get<std::string>();
    s.network = net.is_relative() && !base_dir.empty() ? base_dir / net : net;
    s.duration = j.at("duration").get<double>();
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("tick") && !j["tick"].is_null()) s.tick = j["tick"].get<double>();
    s.sensitivity_delta = j.value("sensitivity_delta", 1e-4);
    if (j.contains("initial")) s.initial = setpoints_from(j["initial"]);
    for (const auto& je : j.value("events", json::array())) {
      ScenarioEvent e;
      e.time = je.at("time").get<double>();
      e.kind = parse_event_kind(je.at("kind").get<std::string>());
      switch (e.kind) {
        case EventKind::set_point_request:
          e.target = je.at("controller").get<std::string>();
          e.p = je.at("p_set").get<double>();
          break;
        case EventKind::load_step:
          e.target = je.at("bus").get<std::string>();
          e.p = je.value("p", 0.0);
          e.q = je.value("q", 0.0);
          break;
        case EventKind::actor_outage:
          e.target = je.at("actor").get<std::string>();
          break;
      }
      s.events.push_back(std::move(e));
    }
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const ScenarioEvent& a, const ScenarioEvent& b) { return a.time < b.time; });
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read scenario " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.parent_path());
}

std::map<std::string, ActorSetpoint> parse_actor_setpoints(std::string_view text) {
  try {
    const json j = json::parse(text);
    return setpoints_from(j.at("actors"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("operating point: ") + e.what());
  }
}

OperatingPoint operating_point_with(const GridNetwork& net,
                                    const std::map<std::string, ActorSetpoint>& setpoints) {
  OperatingPoint op = nominal_operating_point(net);
  for (const auto& [id, sp] : setpoints) {
    const std::size_t i = net.actor_index(id);
    op.actor_p[i] = net.to_pu(sp.p);
    op.actor_q[i] = net.to_pu(sp.q);
  }
  return op;
}

std::int64_t scenario_tick_ms(const Scenario& s, const HierarchySpec& h) {
  if (s.tick) {
    const std::int64_t t = to_ms(*s.tick, "tick");
    if (t <= 0) throw ValidationError("tick must be positive");
    return t;
  }
  std::int64_t g = 0;
  for (const auto& c : h.controllers) g = std::gcd(g, to_ms(c.cycle_time, "cycle time of " + c.id));
  for (const auto& e : s.events) g = std::gcd(g, to_ms(e.time, "event time"));
  return g > 0 ? g : 1000;
}

void validate_scenario(const Scenario& s, const NetworkDocument& doc) {
  std::vector<std::string> v;
  if (!(s.duration >= 0.0) || !std::isfinite(s.duration)) v.push_back("duration must be >= 0");
  if (!(s.sensitivity_delta > 0.0)) v.push_back("sensitivity_delta must be positive");
  const auto& net = doc.network;
  const ControllerSpec* primary = nullptr;
  for (const auto& c : doc.hierarchy.controllers)
    if (c.role == ControllerRole::primary) primary = &c;
  for (const auto& [id, sp] : s.initial) {
    if (!net.find_actor(id)) v.push_back("initial set point for unknown actor " + id);
    (void)sp;
  }
  for (const auto& e : s.events) {
    if (e.time < 0.0 || e.time > s.duration)
      v.push_back("event at t=" + format_number(e.time) + " lies outside [0, duration]");
    switch (e.kind) {
      case EventKind::set_point_request: {
        const ControllerSpec* c = doc.hierarchy.find(e.target);
        if (c == nullptr)
          v.push_back("request for unknown controller " + e.target);
        else if (c->role != ControllerRole::secondary || !primary || !c->parent ||
                 *c->parent != primary->id)
          v.push_back("requests must target a direct child of the primary: " + e.target);
        break;
      }
      case EventKind::load_step:
        if (!net.find_bus(e.target)) v.push_back("load step at unknown bus " + e.target);
        break;
      case EventKind::actor_outage:
        if (!net.find_actor(e.target)) v.push_back("outage of unknown actor " + e.target);
        break;
    }
  }
  if (!v.empty()) throw ValidationError(v);
}

namespace {

class Recorder {
 public:
  explicit Recorder(Trace& t) : trace_(t) {}
  void add(double time, const char* kind, const std::string& subject, const char* field,
           double value) {
    trace_.push_back({time, kind, subject, field, value});
  }

 private:
  Trace& trace_;
};

void record_plant(Recorder& rec, double t, const GridNetwork& net, const OperatingPoint& op,
                  const PowerFlowSolution& sol) {
  double violation = 0.0;
  for (std::size_t b = 0; b < net.buses().size(); ++b) {
    const Bus& bus = net.buses()[b];
    rec.add(t, "measurement", bus.id, "v_pu", sol.vm[b]);
    violation = std::max({violation, sol.vm[b] - bus.v_max, bus.v_min - sol.vm[b]});
  }
  for (std::size_t k = 0; k < net.branches().size(); ++k)
    rec.add(t, "measurement", net.branches()[k].id, "s", net.to_si(sol.branch_s[k]));
  for (std::size_t k = 0; k < net.branches().size(); ++k)
    if (net.branches()[k].is_pcc)
      rec.add(t, "measurement", net.branches()[k].id, "p_pcc", net.to_si(sol.branch_p[k]));
  for (std::size_t i = 0; i < net.actors().size(); ++i)
    if (net.actors()[i].kind == ActorKind::voltvar)
      rec.add(t, "measurement", net.actors()[i].id, "q_droop", net.to_si(op.actor_q[i]));
  rec.add(t, "metric", "grid", "v_violation_max", violation);
}

void record_tracking(Recorder& rec, double t, const GridNetwork& net, const Hierarchy& h,
                     const PowerFlowSolution& sol) {
  for (const auto& id : h.top_down()) {
    const ControllerNode& n = h.node(id);
    const auto* obj = std::get_if<TrackingObjective>(&n.state.objective);
    if (obj == nullptr || !n.pcc_branch || obj->p_set == 0.0) continue;
    (void)net;
    rec.add(t, "metric", n.id, "epsilon", tracking_error(obj->p_set, sol.branch_p[*n.pcc_branch]));
  }
}

}  // namespace

Trace run_scenario(const Scenario& s, const NetworkDocument& doc, RunOptions options) {
  validate_scenario(s, doc);
  if (auto report = validate(doc.network, doc.hierarchy); !report.ok())
    throw ValidationError(report.violations);
  const GridNetwork& net = doc.network;
  Trace trace;
  if (s.duration == 0.0) return trace;

  const std::int64_t tick = scenario_tick_ms(s, doc.hierarchy);
  const std::int64_t end = to_ms(std::floor(s.duration * 1000.0) / 1000.0, "duration");
  Recorder rec(trace);

  OperatingPoint op = operating_point_with(net, s.initial);
  const PowerFlowSolver solver(net);
  PowerFlowSolution sol;
  try {
    sol = resolve_plant(solver, op).solution;
  } catch (const NumericalError& e) {
    throw SimulationAborted(std::string("initial plant solve failed: ") + e.what(), trace);
  }
  double sol_time = 0.0;

  SensitivitySet sens;
  SensitivityOptions sopt;
  sopt.delta = s.sensitivity_delta;
  sopt.parallel = options.parallel_sensitivity;
  for (const auto& c : doc.hierarchy.controllers)
    sens.emplace(c.id, compute_sensitivity(net, op, controller_scope(net, doc.hierarchy, c.id), sopt));
  Hierarchy h = build_hierarchy(net, doc.hierarchy, sens, op, sol);
  const std::string primary = h.root().id;

  std::map<std::string, std::int64_t, std::less<>> cycle_ms;
  for (const auto& c : doc.hierarchy.controllers) cycle_ms[c.id] = to_ms(c.cycle_time, "cycle time");

  record_plant(rec, 0.0, net, op, sol);
  for (const auto& id : h.top_down()) {
    const ControllerNode& n = h.node(id);
    if (const auto* obj = std::get_if<TrackingObjective>(&n.state.objective); obj && n.pcc_branch)
      rec.add(0.0, "request", net.branches()[*n.pcc_branch].id, "p_set", net.to_si(obj->p_set));
  }

  std::size_t next_event = 0;
  for (std::int64_t now_ms = 0; now_ms <= end; now_ms += tick) {
    const double now = static_cast<double>(now_ms) / 1000.0;

    while (next_event < s.events.size() && to_ms(s.events[next_event].time, "event time") <= now_ms) {
      const ScenarioEvent& e = s.events[next_event++];
      switch (e.kind) {
        case EventKind::set_point_request: {
          set_reference(h.node(primary).state, "pcc:" + e.target, net.to_pu(e.p));
          const auto& child = h.node(e.target);
          rec.add(now, "request", net.branches()[*child.pcc_branch].id, "p_request", e.p);
          break;
        }
        case EventKind::load_step: {
          const std::size_t b = net.bus_index(e.target);
          op.bus_p[b] -= net.to_pu(e.p);
          op.bus_q[b] -= net.to_pu(e.q);
          break;
        }
        case EventKind::actor_outage:
          op.actor_online[net.actor_index(e.target)] = false;
          break;
      }
    }

    for (const auto& id : h.top_down()) {
      if (now_ms % cycle_ms.at(id) != 0) continue;
      ControllerNode& n = h.node(id);
      ControllerState& st = n.state;
      const MeasurementVector y = extract_measurements(sol, st.scope, sol_time);
      refresh_envelopes(h, id, net, op, sol);
      const StepResult step = ofo_step(st, y, now);
      st.u = step.u;
      for (std::size_t i = 0; i < st.scope.actors.size(); ++i) {
        const ScopeActor& a = st.scope.actors[i];
        if (!a.is_pcc) {
          op.actor_p[a.actor_index] = st.u.p(i);
          op.actor_q[a.actor_index] = st.u.q(i);
        }
        rec.add(now, "setpoint", a.id, "p", net.to_si(st.u.p(i)));
        rec.add(now, "setpoint", a.id, "q", net.to_si(st.u.q(i)));
      }
      for (const auto& r : propagate_setpoints(h, id))
        rec.add(now, "request", net.branches()[r.pcc_branch].id, "p_set", net.to_si(r.p_set));
      double wn = 0.0;
      for (double w : step.qp.w) wn += w * w;
      rec.add(now, "qp_status", id, "status", step.qp.status == QpStatus::optimal ? 0.0 : 1.0);
      rec.add(now, "qp_status", id, "w_norm", std::sqrt(wn));
      rec.add(now, "qp_status", id, "iterations", step.qp.iterations);
    }

    try {
      sol = resolve_plant(solver, op, &sol).solution;
    } catch (const NumericalError& e) {
      rec.add(now, "metric", "grid", "aborted", 1.0);
      throw SimulationAborted("plant solve failed at t=" + format_number(now) + ": " + e.what(),
                              std::move(trace));
    }
    sol_time = now;
    record_plant(rec, now, net, op, sol);
    record_tracking(rec, now, net, h, sol);
  }
  return trace;
}

Trace run_scenario(const Scenario& s, RunOptions options) {
  if (!std::filesystem::exists(s.network))
    throw ValidationError("scenario references a missing network file: " + s.network.string());
  return run_scenario(s, load_network_document(s.network), options);
}

std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << "time_s,kind,subject,field,value\n";
  for (const auto& r : trace)
    out << format_number(r.time) << ',' << r.kind << ',' << r.subject << ',' << r.field << ','
        << format_number(r.value) << '\n';
}

void write_trace_jsonl(std::ostream& out, const Trace& trace) {
  for (const auto& r : trace) {
    json j;
    j["time_s"] = r.time;
    j["kind"] = r.kind;
    j["subject"] = r.subject;
    j["field"] = r.field;
    j["value"] = r.value;
    out << j.dump() << '\n';
  }
}

Trace read_trace_csv(std::istream& in) {
  Trace trace;
  std::string line;
  if (!std::getline(in, line) || line.rfind("time_s,kind,subject,field,value", 0) != 0)
    throw ParseError("trace: missing header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.back() == '\r') line.pop_back();
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw ParseError("trace line " + std::to_string(lineno) + ": expected 5 fields");
    TraceRecord r;
    auto num = [&](const std::string& s, double& out) {
      const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError("trace line " + std::to_string(lineno) + ": bad number '" + s + "'");
    };
    num(f[0], r.time);
    r.kind = f[1];
    r.subject = f[2];
    r.field = f[3];
    num(f[4], r.value);
    trace.push_back(std::move(r));
  }
  return trace;
}

Metrics compute_metrics(const Trace& trace, double p_set, double at, std::string_view subject) {
  Metrics m;
  m.p_set = p_set;
  m.at = at;
  if (subject.empty()) {
    for (const auto& r : trace)
      if (r.kind == "request") {
        m.subject = r.subject;
        break;
      }
    if (m.subject.empty())
      for (const auto& r : trace)
        if (r.field == "p_pcc") {
          m.subject = r.subject;
          break;
        }
  } else {
    m.subject = subject;
  }

  std::optional<double> baseline;
  std::optional<double> latest;
  int samples = 0;
  for (const auto& r : trace) {
    if (r.time > at) continue;
    if (r.kind == "metric" && r.field == "v_violation_max")
      m.v_violation_max = std::max(m.v_violation_max, r.value);
    if (r.kind != "measurement" || r.field != "p_pcc" || r.subject != m.subject) continue;
    if (!baseline) {
      baseline = r.value;
    } else {
      ++samples;
    }
    latest = r.value;
    m.measured_at = r.time;
    const double change = p_set - *baseline;
    if (!m.time_to_90 && change != 0.0 && (r.value - *baseline) / change >= 0.9) {
      m.time_to_90 = r.time;
      m.samples_to_90 = samples;
    }
  }
  if (!latest)
    throw MetricError("no PCC measurement" + (m.subject.empty() ? std::string() : " for " + m.subject) +
                      " at or before t=" + format_number(at));
  m.p_pcc = *latest;
  m.epsilon = tracking_error(p_set, m.p_pcc);
  return m;
}

}  // namespace flex
