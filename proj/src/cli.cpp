#include "flex/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "flex/error.hpp"
#include "flex/grid.hpp"
#include "flex/sensitivity.hpp"
#include "flex/sim.hpp"

namespace flex {

namespace {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * fraction);
  return buf;
}

int cmd_validate(const std::string& network, std::ostream& out) {
  const NetworkDocument doc = read_network_document(network);
  const ValidationReport report = validate(doc.network, doc.hierarchy);
  if (!report.ok()) {
    out << "status: invalid\n";
    for (const auto& v : report.violations) out << "violation: " << v << '\n';
    return exit_validation;
  }
  out << "status: valid\n"
      << "buses: " << doc.network.buses().size() << '\n'
      << "branches: " << doc.network.branches().size() << '\n'
      << "actors: " << doc.network.actors().size() << '\n'
      << "controllers: " << doc.hierarchy.controllers.size() << '\n';
  return exit_ok;
}

// Every bus, branch and PCC flow against every controllable actor.
ControllerScope network_scope(const GridNetwork& net) {
  ControllerScope s;
  s.controller_id = "network";
  auto by_id = [](const auto& items) {
    std::vector<std::size_t> idx(items.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return items[a].id < items[b].id; });
    return idx;
  };
  s.buses = by_id(net.buses());
  s.branches = by_id(net.branches());
  for (std::size_t k : s.branches)
    if (net.branches()[k].is_pcc) s.pcc_branches.push_back(k);
  for (std::size_t i : by_id(net.actors())) {
    if (net.actors()[i].kind != ActorKind::controllable) continue;
    ScopeActor a;
    a.id = net.actors()[i].id;
    a.actor_index = i;
    s.actors.push_back(a);
  }
  return s;
}

struct SensitivityArgs {
  std::string network;
  std::string operating_point;
  std::string controller;
  std::string out;
  double delta = 1e-4;
  bool serial = false;
};

int cmd_sensitivity(const SensitivityArgs& a, std::ostream& out) {
  const NetworkDocument doc = load_network_document(a.network);
  const GridNetwork& net = doc.network;
  std::map<std::string, ActorSetpoint> sp;
  if (!a.operating_point.empty()) sp = parse_actor_setpoints(read_file(a.operating_point));
  for (const auto& [id, v] : sp)
    if (!net.find_actor(id)) throw ValidationError("operating point names unknown actor " + id);
  const OperatingPoint op = operating_point_with(net, sp);
  const ControllerScope scope =
      a.controller.empty() ? network_scope(net) : controller_scope(net, doc.hierarchy, a.controller);
  SensitivityOptions opts;
  opts.delta = a.delta;
  opts.parallel = !a.serial;
  const SensitivityMatrix m = compute_sensitivity(net, op, scope, opts);

  std::ofstream file;
  std::ostream* dst = &out;
  if (!a.out.empty()) {
    file = open_out(a.out);
    dst = &file;
  }
  *dst << "row,column,value\n";
  for (std::size_t r = 0; r < m.row_ids.size(); ++r)
    for (std::size_t c = 0; c < m.col_ids.size(); ++c)
      *dst << m.row_ids[r] << ',' << m.col_ids[c] << ',' << format_number(m.matrix(r, c)) << '\n';
  if (!a.out.empty() && !file) throw IoError("write failed: " + a.out);
  return exit_ok;
}

struct RunArgs {
  std::string scenario;
  std::string out;
  bool jsonl = false;
  bool serial = false;
  std::optional<double> duration;
  std::optional<double> alpha;
  std::optional<double> delta;
};

json summarize(const Scenario& s, const NetworkDocument& doc, const Trace& trace) {
  json j;
  j["network"] = s.network.filename().string();
  j["duration_s"] = s.duration;
  j["tick_s"] = static_cast<double>(scenario_tick_ms(s, doc.hierarchy)) / 1000.0;
  j["records"] = trace.size();
  std::map<std::string, double> last_pcc, last_request;
  double vmax = 0.0;
  double qp_iterations = 0.0;
  int slack_steps = 0;
  for (const auto& r : trace) {
    if (r.field == "p_pcc") last_pcc[r.subject] = r.value;
    if (r.field == "p_request") last_request[r.subject] = r.value;
    if (r.field == "v_violation_max") vmax = std::max(vmax, r.value);
    if (r.field == "iterations") qp_iterations = std::max(qp_iterations, r.value);
    if (r.kind == "qp_status" && r.field == "status" && r.value != 0.0) ++slack_steps;
  }
  j["final_p_pcc_w"] = last_pcc;
  j["v_violation_max_pu"] = vmax;
  j["qp_max_iterations"] = qp_iterations;
  j["qp_steps_with_slack"] = slack_steps;
  json requests = json::object();
  for (const auto& [subject, p_set] : last_request) {
    json e;
    e["p_request_w"] = p_set;
    if (p_set != 0.0) {
      const Metrics m = compute_metrics(trace, p_set, s.duration, subject);
      e["p_pcc_w"] = m.p_pcc;
      e["epsilon"] = m.epsilon;
      e["time_to_90_s"] = m.time_to_90 ? json(*m.time_to_90) : json(nullptr);
      e["samples_to_90"] = m.samples_to_90 ? json(*m.samples_to_90) : json(nullptr);
    }
    requests[subject] = e;
  }
  j["requests"] = requests;
  return j;
}

void write_outputs(const RunArgs& a, const Trace& trace) {
  {
    std::ofstream csv = open_out(a.out);
    write_trace_csv(csv, trace);
    if (!csv) throw IoError("write failed: " + a.out);
  }
  if (a.jsonl) {
    std::filesystem::path p = a.out;
    p.replace_extension(".jsonl");
    std::ofstream js = open_out(p);
    write_trace_jsonl(js, trace);
  }
}

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err, bool verbose) {
  Scenario s = load_scenario(a.scenario);
  if (a.duration) s.duration = *a.duration;
  if (a.delta) s.sensitivity_delta = *a.delta;
  if (!std::filesystem::exists(s.network))
    throw ValidationError("scenario references a missing network file: " + s.network.string());
  NetworkDocument doc = load_network_document(s.network);
  if (a.alpha)
    for (auto& c : doc.hierarchy.controllers) c.alpha = *a.alpha;
  if (verbose) err << "running " << a.scenario << " on " << s.network.string() << '\n';

  RunOptions opts;
  opts.parallel_sensitivity = !a.serial;
  Trace trace;
  try {
    trace = run_scenario(s, doc, opts);
  } catch (const SimulationAborted& e) {
    write_outputs(a, e.partial_trace());
    throw;
  }
  write_outputs(a, trace);

  std::filesystem::path sp = a.out;
  sp.replace_extension(".summary.json");
  std::ofstream sj = open_out(sp);
  sj << summarize(s, doc, trace).dump(2) << '\n';
  if (!sj) throw IoError("write failed: " + sp.string());
  out << "trace: " << a.out << " (" << trace.size() << " records)\n"
      << "summary: " << sp.string() << '\n';
  return exit_ok;
}

struct MetricsArgs {
  std::string trace;
  double setpoint = 0.0;
  double at = 0.0;
  std::string subject;
};

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  std::ifstream in(a.trace);
  if (!in) throw IoError("cannot read " + a.trace);
  const Trace trace = read_trace_csv(in);
  const Metrics m = compute_metrics(trace, a.setpoint, a.at, a.subject);
  out << "epsilon: " << percent(m.epsilon) << '\n'
      << "subject: " << m.subject << '\n'
      << "p_set_w: " << format_number(m.p_set) << '\n'
      << "p_pcc_w: " << format_number(m.p_pcc) << '\n'
      << "measured_at_s: " << format_number(m.measured_at) << '\n'
      << "v_violation_max_pu: " << format_number(m.v_violation_max) << '\n'
      << "time_to_90_s: " << (m.time_to_90 ? format_number(*m.time_to_90) : "n/a") << '\n'
      << "samples_to_90: " << (m.samples_to_90 ? std::to_string(*m.samples_to_90) : "n/a") << '\n';
  return exit_ok;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    for (const auto& v : e.violations()) err << "  " << v << '\n';
    return exit_validation;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return exit_parse;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return exit_io;
  } catch (const SensitivityError& e) {
    err << "numerical error: " << e.what() << " (perturbation " << e.input() << ")\n";
    return exit_numerical;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return exit_numerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_validation;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical online feedback optimization dispatch simulator", "flexdispatch"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("--verbose", verbose, "Progress messages on stderr");

  std::string validate_network;
  auto* validate_cmd = app.add_subcommand("validate", "Check a network file");
  validate_cmd->add_option("--network", validate_network, "Network JSON")->required();

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write its trace");
  run_cmd->add_option("--scenario", run.scenario, "Scenario JSON")->required();
  run_cmd->add_option("--out", run.out, "Trace CSV path")->required();
  run_cmd->add_flag("--jsonl", run.jsonl, "Also write a JSON-lines mirror");
  run_cmd->add_flag("--serial", run.serial, "Compute sensitivities on one thread");
  run_cmd->add_option("--duration", run.duration, "Override duration in seconds");
  run_cmd->add_option("--alpha", run.alpha, "Override every controller gain");
  run_cmd->add_option("--delta", run.delta, "Override the sensitivity perturbation (p.u.)");

  SensitivityArgs sens;
  auto* sens_cmd = app.add_subcommand("sensitivity", "Dump a sensitivity matrix as CSV");
  sens_cmd->add_option("--network", sens.network, "Network JSON")->required();
  sens_cmd->add_option("--operating-point", sens.operating_point, "Actor set points JSON");
  sens_cmd->add_option("--controller", sens.controller, "Restrict to one controller's scope");
  sens_cmd->add_option("--delta", sens.delta, "Perturbation (p.u.)");
  sens_cmd->add_option("--out", sens.out, "Output CSV (stdout when omitted)");
  sens_cmd->add_flag("--serial", sens.serial, "Compute on one thread");

  MetricsArgs met;
  auto* met_cmd = app.add_subcommand("metrics", "Tracking error of a trace");
  met_cmd->add_option("--trace", met.trace, "Trace CSV")->required();
  met_cmd->add_option("--setpoint", met.setpoint, "Requested PCC flow in W")->required();
  met_cmd->add_option("--at", met.at, "Evaluation time in seconds")->required();
  met_cmd->add_option("--subject", met.subject, "PCC branch id");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return exit_parse;
  }

  if (*validate_cmd) return guarded([&] { return cmd_validate(validate_network, out); }, err);
  if (*run_cmd) return guarded([&] { return cmd_run(run, out, err, verbose); }, err);
  if (*sens_cmd) return guarded([&] { return cmd_sensitivity(sens, out); }, err);
  return guarded([&] { return cmd_metrics(met, out); }, err);
}

}  // namespace flex
