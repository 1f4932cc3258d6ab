// SI file schema <-> per-unit GridNetwork. Branch impedances in the file are
// ohms referred to the from-bus nominal voltage.

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "flex/error.hpp"
#include "flex/grid.hpp"

namespace flex {

using nlohmann::json;

namespace {

double impedance_base(double v_nominal, double base_va) { return v_nominal * v_nominal / base_va; }

BusKind parse_bus_kind(const std::string& s) {
  if (s == "slack") return BusKind::slack;
  if (s == "pq") return BusKind::pq;
  throw ParseError("unknown bus_kind '" + s + "'");
}

ActorKind parse_actor_kind(const std::string& s) {
  if (s == "controllable") return ActorKind::controllable;
  if (s == "voltvar") return ActorKind::voltvar;
  if (s == "fixed_load") return ActorKind::fixed_load;
  throw ParseError("unknown actor kind '" + s + "'");
}

ControllerRole parse_role(const std::string& s) {
  if (s == "primary") return ControllerRole::primary;
  if (s == "secondary") return ControllerRole::secondary;
  throw ParseError("unknown controller role '" + s + "'");
}

const char* to_string(BusKind k) { return k == BusKind::slack ? "slack" : "pq"; }
const char* to_string(ActorKind k) {
  switch (k) {
    case ActorKind::controllable: return "controllable";
    case ActorKind::voltvar: return "voltvar";
    case ActorKind::fixed_load: return "fixed_load";
  }
  return "controllable";
}
const char* to_string(ControllerRole r) {
  return r == ControllerRole::primary ? "primary" : "secondary";
}

template <typename T>
std::optional<T> opt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

ControllerSpec parse_controller(const json& j) {
  ControllerSpec c;
  c.id = j.at("id").get<std::string>();
  c.layer = j.at("layer").get<std::string>();
  c.role = parse_role(j.at("role").get<std::string>());
  c.alpha = j.at("alpha").get<double>();
  c.cycle_time = j.at("cycle_time").get<double>();
  c.actors = j.value("actors", std::vector<std::string>{});
  c.observed_buses = opt<std::vector<std::string>>(j, "observed_buses");
  c.observed_branches = opt<std::vector<std::string>>(j, "observed_branches");
  c.parent = opt<std::string>(j, "parent");
  c.pcc_branch = opt<std::string>(j, "pcc_branch");
  return c;
}

HierarchySpec parse_hierarchy(const json& j) {
  HierarchySpec h;
  for (const auto& c : j.at("controllers")) h.controllers.push_back(parse_controller(c));
  return h;
}

NetworkDocument parse_document(const json& j) {
  const double base_mva = j.at("base_mva").get<double>();
  const double base_va = base_mva * 1e6;

  std::vector<Bus> buses;
  std::map<std::string, double> v_nom;
  for (const auto& jb : j.at("buses")) {
    Bus b;
    b.id = jb.at("id").get<std::string>();
    b.layer = jb.at("layer").get<std::string>();
    b.v_nominal = jb.at("v_nominal").get<double>();
    b.v_min = jb.at("v_min").get<double>();
    b.v_max = jb.at("v_max").get<double>();
    b.kind = parse_bus_kind(jb.at("bus_kind").get<std::string>());
    b.v_setpoint = jb.value("v_setpoint", 1.0);
    v_nom.emplace(b.id, b.v_nominal);
    buses.push_back(std::move(b));
  }

  std::vector<Branch> branches;
  for (const auto& jb : j.at("branches")) {
    Branch br;
    br.id = jb.at("id").get<std::string>();
    br.from_bus = jb.at("from_bus").get<std::string>();
    br.to_bus = jb.at("to_bus").get<std::string>();
    br.is_pcc = jb.value("is_pcc", false);
    // An unresolved from_bus is reported by validate(); keep the raw ohms.
    auto it = v_nom.find(br.from_bus);
    const double zb = (it != v_nom.end() && it->second > 0.0 && base_va > 0.0)
                          ? impedance_base(it->second, base_va)
                          : 1.0;
    br.resistance = jb.at("resistance").get<double>() / zb;
    br.reactance = jb.at("reactance").get<double>() / zb;
    br.s_max = jb.at("s_max").get<double>() / base_va;
    branches.push_back(std::move(br));
  }

  std::vector<Actor> actors;
  for (const auto& ja : j.at("actors")) {
    Actor a;
    a.id = ja.at("id").get<std::string>();
    a.bus = ja.at("bus").get<std::string>();
    a.kind = parse_actor_kind(ja.at("kind").get<std::string>());
    a.p_reference = ja.value("p_reference", 0.0) / base_va;
    a.q_reference = ja.value("q_reference", 0.0) / base_va;
    if (a.kind == ActorKind::fixed_load) {
      a.p_min = a.p_max = a.p_reference;
      a.q_min = a.q_max = a.q_reference;
      a.p_min = ja.value("p_min", a.p_min * base_va) / base_va;
      a.p_max = ja.value("p_max", a.p_max * base_va) / base_va;
      a.q_min = ja.value("q_min", a.q_min * base_va) / base_va;
      a.q_max = ja.value("q_max", a.q_max * base_va) / base_va;
    } else {
      a.p_min = ja.at("p_min").get<double>() / base_va;
      a.p_max = ja.at("p_max").get<double>() / base_va;
      a.q_min = ja.at("q_min").get<double>() / base_va;
      a.q_max = ja.at("q_max").get<double>() / base_va;
    }
    a.s_rated = ja.value("s_rated", 0.0) / base_va;
    if (auto jd = ja.find("droop"); jd != ja.end() && !jd->is_null()) {
      DroopCurve d;
      d.deadband = jd->value("deadband", d.deadband);
      d.v_saturation = jd->value("v_saturation", d.v_saturation);
      d.q_max_fraction = jd->value("q_max_fraction", d.q_max_fraction);
      a.droop = d;
    }
    actors.push_back(std::move(a));
  }

  NetworkDocument doc{GridNetwork(base_mva, std::move(buses), std::move(branches), std::move(actors)),
                      {}};
  if (auto jh = j.find("hierarchy"); jh != j.end() && !jh->is_null())
    doc.hierarchy = parse_hierarchy(*jh);
  return doc;
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed network file: ") + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json controller_to_json(const ControllerSpec& c) {
  json j;
  j["id"] = c.id;
  j["layer"] = c.layer;
  j["role"] = to_string(c.role);
  j["alpha"] = c.alpha;
  j["cycle_time"] = c.cycle_time;
  j["actors"] = c.actors;
  if (c.observed_buses) j["observed_buses"] = *c.observed_buses;
  if (c.observed_branches) j["observed_branches"] = *c.observed_branches;
  j["parent"] = c.parent ? json(*c.parent) : json(nullptr);
  j["pcc_branch"] = c.pcc_branch ? json(*c.pcc_branch) : json(nullptr);
  return j;
}

}  // namespace

NetworkDocument parse_network_document(std::string_view text) {
  return guarded([&] { return parse_document(json::parse(text)); });
}

HierarchySpec parse_hierarchy_json(std::string_view text) {
  return guarded([&] { return parse_hierarchy(json::parse(text)); });
}

NetworkDocument read_network_document(const std::filesystem::path& path) {
  return parse_network_document(read_text(path));
}

NetworkDocument load_network_document(const std::filesystem::path& path) {
  NetworkDocument doc = read_network_document(path);
  ValidationReport rep = doc.hierarchy.controllers.empty() ? validate(doc.network)
                                                            : validate(doc.network, doc.hierarchy);
  if (!rep.ok()) throw ValidationError(rep.violations);
  return doc;
}

GridNetwork load_network(const std::filesystem::path& path) {
  return load_network_document(path).network;
}

std::string serialize_network_document(const NetworkDocument& doc) {
  const GridNetwork& net = doc.network;
  const double base_va = net.base_va();
  json j;
  j["base_mva"] = net.base_mva();
  j["buses"] = json::array();
  for (const auto& b : net.buses()) {
    json jb{{"id", b.id},       {"layer", b.layer},     {"v_nominal", b.v_nominal},
            {"v_min", b.v_min}, {"v_max", b.v_max},     {"bus_kind", to_string(b.kind)},
            {"v_setpoint", b.v_setpoint}};
    j["buses"].push_back(std::move(jb));
  }
  j["branches"] = json::array();
  for (const auto& br : net.branches()) {
    auto fi = net.find_bus(br.from_bus);
    const double zb = fi ? impedance_base(net.buses()[*fi].v_nominal, base_va) : 1.0;
    json jb{{"id", br.id},
            {"from_bus", br.from_bus},
            {"to_bus", br.to_bus},
            {"resistance", br.resistance * zb},
            {"reactance", br.reactance * zb},
            {"s_max", br.s_max * base_va},
            {"is_pcc", br.is_pcc}};
    j["branches"].push_back(std::move(jb));
  }
  j["actors"] = json::array();
  for (const auto& a : net.actors()) {
    json ja{{"id", a.id},
            {"bus", a.bus},
            {"kind", to_string(a.kind)},
            {"p_min", a.p_min * base_va},
            {"p_max", a.p_max * base_va},
            {"q_min", a.q_min * base_va},
            {"q_max", a.q_max * base_va},
            {"s_rated", a.s_rated * base_va},
            {"p_reference", a.p_reference * base_va},
            {"q_reference", a.q_reference * base_va}};
    if (a.droop)
      ja["droop"] = {{"deadband", a.droop->deadband},
                     {"v_saturation", a.droop->v_saturation},
                     {"q_max_fraction", a.droop->q_max_fraction}};
    j["actors"].push_back(std::move(ja));
  }
  if (!doc.hierarchy.controllers.empty()) {
    json jc = json::array();
    for (const auto& c : doc.hierarchy.controllers) jc.push_back(controller_to_json(c));
    j["hierarchy"] = {{"controllers", std::move(jc)}};
  }
  return j.dump(2);
}

}  // namespace flex
