#pragma once

// Typed multi-layer network, actors and controller hierarchy.
//
// Everything inside GridNetwork is per-unit on the single system base
// `base_mva`; the file schema is SI (see docs/schema.md) and conversion
// happens in grid_io.cpp only. Actor powers use the injection sign
// convention: positive P/Q is fed into the grid.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flex {

enum class BusKind { slack, pq };

struct Bus {
  std::string id;
  std::string layer;
  double v_nominal = 0.0;  // volts
  double v_min = 0.95;     // per-unit
  double v_max = 1.05;     // per-unit
  BusKind kind = BusKind::pq;
  double v_setpoint = 1.0;  // slack only
};

struct Branch {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double resistance = 0.0;  // per-unit
  double reactance = 0.0;   // per-unit
  double s_max = 0.0;       // per-unit
  bool is_pcc = false;
};

struct DroopCurve {
  double deadband = 0.03;
  double v_saturation = 0.05;
  double q_max_fraction = 1.0;
};

enum class ActorKind { controllable, voltvar, fixed_load };

struct Actor {
  std::string id;
  std::string bus;
  ActorKind kind = ActorKind::controllable;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double s_rated = 0.0;
  double p_reference = 0.0;  // available (uncurtailed) power, or load for fixed_load
  double q_reference = 0.0;  // fixed_load reactive injection
  std::optional<DroopCurve> droop;
};

enum class ControllerRole { primary, secondary };

struct ControllerSpec {
  std::string id;
  std::string layer;
  ControllerRole role = ControllerRole::secondary;
  double alpha = 0.0;
  double cycle_time = 0.0;  // seconds
  std::vector<std::string> actors;
  // Empty optional means "the whole layer".
  std::optional<std::vector<std::string>> observed_buses;
  std::optional<std::vector<std::string>> observed_branches;
  std::optional<std::string> parent;
  std::optional<std::string> pcc_branch;
};

struct HierarchySpec {
  std::vector<ControllerSpec> controllers;

  const ControllerSpec& controller(std::string_view id) const;
  const ControllerSpec* find(std::string_view id) const;
};

// Immutable after construction. Lookups by id go through the index maps; the
// constructor does not validate (see validate()).
class GridNetwork {
 public:
  GridNetwork() = default;
  GridNetwork(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
              std::vector<Actor> actors);

  double base_mva() const { return base_mva_; }
  double base_va() const { return base_mva_ * 1e6; }

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<Actor>& actors() const { return actors_; }
  const std::vector<std::string>& layers() const { return layers_; }

  std::size_t bus_index(std::string_view id) const;
  std::size_t branch_index(std::string_view id) const;
  std::size_t actor_index(std::string_view id) const;
  std::optional<std::size_t> find_bus(std::string_view id) const;
  std::optional<std::size_t> find_branch(std::string_view id) const;
  std::optional<std::size_t> find_actor(std::string_view id) const;

  std::optional<std::size_t> slack_bus() const;

  double to_pu(double si_power) const { return si_power / base_va(); }
  double to_si(double pu_power) const { return pu_power * base_va(); }

 private:
  double base_mva_ = 1.0;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<Actor> actors_;
  std::vector<std::string> layers_;
  std::map<std::string, std::size_t, std::less<>> bus_by_id_;
  std::map<std::string, std::size_t, std::less<>> branch_by_id_;
  std::map<std::string, std::size_t, std::less<>> actor_by_id_;
};

// Network plus the hierarchy carried in the same file.
struct NetworkDocument {
  GridNetwork network;
  HierarchySpec hierarchy;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const GridNetwork& network);
ValidationReport validate(const GridNetwork& network, const HierarchySpec& hierarchy);

// Parsing and serialization of the SI file schema. parse/read do not
// validate; load_* additionally throws ValidationError on any violation.
NetworkDocument parse_network_document(std::string_view json_text);
NetworkDocument read_network_document(const std::filesystem::path& path);
NetworkDocument load_network_document(const std::filesystem::path& path);
GridNetwork load_network(const std::filesystem::path& path);
std::string serialize_network_document(const NetworkDocument& doc);
HierarchySpec parse_hierarchy_json(std::string_view json_text);

// ---- controller scope ------------------------------------------------------

// A flexible input of one controller: either a physical actor or the PCC of
// a child controller, which the parent actuates like any other set point.
struct ScopeActor {
  std::string id;  // actor id, or "pcc:<child controller id>"
  bool is_pcc = false;
  std::size_t actor_index = 0;   // physical actors
  std::string child_controller;  // PCC-actors
  std::size_t pcc_branch = 0;    // PCC-actors
  // +1 when the child sits on the to-side of the PCC branch, so that the
  // signed from->to flow equals the child's net consumption.
  int orientation = 1;
};

struct ControllerScope {
  std::string controller_id;
  std::vector<std::size_t> buses;         // observed buses N, ordered by id
  std::vector<std::size_t> branches;      // observed branches B, ordered by id
  std::vector<std::size_t> pcc_branches;  // own PCC + child PCCs, ordered by id
  std::vector<ScopeActor> actors;         // F, ordered by id
  std::optional<std::size_t> own_pcc;     // position within pcc_branches

  std::size_t measurement_size() const {
    return buses.size() + branches.size() + pcc_branches.size();
  }
  std::size_t input_size() const { return 2 * actors.size(); }
};

ControllerScope controller_scope(const GridNetwork& network, const HierarchySpec& hierarchy,
                                 std::string_view controller_id);

// Orientation of a PCC branch relative to the child layer; see ScopeActor.
int pcc_orientation(const GridNetwork& network, const Branch& pcc, std::string_view child_layer);

}  // namespace flex
