#include "flex/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "flex/error.hpp"

namespace flex {

namespace {

template <typename T>
std::map<std::string, std::size_t, std::less<>> index_by_id(const std::vector<T>& items) {
  std::map<std::string, std::size_t, std::less<>> out;
  for (std::size_t i = 0; i < items.size(); ++i) out.emplace(items[i].id, i);
  return out;
}

template <typename Map>
std::optional<std::size_t> lookup(const Map& m, std::string_view id) {
  auto it = m.find(id);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

template <typename T>
void report_duplicates(const std::vector<T>& items, std::string_view what,
                       std::vector<std::string>& out) {
  std::set<std::string, std::less<>> seen;
  for (const auto& item : items) {
    if (!seen.insert(item.id).second)
      out.push_back("duplicate " + std::string(what) + " id '" + item.id + "'");
  }
}

std::string quote(std::string_view s) { return "'" + std::string(s) + "'"; }

}  // namespace

// ---- HierarchySpec ---------------------------------------------------------

const ControllerSpec* HierarchySpec::find(std::string_view id) const {
  for (const auto& c : controllers)
    if (c.id == id) return &c;
  return nullptr;
}

const ControllerSpec& HierarchySpec::controller(std::string_view id) const {
  if (const auto* c = find(id)) return *c;
  throw ScopeError("unknown controller " + quote(id));
}

// ---- GridNetwork -----------------------------------------------------------

GridNetwork::GridNetwork(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
                         std::vector<Actor> actors)
    : base_mva_(base_mva),
      buses_(std::move(buses)),
      branches_(std::move(branches)),
      actors_(std::move(actors)) {
  bus_by_id_ = index_by_id(buses_);
  branch_by_id_ = index_by_id(branches_);
  actor_by_id_ = index_by_id(actors_);
  std::set<std::string> layers;
  for (const auto& b : buses_) layers.insert(b.layer);
  layers_.assign(layers.begin(), layers.end());
}

std::optional<std::size_t> GridNetwork::find_bus(std::string_view id) const {
  return lookup(bus_by_id_, id);
}
std::optional<std::size_t> GridNetwork::find_branch(std::string_view id) const {
  return lookup(branch_by_id_, id);
}
std::optional<std::size_t> GridNetwork::find_actor(std::string_view id) const {
  return lookup(actor_by_id_, id);
}

std::size_t GridNetwork::bus_index(std::string_view id) const {
  if (auto i = find_bus(id)) return *i;
  throw ScopeError("unknown bus " + quote(id));
}
std::size_t GridNetwork::branch_index(std::string_view id) const {
  if (auto i = find_branch(id)) return *i;
  throw ScopeError("unknown branch " + quote(id));
}
std::size_t GridNetwork::actor_index(std::string_view id) const {
  if (auto i = find_actor(id)) return *i;
  throw ScopeError("unknown actor " + quote(id));
}

std::optional<std::size_t> GridNetwork::slack_bus() const {
  for (std::size_t i = 0; i < buses_.size(); ++i)
    if (buses_[i].kind == BusKind::slack) return i;
  return std::nullopt;
}

// ---- validation ------------------------------------------------------------

ValidationReport validate(const GridNetwork& net) {
  ValidationReport rep;
  auto& v = rep.violations;

  if (!(net.base_mva() > 0.0)) v.push_back("base_mva must be positive");
  report_duplicates(net.buses(), "bus", v);
  report_duplicates(net.branches(), "branch", v);
  report_duplicates(net.actors(), "actor", v);

  int slacks = 0;
  for (const auto& b : net.buses()) {
    if (b.kind == BusKind::slack) ++slacks;
    if (!(b.v_nominal > 0.0)) v.push_back("bus " + quote(b.id) + ": v_nominal must be positive");
    if (!(b.v_min < 1.0 && 1.0 < b.v_max))
      v.push_back("bus " + quote(b.id) + ": voltage band must satisfy v_min < 1 < v_max");
    if (b.kind == BusKind::slack && !(b.v_setpoint > 0.0))
      v.push_back("bus " + quote(b.id) + ": slack v_setpoint must be positive");
  }
  if (slacks == 0) v.push_back("network has no slack bus");
  if (slacks > 1) v.push_back("network has more than one slack bus");

  for (const auto& br : net.branches()) {
    const std::string tag = "branch " + quote(br.id);
    const bool from_ok = net.find_bus(br.from_bus).has_value();
    const bool to_ok = net.find_bus(br.to_bus).has_value();
    if (!from_ok) v.push_back(tag + ": from_bus " + quote(br.from_bus) + " does not exist");
    if (!to_ok) v.push_back(tag + ": to_bus " + quote(br.to_bus) + " does not exist");
    if (br.from_bus == br.to_bus) v.push_back(tag + ": from_bus equals to_bus");
    if (br.resistance < 0.0) v.push_back(tag + ": negative resistance");
    if (!(br.reactance != 0.0 || br.resistance > 0.0)) v.push_back(tag + ": zero impedance");
    if (!(br.s_max > 0.0)) v.push_back(tag + ": s_max must be positive");
  }

  // Connectivity over resolvable branches.
  const std::size_t nb = net.buses().size();
  if (nb > 0) {
    std::vector<std::size_t> parent(nb);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& br : net.branches()) {
      auto f = net.find_bus(br.from_bus);
      auto t = net.find_bus(br.to_bus);
      if (f && t) parent[find(*f)] = find(*t);
    }
    const std::size_t root = find(0);
    for (std::size_t i = 1; i < nb; ++i) {
      if (find(i) != root) {
        v.push_back("network is not connected (bus " + quote(net.buses()[i].id) +
                    " is isolated from " + quote(net.buses()[0].id) + ")");
        break;
      }
    }
  }

  for (const auto& a : net.actors()) {
    const std::string tag = "actor " + quote(a.id);
    if (!net.find_bus(a.bus)) v.push_back(tag + ": bus " + quote(a.bus) + " does not exist");
    if (a.p_min > a.p_max) v.push_back(tag + ": p_min > p_max");
    if (a.q_min > a.q_max) v.push_back(tag + ": q_min > q_max");
    if (a.s_rated < 0.0) v.push_back(tag + ": negative s_rated");
    if (a.kind != ActorKind::fixed_load &&
        std::abs(a.p_reference) > std::max(std::abs(a.p_min), std::abs(a.p_max)) + 1e-12)
      v.push_back(tag + ": |p_reference| exceeds the active power range");
    if (a.kind == ActorKind::voltvar) {
      if (!a.droop) {
        v.push_back(tag + ": voltvar actor needs a droop curve");
      } else {
        const auto& d = *a.droop;
        if (!(0.0 < d.deadband && d.deadband < d.v_saturation))
          v.push_back(tag + ": droop must satisfy 0 < deadband < v_saturation");
        if (!(0.0 < d.q_max_fraction && d.q_max_fraction <= 1.0))
          v.push_back(tag + ": droop q_max_fraction must be in (0, 1]");
      }
      if (std::abs(a.p_reference) > a.s_rated)
        v.push_back(tag + ": voltvar p_reference exceeds s_rated");
    } else if (a.droop) {
      v.push_back(tag + ": droop curve only allowed on voltvar actors");
    }
  }
  return rep;
}

namespace {

std::string bus_layer(const GridNetwork& net, std::string_view bus_id) {
  auto i = net.find_bus(bus_id);
  return i ? net.buses()[*i].layer : std::string{};
}

bool branch_inside_layer(const GridNetwork& net, const Branch& br, std::string_view layer) {
  return !br.is_pcc && bus_layer(net, br.from_bus) == layer && bus_layer(net, br.to_bus) == layer;
}

std::vector<const ControllerSpec*> children_of(const HierarchySpec& h, std::string_view id) {
  std::vector<const ControllerSpec*> out;
  for (const auto& c : h.controllers)
    if (c.parent && *c.parent == id) out.push_back(&c);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id < b->id; });
  return out;
}

}  // namespace

int pcc_orientation(const GridNetwork& net, const Branch& pcc, std::string_view child_layer) {
  if (bus_layer(net, pcc.to_bus) == child_layer) return 1;
  if (bus_layer(net, pcc.from_bus) == child_layer) return -1;
  throw ValidationError("pcc branch " + quote(pcc.id) + " does not touch layer " +
                        quote(child_layer));
}

ValidationReport validate(const GridNetwork& net, const HierarchySpec& h) {
  ValidationReport rep = validate(net);
  auto& v = rep.violations;

  std::set<std::string, std::less<>> ids;
  int primaries = 0;
  for (const auto& c : h.controllers) {
    const std::string tag = "controller " + quote(c.id);
    if (!ids.insert(c.id).second) v.push_back("duplicate controller id " + quote(c.id));
    if (c.role == ControllerRole::primary) {
      ++primaries;
      if (c.parent) v.push_back(tag + ": primary controller must not have a parent");
      if (c.pcc_branch) v.push_back(tag + ": primary controller has no pcc branch");
    } else {
      if (!c.parent) v.push_back(tag + ": secondary controller needs a parent");
      if (!c.pcc_branch) v.push_back(tag + ": secondary controller needs a pcc branch");
    }
    if (!(c.alpha > 0.0)) v.push_back(tag + ": alpha must be positive");
    if (!(c.cycle_time > 0.0)) v.push_back(tag + ": cycle_time must be positive");
    if (std::find(net.layers().begin(), net.layers().end(), c.layer) == net.layers().end())
      v.push_back(tag + ": layer " + quote(c.layer) + " has no buses");
    if (c.parent && !h.find(*c.parent))
      v.push_back(tag + ": parent " + quote(*c.parent) + " does not exist");
    if (c.parent && *c.parent == c.id) v.push_back(tag + ": controller is its own parent");
  }
  if (primaries == 0) v.push_back("hierarchy has no primary controller");
  if (primaries > 1) v.push_back("multiple primaries in hierarchy");

  // Parent edges must form a tree rooted at the primary.
  for (const auto& c : h.controllers) {
    std::set<std::string> path{c.id};
    const ControllerSpec* cur = &c;
    while (cur->parent) {
      const ControllerSpec* p = h.find(*cur->parent);
      if (!p) break;
      if (!path.insert(p->id).second) {
        v.push_back("cyclic parent references involving controller " + quote(c.id));
        break;
      }
      cur = p;
    }
  }

  // Actor assignment.
  std::map<std::string, std::string> owner;
  for (const auto& c : h.controllers) {
    for (const auto& aid : c.actors) {
      auto ai = net.find_actor(aid);
      if (!ai) {
        v.push_back("controller " + quote(c.id) + ": actor " + quote(aid) + " does not exist");
        continue;
      }
      const Actor& a = net.actors()[*ai];
      if (a.kind != ActorKind::controllable)
        v.push_back("controller " + quote(c.id) + ": actor " + quote(aid) +
                    " is not controllable");
      if (bus_layer(net, a.bus) != c.layer)
        v.push_back("controller " + quote(c.id) + ": actor " + quote(aid) +
                    " is not connected to layer " + quote(c.layer));
      auto [it, fresh] = owner.emplace(aid, c.id);
      if (!fresh)
        v.push_back("duplicate actor assignment: " + quote(aid) + " is listed under " +
                    quote(it->second) + " and " + quote(c.id));
    }
  }
  if (!h.controllers.empty()) {
    for (const auto& a : net.actors())
      if (a.kind == ActorKind::controllable && !owner.count(a.id))
        v.push_back("controllable actor " + quote(a.id) + " is not assigned to any controller");
  }

  // PCC links and observability.
  std::map<std::string, std::string> pcc_owner;
  for (const auto& c : h.controllers) {
    const std::string tag = "controller " + quote(c.id);
    std::set<std::string> allowed_branches;
    if (c.pcc_branch) {
      auto bi = net.find_branch(*c.pcc_branch);
      if (!bi) {
        v.push_back(tag + ": pcc branch " + quote(*c.pcc_branch) + " does not exist");
      } else {
        const Branch& br = net.branches()[*bi];
        allowed_branches.insert(br.id);
        if (!br.is_pcc) v.push_back(tag + ": pcc branch " + quote(br.id) + " is not marked is_pcc");
        const ControllerSpec* parent = c.parent ? h.find(*c.parent) : nullptr;
        const std::string lf = bus_layer(net, br.from_bus);
        const std::string lt = bus_layer(net, br.to_bus);
        if (parent) {
          const bool links = (lf == parent->layer && lt == c.layer) ||
                             (lt == parent->layer && lf == c.layer);
          if (!links)
            v.push_back(tag + ": pcc branch " + quote(br.id) + " does not link layer " +
                        quote(parent->layer) + " to layer " + quote(c.layer));
        }
        auto [it, fresh] = pcc_owner.emplace(br.id, c.id);
        if (!fresh)
          v.push_back("pcc branch " + quote(br.id) + " is claimed by " + quote(it->second) +
                      " and " + quote(c.id));
      }
    }
    for (const auto* child : children_of(h, c.id))
      if (child->pcc_branch) allowed_branches.insert(*child->pcc_branch);

    if (c.observed_buses) {
      for (const auto& b : *c.observed_buses) {
        if (!net.find_bus(b))
          v.push_back(tag + ": observed bus " + quote(b) + " does not exist");
        else if (bus_layer(net, b) != c.layer)
          v.push_back(tag + ": observed bus " + quote(b) + " is outside layer " + quote(c.layer));
      }
    }
    if (c.observed_branches) {
      for (const auto& b : *c.observed_branches) {
        auto bi = net.find_branch(b);
        if (!bi) {
          v.push_back(tag + ": observed branch " + quote(b) + " does not exist");
          continue;
        }
        const Branch& br = net.branches()[*bi];
        if (!branch_inside_layer(net, br, c.layer) && !allowed_branches.count(br.id))
          v.push_back(tag + ": observed branch " + quote(b) +
                      " is outside layer " + quote(c.layer) + " and its PCCs");
      }
    }
  }
  return rep;
}

// ---- scope -----------------------------------------------------------------

ControllerScope controller_scope(const GridNetwork& net, const HierarchySpec& h,
                                 std::string_view controller_id) {
  const ControllerSpec& c = h.controller(controller_id);
  ControllerScope scope;
  scope.controller_id = c.id;

  auto by_bus_id = [&](std::size_t a, std::size_t b) {
    return net.buses()[a].id < net.buses()[b].id;
  };
  auto by_branch_id = [&](std::size_t a, std::size_t b) {
    return net.branches()[a].id < net.branches()[b].id;
  };

  if (c.observed_buses) {
    for (const auto& b : *c.observed_buses) scope.buses.push_back(net.bus_index(b));
  } else {
    for (std::size_t i = 0; i < net.buses().size(); ++i)
      if (net.buses()[i].layer == c.layer) scope.buses.push_back(i);
  }
  std::sort(scope.buses.begin(), scope.buses.end(), by_bus_id);
  scope.buses.erase(std::unique(scope.buses.begin(), scope.buses.end()), scope.buses.end());

  const auto children = children_of(h, c.id);
  if (c.pcc_branch) scope.pcc_branches.push_back(net.branch_index(*c.pcc_branch));
  for (const auto* child : children)
    if (child->pcc_branch) scope.pcc_branches.push_back(net.branch_index(*child->pcc_branch));
  std::sort(scope.pcc_branches.begin(), scope.pcc_branches.end(), by_branch_id);
  if (c.pcc_branch) {
    const std::size_t own = net.branch_index(*c.pcc_branch);
    auto it = std::find(scope.pcc_branches.begin(), scope.pcc_branches.end(), own);
    scope.own_pcc = static_cast<std::size_t>(it - scope.pcc_branches.begin());
  }

  if (c.observed_branches) {
    for (const auto& b : *c.observed_branches) scope.branches.push_back(net.branch_index(b));
  } else {
    for (std::size_t i = 0; i < net.branches().size(); ++i)
      if (branch_inside_layer(net, net.branches()[i], c.layer)) scope.branches.push_back(i);
    scope.branches.insert(scope.branches.end(), scope.pcc_branches.begin(),
                          scope.pcc_branches.end());
  }
  std::sort(scope.branches.begin(), scope.branches.end(), by_branch_id);
  scope.branches.erase(std::unique(scope.branches.begin(), scope.branches.end()),
                       scope.branches.end());

  for (const auto& aid : c.actors) {
    ScopeActor a;
    a.id = aid;
    a.actor_index = net.actor_index(aid);
    scope.actors.push_back(std::move(a));
  }
  for (const auto* child : children) {
    if (!child->pcc_branch) continue;
    ScopeActor a;
    a.id = "pcc:" + child->id;
    a.is_pcc = true;
    a.child_controller = child->id;
    a.pcc_branch = net.branch_index(*child->pcc_branch);
    a.orientation = pcc_orientation(net, net.branches()[a.pcc_branch], child->layer);
    scope.actors.push_back(std::move(a));
  }
  std::sort(scope.actors.begin(), scope.actors.end(),
            [](const ScopeActor& a, const ScopeActor& b) { return a.id < b.id; });
  return scope;
}

}  // namespace flex
