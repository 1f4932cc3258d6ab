#include "flex/hierarchy.hpp"

#include <algorithm>
#include <deque>

#include "flex/error.hpp"

namespace flex {

Hierarchy::Hierarchy(std::vector<ControllerNode> nodes) : nodes_(std::move(nodes)) {
  std::vector<std::string> roots;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!index_.emplace(nodes_[i].id, i).second)
      throw ValidationError("duplicate controller id " + nodes_[i].id);
    if (!nodes_[i].parent) roots.push_back(nodes_[i].id);
  }
  if (nodes_.empty()) return;
  if (roots.size() != 1) throw ValidationError("controller tree needs exactly one root");
  std::deque<std::string> queue{roots.front()};
  while (!queue.empty()) {
    const std::string id = queue.front();
    queue.pop_front();
    if (std::find(order_.begin(), order_.end(), id) != order_.end())
      throw ValidationError("cyclic parent references at " + id);
    order_.push_back(id);
    for (const auto& c : node(id).children) queue.push_back(c);
  }
  if (order_.size() != nodes_.size())
    throw ValidationError("controller tree is not connected to its root");
}

ControllerNode& Hierarchy::node(std::string_view id) {
  auto it = index_.find(id);
  if (it == index_.end()) throw ScopeError("unknown controller " + std::string(id));
  return nodes_[it->second];
}

const ControllerNode& Hierarchy::node(std::string_view id) const {
  return const_cast<Hierarchy*>(this)->node(id);
}

const ControllerNode& Hierarchy::root() const {
  if (order_.empty()) throw ScopeError("empty controller tree");
  return node(order_.front());
}

std::size_t Hierarchy::depth() const {
  std::size_t deepest = 0;
  for (const auto& n : nodes_) {
    std::size_t d = 1;
    for (const ControllerNode* p = &n; p->parent; p = &node(*p->parent)) ++d;
    deepest = std::max(deepest, d);
  }
  return deepest;
}

Hierarchy build_hierarchy(const GridNetwork& net, const HierarchySpec& spec,
                          const SensitivitySet& sens, const OperatingPoint& op,
                          const PowerFlowSolution& sol) {
  if (auto report = validate(net, spec); !report.ok()) throw ValidationError(report.violations);

  std::vector<ControllerNode> nodes;
  for (const auto& c : spec.controllers) {
    ControllerNode n;
    n.id = c.id;
    n.layer = c.layer;
    n.role = c.role;
    n.parent = c.parent;
    if (c.pcc_branch) n.pcc_branch = net.branch_index(*c.pcc_branch);
    for (const auto& other : spec.controllers)
      if (other.parent && *other.parent == c.id) n.children.push_back(other.id);
    std::sort(n.children.begin(), n.children.end());

    ControllerState& s = n.state;
    s.id = c.id;
    s.alpha = c.alpha;
    s.cycle_time = c.cycle_time;
    s.scope = controller_scope(net, spec, c.id);
    s.u = current_setpoints(net, s.scope, op, sol);
    s.bounds = scope_bounds(net, s.scope, s.u);
    auto it = sens.find(c.id);
    if (it == sens.end()) throw DimensionError("no sensitivity matrix for controller " + c.id);
    s.sensitivity = it->second;

    if (c.role == ControllerRole::primary) {
      CurtailmentObjective obj;
      for (std::size_t i = 0; i < s.scope.actors.size(); ++i) {
        const ScopeActor& a = s.scope.actors[i];
        obj.p_reference.push_back(a.is_pcc ? s.u.p(i) : net.actors()[a.actor_index].p_reference);
      }
      s.objective = std::move(obj);
    } else {
      if (!s.scope.own_pcc) throw ValidationError("secondary " + c.id + " has no PCC branch");
      TrackingObjective obj;
      obj.pcc_index = s.scope.buses.size() + s.scope.branches.size() + *s.scope.own_pcc;
      obj.p_set = sol.branch_p.at(s.scope.pcc_branches[*s.scope.own_pcc]);
      s.objective = obj;
    }
    check_state(s);
    nodes.push_back(std::move(n));
  }

  Hierarchy h(std::move(nodes));
  for (const auto& id : h.top_down()) refresh_envelopes(h, id, net, op, sol);
  return h;
}

namespace {

struct Range {
  double lo = 0.0, hi = 0.0;
};

// Reachable change of the subtree's net consumption, active and reactive.
void consumption_range(const Hierarchy& h, const ControllerNode& n, const GridNetwork& net,
                       const OperatingPoint& op, Range& p, Range& q) {
  for (const auto& a : n.state.scope.actors) {
    if (a.is_pcc) continue;
    if (a.actor_index < op.actor_online.size() && !op.actor_online[a.actor_index]) continue;
    const Actor& act = net.actors()[a.actor_index];
    const double pj = op.actor_p[a.actor_index];
    const double qj = op.actor_q[a.actor_index];
    p.lo -= std::max(0.0, act.p_max - pj);
    p.hi += std::max(0.0, pj - act.p_min);
    q.lo -= std::max(0.0, act.q_max - qj);
    q.hi += std::max(0.0, qj - act.q_min);
  }
  for (const auto& c : n.children) consumption_range(h, h.node(c), net, op, p, q);
}

}  // namespace

FlexibilityEnvelope outer_approximation(const Hierarchy& h, std::string_view id,
                                        const GridNetwork& net, const OperatingPoint& op,
                                        const PowerFlowSolution& sol) {
  const ControllerNode& n = h.node(id);
  if (n.role == ControllerRole::primary || !n.pcc_branch)
    throw VariantError("outer approximation is defined for secondary controllers only");
  Range p, q;
  consumption_range(h, n, net, op, p, q);
  const Branch& br = net.branches()[*n.pcc_branch];
  const int sigma = pcc_orientation(net, br, n.layer);
  const double p_now = sol.branch_p.at(*n.pcc_branch);
  const double q_now = sol.branch_q.at(*n.pcc_branch);
  FlexibilityEnvelope env;
  if (sigma > 0) {
    env.p_min = p_now + p.lo;
    env.p_max = p_now + p.hi;
    env.q_min = q_now + q.lo;
    env.q_max = q_now + q.hi;
  } else {
    env.p_min = p_now - p.hi;
    env.p_max = p_now - p.lo;
    env.q_min = q_now - q.hi;
    env.q_max = q_now - q.lo;
  }
  return env;
}

void refresh_envelopes(Hierarchy& h, std::string_view id, const GridNetwork& net,
                       const OperatingPoint& op, const PowerFlowSolution& sol) {
  ControllerNode& n = h.node(id);
  ControllerState& s = n.state;
  const std::size_t m = s.scope.actors.size();
  for (std::size_t i = 0; i < m; ++i) {
    const ScopeActor& a = s.scope.actors[i];
    if (!a.is_pcc) continue;
    const FlexibilityEnvelope env = outer_approximation(h, a.child_controller, net, op, sol);
    s.bounds.u_min[i] = env.p_min;
    s.bounds.u_max[i] = env.p_max;
    s.bounds.u_min[m + i] = s.bounds.u_max[m + i] = s.u.q(i);
  }
}

std::vector<SetpointRequest> propagate_setpoints(Hierarchy& h, std::string_view id) {
  std::vector<SetpointRequest> out;
  const ControllerState& s = h.node(id).state;
  for (std::size_t i = 0; i < s.scope.actors.size(); ++i) {
    const ScopeActor& a = s.scope.actors[i];
    if (!a.is_pcc) continue;
    const double p_set = s.u.p(i);
    ControllerNode& child = h.node(a.child_controller);
    child.state = update_setpoint_request(std::move(child.state), p_set);
    out.push_back({a.child_controller, a.pcc_branch, p_set});
  }
  return out;
}

}  // namespace flex
