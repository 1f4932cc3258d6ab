#pragma once

// Controller tree: construction, child flexibility envelopes and downstream
// set-point propagation.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flex/grid.hpp"
#include "flex/ofo.hpp"
#include "flex/powerflow.hpp"
#include "flex/sensitivity.hpp"

namespace flex {

struct FlexibilityEnvelope {
  double p_min = 0.0, p_max = 0.0;
  double q_min = 0.0, q_max = 0.0;
};

struct ControllerNode {
  std::string id;
  std::string layer;
  ControllerRole role = ControllerRole::secondary;
  ControllerState state;
  std::optional<std::string> parent;
  std::vector<std::string> children;  // ordered by id
  std::optional<std::size_t> pcc_branch;
};

class Hierarchy {
 public:
  Hierarchy() = default;
  explicit Hierarchy(std::vector<ControllerNode> nodes);

  const std::vector<ControllerNode>& nodes() const { return nodes_; }
  ControllerNode& node(std::string_view id);
  const ControllerNode& node(std::string_view id) const;
  const ControllerNode& root() const;

  // Breadth-first from the root, siblings by id.
  const std::vector<std::string>& top_down() const { return order_; }
  std::size_t depth() const;

 private:
  std::vector<ControllerNode> nodes_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<std::string> order_;
};

using SensitivitySet = std::map<std::string, SensitivityMatrix, std::less<>>;

// Validates, resolves every scope and initialises each controller at the
// given operating point: u from the plant, a primary references its own
// actors' p_reference and the measured PCC flows, a secondary tracks its
// currently measured PCC flow. Envelopes are filled in immediately.
Hierarchy build_hierarchy(const GridNetwork& network, const HierarchySpec& spec,
                          const SensitivitySet& sensitivities, const OperatingPoint& op,
                          const PowerFlowSolution& solution);

// Box over-estimate of the PCC flow the subtree below `controller_id` can
// reach: measured flow plus every actor headroom in the subtree, losses and
// grid limits ignored. Throws VariantError for the primary.
FlexibilityEnvelope outer_approximation(const Hierarchy& hierarchy, std::string_view controller_id,
                                        const GridNetwork& network, const OperatingPoint& op,
                                        const PowerFlowSolution& solution);

// Re-anchors the P box of every PCC input of `controller_id` on the child's
// current envelope. The Q coordinate of a PCC input stays frozen.
void refresh_envelopes(Hierarchy& hierarchy, std::string_view controller_id,
                       const GridNetwork& network, const OperatingPoint& op,
                       const PowerFlowSolution& solution);

struct SetpointRequest {
  std::string child;
  std::size_t pcc_branch = 0;
  double p_set = 0.0;  // per-unit
};

// Hands the parent's PCC coordinates to its children as new tracking set
// points.
std::vector<SetpointRequest> propagate_setpoints(Hierarchy& hierarchy, std::string_view controller_id);

}  // namespace flex
