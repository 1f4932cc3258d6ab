#include <cmath>

#include "doctest.h"
#include "flex/error.hpp"
#include "flex/hierarchy.hpp"
#include "flex/voltvar.hpp"
#include "support.hpp"

using namespace flex;

namespace {

struct Built {
  NetworkDocument doc;
  OperatingPoint op;
  PowerFlowSolution sol;
  Hierarchy h;
};

Built build(const std::string& name) {
  Built b{load_doc(name), {}, {}, {}};
  b.op = nominal_operating_point(b.doc.network);
  b.sol = resolve_plant(PowerFlowSolver(b.doc.network), b.op).solution;
  SensitivitySet sens;
  for (const auto& c : b.doc.hierarchy.controllers)
    sens.emplace(c.id, compute_sensitivity(b.doc.network, b.op,
                                           controller_scope(b.doc.network, b.doc.hierarchy, c.id)));
  b.h = build_hierarchy(b.doc.network, b.doc.hierarchy, sens, b.op, b.sol);
  return b;
}

ControllerNode node(std::string id, std::optional<std::string> parent, std::vector<std::string> kids) {
  ControllerNode n;
  n.id = std::move(id);
  n.parent = std::move(parent);
  n.children = std::move(kids);
  return n;
}

}  // namespace

TEST_CASE("lv7 tree") {
  const Built b = build("lv7.json");
  CHECK(b.h.root().id == "ofo1");
  CHECK(b.h.top_down() == std::vector<std::string>{"ofo1", "ofo2"});
  CHECK(b.h.depth() == 2);
  CHECK(b.h.node("ofo1").children == std::vector<std::string>{"ofo2"});
  CHECK_THROWS_AS(b.h.node("ofo9"), ScopeError);
}

TEST_CASE("three-level tree is visited top-down") {
  const Built b = build("case_c.json");
  CHECK(b.h.top_down() == std::vector<std::string>{"ofo1", "ofo2", "ofo3"});
  CHECK(b.h.depth() == 3);
  CHECK(b.h.node("ofo3").parent == "ofo2");
}

TEST_CASE("controllers start at the measured operating point") {
  const Built b = build("lv7.json");
  const GridNetwork& net = b.doc.network;
  const double flow = b.sol.branch_p[net.branch_index("t1")];
  const auto& sec = std::get<TrackingObjective>(b.h.node("ofo2").state.objective);
  CHECK(sec.p_set == flow);
  CHECK(sec.pcc_index == 5);
  const auto& pri = b.h.node("ofo1").state;
  CHECK(std::get<CurtailmentObjective>(pri.objective).p_reference[0] == flow);
  CHECK(pri.u.p(0) == flow);
}

TEST_CASE("outer approximation adds every headroom in the subtree") {
  const Built b = build("lv7.json");
  const GridNetwork& net = b.doc.network;
  const double flow = b.sol.branch_p[net.branch_index("t1")];
  const auto env = outer_approximation(b.h, "ofo2", net, b.op, b.sol);
  // both storage units at zero: +/-5.5 kW and +/-20 kW, consumption sign
  CHECK(net.to_si(env.p_min - flow) == doctest::Approx(-25500.0));
  CHECK(net.to_si(env.p_max - flow) == doctest::Approx(25500.0));
  CHECK(net.to_si(env.q_max - env.q_min) == doctest::Approx(2 * (5000.0 + 6600.0)));
  CHECK_THROWS_AS(outer_approximation(b.h, "ofo1", net, b.op, b.sol), VariantError);
}

TEST_CASE("offline actors drop out of the envelope") {
  Built b = build("lv7.json");
  const GridNetwork& net = b.doc.network;
  b.op.actor_online[net.actor_index("bess2")] = false;
  const auto env = outer_approximation(b.h, "ofo2", net, b.op, b.sol);
  CHECK(net.to_si(env.p_max - env.p_min) == doctest::Approx(11000.0));
}

TEST_CASE("nested envelope includes the grandchild") {
  const Built b = build("case_c.json");
  const GridNetwork& net = b.doc.network;
  const auto e2 = outer_approximation(b.h, "ofo2", net, b.op, b.sol);
  const auto e3 = outer_approximation(b.h, "ofo3", net, b.op, b.sol);
  // six 10 MW units plus three 150 kW units, all at zero output
  CHECK(net.to_si(e2.p_max - e2.p_min) == doctest::Approx(60e6 + 450e3));
  CHECK(net.to_si(e3.p_max - e3.p_min) == doctest::Approx(450e3));
}

TEST_CASE("refresh writes the envelope into the parent's box") {
  Built b = build("lv7.json");
  const GridNetwork& net = b.doc.network;
  refresh_envelopes(b.h, "ofo1", net, b.op, b.sol);
  const auto env = outer_approximation(b.h, "ofo2", net, b.op, b.sol);
  const auto& s = b.h.node("ofo1").state;
  CHECK(s.bounds.u_min[0] == env.p_min);
  CHECK(s.bounds.u_max[0] == env.p_max);
  CHECK(s.bounds.u_min[1] == s.u.q(0));
  CHECK(s.bounds.u_max[1] == s.u.q(0));
}

TEST_CASE("propagation hands the parent's coordinate to the child") {
  Built b = build("lv7.json");
  b.h.node("ofo1").state.u.p(0) = -0.12;
  const auto reqs = propagate_setpoints(b.h, "ofo1");
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].child == "ofo2");
  CHECK(reqs[0].pcc_branch == b.doc.network.branch_index("t1"));
  CHECK(std::get<TrackingObjective>(b.h.node("ofo2").state.objective).p_set == -0.12);
  CHECK(propagate_setpoints(b.h, "ofo2").empty());
}

TEST_CASE("malformed trees are rejected") {
  CHECK_THROWS_AS(Hierarchy({node("a", std::nullopt, {}), node("b", std::nullopt, {})}), ValidationError);
  CHECK_THROWS_AS(Hierarchy({node("a", std::nullopt, {"b"}), node("b", "a", {"a"})}), ValidationError);
  CHECK_THROWS_AS(Hierarchy({node("a", std::nullopt, {}), node("b", "c", {}), node("c", "b", {})}),
                  ValidationError);
  CHECK_THROWS_AS(Hierarchy({node("a", std::nullopt, {}), node("a", std::nullopt, {})}), ValidationError);
  CHECK(Hierarchy(std::vector<ControllerNode>{}).top_down().empty());
}

TEST_CASE("missing sensitivity is a dimension error") {
  const NetworkDocument doc = load_doc("lv7.json");
  const OperatingPoint op = nominal_operating_point(doc.network);
  const auto sol = solve_ac_power_flow(doc.network, assemble_injections(doc.network, op));
  CHECK_THROWS_AS(build_hierarchy(doc.network, doc.hierarchy, {}, op, sol), DimensionError);
}
