#include <algorithm>
#include <string>

#include "doctest.h"
#include "flex/error.hpp"
#include "flex/grid.hpp"
#include "support.hpp"

using namespace flex;

namespace {

bool mentions(const ValidationReport& r, const std::string& needle) {
  return std::any_of(r.violations.begin(), r.violations.end(),
                     [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

ValidationReport report_for(std::string text) {
  const NetworkDocument doc = parse_network_document(text);
  return validate(doc.network, doc.hierarchy);
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("SI schema converts to per-unit") {
  const NetworkDocument doc = parse_network_document(two_bus_json());
  const GridNetwork& net = doc.network;
  CHECK(net.base_va() == 1e6);
  const Branch& ab = net.branches()[0];
  // Z_base = 1000^2 / 1e6 = 1 ohm
  CHECK(ab.resistance == doctest::Approx(0.01));
  CHECK(ab.reactance == doctest::Approx(0.05));
  CHECK(ab.s_max == doctest::Approx(2.0));
  CHECK(net.actors()[0].q_max == doctest::Approx(0.5));
  CHECK(net.to_si(net.to_pu(1234.5)) == doctest::Approx(1234.5));
  CHECK(net.slack_bus() == 0u);
}

TEST_CASE("bundled networks validate") {
  for (const char* name : {"two_bus.json", "lv7.json", "case_c.json", "case_c_weak_lv.json"}) {
    CAPTURE(name);
    const NetworkDocument doc = read_network_document(data_path(std::string("networks/") + name));
    const auto rep = validate(doc.network, doc.hierarchy);
    CHECK(rep.ok());
    for (const auto& v : rep.violations) MESSAGE(v);
  }
}

TEST_CASE("lv7 has the expected shape") {
  const NetworkDocument doc = load_doc("lv7.json");
  CHECK(doc.network.buses().size() == 7);
  CHECK(doc.network.actors().size() == 3);
  CHECK(doc.hierarchy.controllers.size() == 2);
  const auto& t1 = doc.network.branches()[doc.network.branch_index("t1")];
  CHECK(t1.is_pcc);
  // 20 kV side: Z_base = 4000 ohm at 0.1 MVA
  CHECK(t1.resistance == doctest::Approx(16.0 / 4000.0));
}

TEST_CASE("serialization round-trips") {
  const NetworkDocument doc = load_doc("lv7.json");
  const NetworkDocument again = parse_network_document(serialize_network_document(doc));
  REQUIRE(again.network.branches().size() == doc.network.branches().size());
  for (std::size_t k = 0; k < doc.network.branches().size(); ++k) {
    CHECK(again.network.branches()[k].resistance ==
          doctest::Approx(doc.network.branches()[k].resistance).epsilon(1e-14));
    CHECK(again.network.branches()[k].id == doc.network.branches()[k].id);
  }
  CHECK(again.network.actors()[2].droop.has_value());
  CHECK(again.hierarchy.controllers[1].pcc_branch == doc.hierarchy.controllers[1].pcc_branch);
  CHECK(serialize_network_document(again) == serialize_network_document(doc));
}

TEST_CASE("violations are reported, not thrown") {
  const std::string base = two_bus_json();
  CHECK(report_for(base).ok());

  SUBCASE("duplicate actor") {
    auto s = replace(base, R"("actors": [)", R"("actors": [
    {"id": "der", "bus": "a", "kind": "controllable", "p_min": 0, "p_max": 1, "q_min": 0, "q_max": 1, "s_rated": 1},)");
    CHECK(mentions(report_for(s), "duplicate actor id"));
  }
  SUBCASE("no slack") {
    auto s = replace(base, R"("bus_kind": "slack")", R"("bus_kind": "pq")");
    CHECK(mentions(report_for(s), "no slack"));
  }
  SUBCASE("inverted voltage band") {
    auto s = replace(base, R"("v_min": 0.9, "v_max": 1.1, "bus_kind": "pq")",
                     R"("v_min": 1.1, "v_max": 0.9, "bus_kind": "pq")");
    CHECK(mentions(report_for(s), "voltage band"));
  }
  SUBCASE("dangling branch") {
    auto s = replace(base, R"("to_bus": "b")", R"("to_bus": "zz")");
    const auto rep = report_for(s);
    CHECK(mentions(rep, "does not exist"));
  }
  SUBCASE("unassigned controllable") {
    auto s = replace(base, R"("actors": ["der"])", R"("actors": [])");
    CHECK(mentions(report_for(s), "not assigned"));
  }
  SUBCASE("non-positive alpha") {
    auto s = replace(base, R"("alpha": 0.5)", R"("alpha": 0.0)");
    CHECK(mentions(report_for(s), "alpha"));
  }
  SUBCASE("island") {
    auto s = replace(base, R"("from_bus": "a", "to_bus": "b")", R"("from_bus": "b", "to_bus": "b")");
    CHECK_FALSE(report_for(s).ok());
  }
}

TEST_CASE("parse and load errors") {
  CHECK_THROWS_AS(parse_network_document("{ not json"), ParseError);
  CHECK_THROWS_AS(parse_network_document(R"({"base_mva": 1})"), ParseError);
  CHECK_THROWS_AS(read_network_document(data_path("networks/missing.json")), IoError);
  auto bad = replace(two_bus_json(), R"("bus_kind": "slack")", R"("bus_kind": "pv")");
  CHECK_THROWS_AS(parse_network_document(bad), ParseError);
}

TEST_CASE("controller scope on lv7") {
  const NetworkDocument doc = load_doc("lv7.json");
  const GridNetwork& net = doc.network;

  const ControllerScope s2 = controller_scope(net, doc.hierarchy, "ofo2");
  CHECK(s2.buses.size() == 4);
  CHECK(s2.branches.size() == 1);
  REQUIRE(s2.pcc_branches.size() == 1);
  CHECK(s2.own_pcc == 0u);
  REQUIRE(s2.actors.size() == 2);
  CHECK(s2.actors[0].id == "bess1");
  CHECK(s2.actors[1].id == "bess2");
  CHECK(s2.measurement_size() == 6);
  CHECK(s2.input_size() == 4);

  const ControllerScope s1 = controller_scope(net, doc.hierarchy, "ofo1");
  REQUIRE(s1.actors.size() == 1);
  CHECK(s1.actors[0].is_pcc);
  CHECK(s1.actors[0].id == "pcc:ofo2");
  CHECK(s1.actors[0].child_controller == "ofo2");
  CHECK(s1.actors[0].orientation == 1);
  CHECK_FALSE(s1.own_pcc.has_value());
  CHECK(s1.buses.size() == 1);

  CHECK_THROWS_AS(controller_scope(net, doc.hierarchy, "nope"), ScopeError);
}

TEST_CASE("pcc orientation follows the child layer") {
  const NetworkDocument doc = load_doc("lv7.json");
  const auto& t1 = doc.network.branches()[doc.network.branch_index("t1")];
  CHECK(pcc_orientation(doc.network, t1, "lv") == 1);
  CHECK(pcc_orientation(doc.network, t1, "mv") == -1);
}

TEST_CASE("three-level scope nests PCC-actors") {
  const NetworkDocument doc = load_doc("case_c.json");
  const ControllerScope s2 = controller_scope(doc.network, doc.hierarchy, "ofo2");
  CHECK(s2.actors.size() == 7);
  CHECK(s2.pcc_branches.size() == 2);
  const auto it = std::find_if(s2.actors.begin(), s2.actors.end(), [](const ScopeActor& a) { return a.is_pcc; });
  REQUIRE(it != s2.actors.end());
  CHECK(it->child_controller == "ofo3");
}
