#include <cmath>

#include "doctest.h"
#include "flex/error.hpp"
#include "flex/sensitivity.hpp"
#include "support.hpp"

using namespace flex;

TEST_CASE("two-bus toy: one actor, two columns, flat-start derivatives") {
  const NetworkDocument doc = load_doc("two_bus.json");
  const auto scope = controller_scope(doc.network, doc.hierarchy, "ofo");
  const auto m = compute_sensitivity(doc.network, nominal_operating_point(doc.network), scope);
  REQUIRE(m.matrix.cols() == 2);
  REQUIRE(m.matrix.rows() == 3);  // v:a, v:b, s:ab
  CHECK(m.col_ids[0] == "P:der");
  CHECK(m.col_ids[1] == "Q:der");
  CHECK(m.row_ids[1] == "v:b");
  // Linearising S = conj(y) * dV at the flat profile gives dV/dP = r, dV/dQ = x.
  CHECK(m.matrix(1, 0) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(m.matrix(1, 1) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(m.matrix(0, 0) == 0.0);
  CHECK(m.delta == 1e-4);
}

TEST_CASE("lv7 secondary layout and signs") {
  const NetworkDocument doc = load_doc("lv7.json");
  const GridNetwork& net = doc.network;
  const auto scope = controller_scope(net, doc.hierarchy, "ofo2");
  const auto m = compute_sensitivity(net, nominal_operating_point(net), scope);
  REQUIRE(m.matrix.rows() == 6);
  REQUIRE(m.matrix.cols() == 4);
  CHECK(m.row_ids == std::vector<std::string>{"v:4", "v:5", "v:6", "v:7", "s:t1", "p:t1"});
  CHECK(m.col_ids == std::vector<std::string>{"P:bess1", "P:bess2", "Q:bess1", "Q:bess2"});
  // more export lowers consumption through the PCC, slightly more than 1:1 with losses
  CHECK(m.matrix(5, 0) < -0.95);
  CHECK(m.matrix(5, 0) > -1.1);
  // resistive feeder: P moves the far end more than Q does
  CHECK(m.matrix(3, 1) > m.matrix(3, 3));
  CHECK(m.matrix(3, 3) > 0.0);
  // bess2 sits further out than bess1
  CHECK(m.matrix(3, 1) > m.matrix(3, 0));
}

TEST_CASE("PCC-actor column moves its own branch flow one-to-one") {
  const NetworkDocument doc = load_doc("lv7.json");
  const auto scope = controller_scope(doc.network, doc.hierarchy, "ofo1");
  const auto m = compute_sensitivity(doc.network, nominal_operating_point(doc.network), scope);
  REQUIRE(m.col_ids == std::vector<std::string>{"P:pcc:ofo2", "Q:pcc:ofo2"});
  const auto last = m.matrix.rows() - 1;
  CHECK(m.row_ids[static_cast<std::size_t>(last)] == "p:t1");
  CHECK(m.matrix(last, 0) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(m.matrix(0, 0) == 0.0);  // slack voltage is fixed
}

TEST_CASE("linearisation is consistent with its defining solves") {
  for (const char* name : {"lv7.json", "case_c.json"}) {
    CAPTURE(name);
    const NetworkDocument doc = load_doc(name);
    const OperatingPoint base = nominal_operating_point(doc.network);
    for (const auto& c : doc.hierarchy.controllers) {
      const auto scope = controller_scope(doc.network, doc.hierarchy, c.id);
      const auto m = compute_sensitivity(doc.network, base, scope);
      for (std::size_t j = 0; j < scope.input_size(); ++j) {
        std::vector<double> probe(scope.input_size(), 0.0);
        probe[j] = m.delta;
        CHECK(verify_sensitivity(m, doc.network, base, scope, probe) <= 1e-6);
      }
    }
  }
}

TEST_CASE("parallel and serial assembly are bit-identical") {
  const NetworkDocument doc = load_doc("case_c.json");
  const auto scope = controller_scope(doc.network, doc.hierarchy, "ofo2");
  const OperatingPoint base = nominal_operating_point(doc.network);
  SensitivityOptions a, b;
  a.parallel = true;
  b.parallel = false;
  const auto ma = compute_sensitivity(doc.network, base, scope, a);
  const auto mb = compute_sensitivity(doc.network, base, scope, b);
  CHECK(ma.matrix == mb.matrix);
}

TEST_CASE("bad delta and failed perturbations") {
  const NetworkDocument doc = load_doc("two_bus.json");
  const auto scope = controller_scope(doc.network, doc.hierarchy, "ofo");
  const OperatingPoint base = nominal_operating_point(doc.network);
  SensitivityOptions o;
  o.delta = 0.0;
  CHECK_THROWS_AS(compute_sensitivity(doc.network, base, scope, o), PreconditionError);
  o.delta = -1e-4;
  CHECK_THROWS_AS(compute_sensitivity(doc.network, base, scope, o), PreconditionError);
  o.delta = 60.0;
  try {
    compute_sensitivity(doc.network, base, scope, o);
    FAIL("expected a SensitivityError");
  } catch (const SensitivityError& e) {
    CHECK(e.input().find("der") != std::string::npos);
  }
}

TEST_CASE("probe larger than ten deltas is rejected") {
  const NetworkDocument doc = load_doc("two_bus.json");
  const auto scope = controller_scope(doc.network, doc.hierarchy, "ofo");
  const OperatingPoint base = nominal_operating_point(doc.network);
  const auto m = compute_sensitivity(doc.network, base, scope);
  CHECK_THROWS_AS(verify_sensitivity(m, doc.network, base, scope, {1e-2, 0.0}), PreconditionError);
  CHECK_THROWS_AS(verify_sensitivity(m, doc.network, base, scope, {1e-4}), DimensionError);
}
