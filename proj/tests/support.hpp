#pragma once

#include <filesystem>
#include <string>

#include "flex/grid.hpp"

inline std::filesystem::path data_path(const std::string& rel) {
  return std::filesystem::path(FLEX_DATA_DIR) / rel;
}

inline flex::NetworkDocument load_doc(const std::string& name) {
  return flex::load_network_document(data_path("networks/" + name));
}

// Smallest valid document; tests mutate it to provoke single violations.
inline std::string two_bus_json() {
  return R"({
  "base_mva": 1.0,
  "buses": [
    {"id": "a", "layer": "main", "v_nominal": 1000.0, "v_min": 0.9, "v_max": 1.1, "bus_kind": "slack"},
    {"id": "b", "layer": "main", "v_nominal": 1000.0, "v_min": 0.9, "v_max": 1.1, "bus_kind": "pq"}
  ],
  "branches": [
    {"id": "ab", "from_bus": "a", "to_bus": "b", "resistance": 0.01, "reactance": 0.05, "s_max": 2000000.0}
  ],
  "actors": [
    {"id": "der", "bus": "b", "kind": "controllable", "p_min": -1000000.0, "p_max": 1000000.0,
     "q_min": -500000.0, "q_max": 500000.0, "s_rated": 1200000.0, "p_reference": 0.0}
  ],
  "hierarchy": {"controllers": [
    {"id": "ofo", "layer": "main", "role": "primary", "alpha": 0.5, "cycle_time": 1.0, "actors": ["der"]}
  ]}
})";
}
