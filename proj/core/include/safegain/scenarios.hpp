#pragma once

#include <string>
#include <vector>

#include "safegain/plant.hpp"

namespace safegain {

// A plant, barrier and nominal law bundled with the sampling geometry the
// test and CLI layers need: a working box, declared interior/boundary/
// exterior witness points, sweep initial states and attractivity probes.
struct Scenario {
  std::string name;
  std::string description;
  ControlAffinePlant plant;
  BarrierCandidate barrier;
  std::function<Vec(const Vec&)> u0;
  Box working_box;
  std::vector<Vec> interior_points;
  std::vector<Vec> boundary_points;
  std::vector<Vec> exterior_points;
  std::vector<Vec> sweep_x0;     // default initial states, all in S
  std::vector<Vec> envelope_x0;  // boundary-adjacent starts for envelopes
  Vec exterior_probe;            // h in [-0.5, -0.1], attractivity check
  Vec far_exterior_probe;        // h about -5, global attractivity check
  double escape_radius = 1e3;
};

// Registered scenario names, in registry order.
const std::vector<std::string>& scenario_names();

// Builds a registered scenario. Unknown name -> ConfigError listing the
// registry.
Scenario make_scenario(const std::string& name);

}  // namespace safegain
