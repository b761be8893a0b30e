#include "safegain/scenarios.hpp"

#include <cmath>

#include "safegain/errors.hpp"

namespace safegain {

namespace {

Vec s1(double v) {
  Vec x(1);
  x[0] = v;
  return x;
}

Vec s2(double a, double b) {
  Vec x(2);
  x[0] = a;
  x[1] = b;
  return x;
}

ComparisonFunction identity_kinf() {
  ComparisonFunction out;
  out.kind = FunctionClass::KInf;
  out.eval = [](double s) { return s; };
  out.deriv = [](double) { return 1.0; };
  out.inverse = [](double r) { return r; };
  return out;
}

BarrierCandidate scalar_barrier() {
  BarrierCandidate b;
  b.h = [](const Vec& x) { return x[0]; };
  b.grad_h = [](const Vec&) { return s1(1.0); };
  b.alpha = make_linear_ek(1.0);
  b.rho = identity_kinf();
  b.dist_to_safe = [](const Vec& x) { return std::max(0.0, -x[0]); };
  return b;
}

ControlAffinePlant scalar_plant(double a, double b) {
  // xdot = a*x + b + u
  ControlAffinePlant p;
  p.state_dim = 1;
  p.dist_dim = 0;
  p.ctrl_dim = 1;
  p.f = [a, b](const Vec& x) { return s1(a * x[0] + b); };
  p.g2 = [](const Vec&) { return Mat::Identity(1, 1); };
  return p;
}

void add_matched_disturbance(Scenario& sc) {
  sc.plant.dist_dim = 1;
  sc.plant.g1 = [](const Vec&) { return Mat::Identity(1, 1); };
  sc.barrier.gamma = make_quadratic(0.5);   // gamma(s) = s^2/2
  sc.barrier.rho = make_quadratic(0.125);   // rho(s) = s^2/8 = gamma(s/2)
}

Scenario scalar_scenario(const std::string& name, double a, double b,
                         double k, double c) {
  // Plant xdot = a*x + b + u, nominal u0 = k*x + c.
  Scenario sc;
  sc.name = name;
  sc.plant = scalar_plant(a, b);
  sc.barrier = scalar_barrier();
  sc.u0 = [k, c](const Vec& x) { return s1(k * x[0] + c); };
  sc.working_box = Box{s1(-8.0), s1(8.0)};
  sc.interior_points = {s1(0.5), s1(1.0), s1(2.0)};
  sc.boundary_points = {s1(0.0)};
  sc.exterior_points = {s1(-0.5), s1(-1.0)};
  sc.sweep_x0 = {s1(0.0), s1(0.5), s1(1.0)};
  sc.envelope_x0 = {s1(0.0), s1(0.05), s1(0.2)};
  sc.exterior_probe = s1(-0.3);
  sc.far_exterior_probe = s1(-5.0);
  return sc;
}

Scenario make_example2() {
  Scenario sc = scalar_scenario("example2", -11.1, -1.0, 10.1, 1.0);
  sc.description =
      "scalar plant xdot = -11.1x - 1 + u, h = x; the drift pushes out of "
      "the safe set while the nominal law u0 = 10.1x + 1 pushes back in";
  return sc;
}

Scenario make_example3() {
  Scenario sc = scalar_scenario("example3", 9.1, 1.0, -10.1, -1.0);
  sc.description =
      "scalar plant xdot = 9.1x + 1 + u, h = x; the drift keeps the safe "
      "set while the nominal law u0 = -10.1x - 1 pushes out of it";
  return sc;
}

Scenario make_example2_revisited() {
  Scenario sc = make_example2();
  sc.name = "example2_revisited";
  add_matched_disturbance(sc);
  sc.description =
      "example2 with a matched disturbance channel (g1 = 1), "
      "gamma(s) = s^2/2 and rho(s) = s^2/8";
  return sc;
}

Scenario make_example3_revisited() {
  Scenario sc = make_example3();
  sc.name = "example3_revisited";
  add_matched_disturbance(sc);
  sc.description =
      "example3 with a matched disturbance channel (g1 = 1), "
      "gamma(s) = s^2/2 and rho(s) = s^2/8";
  return sc;
}

Scenario make_disk2d() {
  Scenario sc;
  sc.name = "disk2d";
  sc.description =
      "planar single integrator xdot = u, h = 1 - |x|^2 (unit disk), "
      "radially outward nominal u0 = x";
  sc.plant.state_dim = 2;
  sc.plant.dist_dim = 0;
  sc.plant.ctrl_dim = 2;
  sc.plant.f = [](const Vec&) { return Vec(Vec::Zero(2)); };
  sc.plant.g2 = [](const Vec&) { return Mat::Identity(2, 2); };
  sc.barrier.h = [](const Vec& x) { return 1.0 - x.squaredNorm(); };
  sc.barrier.grad_h = [](const Vec& x) { return (-2.0 * x).eval(); };
  sc.barrier.alpha = make_linear_ek(1.0);
  sc.barrier.rho = identity_kinf();
  sc.barrier.dist_to_safe = [](const Vec& x) {
    return std::max(0.0, x.norm() - 1.0);
  };
  sc.u0 = [](const Vec& x) { return x; };
  sc.working_box = Box{s2(-2.0, -2.0), s2(2.0, 2.0)};
  sc.interior_points = {s2(0.0, 0.0), s2(0.5, 0.0), s2(0.0, 0.7)};
  sc.boundary_points = {s2(1.0, 0.0), s2(0.0, 1.0), s2(-1.0, 0.0)};
  sc.exterior_points = {s2(1.5, 0.0), s2(0.0, -1.5)};
  sc.sweep_x0 = {s2(0.0, 0.0), s2(0.5, 0.0), s2(0.0, 0.8)};
  sc.envelope_x0 = {s2(0.9, 0.0), s2(0.0, 0.95)};
  sc.exterior_probe = s2(1.2, 0.0);                  // h = -0.44
  sc.far_exterior_probe = s2(std::sqrt(6.0), 0.0);   // h = -5
  return sc;
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {
      "example2", "example3", "example2_revisited", "example3_revisited",
      "disk2d"};
  return names;
}

Scenario make_scenario(const std::string& name) {
  if (name == "example2") return make_example2();
  if (name == "example3") return make_example3();
  if (name == "example2_revisited") return make_example2_revisited();
  if (name == "example3_revisited") return make_example3_revisited();
  if (name == "disk2d") return make_disk2d();
  std::string known;
  for (const auto& n : scenario_names()) {
    if (!known.empty()) known += ", ";
    known += n;
  }
  throw ConfigError("make_scenario: unknown scenario '" + name +
                    "'; registered: " + known);
}

}  // namespace safegain
