#include "safegain/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "safegain/comparison.hpp"
#include "safegain/errors.hpp"

namespace safegain {
namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kMarginMatchTol = 1e-9;
constexpr double kCostRelTol = 2e-3;
constexpr double kEnvelopeSlack = 1e-12;

ordered_json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  try {
    return ordered_json::parse(in);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("config parse error in ") + path + ": " +
                      e.what());
  }
}

void check_keys(const ordered_json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      std::string msg = "unknown field \"" + where + "." + item.key() +
                        "\"; allowed fields:";
      for (const char* key : allowed) {
        msg += std::string(" ") + key;
      }
      throw ConfigError(msg);
    }
  }
}

const ordered_json* find(const ordered_json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_number(const ordered_json& v, const std::string& where) {
  if (!v.is_number()) {
    throw ConfigError(where + " must be a number");
  }
  return v.get<double>();
}

bool as_bool(const ordered_json& v, const std::string& where) {
  if (!v.is_boolean()) {
    throw ConfigError(where + " must be a boolean");
  }
  return v.get<bool>();
}

std::string as_string(const ordered_json& v, const std::string& where) {
  if (!v.is_string()) {
    throw ConfigError(where + " must be a string");
  }
  return v.get<std::string>();
}

std::vector<double> as_number_list(const ordered_json& v,
                                   const std::string& where) {
  if (!v.is_array() || v.empty()) {
    throw ConfigError(where + " must be a non-empty array of numbers");
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_number(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Vec as_state(const ordered_json& v, const std::string& where, int dim) {
  const std::vector<double> vals = as_number_list(v, where);
  if (static_cast<int>(vals.size()) != dim) {
    throw ConfigError(where + " must have " + std::to_string(dim) +
                      " entries, got " + std::to_string(vals.size()));
  }
  Vec x(dim);
  for (int i = 0; i < dim; ++i) x[i] = vals[i];
  return x;
}

// Ascending-coefficient polynomial, evaluated by Horner's rule.
std::function<double(double)> poly(std::vector<double> coeffs) {
  return [coeffs = std::move(coeffs)](double s) {
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
      acc = acc * s + *it;
    }
    return acc;
  };
}

ComparisonFunction identity_kinf() {
  ComparisonFunction fn;
  fn.kind = FunctionClass::KInf;
  fn.eval = [](double s) { return s; };
  fn.deriv = [](double) { return 1.0; };
  fn.inverse = [](double r) { return r; };
  fn.deriv_inverse = fn.inverse;
  return fn;
}

DisturbanceSignal parse_disturbance(const ordered_json& j,
                                    const std::string& where) {
  if (!j.is_object()) {
    throw ConfigError(where + " must be an object with a \"kind\" field");
  }
  check_keys(j, where,
             {"kind", "value", "amplitude", "frequency", "phase", "seed",
              "hold_time"});
  const ordered_json* kind = find(j, "kind");
  if (!kind) {
    throw ConfigError(where + ".kind is required");
  }
  const std::string name = as_string(*kind, where + ".kind");
  auto number_field = [&](const char* key,
                          std::optional<double> def) -> double {
    const ordered_json* v = find(j, key);
    if (!v) {
      if (def) return *def;
      throw ConfigError(where + "." + key + " is required for kind \"" +
                        name + "\"");
    }
    return as_number(*v, where + "." + key);
  };
  if (name == "zero") {
    return DisturbanceSignal::zero();
  }
  if (name == "constant") {
    return DisturbanceSignal::constant(number_field("value", std::nullopt));
  }
  if (name == "sinusoid") {
    return DisturbanceSignal::sinusoid(
        number_field("amplitude", std::nullopt),
        number_field("frequency", std::nullopt), number_field("phase", 0.0));
  }
  if (name == "seeded_bounded") {
    const ordered_json* seed = find(j, "seed");
    if (!seed) {
      throw ConfigError(where + ".seed is required for kind "
                        "\"seeded_bounded\"");
    }
    if (!seed->is_number_unsigned()) {
      throw ConfigError(where + ".seed must be an unsigned integer");
    }
    return DisturbanceSignal::seeded_bounded(
        number_field("amplitude", std::nullopt), seed->get<std::uint64_t>(),
        number_field("hold_time", 0.1));
  }
  throw ConfigError(where + ".kind \"" + name +
                    "\" is not one of: zero constant sinusoid seeded_bounded");
}

// A class-K choice: "identity", {"quadratic": c}, or pass-through markers.
std::optional<ComparisonFunction> parse_class_k(const ordered_json& v,
                                                const std::string& where) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "identity") return identity_kinf();
    throw ConfigError(where + ": unknown choice \"" + s + "\"");
  }
  if (v.is_object()) {
    check_keys(v, where, {"quadratic"});
    const ordered_json* c = find(v, "quadratic");
    if (!c) {
      throw ConfigError(where + " must contain \"quadratic\"");
    }
    const double cv = as_number(*c, where + ".quadratic");
    if (!(cv > 0.0)) {
      throw ConfigError(where + ".quadratic must be positive");
    }
    return make_quadratic(cv);
  }
  throw ConfigError(where + " must be a string or {\"quadratic\": c}");
}

Scenario inline_scenario(const ordered_json& j) {
  check_keys(j, "scenario",
             {"name", "h", "f", "g1", "g2", "box", "nominal", "alpha_slope"});
  const ordered_json* name = find(j, "name");
  if (!name) throw ConfigError("scenario.name is required for inline systems");
  const ordered_json* fj = find(j, "f");
  if (!fj) throw ConfigError("scenario.f coefficient list is required");
  const ordered_json* nom = find(j, "nominal");
  if (!nom) throw ConfigError("scenario.nominal is required for inline systems");

  std::string h_form = "x";
  if (const ordered_json* hj = find(j, "h")) {
    h_form = as_string(*hj, "scenario.h");
  }
  if (h_form != "x" && h_form != "1-|x|^2") {
    throw ConfigError("scenario.h must be \"x\" or \"1-|x|^2\" for inline "
                      "systems, got \"" + h_form + "\"");
  }
  const int n = h_form == "x" ? 1 : 2;

  auto f_poly = poly(as_number_list(*fj, "scenario.f"));
  std::vector<double> g2_coeffs = {1.0};
  if (const ordered_json* g2j = find(j, "g2")) {
    g2_coeffs = as_number_list(*g2j, "scenario.g2");
  }
  auto g2_poly = poly(g2_coeffs);
  std::optional<std::function<double(double)>> g1_poly;
  if (const ordered_json* g1j = find(j, "g1")) {
    g1_poly = poly(as_number_list(*g1j, "scenario.g1"));
  }

  std::vector<double> nom_coeffs = as_number_list(*nom, "scenario.nominal");
  if (nom_coeffs.size() > 2) {
    throw ConfigError("scenario.nominal must be affine: [c0] or [c0, c1]");
  }
  const double nc0 = nom_coeffs[0];
  const double nc1 = nom_coeffs.size() > 1 ? nom_coeffs[1] : 0.0;

  double alpha_slope = 1.0;
  if (const ordered_json* av = find(j, "alpha_slope")) {
    alpha_slope = as_number(*av, "scenario.alpha_slope");
    if (!(alpha_slope > 0.0)) {
      throw ConfigError("scenario.alpha_slope must be positive");
    }
  }

  double lo = n == 1 ? -8.0 : -2.0;
  double hi = n == 1 ? 8.0 : 2.0;
  if (const ordered_json* bj = find(j, "box")) {
    const std::vector<double> b = as_number_list(*bj, "scenario.box");
    if (b.size() != 2 || !(b[0] < b[1])) {
      throw ConfigError("scenario.box must be [lo, hi] with lo < hi");
    }
    lo = b[0];
    hi = b[1];
  }
  if (n == 1 && !(lo < -1e-3 && hi > 1e-3)) {
    throw ConfigError("scenario.box must straddle the boundary x = 0");
  }
  if (n == 2 && !(lo < -1.001 && hi > 1.001)) {
    throw ConfigError("scenario.box must contain the unit circle");
  }

  Scenario sc;
  sc.name = name->is_string() ? name->get<std::string>() : std::string();
  if (sc.name.empty()) {
    throw ConfigError("scenario.name must be a non-empty string");
  }
  sc.description = "inline polynomial system";

  sc.plant.state_dim = n;
  sc.plant.ctrl_dim = n;
  sc.plant.dist_dim = g1_poly ? 1 : 0;
  sc.plant.f = [f_poly, n](const Vec& x) {
    Vec out(n);
    for (int i = 0; i < n; ++i) out[i] = f_poly(x[i]);
    return out;
  };
  sc.plant.g2 = [g2_poly, n](const Vec& x) {
    Mat g = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) g(i, i) = g2_poly(x[i]);
    return g;
  };
  if (g1_poly) {
    auto g1p = *g1_poly;
    sc.plant.g1 = [g1p, n](const Vec& x) {
      Mat g(n, 1);
      for (int i = 0; i < n; ++i) g(i, 0) = g1p(x[i]);
      return g;
    };
  }

  if (n == 1) {
    sc.barrier.h = [](const Vec& x) { return x[0]; };
    sc.barrier.grad_h = [](const Vec&) {
      Vec g(1);
      g[0] = 1.0;
      return g;
    };
    sc.barrier.dist_to_safe = [](const Vec& x) {
      return std::max(0.0, -x[0]);
    };
  } else {
    sc.barrier.h = [](const Vec& x) { return 1.0 - x.squaredNorm(); };
    sc.barrier.grad_h = [](const Vec& x) { return Vec(-2.0 * x); };
    sc.barrier.dist_to_safe = [](const Vec& x) {
      return std::max(0.0, x.norm() - 1.0);
    };
  }
  sc.barrier.alpha = make_linear_ek(alpha_slope);

  sc.u0 = [nc0, nc1, n](const Vec& x) {
    Vec u(n);
    for (int i = 0; i < n; ++i) u[i] = nc0 + nc1 * x[i];
    return u;
  };

  sc.working_box.lo = Vec::Constant(n, lo);
  sc.working_box.hi = Vec::Constant(n, hi);

  auto vec1 = [](double v) {
    Vec x(1);
    x[0] = v;
    return x;
  };
  auto vec2 = [](double a, double b) {
    Vec x(2);
    x[0] = a;
    x[1] = b;
    return x;
  };
  if (n == 1) {
    sc.interior_points = {vec1(hi / 4.0), vec1(hi / 2.0)};
    sc.boundary_points = {vec1(0.0)};
    sc.exterior_points = {vec1(lo / 4.0), vec1(lo / 2.0)};
    sc.sweep_x0 = {vec1(0.0), vec1(hi / 4.0), vec1(hi / 2.0)};
    sc.envelope_x0 = {vec1(0.0), vec1(hi / 32.0)};
    sc.exterior_probe = vec1(std::max(lo / 8.0, -0.3));
    sc.far_exterior_probe = vec1(std::max(lo * 0.625, -5.0));
  } else {
    sc.interior_points = {vec2(0.0, 0.0), vec2(0.5, 0.0)};
    sc.boundary_points = {vec2(1.0, 0.0), vec2(0.0, 1.0), vec2(-1.0, 0.0)};
    sc.exterior_points = {vec2(1.5, 0.0), vec2(0.0, -1.5)};
    sc.sweep_x0 = {vec2(0.0, 0.0), vec2(0.5, 0.0), vec2(0.0, 0.8)};
    sc.envelope_x0 = {vec2(0.9, 0.0), vec2(0.0, 0.95)};
    sc.exterior_probe = vec2(1.2, 0.0);
    sc.far_exterior_probe = vec2(std::sqrt(6.0), 0.0);
  }
  sc.escape_radius = std::max(1e3, 10.0 * std::max(std::abs(lo), hi));
  return sc;
}

Scenario parse_scenario(const ordered_json& j) {
  if (j.is_string()) {
    return make_scenario(j.get<std::string>());
  }
  if (j.is_object()) {
    return inline_scenario(j);
  }
  throw ConfigError("scenario must be a registry name or an inline object");
}

FilterKind parse_kind(const std::string& s) {
  if (s == "cbf_qp") return FilterKind::CbfQp;
  if (s == "inverse_optimal") return FilterKind::InverseOptimal;
  if (s == "sontag") return FilterKind::Sontag;
  if (s == "improved_zero_dist") return FilterKind::ImprovedZeroDist;
  if (s == "improved_issf") return FilterKind::ImprovedIssf;
  throw ConfigError("filter.kind \"" + s +
                    "\" is not one of: cbf_qp inverse_optimal sontag "
                    "improved_zero_dist improved_issf");
}

FilterSpec parse_filter(const ordered_json* j, Scenario& sc) {
  FilterSpec spec;
  spec.kind = FilterKind::InverseOptimal;
  if (j) {
    if (!j->is_object()) {
      throw ConfigError("filter must be an object");
    }
    check_keys(*j, "filter",
               {"kind", "uses_gamma", "gamma", "rho", "alpha_slope"});
    if (const ordered_json* k = find(*j, "kind")) {
      spec.kind = parse_kind(as_string(*k, "filter.kind"));
    }
    if (const ordered_json* a = find(*j, "alpha_slope")) {
      const double slope = as_number(*a, "filter.alpha_slope");
      if (!(slope > 0.0)) {
        throw ConfigError("filter.alpha_slope must be positive");
      }
      sc.barrier.alpha = make_linear_ek(slope);
    }
    if (const ordered_json* g = find(*j, "gamma")) {
      if (g->is_string() && g->get<std::string>() == "none") {
        spec.uses_gamma = false;
      } else if (g->is_string() && g->get<std::string>() == "registry") {
        if (!sc.barrier.gamma) {
          throw ConfigError("filter.gamma = \"registry\" but scenario \"" +
                            sc.name + "\" declares no gamma");
        }
        spec.uses_gamma = true;
      } else {
        sc.barrier.gamma = parse_class_k(*g, "filter.gamma");
        spec.uses_gamma = true;
      }
    } else {
      spec.uses_gamma = spec.kind == FilterKind::ImprovedIssf;
    }
    if (const ordered_json* r = find(*j, "rho")) {
      if (r->is_string() && r->get<std::string>() == "none") {
        sc.barrier.rho.reset();
      } else if (r->is_string() && r->get<std::string>() == "registry") {
        if (!sc.barrier.rho) {
          throw ConfigError("filter.rho = \"registry\" but scenario \"" +
                            sc.name + "\" declares no rho");
        }
      } else {
        sc.barrier.rho = parse_class_k(*r, "filter.rho");
      }
    }
    if (const ordered_json* u = find(*j, "uses_gamma")) {
      spec.uses_gamma = as_bool(*u, "filter.uses_gamma");
    }
  }
  if (spec.uses_gamma && (spec.kind == FilterKind::ImprovedZeroDist ||
                          spec.kind == FilterKind::Sontag)) {
    throw ConfigError("filter.uses_gamma does not apply to kind \"" +
                      std::string(to_string(spec.kind)) + "\"");
  }
  spec.barrier = sc.barrier;
  try {
    validate(spec);
  } catch (const Error& e) {
    throw ConfigError(std::string("filter: ") + e.what());
  }
  return spec;
}

Stage parse_stage(const std::string& s) {
  if (s == "classify") return Stage::Classify;
  if (s == "certify") return Stage::Certify;
  if (s == "sweep") return Stage::Sweep;
  if (s == "envelope") return Stage::Envelope;
  if (s == "cost") return Stage::Cost;
  throw ConfigError("stages entry \"" + s +
                    "\" is not one of: classify certify sweep envelope cost");
}

const char* stage_name(Stage st) {
  switch (st) {
    case Stage::Classify: return "classify";
    case Stage::Certify: return "certify";
    case Stage::Sweep: return "sweep";
    case Stage::Envelope: return "envelope";
    case Stage::Cost: return "cost";
  }
  return "?";
}

ordered_json cert_report_json(const CertReport& r) {
  ordered_json out;
  out["check_name"] = r.check_name;
  out["equality_mode"] = r.equality_mode;
  out["n_points"] = r.n_points;
  out["worst_residual"] = r.worst_residual;
  ordered_json wp = ordered_json::array();
  for (int i = 0; i < r.worst_point.size(); ++i) wp.push_back(r.worst_point[i]);
  out["worst_point"] = wp;
  if (r.worst_w) {
    ordered_json ww = ordered_json::array();
    for (int i = 0; i < r.worst_w->size(); ++i) ww.push_back((*r.worst_w)[i]);
    out["worst_w"] = ww;
  } else {
    out["worst_w"] = nullptr;
  }
  out["tolerance"] = r.tolerance;
  out["passed"] = r.passed;
  out["notes"] = r.notes;
  return out;
}

ordered_json vec_json(const Vec& v) {
  ordered_json out = ordered_json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

// Max |HJI residual| over the certification samples; skipped points (no
// feasible weight) are counted in the notes.
CertReport hji_report(const ControlAffinePlant& plant,
                      const BarrierCandidate& barrier,
                      const std::function<Vec(const Vec&)>& u0,
                      FilterKind kind, bool uses_gamma, const Box& box, int n,
                      std::uint64_t seed) {
  CertReport rep;
  rep.check_name = "hji";
  rep.equality_mode = true;
  rep.tolerance = 1e-9;
  int skipped = 0;
  for (const Vec& x : certification_samples(box, n, seed)) {
    std::optional<double> res =
        hji_residual(plant, barrier, x, u0(x), kind, uses_gamma);
    if (!res) {
      ++skipped;
      continue;
    }
    if (rep.n_points == 0 || std::abs(*res) > std::abs(rep.worst_residual)) {
      rep.worst_residual = *res;
      rep.worst_point = x;
    }
    ++rep.n_points;
  }
  rep.passed =
      rep.n_points > 0 && std::abs(rep.worst_residual) <= rep.tolerance;
  if (skipped > 0) {
    rep.notes.push_back(std::to_string(skipped) + " infeasible point(s) skipped");
  }
  if (rep.n_points == 0) {
    rep.notes.push_back("no evaluable points");
  }
  return rep;
}

struct StageError {
  std::string stage;
  std::string message;
};

}  // namespace

RunConfig load_config(const std::string& path) {
  const ordered_json j = parse_file(path);
  if (!j.is_object()) {
    throw ConfigError("config root must be a JSON object");
  }
  check_keys(j, "config",
             {"schema", "scenario", "filter", "nominal", "sweep", "certify",
              "envelope", "stages", "expected_margin", "outputs"});

  RunConfig cfg;
  const ordered_json* schema = find(j, "schema");
  if (!schema || !schema->is_number_integer() ||
      schema->get<std::int64_t>() != 1) {
    throw ConfigError("config.schema must be the integer 1");
  }

  const ordered_json* scj = find(j, "scenario");
  if (!scj) throw ConfigError("config.scenario is required");
  cfg.scenario = parse_scenario(*scj);

  if (const ordered_json* nom = find(j, "nominal")) {
    if (nom->is_string()) {
      if (nom->get<std::string>() != "registry") {
        throw ConfigError("config.nominal must be \"registry\" or affine "
                          "coefficients [c0, c1]");
      }
    } else {
      const std::vector<double> c = as_number_list(*nom, "config.nominal");
      if (c.size() > 2) {
        throw ConfigError("config.nominal must be affine: [c0] or [c0, c1]");
      }
      const double c0 = c[0];
      const double c1 = c.size() > 1 ? c[1] : 0.0;
      const int m = cfg.scenario.plant.ctrl_dim;
      cfg.scenario.u0 = [c0, c1, m](const Vec& x) {
        Vec u(m);
        for (int i = 0; i < m; ++i) {
          u[i] = c0 + c1 * (i < x.size() ? x[i] : 0.0);
        }
        return u;
      };
    }
  }

  cfg.filter = parse_filter(find(j, "filter"), cfg.scenario);

  cfg.sigmas = {0.5, 1.0, 2.0};
  cfg.x0_set = cfg.scenario.sweep_x0;
  bool include_probe = true;
  if (const ordered_json* sw = find(j, "sweep")) {
    if (!sw->is_object()) throw ConfigError("config.sweep must be an object");
    check_keys(*sw, "sweep",
               {"sigmas", "x0", "disturbance", "dt", "horizon", "seed",
                "include_probe"});
    if (const ordered_json* s = find(*sw, "sigmas")) {
      cfg.sigmas = as_number_list(*s, "sweep.sigmas");
      for (std::size_t i = 0; i + 1 < cfg.sigmas.size(); ++i) {
        if (!(cfg.sigmas[i] < cfg.sigmas[i + 1])) {
          throw ConfigError("sweep.sigmas must be strictly ascending");
        }
      }
      for (double s2 : cfg.sigmas) {
        if (!(s2 > 0.0)) throw ConfigError("sweep.sigmas must be positive");
      }
    }
    if (const ordered_json* x0 = find(*sw, "x0")) {
      if (x0->is_string()) {
        if (x0->get<std::string>() != "registry") {
          throw ConfigError("sweep.x0 must be \"registry\" or a list of "
                            "state vectors");
        }
      } else if (x0->is_array()) {
        cfg.x0_set.clear();
        for (std::size_t i = 0; i < x0->size(); ++i) {
          cfg.x0_set.push_back(as_state((*x0)[i],
                                        "sweep.x0[" + std::to_string(i) + "]",
                                        cfg.scenario.plant.state_dim));
        }
        if (cfg.x0_set.empty()) {
          throw ConfigError("sweep.x0 must not be empty");
        }
      } else {
        throw ConfigError("sweep.x0 must be \"registry\" or a list");
      }
    }
    if (const ordered_json* d = find(*sw, "disturbance")) {
      try {
        cfg.disturbance = parse_disturbance(*d, "sweep.disturbance");
      } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("sweep.disturbance: ") + e.what());
      }
    }
    if (const ordered_json* v = find(*sw, "dt")) {
      cfg.dt = as_number(*v, "sweep.dt");
      if (!(cfg.dt > 0.0)) {
        throw ConfigError("sweep.dt must be positive, got " +
                          std::to_string(cfg.dt));
      }
    }
    if (const ordered_json* v = find(*sw, "horizon")) {
      cfg.horizon = as_number(*v, "sweep.horizon");
      if (!(cfg.horizon > 0.0) || cfg.horizon < cfg.dt) {
        throw ConfigError("sweep.horizon must be positive and >= sweep.dt");
      }
    }
    if (const ordered_json* v = find(*sw, "seed")) {
      if (!v->is_number_unsigned()) {
        throw ConfigError("sweep.seed must be an unsigned integer");
      }
      cfg.seed = v->get<std::uint64_t>();
    }
    if (const ordered_json* v = find(*sw, "include_probe")) {
      include_probe = as_bool(*v, "sweep.include_probe");
    }
  }
  // Stash the probe decision in the config by clearing the probe point.
  if (!include_probe) {
    cfg.scenario.exterior_probe = Vec();
  }
  if (cfg.disturbance.kind != DisturbanceSignal::Kind::Zero &&
      cfg.scenario.plant.dist_dim == 0) {
    throw ConfigError("sweep.disturbance requires a scenario with a "
                      "disturbance channel (g1)");
  }

  cfg.certify_checks = {"zbf"};
  if (cfg.filter.kind != FilterKind::Sontag) {
    cfg.certify_checks.push_back("hji");
  }
  if (cfg.filter.kind == FilterKind::CbfQp ||
      cfg.filter.kind == FilterKind::InverseOptimal) {
    cfg.certify_checks.push_back("penalty_sign");
  }
  if (const ordered_json* ce = find(j, "certify")) {
    if (!ce->is_object()) throw ConfigError("config.certify must be an object");
    check_keys(*ce, "certify", {"n", "checks"});
    if (const ordered_json* v = find(*ce, "n")) {
      const double n = as_number(*v, "certify.n");
      if (!(n >= 1.0) || n != std::floor(n)) {
        throw ConfigError("certify.n must be a positive integer");
      }
      cfg.certify_n = static_cast<int>(n);
    }
    if (const ordered_json* v = find(*ce, "checks")) {
      if (!v->is_array()) {
        throw ConfigError("certify.checks must be an array of check names");
      }
      cfg.certify_checks.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const std::string name =
            as_string((*v)[i], "certify.checks[" + std::to_string(i) + "]");
        if (name != "zbf" && name != "hji" && name != "penalty_sign" &&
            name != "issf") {
          throw ConfigError("certify.checks entry \"" + name +
                            "\" is not one of: zbf hji penalty_sign issf");
        }
        if ((name == "hji" || name == "penalty_sign") &&
            cfg.filter.kind == FilterKind::Sontag) {
          throw ConfigError("certify.checks: \"" + name +
                            "\" is undefined for the sontag filter");
        }
        if (name == "issf") {
          if (!cfg.scenario.barrier.rho) {
            throw ConfigError("certify.checks: \"issf\" requires a scenario "
                              "with rho");
          }
          if (cfg.scenario.plant.dist_dim == 0) {
            throw ConfigError("certify.checks: \"issf\" requires a "
                              "disturbance channel (g1)");
          }
        }
        cfg.certify_checks.push_back(name);
      }
    }
  }

  cfg.envelope_amplitudes = {0.0, 0.25, 0.5, 1.0};
  if (const ordered_json* en = find(j, "envelope")) {
    if (!en->is_object()) {
      throw ConfigError("config.envelope must be an object");
    }
    check_keys(*en, "envelope", {"amplitudes", "sigma"});
    if (const ordered_json* v = find(*en, "amplitudes")) {
      cfg.envelope_amplitudes = as_number_list(*v, "envelope.amplitudes");
      for (std::size_t i = 0; i + 1 < cfg.envelope_amplitudes.size(); ++i) {
        if (!(cfg.envelope_amplitudes[i] < cfg.envelope_amplitudes[i + 1])) {
          throw ConfigError("envelope.amplitudes must be strictly ascending");
        }
      }
      if (cfg.envelope_amplitudes.front() < 0.0) {
        throw ConfigError("envelope.amplitudes must be non-negative");
      }
    }
    if (const ordered_json* v = find(*en, "sigma")) {
      cfg.envelope_sigma = as_number(*v, "envelope.sigma");
      if (!(cfg.envelope_sigma > 0.0)) {
        throw ConfigError("envelope.sigma must be positive");
      }
    }
  }

  cfg.stages = {Stage::Classify, Stage::Certify, Stage::Sweep};
  if (const ordered_json* st = find(j, "stages")) {
    if (!st->is_array() || st->empty()) {
      throw ConfigError("config.stages must be a non-empty array");
    }
    cfg.stages.clear();
    for (std::size_t i = 0; i < st->size(); ++i) {
      cfg.stages.push_back(parse_stage(
          as_string((*st)[i], "stages[" + std::to_string(i) + "]")));
    }
  }
  for (Stage st : cfg.stages) {
    if (st == Stage::Envelope) {
      const bool qualifies =
          cfg.filter.kind == FilterKind::ImprovedIssf ||
          (cfg.filter.kind == FilterKind::CbfQp && cfg.filter.uses_gamma);
      if (!qualifies) {
        throw ConfigError("stages: \"envelope\" requires the improved_issf "
                          "filter or cbf_qp with gamma");
      }
      if (cfg.scenario.plant.dist_dim == 0) {
        throw ConfigError("stages: \"envelope\" requires a disturbance "
                          "channel (g1)");
      }
    }
    if (st == Stage::Cost && cfg.filter.kind == FilterKind::Sontag) {
      throw ConfigError("stages: \"cost\" is undefined for the sontag filter");
    }
  }

  if (const ordered_json* em = find(j, "expected_margin")) {
    if (!em->is_array() || em->size() != 2) {
      throw ConfigError("expected_margin must be [lo, hi] with hi a number "
                        "or \"inf\"");
    }
    const double lo = as_number((*em)[0], "expected_margin[0]");
    std::optional<double> hi;
    if ((*em)[1].is_string()) {
      if ((*em)[1].get<std::string>() != "inf") {
        throw ConfigError("expected_margin[1] must be a number or \"inf\"");
      }
    } else {
      hi = as_number((*em)[1], "expected_margin[1]");
    }
    cfg.expected_margin = std::make_pair(lo, hi);
  }

  cfg.outputs.dir = "out/" + cfg.scenario.name;
  if (const ordered_json* out = find(j, "outputs")) {
    if (!out->is_object()) {
      throw ConfigError("config.outputs must be an object");
    }
    check_keys(*out, "outputs", {"dir", "artifacts"});
    if (const ordered_json* d = find(*out, "dir")) {
      cfg.outputs.dir = as_string(*d, "outputs.dir");
    }
    if (const ordered_json* a = find(*out, "artifacts")) {
      if (!a->is_array()) {
        throw ConfigError("outputs.artifacts must be an array");
      }
      cfg.outputs.report = false;
      cfg.outputs.sweep_csv = false;
      cfg.outputs.trajectories = false;
      cfg.outputs.cert = false;
      for (std::size_t i = 0; i < a->size(); ++i) {
        const std::string tok =
            as_string((*a)[i], "outputs.artifacts[" + std::to_string(i) + "]");
        if (tok == "report") {
          cfg.outputs.report = true;
        } else if (tok == "sweep") {
          cfg.outputs.sweep_csv = true;
        } else if (tok == "trajectories") {
          cfg.outputs.trajectories = true;
        } else if (tok == "cert") {
          cfg.outputs.cert = true;
        } else {
          throw ConfigError("outputs.artifacts entry \"" + tok +
                            "\" is not one of: report sweep trajectories cert");
        }
      }
    }
  }
  return cfg;
}

std::string list_scenarios_text() {
  std::ostringstream os;
  os << "registered scenarios:\n";
  for (const std::string& name : scenario_names()) {
    const Scenario sc = make_scenario(name);
    os << "  " << name << " — " << sc.description << "\n";
  }
  return os.str();
}

int run_scenario(const std::string& config_path, const CliOverrides& ov) {
  RunConfig cfg = load_config(config_path);
  if (ov.out_dir) cfg.outputs.dir = *ov.out_dir;
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.dt) {
    if (!(*ov.dt > 0.0)) {
      throw ConfigError("--dt must be positive, got " +
                        std::to_string(*ov.dt));
    }
    cfg.dt = *ov.dt;
  }
  int workers = ov.workers.value_or(
      static_cast<int>(std::thread::hardware_concurrency()));
  if (ov.workers && *ov.workers < 1) {
    throw ConfigError("--workers must be at least 1");
  }
  if (workers < 1) workers = 1;
  if (ov.certify_only) {
    std::vector<Stage> kept;
    for (Stage st : cfg.stages) {
      if (st == Stage::Classify || st == Stage::Certify) kept.push_back(st);
    }
    if (kept.empty()) kept = {Stage::Classify, Stage::Certify};
    cfg.stages = kept;
  }

  const Scenario& sc = cfg.scenario;
  auto closed_loop = [&](const Vec& x) {
    return eval_filter(sc.plant, cfg.filter, x, sc.u0(x)).u_total;
  };

  fs::create_directories(cfg.outputs.dir);

  ordered_json report;
  report["schema"] = 1;
  report["scenario"] = sc.name;
  report["filter"] = to_string(cfg.filter.kind);
  report["uses_gamma"] = cfg.filter.uses_gamma;
  report["seed"] = cfg.seed;
  report["dt"] = cfg.dt;
  ordered_json jstages = ordered_json::object();

  std::optional<StageError> failure;
  for (Stage st : cfg.stages) {
    const char* name = stage_name(st);
    try {
      switch (st) {
        case Stage::Classify: {
          const std::vector<Vec> samples =
              sample_boundary(sc.barrier, sc.working_box, 64, cfg.seed);
          const BoundaryClassification cls =
              classify_boundary(sc.plant, sc.barrier, sc.u0, samples);
          ordered_json out;
          out["f_verdict"] = to_string(cls.f_verdict);
          out["u0_verdict"] = to_string(cls.u0_verdict);
          out["f_range"] = {cls.f_min, cls.f_max};
          out["u0_range"] = {cls.u0_min, cls.u0_max};
          out["n_samples"] = cls.n_samples;
          jstages[name] = out;
          std::cout << "[classify] f=" << to_string(cls.f_verdict)
                    << " u0=" << to_string(cls.u0_verdict) << " over "
                    << cls.n_samples << " boundary samples\n";
        } break;
        case Stage::Certify: {
          ordered_json reports = ordered_json::array();
          bool all = true;
          for (const std::string& check : cfg.certify_checks) {
            CertReport rep;
            if (check == "zbf") {
              rep = zbf_check(sc.plant, sc.barrier, closed_loop,
                              sc.working_box, cfg.certify_n, cfg.seed);
            } else if (check == "hji") {
              rep = hji_report(sc.plant, sc.barrier, sc.u0, cfg.filter.kind,
                               cfg.filter.uses_gamma, sc.working_box,
                               cfg.certify_n, cfg.seed);
            } else if (check == "penalty_sign") {
              rep = penalty_sign_check(sc.plant, sc.barrier, sc.u0,
                                       cfg.filter.kind, cfg.filter.uses_gamma,
                                       sc.working_box, cfg.certify_n,
                                       cfg.seed);
            } else {  // issf
              const double a = std::max(cfg.disturbance.sup_norm(), 1.0);
              std::vector<Vec> w_grid;
              for (double w : {-a, 0.0, a}) {
                w_grid.push_back(Vec::Constant(sc.plant.dist_dim, w));
              }
              rep = issf_bf_check(sc.plant, sc.barrier, closed_loop,
                                  sc.working_box, w_grid,
                                  IssfCondition::CrossCheck, cfg.certify_n,
                                  cfg.seed);
            }
            all = all && rep.passed;
            reports.push_back(cert_report_json(rep));
            if (cfg.outputs.cert) {
              fs::create_directories(fs::path(cfg.outputs.dir) / "cert");
              std::ofstream of(fs::path(cfg.outputs.dir) / "cert" /
                               (rep.check_name + ".json"));
              of << cert_report_json(rep).dump(2) << "\n";
            }
            std::cout << "[certify] " << rep.check_name << ": "
                      << (rep.passed ? "pass" : "FAIL")
                      << " (worst residual " << fmt17(rep.worst_residual)
                      << " over " << rep.n_points << " points)\n";
          }
          jstages[name] =
              ordered_json{{"reports", reports}, {"all_passed", all}};
        } break;
        case Stage::Sweep: {
          SimConfig base;
          base.dt = cfg.dt;
          base.horizon = cfg.horizon;
          base.sigma = 1.0;
          base.x0 = cfg.x0_set.front();
          base.w_signal = cfg.disturbance;
          base.escape_radius = sc.escape_radius;
          std::optional<Vec> probe;
          if (sc.exterior_probe.size() == sc.plant.state_dim) {
            probe = sc.exterior_probe;
          }
          const SweepReport rep =
              gain_sweep(sc.plant, cfg.filter, sc.u0, cfg.sigmas, base,
                         cfg.x0_set, probe, workers);
          if (cfg.outputs.sweep_csv) {
            std::ofstream of(fs::path(cfg.outputs.dir) / "sweep.csv");
            write_sweep_csv(of, rep);
          }
          if (cfg.outputs.trajectories) {
            fs::create_directories(fs::path(cfg.outputs.dir) /
                                   "trajectories");
            // Written at the grid sigma nearest 1 for each initial state.
            double anchor = rep.sigmas.front();
            for (double s : rep.sigmas) {
              if (std::abs(s - 1.0) < std::abs(anchor - 1.0)) anchor = s;
            }
            for (std::size_t i = 0; i < cfg.x0_set.size(); ++i) {
              SimConfig tc = base;
              tc.sigma = anchor;
              tc.x0 = cfg.x0_set[i];
              const Trajectory traj =
                  integrate(sc.plant, cfg.filter, sc.u0, tc);
              std::ofstream of(fs::path(cfg.outputs.dir) / "trajectories" /
                               ("x0_" + std::to_string(i) + ".csv"));
              write_trajectory_csv(of, traj);
            }
          }
          int inconclusive = 0;
          for (const SweepCell& c : rep.cells) {
            if (c.inconclusive) ++inconclusive;
          }
          ordered_json out;
          out["sigmas"] = rep.sigmas;
          ordered_json safe = ordered_json::array();
          for (char v : rep.sigma_safe) safe.push_back(v != 0);
          out["sigma_safe"] = safe;
          out["n_cells"] = rep.cells.size();
          out["n_inconclusive"] = inconclusive;
          out["margin_found"] = rep.margin_found;
          if (rep.margin_found) {
            out["margin"] = {rep.margin_lo, rep.margin_hi};
          } else {
            out["margin"] = nullptr;
          }
          if (cfg.expected_margin) {
            ordered_json em = ordered_json::array();
            em.push_back(cfg.expected_margin->first);
            if (cfg.expected_margin->second) {
              em.push_back(*cfg.expected_margin->second);
            } else {
              em.push_back("inf");
            }
            out["expected_margin"] = em;
            const double want_hi = cfg.expected_margin->second
                                       ? *cfg.expected_margin->second
                                       : rep.sigmas.back();
            const bool matched =
                rep.margin_found &&
                std::abs(rep.margin_lo - cfg.expected_margin->first) <=
                    kMarginMatchTol &&
                std::abs(rep.margin_hi - want_hi) <= kMarginMatchTol;
            out["expectation_matched"] = matched;
          }
          jstages[name] = out;
          std::cout << "[sweep] " << rep.cells.size() << " cells; margin ";
          if (rep.margin_found) {
            std::cout << "[" << fmt17(rep.margin_lo) << ", "
                      << fmt17(rep.margin_hi) << "] on the grid\n";
          } else {
            std::cout << "not found (sigma = 1 unsafe)\n";
          }
        } break;
        case Stage::Envelope: {
          SimConfig base;
          base.dt = cfg.dt;
          base.horizon = cfg.horizon;
          base.sigma = cfg.envelope_sigma;
          base.x0 = sc.envelope_x0.front();
          base.w_signal = DisturbanceSignal::zero();
          base.escape_radius = sc.escape_radius;
          const std::vector<EnvelopePoint> pts =
              issf_envelope(sc.plant, cfg.filter, sc.u0,
                            cfg.envelope_amplitudes, base, sc.envelope_x0,
                            workers, cfg.seed);
          bool monotone = true;
          for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            if (pts[i + 1].worst_violation <
                pts[i].worst_violation - kEnvelopeSlack) {
              monotone = false;
            }
          }
          ordered_json arr = ordered_json::array();
          for (const EnvelopePoint& p : pts) {
            arr.push_back(ordered_json{{"amplitude", p.amplitude},
                                       {"worst_violation", p.worst_violation},
                                       {"n_cells", p.n_cells},
                                       {"n_errors", p.n_errors}});
          }
          jstages[name] =
              ordered_json{{"sigma", cfg.envelope_sigma},
                           {"points", arr},
                           {"monotone", monotone}};
          std::cout << "[envelope] " << pts.size()
                    << " amplitudes, monotone=" << (monotone ? "yes" : "no")
                    << "\n";
        } break;
        case Stage::Cost: {
          ordered_json arr = ordered_json::array();
          const bool gated = cfg.filter.kind == FilterKind::InverseOptimal &&
                             !cfg.filter.uses_gamma;
          bool all_matched = true;
          for (const Vec& x0 : sc.interior_points) {
            const CostAccount acct = realized_cost(
                sc.plant, sc.barrier, cfg.filter.kind, cfg.filter.uses_gamma,
                sc.u0, x0, DisturbanceSignal::zero(), 1.0, cfg.horizon, 2.0,
                cfg.dt, std::nullopt, sc.escape_radius);
            ordered_json e;
            e["x0"] = vec_json(x0);
            e["total"] = acct.total;
            e["terminal"] = acct.terminal;
            e["running_l"] = acct.running_l;
            e["running_penalty"] = acct.running_penalty;
            e["running_dist_reward"] = acct.running_dist_reward;
            e["truncated"] = acct.truncated;
            e["penalty_infinite"] = acct.penalty_infinite;
            if (gated) {
              const double expect = 4.0 * sc.barrier.h(x0);
              const bool ok = std::abs(acct.total - expect) <=
                              kCostRelTol * std::max(1.0, std::abs(expect));
              e["expected"] = expect;
              e["matched"] = ok;
              all_matched = all_matched && ok;
            }
            arr.push_back(e);
          }
          ordered_json out;
          out["entries"] = arr;
          if (gated) {
            out["all_matched"] = all_matched;
          } else {
            out["all_matched"] = nullptr;
          }
          jstages[name] = out;
          std::cout << "[cost] " << arr.size() << " initial states"
                    << (gated ? (all_matched ? ", identity ok" : ", identity MISMATCH")
                              : "")
                    << "\n";
        } break;
      }
    } catch (const Error& e) {
      jstages[name] = ordered_json{{"error", e.what()}};
      failure = StageError{name, e.what()};
      std::cout << "[" << name << "] error: " << e.what() << "\n";
      break;
    }
  }
  report["stages"] = jstages;
  if (failure) {
    report["aborted_stage"] = failure->stage;
  }

  const std::string body = report.dump(2);
  const int status = exit_status_from_report(body);
  report["verdict"] = ordered_json{{"exit_status", status},
                                   {"summary", verdict_summary(body)}};
  if (cfg.outputs.report) {
    std::ofstream of(fs::path(cfg.outputs.dir) / "report.json");
    of << report.dump(2) << "\n";
  }
  std::cout << verdict_summary(body) << "\n";
  return status;
}

int exit_status_from_report(const std::string& report_json) {
  ordered_json j;
  try {
    j = ordered_json::parse(report_json);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("report parse error: ") + e.what());
  }
  const ordered_json* stages = find(j, "stages");
  if (!stages || !stages->is_object()) {
    throw ConfigError("report has no stages object");
  }
  for (const auto& item : stages->items()) {
    if (item.value().is_object() && item.value().contains("error")) {
      return 1;
    }
  }
  if (const ordered_json* c = find(*stages, "certify")) {
    const ordered_json* ap = find(*c, "all_passed");
    if (!ap || !ap->is_boolean()) {
      throw ConfigError("report certify stage lacks all_passed");
    }
    if (!ap->get<bool>()) {
      return 1;
    }
  }
  if (const ordered_json* s = find(*stages, "sweep")) {
    const ordered_json* em = find(*s, "expectation_matched");
    if (em && em->is_boolean() && !em->get<bool>()) {
      return 1;
    }
  }
  return 0;
}

std::string verdict_summary(const std::string& report_json) {
  ordered_json j;
  try {
    j = ordered_json::parse(report_json);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("report parse error: ") + e.what());
  }
  std::ostringstream os;
  os << "verdict:";
  if (const ordered_json* n = find(j, "scenario")) {
    os << " scenario=" << n->get<std::string>();
  }
  if (const ordered_json* f = find(j, "filter")) {
    os << " filter=" << f->get<std::string>();
  }
  const ordered_json* stages = find(j, "stages");
  if (!stages || !stages->is_object()) {
    throw ConfigError("report has no stages object");
  }
  for (const auto& item : stages->items()) {
    if (item.value().is_object() && item.value().contains("error")) {
      os << " " << item.key() << "=error";
      return os.str() + " exit=1";
    }
  }
  if (const ordered_json* c = find(*stages, "classify")) {
    os << " classify=" << (*c)["f_verdict"].get<std::string>() << "/"
       << (*c)["u0_verdict"].get<std::string>();
  }
  if (const ordered_json* c = find(*stages, "certify")) {
    const auto& reports = (*c)["reports"];
    int pass = 0;
    for (const auto& r : reports) {
      if (r["passed"].get<bool>()) ++pass;
    }
    os << " certify=" << pass << "/" << reports.size();
  }
  if (const ordered_json* s = find(*stages, "sweep")) {
    os << " sweep=";
    if ((*s)["margin_found"].get<bool>()) {
      os << "margin[" << fmt17((*s)["margin"][0].get<double>()) << ","
         << fmt17((*s)["margin"][1].get<double>()) << "]";
    } else {
      os << "no-margin";
    }
    if (s->contains("expectation_matched")) {
      os << ((*s)["expectation_matched"].get<bool>() ? "(expected)"
                                                     : "(MISMATCH)");
    }
  }
  if (const ordered_json* e = find(*stages, "envelope")) {
    os << " envelope=" << ((*e)["monotone"].get<bool>() ? "monotone"
                                                        : "non-monotone");
  }
  if (const ordered_json* c = find(*stages, "cost")) {
    const auto& am = (*c)["all_matched"];
    if (am.is_boolean()) {
      os << " cost=" << (am.get<bool>() ? "identity" : "MISMATCH");
    } else {
      os << " cost=reported";
    }
  }
  os << " exit=" << exit_status_from_report(report_json);
  return os.str();
}

}  // namespace safegain
