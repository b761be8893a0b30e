#include "safegain/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "safegain/errors.hpp"

namespace safegain {

namespace {

constexpr double kIdentityTol = 1e-9;
constexpr double kAntecedentGuard = 1e-12;
constexpr double kRegionMargin = 1e-6;

const int kHaltonPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19};

double radical_inverse(int base, long index) {
  double result = 0.0;
  double digit_weight = 1.0 / base;
  while (index > 0) {
    result += (index % base) * digit_weight;
    index /= base;
    digit_weight /= base;
  }
  return result;
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || lambda > 2.0) {
    throw InvalidParameter("lambda must lie in (0, 2], got " +
                           std::to_string(lambda));
  }
}

double shaping_term(const BarrierCandidate& barrier,
                    const LieDerivatives& lie) {
  if (lie.Lg1.size() == 0) return 0.0;
  const LegendreFenchel lf = lf_transform(*barrier.gamma);
  return lf(2.0 * lie.Lg1.norm());
}

// Resolves whether the disturbance shaping enters the given kind's penalty.
bool resolve_gamma(FilterKind kind, bool uses_gamma) {
  switch (kind) {
    case FilterKind::CbfQp:
    case FilterKind::InverseOptimal:
      return uses_gamma;
    case FilterKind::ImprovedZeroDist:
      if (uses_gamma) {
        throw InvalidParameter(
            "penalty_l: ImprovedZeroDist has no gamma variant");
      }
      return false;
    case FilterKind::ImprovedIssf:
      return true;
    case FilterKind::Sontag:
      throw InvalidParameter("penalty_l: no penalty defined for Sontag");
  }
  throw InvalidParameter("penalty_l: unknown filter kind");
}

}  // namespace

std::vector<Vec> sample_box_random(const Box& box, int n, std::uint64_t seed) {
  if (n <= 0) throw InvalidParameter("sample_box_random: n must be positive");
  std::mt19937_64 rng(seed);
  std::vector<Vec> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vec x(box.dim());
    for (int d = 0; d < box.dim(); ++d) {
      std::uniform_real_distribution<double> dist(box.lo[d], box.hi[d]);
      x[d] = dist(rng);
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Vec> sample_box_halton(const Box& box, int n) {
  if (n <= 0) throw InvalidParameter("sample_box_halton: n must be positive");
  if (box.dim() > 8) {
    throw InvalidParameter("sample_box_halton: dimension > 8 unsupported");
  }
  std::vector<Vec> out;
  out.reserve(n);
  for (int i = 1; i <= n; ++i) {
    Vec x(box.dim());
    for (int d = 0; d < box.dim(); ++d) {
      const double u = radical_inverse(kHaltonPrimes[d], i);
      x[d] = box.lo[d] + u * (box.hi[d] - box.lo[d]);
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Vec> certification_samples(const Box& box, int n,
                                       std::uint64_t seed) {
  std::vector<Vec> pts = sample_box_random(box, n, seed);
  std::vector<Vec> halton = sample_box_halton(box, n);
  pts.insert(pts.end(), halton.begin(), halton.end());
  return pts;
}

double penalty_l(const ControlAffinePlant& plant,
                 const BarrierCandidate& barrier, const Vec& x, const Vec& u0,
                 FilterKind kind, bool uses_gamma, double lambda) {
  check_lambda(lambda);
  const bool with_gamma = resolve_gamma(kind, uses_gamma);
  if (with_gamma && !barrier.gamma) {
    throw InvalidParameter("penalty_l: gamma requested but barrier has none");
  }
  const LieDerivatives lie = lie_derivatives(plant, barrier, x);
  const double drift_term = lie.Lf + lie.Lg2.dot(u0);
  const double shaped = with_gamma ? shaping_term(barrier, lie) : 0.0;
  const double omega = drift_term - shaped + barrier.alpha(barrier.h(x));
  const double q = lie.Lg2.squaredNorm();

  double r_inv;
  if (q == 0.0) {
    if (omega < 0.0) {
      throw InfeasibleFilter("penalty_l: Lg2 h = 0 with omega = " +
                             std::to_string(omega));
    }
    r_inv = 0.0;
  } else {
    r_inv = (omega < 0.0) ? -omega / q : 0.0;
  }
  if (kind == FilterKind::ImprovedZeroDist || kind == FilterKind::ImprovedIssf) {
    r_inv = improved_r_inv(plant, barrier, x, u0, r_inv);
  }
  const double quad = r_inv * q;  // Lg2h R^{-1} (Lg2h)^T
  double l = -4.0 * (drift_term - shaped + quad);
  if (with_gamma) l -= 2.0 * (2.0 - lambda) * shaped;
  return l;
}

std::optional<double> hji_residual(const ControlAffinePlant& plant,
                                   const BarrierCandidate& barrier,
                                   const Vec& x, const Vec& u0,
                                   FilterKind kind, bool uses_gamma,
                                   double lambda) {
  const bool with_gamma = resolve_gamma(kind, uses_gamma);
  try {
    FilterOutput fo;
    switch (kind) {
      case FilterKind::CbfQp:
        fo = cbf_qp(plant, barrier, x, u0, with_gamma);
        break;
      case FilterKind::InverseOptimal:
        fo = inverse_optimal(plant, barrier, x, u0, with_gamma);
        break;
      case FilterKind::ImprovedZeroDist:
        fo = improved_filter(plant, barrier, x, u0, false);
        break;
      case FilterKind::ImprovedIssf:
        fo = improved_filter(plant, barrier, x, u0, true);
        break;
      case FilterKind::Sontag:
        throw InvalidParameter("hji_residual: not defined for Sontag");
    }
    const LieDerivatives lie = lie_derivatives(plant, barrier, x);
    const double drift_term = lie.Lf + lie.Lg2.dot(u0);
    const double shaped = with_gamma ? shaping_term(barrier, lie) : 0.0;
    const double l = penalty_l(plant, barrier, x, u0, kind, uses_gamma, lambda);
    return drift_term - shaped + fo.r_inv_quadratic + 0.25 * l;
  } catch (const InfeasibleFilter&) {
    return std::nullopt;
  } catch (const DegenerateAugmentation&) {
    return std::nullopt;
  }
}

CertReport penalty_sign_check(const ControlAffinePlant& plant,
                              const BarrierCandidate& barrier,
                              const std::function<Vec(const Vec&)>& u0,
                              FilterKind kind, bool uses_gamma, const Box& box,
                              int n, std::uint64_t seed) {
  if (n <= 0) throw InvalidParameter("penalty_sign_check: n must be positive");
  std::mt19937_64 rng(seed);
  auto draw = [&]() {
    Vec x(box.dim());
    for (int d = 0; d < box.dim(); ++d) {
      std::uniform_real_distribution<double> dist(box.lo[d], box.hi[d]);
      x[d] = dist(rng);
    }
    return x;
  };
  auto collect = [&](bool interior) {
    std::vector<Vec> pts;
    const long budget = 1000L * n;
    for (long attempt = 0; attempt < budget && (int)pts.size() < n; ++attempt) {
      Vec x = draw();
      const double h = barrier.h(x);
      if (interior ? (h >= kRegionMargin) : (h <= -kRegionMargin)) {
        pts.push_back(std::move(x));
      }
    }
    if ((int)pts.size() < n) {
      throw InvalidRegion(std::string("penalty_sign_check: box does not "
                                      "intersect the ") +
                          (interior ? "interior" : "exterior") +
                          " of the safe set (found " +
                          std::to_string(pts.size()) + "/" + std::to_string(n) +
                          " points)");
    }
    return pts;
  };

  const std::vector<Vec> interior = collect(true);
  const std::vector<Vec> exterior = collect(false);

  double min_interior_l = std::numeric_limits<double>::infinity();
  double max_exterior_l = -std::numeric_limits<double>::infinity();
  double min_bound_margin = std::numeric_limits<double>::infinity();
  Vec worst_int = interior.front(), worst_ext = exterior.front(),
      worst_bound = interior.front();
  for (const auto* group : {&interior, &exterior}) {
    const bool is_interior = (group == &interior);
    for (const Vec& x : *group) {
      const double l = penalty_l(plant, barrier, x, u0(x), kind, uses_gamma);
      if (is_interior && l < min_interior_l) {
        min_interior_l = l;
        worst_int = x;
      }
      if (!is_interior && l > max_exterior_l) {
        max_exterior_l = l;
        worst_ext = x;
      }
      const double bound_margin = 4.0 * barrier.alpha(barrier.h(x)) - l;
      if (bound_margin < min_bound_margin) {
        min_bound_margin = bound_margin;
        worst_bound = x;
      }
    }
  }

  CertReport report;
  report.check_name = "penalty_sign";
  report.equality_mode = false;
  report.n_points = 2 * n;
  report.tolerance = kIdentityTol;
  const double worst =
      std::min({min_interior_l, -max_exterior_l, min_bound_margin});
  report.worst_residual = worst;
  report.worst_point = (worst == min_interior_l)
                           ? worst_int
                           : (worst == -max_exterior_l ? worst_ext : worst_bound);
  report.passed = (min_interior_l > 0.0) && (max_exterior_l < 0.0) &&
                  (min_bound_margin >= -kIdentityTol);
  std::ostringstream note;
  note << "min interior l = " << min_interior_l
       << ", max exterior l = " << max_exterior_l
       << ", min (4 alpha(h) - l) = " << min_bound_margin;
  report.notes.push_back(note.str());
  return report;
}

CertReport zbf_check(const ControlAffinePlant& plant,
                     const BarrierCandidate& barrier,
                     const std::function<Vec(const Vec&)>& closed_loop_u,
                     const Box& box, int n, std::uint64_t seed) {
  const std::vector<Vec> pts = certification_samples(box, n, seed);
  CertReport report;
  report.check_name = "zbf";
  report.equality_mode = false;
  report.n_points = static_cast<int>(pts.size());
  report.tolerance = kIdentityTol;
  double worst = std::numeric_limits<double>::infinity();
  Vec worst_point = pts.front();
  for (const Vec& x : pts) {
    const Vec grad = barrier.gradient(x);
    const Vec dx = plant.f(x) + plant.g2(x) * closed_loop_u(x);
    const double margin = grad.dot(dx) + barrier.alpha(barrier.h(x));
    if (margin < worst) {
      worst = margin;
      worst_point = x;
    }
  }
  report.worst_residual = worst;
  report.worst_point = worst_point;
  report.passed = (worst >= -kIdentityTol);
  return report;
}

CertReport issf_bf_check(const ControlAffinePlant& plant,
                         const BarrierCandidate& barrier,
                         const std::function<Vec(const Vec&)>& closed_loop_u,
                         const Box& box, const std::vector<Vec>& w_grid,
                         IssfCondition condition, int n, std::uint64_t seed) {
  if (!barrier.rho) {
    throw ConfigError("issf_bf_check: barrier has no rho");
  }
  if (w_grid.empty()) {
    throw InvalidParameter("issf_bf_check: empty disturbance grid");
  }
  for (const Vec& w : w_grid) {
    if (w.size() != plant.dist_dim) {
      throw ShapeError("issf_bf_check: disturbance has dimension " +
                       std::to_string(w.size()) + ", plant expects " +
                       std::to_string(plant.dist_dim));
    }
    if (!w.allFinite()) {
      throw InvalidParameter("issf_bf_check: non-finite disturbance value");
    }
  }
  const std::vector<Vec> pts = certification_samples(box, n, seed);
  const auto& rho = *barrier.rho;

  struct ConditionStats {
    double worst = std::numeric_limits<double>::infinity();
    Vec worst_point;
    Vec worst_w;
    long checked = 0;
    long vacuous = 0;
    bool any() const { return checked > 0; }
    bool pass(double tol) const { return !any() || worst >= -tol; }
  };
  ConditionStats c13, c14, c15;

  auto update = [](ConditionStats& st, double margin, const Vec& x,
                   const Vec& w) {
    ++st.checked;
    if (margin < st.worst) {
      st.worst = margin;
      st.worst_point = x;
      st.worst_w = w;
    }
  };

  for (const Vec& x : pts) {
    const double h = barrier.h(x);
    const Vec grad = barrier.gradient(x);
    const double alpha_h = barrier.alpha(h);
    for (const Vec& w : w_grid) {
      Vec dx = plant.f(x) + plant.g2(x) * closed_loop_u(x);
      if (plant.dist_dim > 0) dx += plant.g1(x) * w;
      const double deriv = grad.dot(dx);
      const double rho_w = rho.eval(w.norm());
      update(c13, deriv + alpha_h + rho_w, x, w);
      if (std::abs(h) >= rho_w + kAntecedentGuard) {
        update(c14, deriv + alpha_h, x, w);
      } else {
        ++c14.vacuous;
      }
      if (std::min(0.0, h) <= -rho_w - kAntecedentGuard) {
        update(c15, deriv + alpha_h, x, w);
      } else {
        ++c15.vacuous;
      }
    }
  }

  CertReport report;
  report.equality_mode = false;
  report.n_points = static_cast<int>(pts.size() * w_grid.size());
  report.tolerance = kIdentityTol;

  auto fill_single = [&](const ConditionStats& st, const char* name) {
    report.check_name = name;
    if (st.any()) {
      report.worst_residual = st.worst;
      report.worst_point = st.worst_point;
      report.worst_w = st.worst_w;
    } else {
      report.worst_residual = std::numeric_limits<double>::infinity();
      report.worst_point = pts.front();
      report.notes.push_back("all antecedents vacuous");
    }
    report.passed = st.pass(kIdentityTol);
    std::ostringstream note;
    note << st.checked << " pairs checked, " << st.vacuous << " vacuous";
    report.notes.push_back(note.str());
  };

  switch (condition) {
    case IssfCondition::Dissipation13:
      fill_single(c13, "issf_13");
      break;
    case IssfCondition::Implication14:
      fill_single(c14, "issf_14");
      break;
    case IssfCondition::Implication15:
      fill_single(c15, "issf_15");
      break;
    case IssfCondition::CrossCheck: {
      report.check_name = "issf_cross";
      const bool p13 = c13.pass(kIdentityTol);
      const bool p14 = c14.pass(kIdentityTol);
      const bool p15 = c15.pass(kIdentityTol);
      report.worst_residual = c13.worst;
      if (c13.any()) {
        report.worst_point = c13.worst_point;
        report.worst_w = c13.worst_w;
      } else {
        report.worst_point = pts.front();
      }
      report.passed = !p13 || (p14 && p15);
      std::ostringstream note;
      note << "pass(13)=" << p13 << " pass(14)=" << p14 << " pass(15)=" << p15;
      report.notes.push_back(note.str());
      break;
    }
  }
  return report;
}

CostAccount realized_cost(const ControlAffinePlant& plant,
                          const BarrierCandidate& barrier, FilterKind kind,
                          bool uses_gamma,
                          const std::function<Vec(const Vec&)>& u0,
                          const Vec& x0, const DisturbanceSignal& w_signal,
                          double sigma, double horizon, double lambda,
                          double dt, const std::optional<Vec>& delta_u,
                          double escape_radius) {
  check_lambda(lambda);
  if (!(horizon > 0.0)) {
    throw InvalidParameter("realized_cost: horizon must be positive");
  }
  if (!(dt > 0.0) || dt > horizon) {
    throw InvalidParameter("realized_cost: dt must lie in (0, horizon]");
  }
  const bool with_gamma = resolve_gamma(kind, uses_gamma);
  if (with_gamma && !barrier.gamma) {
    throw InvalidParameter("realized_cost: gamma requested but barrier has "
                           "none");
  }
  if (plant.dist_dim == 0 &&
      w_signal.kind != DisturbanceSignal::Kind::Zero) {
    throw InvalidParameter("realized_cost: plant has no disturbance channel");
  }

  FilterSpec spec;
  spec.kind = kind;
  spec.barrier = barrier;
  spec.uses_gamma =
      with_gamma && (kind == FilterKind::CbfQp || kind == FilterKind::InverseOptimal);
  validate(spec);

  const int n = plant.state_dim;
  bool penalty_infinite = false;

  // Augmented state: [x, integral l, integral penalty, integral reward].
  auto field = [&](double t, const Vec& y) -> Vec {
    const Vec x = y.head(n);
    const FilterOutput fo = eval_filter(plant, spec, x, u0(x));
    Vec u_applied = fo.u_total;
    if (delta_u) u_applied += *delta_u;

    Vec dy(n + 3);
    Vec dx = plant.f(x);
    if (plant.dist_dim > 0) {
      Vec w = Vec::Zero(plant.dist_dim);
      w[0] = w_signal.value_at(t);
      dx += plant.g1(x) * w;
    }
    dx += sigma * (plant.g2(x) * u_applied);
    dy.head(n) = dx;

    dy[n] = penalty_l(plant, barrier, x, u0(x), kind, uses_gamma, lambda);

    const Vec v = u_applied - u0(x);
    const double v2 = v.squaredNorm();
    if (v2 == 0.0) {
      dy[n + 1] = 0.0;
    } else if (fo.r_inv > 0.0) {
      dy[n + 1] = v2 / fo.r_inv;
    } else {
      penalty_infinite = true;  // R = +inf against a nonzero deviation
      dy[n + 1] = 0.0;
    }

    if (with_gamma && plant.dist_dim > 0) {
      const double w_abs = std::abs(w_signal.value_at(t));
      dy[n + 2] = 2.0 * lambda * barrier.gamma->eval(w_abs / lambda);
    } else {
      dy[n + 2] = 0.0;
    }
    return dy;
  };

  Vec y(n + 3);
  y.head(n) = x0;
  y.tail(3).setZero();

  CostAccount account;
  const long n_steps = std::max(1L, std::lround(horizon / dt));
  for (long k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    y = rk4_step(field, t, y, dt);
    if (!y.allFinite()) {
      throw NumericError("realized_cost: non-finite state at t=" +
                             std::to_string(t + dt),
                         std::vector<double>(y.data(), y.data() + n));
    }
    if (y.head(n).norm() > escape_radius) {
      account.truncated = true;
      break;
    }
  }

  account.terminal = 4.0 * barrier.h(y.head(n));
  account.running_l = y[n];
  account.running_penalty = y[n + 1];
  account.running_dist_reward = y[n + 2];
  account.penalty_infinite = penalty_infinite;
  if (penalty_infinite) {
    account.running_penalty = std::numeric_limits<double>::infinity();
    account.total = -std::numeric_limits<double>::infinity();
  } else {
    account.total = account.terminal + account.running_l -
                    account.running_penalty + account.running_dist_reward;
  }
  return account;
}

}  // namespace safegain
