#include "safegain/sim.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "safegain/errors.hpp"

namespace safegain {

namespace {

constexpr double kEventTimeTol = 1e-9;
constexpr double kEventHTol = 1e-8;
constexpr int kEventMaxIter = 200;

std::string format_point(const Vec& x) {
  std::ostringstream os;
  os << "[";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) os << ", ";
    os << x[i];
  }
  os << "]";
  return os.str();
}

std::vector<double> to_std(const Vec& x) {
  return std::vector<double>(x.data(), x.data() + x.size());
}

// splitmix64-style hash of (seed, index) mapped to [0, 1).
double hashed_uniform01(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

void run_cells(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&]() {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int k = 0; k < workers; ++k) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

DisturbanceSignal DisturbanceSignal::zero() { return DisturbanceSignal{}; }

DisturbanceSignal DisturbanceSignal::constant(double value) {
  DisturbanceSignal s;
  s.kind = Kind::Constant;
  s.amplitude = value;
  return s;
}

DisturbanceSignal DisturbanceSignal::sinusoid(double amplitude,
                                              double frequency, double phase) {
  if (amplitude < 0.0) {
    throw InvalidParameter("DisturbanceSignal: sinusoid amplitude must be "
                           "nonnegative");
  }
  DisturbanceSignal s;
  s.kind = Kind::Sinusoid;
  s.amplitude = amplitude;
  s.frequency = frequency;
  s.phase = phase;
  return s;
}

DisturbanceSignal DisturbanceSignal::seeded_bounded(double amplitude,
                                                    std::uint64_t seed,
                                                    double hold_time) {
  if (amplitude < 0.0) {
    throw InvalidParameter("DisturbanceSignal: bounded amplitude must be "
                           "nonnegative");
  }
  if (!(hold_time > 0.0)) {
    throw InvalidParameter("DisturbanceSignal: hold_time must be positive");
  }
  DisturbanceSignal s;
  s.kind = Kind::SeededBounded;
  s.amplitude = amplitude;
  s.seed = seed;
  s.hold_time = hold_time;
  return s;
}

double DisturbanceSignal::sup_norm() const {
  return kind == Kind::Constant ? std::abs(amplitude) : amplitude;
}

double DisturbanceSignal::value_at(double t) const {
  switch (kind) {
    case Kind::Zero:
      return 0.0;
    case Kind::Constant:
      return amplitude;
    case Kind::Sinusoid:
      return amplitude *
             std::sin(2.0 * std::numbers::pi * frequency * t + phase);
    case Kind::SeededBounded: {
      const auto idx =
          static_cast<std::uint64_t>(std::max(0.0, std::floor(t / hold_time)));
      return amplitude * (2.0 * hashed_uniform01(seed, idx) - 1.0);
    }
  }
  return 0.0;
}

const char* DisturbanceSignal::kind_name() const {
  switch (kind) {
    case Kind::Zero: return "zero";
    case Kind::Constant: return "constant";
    case Kind::Sinusoid: return "sinusoid";
    case Kind::SeededBounded: return "seeded_bounded";
  }
  return "unknown";
}

void validate(const SimConfig& cfg) {
  if (!(cfg.dt > 0.0)) {
    throw InvalidParameter("SimConfig: dt must be positive, got " +
                           std::to_string(cfg.dt));
  }
  if (!(cfg.dt <= cfg.horizon)) {
    throw InvalidParameter("SimConfig: dt = " + std::to_string(cfg.dt) +
                           " exceeds horizon = " + std::to_string(cfg.horizon));
  }
  if (!(cfg.sigma > 0.0)) {
    throw InvalidParameter("SimConfig: sigma must be positive");
  }
  if (!(cfg.escape_radius > cfg.x0.norm())) {
    throw InvalidParameter("SimConfig: escape_radius must exceed |x0|");
  }
}

Trajectory integrate(const ControlAffinePlant& plant, const FilterSpec& spec,
                     const std::function<Vec(const Vec&)>& u0,
                     const SimConfig& cfg) {
  validate(cfg);
  validate(spec);
  if (cfg.x0.size() != plant.state_dim) {
    throw ShapeError("integrate: x0 has dimension " +
                     std::to_string(cfg.x0.size()) + ", plant expects " +
                     std::to_string(plant.state_dim));
  }
  if (plant.dist_dim == 0 &&
      cfg.w_signal.kind != DisturbanceSignal::Kind::Zero) {
    throw InvalidParameter(
        "integrate: plant has no disturbance channel but w_signal is not "
        "Zero");
  }

  Trajectory traj;
  traj.dt = cfg.dt;
  traj.sigma = cfg.sigma;
  traj.dist_dim = plant.dist_dim;

  double current_time = 0.0;  // for error context only
  auto field = [&](double t, const Vec& x) -> Vec {
    Vec dx = plant.f(x);
    if (plant.dist_dim > 0) {
      Vec w = Vec::Zero(plant.dist_dim);
      w[0] = cfg.w_signal.value_at(t);
      dx += plant.g1(x) * w;
    }
    dx += cfg.sigma * (plant.g2(x) * eval_filter(plant, spec, x, u0(x)).u_total);
    return dx;
  };

  auto push_sample = [&](double t, const Vec& x) {
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.controls.push_back(eval_filter(plant, spec, x, u0(x)).u_total);
    traj.w_values.push_back(
        plant.dist_dim > 0 ? cfg.w_signal.value_at(t) : 0.0);
    traj.h_values.push_back(spec.barrier.h(x));
  };

  const long n_steps = std::max(1L, std::lround(cfg.horizon / cfg.dt));
  Vec x = cfg.x0;
  double h_curr = spec.barrier.h(x);

  try {
    push_sample(0.0, x);
    for (long k = 0; k < n_steps; ++k) {
      const double t0 = static_cast<double>(k) * cfg.dt;
      current_time = t0;
      const Vec x_next = rk4_step(field, t0, x, cfg.dt);
      if (!x_next.allFinite()) {
        throw NumericError("integrate: non-finite state at t=" +
                               std::to_string(t0 + cfg.dt),
                           to_std(x));
      }
      const double h_next = spec.barrier.h(x_next);

      if ((h_curr < 0.0) != (h_next < 0.0)) {
        // Bisect the step fraction to pin the boundary crossing.
        double lo = 0.0, hi = cfg.dt;
        double h_lo = h_curr, h_hi = h_next;
        Vec x_lo = x, x_hi = x_next;
        for (int it = 0; it < kEventMaxIter; ++it) {
          if (hi - lo <= kEventTimeTol &&
              std::min(std::abs(h_lo), std::abs(h_hi)) <= kEventHTol) {
            break;
          }
          const double mid = 0.5 * (lo + hi);
          const Vec x_mid = rk4_step(field, t0, x, mid);
          const double h_mid = spec.barrier.h(x_mid);
          if ((h_mid < 0.0) == (h_curr < 0.0)) {
            lo = mid;
            h_lo = h_mid;
            x_lo = x_mid;
          } else {
            hi = mid;
            h_hi = h_mid;
            x_hi = x_mid;
          }
        }
        // Prefer the endpoint with smaller |h| that stays strictly inside
        // the step so sample times remain strictly increasing.
        double theta;
        const Vec* x_ev;
        if ((std::abs(h_lo) <= std::abs(h_hi) && lo > 0.0) || hi >= cfg.dt) {
          theta = lo;
          x_ev = &x_lo;
        } else {
          theta = hi;
          x_ev = &x_hi;
        }
        CrossingEvent ev;
        ev.time = t0 + theta;
        ev.direction = (h_next >= 0.0) ? +1 : -1;
        traj.events.push_back(ev);
        if (theta > 0.0 && theta < cfg.dt) push_sample(ev.time, *x_ev);
      }

      x = x_next;
      h_curr = h_next;
      push_sample(static_cast<double>(k + 1) * cfg.dt, x);
      if (x.norm() > cfg.escape_radius) {
        traj.escaped = true;
        traj.escape_time = static_cast<double>(k + 1) * cfg.dt;
        break;
      }
    }
  } catch (const DegenerateAugmentation& e) {
    throw DegenerateAugmentation(std::string(e.what()) +
                                 " (integrate: t=" + std::to_string(current_time) +
                                 ", x=" + format_point(x) + ")");
  } catch (const InfeasibleFilter& e) {
    throw InfeasibleFilter(std::string(e.what()) +
                           " (integrate: t=" + std::to_string(current_time) +
                           ", x=" + format_point(x) + ")");
  }
  return traj;
}

ViolationMetrics violation_metrics(const Trajectory& traj,
                                   const BarrierCandidate& barrier) {
  if (traj.h_values.empty()) {
    throw InvalidParameter("violation_metrics: empty trajectory");
  }
  ViolationMetrics m;
  m.h_min = traj.h_values.front();
  for (double h : traj.h_values) m.h_min = std::min(m.h_min, h);
  if (barrier.dist_to_safe) {
    m.violation_is_proxy = false;
    for (const Vec& x : traj.states) {
      m.max_set_violation = std::max(m.max_set_violation, barrier.dist_to_safe(x));
    }
  } else {
    m.violation_is_proxy = true;
    for (double h : traj.h_values) {
      m.max_set_violation = std::max(m.max_set_violation, -std::min(0.0, h));
    }
  }
  m.safe_verdict = (m.h_min >= -kSafetyTol);
  m.settled = (traj.h_values.back() >= -kSettleTol);
  return m;
}

SweepReport gain_sweep(const ControlAffinePlant& plant, const FilterSpec& spec,
                       const std::function<Vec(const Vec&)>& u0,
                       const std::vector<double>& sigmas,
                       const SimConfig& base_cfg,
                       const std::vector<Vec>& x0_set,
                       const std::optional<Vec>& exterior_x0, int workers) {
  if (sigmas.empty()) {
    throw InvalidParameter("gain_sweep: empty sigma list");
  }
  for (size_t i = 1; i < sigmas.size(); ++i) {
    if (!(sigmas[i] > sigmas[i - 1])) {
      throw InvalidParameter("gain_sweep: sigmas must be strictly ascending");
    }
  }
  if (x0_set.empty()) {
    throw InvalidParameter("gain_sweep: empty x0 set");
  }

  const int n_interior = static_cast<int>(x0_set.size());
  const int per_sigma = n_interior + (exterior_x0 ? 1 : 0);
  const int n_sigmas = static_cast<int>(sigmas.size());
  const int n_cells = n_sigmas * per_sigma;

  SweepReport report;
  report.sigmas = sigmas;
  report.cells.resize(n_cells);

  auto run_cell = [&](int i) {
    const int si = i / per_sigma;
    const int j = i % per_sigma;
    SweepCell& cell = report.cells[i];
    cell.sigma = sigmas[si];
    cell.disturbance_id = 0;
    SimConfig cfg = base_cfg;
    cfg.sigma = sigmas[si];
    if (j < n_interior) {
      cfg.x0 = x0_set[j];
      cell.x0_id = j;
    } else {
      cfg.x0 = *exterior_x0;
      cell.x0_id = -1;
    }
    try {
      auto evaluate = [&](const SimConfig& c) {
        const Trajectory traj = integrate(plant, spec, u0, c);
        return violation_metrics(traj, spec.barrier);
      };
      ViolationMetrics m = evaluate(cfg);
      if (m.h_min <= -1e-9 && m.h_min >= -kSafetyTol) {
        // Marginal: decide at a finer step before trusting the verdict.
        SimConfig fine = cfg;
        fine.dt = cfg.dt / 10.0;
        m = evaluate(fine);
        cell.note = "marginal, re-run at dt/10";
      }
      cell.h_min = m.h_min;
      cell.max_violation = m.max_set_violation;
      cell.safe = m.safe_verdict;
      cell.settled = m.settled;
    } catch (const std::exception& e) {
      cell.inconclusive = true;
      cell.note = e.what();
    }
  };
  run_cells(n_cells, workers, run_cell);

  report.sigma_safe.assign(n_sigmas, 1);
  for (int si = 0; si < n_sigmas; ++si) {
    for (int j = 0; j < n_interior; ++j) {
      const SweepCell& cell = report.cells[si * per_sigma + j];
      if (!cell.safe || cell.inconclusive) {
        report.sigma_safe[si] = 0;
        break;
      }
    }
  }

  int anchor = -1;
  for (int si = 0; si < n_sigmas; ++si) {
    if (std::abs(sigmas[si] - 1.0) <= 1e-12) anchor = si;
  }
  if (anchor >= 0 && report.sigma_safe[anchor]) {
    int lo = anchor, hi = anchor;
    while (lo > 0 && report.sigma_safe[lo - 1]) --lo;
    while (hi + 1 < n_sigmas && report.sigma_safe[hi + 1]) ++hi;
    report.margin_found = true;
    report.margin_lo = sigmas[lo];
    report.margin_hi = sigmas[hi];
  }
  return report;
}

std::vector<EnvelopePoint> issf_envelope(
    const ControlAffinePlant& plant, const FilterSpec& spec,
    const std::function<Vec(const Vec&)>& u0,
    const std::vector<double>& amplitudes, const SimConfig& base_cfg,
    const std::vector<Vec>& x0_set, int workers, std::uint64_t seed_base) {
  const bool qualified =
      spec.kind == FilterKind::ImprovedIssf ||
      (spec.kind == FilterKind::CbfQp && spec.uses_gamma);
  if (!qualified) {
    throw InvalidParameter(
        "issf_envelope: filter must be ImprovedIssf or CbfQp with gamma");
  }
  if (amplitudes.empty()) {
    throw InvalidParameter("issf_envelope: empty amplitude list");
  }
  for (size_t i = 0; i < amplitudes.size(); ++i) {
    if (amplitudes[i] < 0.0 ||
        (i > 0 && amplitudes[i] < amplitudes[i - 1])) {
      throw InvalidParameter(
          "issf_envelope: amplitudes must be ascending and nonnegative");
    }
  }
  if (x0_set.empty()) {
    throw InvalidParameter("issf_envelope: empty x0 set");
  }

  const double freqs[3] = {0.5, 2.0, 7.3};
  auto family = [&](double a) {
    std::vector<DisturbanceSignal> signals;
    signals.push_back(DisturbanceSignal::constant(a));
    signals.push_back(DisturbanceSignal::constant(-a));
    for (double f : freqs) signals.push_back(DisturbanceSignal::sinusoid(a, f));
    for (std::uint64_t k = 0; k < 5; ++k) {
      signals.push_back(DisturbanceSignal::seeded_bounded(a, seed_base + k));
    }
    return signals;
  };

  const int n_signals = 10;
  const int n_x0 = static_cast<int>(x0_set.size());
  const int per_amp = n_signals * n_x0;
  const int n_amps = static_cast<int>(amplitudes.size());
  const int n_cells = n_amps * per_amp;

  struct CellResult {
    double violation = 0.0;
    bool failed = false;
  };
  std::vector<CellResult> results(n_cells);

  auto run_cell = [&](int i) {
    const int ai = i / per_amp;
    const int rem = i % per_amp;
    const int wi = rem / n_x0;
    const int xi = rem % n_x0;
    SimConfig cfg = base_cfg;
    cfg.x0 = x0_set[xi];
    cfg.w_signal = family(amplitudes[ai])[wi];
    try {
      const Trajectory traj = integrate(plant, spec, u0, cfg);
      results[i].violation =
          violation_metrics(traj, spec.barrier).max_set_violation;
    } catch (const std::exception&) {
      results[i].failed = true;
    }
  };
  run_cells(n_cells, workers, run_cell);

  std::vector<EnvelopePoint> envelope(n_amps);
  for (int ai = 0; ai < n_amps; ++ai) {
    EnvelopePoint& pt = envelope[ai];
    pt.amplitude = amplitudes[ai];
    pt.n_cells = per_amp;
    for (int r = 0; r < per_amp; ++r) {
      const CellResult& res = results[ai * per_amp + r];
      if (res.failed) {
        ++pt.n_errors;
      } else {
        pt.worst_violation = std::max(pt.worst_violation, res.violation);
      }
    }
  }
  return envelope;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  if (traj.states.empty()) {
    throw InvalidParameter("write_trajectory_csv: empty trajectory");
  }
  const auto n = traj.states.front().size();
  const auto m2 = traj.controls.front().size();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x_" << (i + 1);
  for (Eigen::Index i = 0; i < m2; ++i) os << ",u_" << (i + 1);
  for (int i = 0; i < traj.dist_dim; ++i) os << ",w_" << (i + 1);
  os << ",h\n";
  for (size_t k = 0; k < traj.times.size(); ++k) {
    os << fmt17(traj.times[k]);
    for (Eigen::Index i = 0; i < n; ++i) os << "," << fmt17(traj.states[k][i]);
    for (Eigen::Index i = 0; i < m2; ++i)
      os << "," << fmt17(traj.controls[k][i]);
    for (int i = 0; i < traj.dist_dim; ++i)
      os << "," << fmt17(i == 0 ? traj.w_values[k] : 0.0);
    os << "," << fmt17(traj.h_values[k]) << "\n";
  }
}

void write_sweep_csv(std::ostream& os, const SweepReport& report) {
  os << "sigma,x0_id,disturbance_id,h_min,max_violation,verdict,settled\n";
  for (const SweepCell& cell : report.cells) {
    const int verdict = cell.inconclusive ? -1 : (cell.safe ? 1 : 0);
    os << fmt17(cell.sigma) << "," << cell.x0_id << "," << cell.disturbance_id
       << "," << fmt17(cell.h_min) << "," << fmt17(cell.max_violation) << ","
       << verdict << "," << (cell.settled ? 1 : 0) << "\n";
  }
}

}  // namespace safegain
