#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "safegain/filters.hpp"
#include "safegain/plant.hpp"

namespace safegain {

// Scalar disturbance signal; it drives the first disturbance channel, any
// further channels stay zero. SeededBounded is a zero-order hold over
// hold_time with uniform values in [-amplitude, amplitude], derived per
// segment from the seed so evaluation is random access and reproducible.
struct DisturbanceSignal {
  enum class Kind { Zero, Constant, Sinusoid, SeededBounded };
  Kind kind = Kind::Zero;
  double amplitude = 0.0;  // Constant: signed value; others: sup-norm
  double frequency = 1.0;  // Hz, Sinusoid only
  double phase = 0.0;      // rad, Sinusoid only
  std::uint64_t seed = 0;  // SeededBounded only
  double hold_time = 0.1;  // s, SeededBounded only

  static DisturbanceSignal zero();
  static DisturbanceSignal constant(double value);
  static DisturbanceSignal sinusoid(double amplitude, double frequency,
                                    double phase = 0.0);
  static DisturbanceSignal seeded_bounded(double amplitude, std::uint64_t seed,
                                          double hold_time = 0.1);

  double sup_norm() const;
  double value_at(double t) const;
  const char* kind_name() const;
};

struct SimConfig {
  double dt = 1e-3;
  double horizon = 20.0;
  double sigma = 1.0;  // uncertain gain multiplying g2 u
  Vec x0;
  DisturbanceSignal w_signal;
  double escape_radius = 1e3;
};

// InvalidParameter on dt <= 0, dt > horizon, or escape_radius <= |x0|.
void validate(const SimConfig& cfg);

struct CrossingEvent {
  double time = 0.0;
  int direction = 0;  // +1 entering S, -1 leaving S
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> controls;    // u_total applied at each sample state
  std::vector<double> w_values; // scalar signal value at each sample time
  std::vector<double> h_values;
  std::vector<CrossingEvent> events;
  bool escaped = false;
  double escape_time = 0.0;
  double dt = 0.0;
  double sigma = 1.0;
  int dist_dim = 0;
};

struct ViolationMetrics {
  double h_min = 0.0;
  double max_set_violation = 0.0;
  bool violation_is_proxy = false;  // true when max{0,-h} stands in for |x|_S
  bool safe_verdict = false;        // h_min >= -1e-6
  bool settled = false;  // h enters [-1e-3, inf) before horizon and stays
};

constexpr double kSafetyTol = 1e-6;
constexpr double kSettleTol = 1e-3;

// One classical RK4 step of ydot = f(t, y). Shared by integrate() and the
// cost accounting so both use the identical stepper.
template <class F>
Vec rk4_step(F&& f, double t, const Vec& y, double dt) {
  const Vec k1 = f(t, y);
  const Vec k2 = f(t + 0.5 * dt, Vec(y + 0.5 * dt * k1));
  const Vec k3 = f(t + 0.5 * dt, Vec(y + 0.5 * dt * k2));
  const Vec k4 = f(t + dt, Vec(y + dt * k3));
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Fixed-step classical RK4 of xdot = f + g1 w(t) + sigma g2 u_total(x).
// Sign changes of h between grid samples are refined by bisection on the
// step fraction (time tolerance 1e-9) and inserted as extra samples.
// |x| > escape_radius aborts with the partial trajectory.
Trajectory integrate(const ControlAffinePlant& plant, const FilterSpec& spec,
                     const std::function<Vec(const Vec&)>& u0,
                     const SimConfig& cfg);

ViolationMetrics violation_metrics(const Trajectory& traj,
                                   const BarrierCandidate& barrier);

struct SweepCell {
  double sigma = 1.0;
  int x0_id = 0;           // -1 for the exterior attractivity probe
  int disturbance_id = 0;
  double h_min = 0.0;
  double max_violation = 0.0;
  bool safe = false;
  bool settled = false;
  bool inconclusive = false;
  std::string note;
};

struct SweepReport {
  std::vector<double> sigmas;
  std::vector<SweepCell> cells;
  std::vector<char> sigma_safe;  // AND of interior verdicts per sigma
  bool margin_found = false;     // a safe contiguous run contains sigma = 1
  double margin_lo = 0.0;
  double margin_hi = 0.0;
};

// Simulates each (sigma, x0) cell plus, when exterior_x0 is given, one
// exterior probe per sigma (x0_id -1). Marginal cells with
// h_min in [-1e-6, -1e-9] are re-run once at dt/10 before the verdict is
// final. Integration errors mark the cell inconclusive (counted unsafe).
// Cells run on `workers` threads; results are keyed by cell index, so the
// report does not depend on completion order.
SweepReport gain_sweep(const ControlAffinePlant& plant, const FilterSpec& spec,
                       const std::function<Vec(const Vec&)>& u0,
                       const std::vector<double>& sigmas,
                       const SimConfig& base_cfg,
                       const std::vector<Vec>& x0_set,
                       const std::optional<Vec>& exterior_x0 = std::nullopt,
                       int workers = 1);

struct EnvelopePoint {
  double amplitude = 0.0;
  double worst_violation = 0.0;
  int n_cells = 0;
  int n_errors = 0;
};

// For each amplitude a, simulates the disturbance family
// {Constant(+a), Constant(-a), Sinusoid(a, f in {0.5, 2, 7.3} Hz),
// SeededBounded(a, 5 seeds)} from every x0 in x0_set and reports the worst
// set violation. Only ImprovedIssf and CbfQp-with-gamma filters qualify.
std::vector<EnvelopePoint> issf_envelope(const ControlAffinePlant& plant,
                                         const FilterSpec& spec,
                                         const std::function<Vec(const Vec&)>& u0,
                                         const std::vector<double>& amplitudes,
                                         const SimConfig& base_cfg,
                                         const std::vector<Vec>& x0_set,
                                         int workers = 1,
                                         std::uint64_t seed_base = 2024);

// 17-significant-digit float formatting shared by the CSV writers.
std::string fmt17(double v);

// Columns: t, x_1..x_n, u_1..u_m2, w_1..w_m1, h.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

// Columns: sigma, x0_id, disturbance_id, h_min, max_violation, verdict,
// settled. verdict is 1 (safe), 0 (unsafe) or -1 (inconclusive).
void write_sweep_csv(std::ostream& os, const SweepReport& report);

}  // namespace safegain
