#pragma once

#include <optional>
#include <string>
#include <vector>

#include "safegain/filters.hpp"
#include "safegain/plant.hpp"
#include "safegain/sim.hpp"

namespace safegain {

struct CertReport {
  std::string check_name;
  bool equality_mode = false;  // false: one-sided margin check
  int n_points = 0;
  double worst_residual = 0.0;  // signed margin (inequality) or residual
  Vec worst_point;
  std::optional<Vec> worst_w;
  double tolerance = 0.0;
  bool passed = false;
  std::vector<std::string> notes;
};

struct CostAccount {
  double terminal = 0.0;             // 4 h(x(T))
  double running_l = 0.0;            // integral of l along the loop
  double running_penalty = 0.0;      // integral of (u-u0)^T R (u-u0)
  double running_dist_reward = 0.0;  // integral of 2 lambda gamma(|w|/lambda)
  double total = 0.0;
  bool truncated = false;         // trajectory escaped before the horizon
  bool penalty_infinite = false;  // a deviation met R = +inf
};

enum class IssfCondition { Dissipation13, Implication14, Implication15, CrossCheck };

constexpr std::uint64_t kDefaultSeed = 12345;

// n uniform points in the box from a seeded generator.
std::vector<Vec> sample_box_random(const Box& box, int n, std::uint64_t seed);

// n Halton low-discrepancy points (prime bases per coordinate) in the box.
std::vector<Vec> sample_box_halton(const Box& box, int n);

// Random and Halton batches concatenated; the sampling scheme used by the
// quantified checks (both streams always run).
std::vector<Vec> certification_samples(const Box& box, int n,
                                       std::uint64_t seed);

// State penalty l of the filter's inverse-optimal cost, per filter kind.
// Standard kinds use the QP-derived weight, improved kinds the augmented
// one; uses_gamma selects the disturbance-shaped variants (implied for
// ImprovedIssf, forbidden for ImprovedZeroDist). lambda in (0, 2].
// Sontag has no penalty in this family -> InvalidParameter.
double penalty_l(const ControlAffinePlant& plant,
                 const BarrierCandidate& barrier, const Vec& x, const Vec& u0,
                 FilterKind kind, bool uses_gamma, double lambda = 2.0);

// Left-hand side of the stationarity identity
//   L_{f+g2 u0} h - [gamma] l_gamma(2|Lg1 h|) + Lg2h R^{-1} (Lg2h)^T + l/4,
// assembled from the filter's weight and penalty_l. Zero by construction at
// lambda = 2. Infeasible or degenerate points yield nullopt (skipped).
std::optional<double> hji_residual(const ControlAffinePlant& plant,
                                   const BarrierCandidate& barrier,
                                   const Vec& x, const Vec& u0,
                                   FilterKind kind, bool uses_gamma = false,
                                   double lambda = 2.0);

// Samples n interior and n exterior points (rejection from the box, margin
// 1e-6 on |h|) and checks l > 0 inside, l < 0 outside, and l <= 4 alpha(h)
// everywhere. Box missing a region -> InvalidRegion.
CertReport penalty_sign_check(const ControlAffinePlant& plant,
                              const BarrierCandidate& barrier,
                              const std::function<Vec(const Vec&)>& u0,
                              FilterKind kind, bool uses_gamma, const Box& box,
                              int n, std::uint64_t seed = kDefaultSeed);

// grad h . (f + g2 u(x)) >= -alpha(h) - 1e-9 at 2n sampled points
// (n random + n Halton).
CertReport zbf_check(const ControlAffinePlant& plant,
                     const BarrierCandidate& barrier,
                     const std::function<Vec(const Vec&)>& closed_loop_u,
                     const Box& box, int n, std::uint64_t seed = kDefaultSeed);

// Checks the selected disturbance-aware barrier condition over sampled
// states x the disturbance grid. Implications treat their antecedent with a
// 1e-12 guard band; vacuous pairs are skipped. CrossCheck runs all three and
// verifies pass(13) implies pass(14) and pass(15).
CertReport issf_bf_check(const ControlAffinePlant& plant,
                         const BarrierCandidate& barrier,
                         const std::function<Vec(const Vec&)>& closed_loop_u,
                         const Box& box, const std::vector<Vec>& w_grid,
                         IssfCondition condition, int n,
                         std::uint64_t seed = kDefaultSeed);

// Integrates the running cost terms along the closed loop (same RK4 stepper
// and step as the sim module) and adds the terminal 4h. delta_u, when given,
// is a constant offset added to the filter output (penalty accounts for it;
// R = +inf deviations set penalty_infinite and total = -inf). Escape before
// the horizon truncates the account.
CostAccount realized_cost(const ControlAffinePlant& plant,
                          const BarrierCandidate& barrier, FilterKind kind,
                          bool uses_gamma,
                          const std::function<Vec(const Vec&)>& u0,
                          const Vec& x0, const DisturbanceSignal& w_signal,
                          double sigma, double horizon, double lambda = 2.0,
                          double dt = 1e-3,
                          const std::optional<Vec>& delta_u = std::nullopt,
                          double escape_radius = 1e3);

}  // namespace safegain
