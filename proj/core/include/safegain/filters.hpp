#pragma once

#include "safegain/plant.hpp"

namespace safegain {

enum class FilterKind {
  CbfQp,            // minimal-norm explicit QP solution
  InverseOptimal,   // doubled QP correction, meaningful value function
  Sontag,           // universal-formula construction
  ImprovedZeroDist, // gain-margin augmented, no disturbance shaping
  ImprovedIssf,     // gain-margin augmented with disturbance shaping
};

const char* to_string(FilterKind k);

// A safety filter: which construction, which barrier, and whether the
// disturbance shaping term l_gamma(2 |Lg1 h|) enters the pointwise
// constraint. uses_gamma requires barrier.gamma.
struct FilterSpec {
  FilterKind kind = FilterKind::InverseOptimal;
  BarrierCandidate barrier;
  bool uses_gamma = false;
};

// Throws InvalidParameter when the spec is internally inconsistent
// (gamma requested but absent, Sontag without rho, ...).
void validate(const FilterSpec& spec);

struct FilterOutput {
  Vec u_total;            // u0 + override_u, formed exactly as that sum
  Vec override_u;         // correction along (Lg2 h)^T
  double omega = 0.0;     // bare constraint value at (x, u0)
  double r_inv = 0.0;     // scalar R^{-1} (augmented one for improved kinds)
  double r_inv_quadratic = 0.0;  // Lg2h R^{-1} (Lg2h)^T
  bool degenerate = false;       // Lg2 h vanished, no correction possible
};

// omega(x, u0) = Lf h + Lg2 h u0 - [uses_gamma] l_gamma(2|Lg1 h|) + alpha(h).
double bare_constraint(const ControlAffinePlant& plant,
                       const BarrierCandidate& barrier, const Vec& x,
                       const Vec& u0, bool uses_gamma);

// Minimal-norm filter: u = u0 + R^{-1} (Lg2 h)^T with
// R^{-1} = max{0, -omega} / |Lg2 h|^2. Lg2 h = 0 with omega < 0 ->
// InfeasibleFilter.
FilterOutput cbf_qp(const ControlAffinePlant& plant,
                    const BarrierCandidate& barrier, const Vec& x,
                    const Vec& u0, bool uses_gamma = false);

// Inverse-optimal filter: doubles the QP correction, u = u0 + 2R^{-1}(Lg2h)^T
// with the same R^{-1} = max{0, -omega} / |Lg2 h|^2 as the QP form.
FilterOutput inverse_optimal(const ControlAffinePlant& plant,
                             const BarrierCandidate& barrier, const Vec& x,
                             const Vec& u0, bool uses_gamma = false);

// Same with a caller-supplied scalar penalty weight R = 1/r_inv
// (r_inv < 0 -> InvalidR; r_inv = 0 means R = +inf, no correction).
FilterOutput inverse_optimal_with_r(const ControlAffinePlant& plant,
                                    const BarrierCandidate& barrier,
                                    const Vec& x, const Vec& u0, double r_inv,
                                    bool uses_gamma = false);

// Same with a caller-supplied matrix R^{-1}; must be symmetric positive
// semidefinite or InvalidR is thrown.
FilterOutput inverse_optimal_with_r(const ControlAffinePlant& plant,
                                    const BarrierCandidate& barrier,
                                    const Vec& x, const Vec& u0,
                                    const Mat& r_inv, bool uses_gamma = false);

// Universal-formula filter built from V = max{0, -h}; requires barrier.rho.
FilterOutput sontag(const ControlAffinePlant& plant,
                    const BarrierCandidate& barrier, const Vec& x,
                    const Vec& u0);

// Augmented weight: r_inv + (max{Lf h,0} + max{Lg2 h u0,0}) / |Lg2 h|^2.
// Vanishing |Lg2 h|^2 with a nonzero numerator -> DegenerateAugmentation.
double improved_r_inv(const ControlAffinePlant& plant,
                      const BarrierCandidate& barrier, const Vec& x,
                      const Vec& u0, double r_inv);

// Gain-margin filter: u = u0 + 2 Rt^{-1} (Lg2 h)^T where Rt^{-1} is the
// augmented weight on top of the QP-derived one. with_gamma selects the
// disturbance-shaped bare constraint (requires barrier.gamma).
FilterOutput improved_filter(const ControlAffinePlant& plant,
                             const BarrierCandidate& barrier, const Vec& x,
                             const Vec& u0, bool with_gamma);

// Dispatch on spec.kind.
FilterOutput eval_filter(const ControlAffinePlant& plant,
                         const FilterSpec& spec, const Vec& x, const Vec& u0);

}  // namespace safegain
