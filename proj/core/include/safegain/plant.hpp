#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "safegain/comparison.hpp"

namespace safegain {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

// Axis-aligned working region used for sampling and certification.
struct Box {
  Vec lo;
  Vec hi;
  int dim() const { return static_cast<int>(lo.size()); }
};

// xdot = f(x) + g1(x) w + g2(x) u. g1 may be left empty when dist_dim == 0.
struct ControlAffinePlant {
  int state_dim = 0;
  int dist_dim = 0;
  int ctrl_dim = 0;
  std::function<Vec(const Vec&)> f;
  std::function<Mat(const Vec&)> g1;  // state_dim x dist_dim
  std::function<Mat(const Vec&)> g2;  // state_dim x ctrl_dim
};

// Barrier h with its certificate ingredients. grad_h may be omitted, in
// which case gradients fall back to central differences (step
// 1e-6 * max(1, |x_i|) per coordinate) and gradient_is_fd() reports true.
struct BarrierCandidate {
  std::function<double(const Vec&)> h;
  std::function<Vec(const Vec&)> grad_h;
  ComparisonFunction alpha;                      // extended class K
  std::optional<ComparisonFunction> gamma;       // disturbance penalty shape
  std::optional<ComparisonFunction> rho;         // ISSf margin shape
  std::function<double(const Vec&)> dist_to_safe;  // exact |x|_S, optional

  bool gradient_is_fd() const { return !static_cast<bool>(grad_h); }
  Vec gradient(const Vec& x) const;
};

struct LieDerivatives {
  double Lf = 0.0;
  RowVec Lg1;  // 1 x dist_dim
  RowVec Lg2;  // 1 x ctrl_dim
};

enum class BoundaryVerdict { ActsSafely, ActsUnsafely, Mixed, Degenerate };

struct BoundaryClassification {
  BoundaryVerdict f_verdict = BoundaryVerdict::Mixed;
  BoundaryVerdict u0_verdict = BoundaryVerdict::Mixed;
  double f_min = 0.0;   // range of grad h . f over the samples
  double f_max = 0.0;
  double u0_min = 0.0;  // range of grad h . g2 u0
  double u0_max = 0.0;
  int n_samples = 0;
};

// Tolerance below which a boundary quantity is treated as zero when
// classifying drift/nominal behaviour.
constexpr double kClassificationTol = 1e-9;

const char* to_string(BoundaryVerdict v);

// Lf h, Lg1 h, Lg2 h at x. Shape mismatch -> ShapeError; non-finite values
// -> NumericError carrying x.
LieDerivatives lie_derivatives(const ControlAffinePlant& plant,
                               const BarrierCandidate& barrier, const Vec& x);

// Draws random chords of the box whose endpoints straddle {h = 0} and
// bisects each to |h| <= 1e-9. Gives up after 10*n_samples failed chord
// draws; if nothing was found throws BoundaryNotFound with the sampled h
// range, otherwise returns the partial set.
std::vector<Vec> sample_boundary(const BarrierCandidate& barrier,
                                 const Box& box, int n_samples,
                                 std::uint64_t seed);

// Classifies drift and nominal control on boundary samples (all must have
// |h| <= 1e-6). Verdicts use kClassificationTol; |Lg2 h| below tolerance
// makes the nominal verdict Degenerate.
BoundaryClassification classify_boundary(
    const ControlAffinePlant& plant, const BarrierCandidate& barrier,
    const std::function<Vec(const Vec&)>& u0, const std::vector<Vec>& samples);

// Crude Lipschitz proxy: max finite-difference quotient of the closed-loop
// field over random point pairs in the box. Reported, never enforced.
double lipschitz_estimate(const std::function<Vec(const Vec&)>& field,
                          const Box& box, int n_pairs, std::uint64_t seed);

}  // namespace safegain
