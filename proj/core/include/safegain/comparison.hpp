#pragma once

#include <Eigen/Core>
#include <functional>

namespace safegain {

// Semantic class a comparison function claims to belong to. K/KInf functions
// are defined on [0,inf); the Extended variants on all of R.
enum class FunctionClass { ExtendedK, ExtendedKInf, K, KInf };

// How a built-in was extended to negative arguments. None for plain K/KInf.
enum class NegativeExtension { None, Odd, Linear };

// Strictly increasing scalar function with value 0 at 0, plus optional
// analytic derivative and inverses. Callers treat missing fields as
// "derive numerically".
struct ComparisonFunction {
  FunctionClass kind = FunctionClass::KInf;
  NegativeExtension extension = NegativeExtension::None;
  std::function<double(double)> eval;
  std::function<double(double)> deriv;          // d/ds eval, optional
  std::function<double(double)> inverse;        // eval^{-1}, optional
  std::function<double(double)> deriv_inverse;  // (eval')^{-1}, optional

  double operator()(double s) const { return eval(s); }
  bool has_deriv() const { return static_cast<bool>(deriv); }
  bool has_inverse() const { return static_cast<bool>(inverse); }
  bool has_deriv_inverse() const { return static_cast<bool>(deriv_inverse); }
};

// Legendre-Fenchel transform of a KInf function, bundled with the function
// it was built from.
struct LegendreFenchel {
  ComparisonFunction base;
  std::function<double(double)> transform;  // defined for r >= 0

  double operator()(double r) const { return transform(r); }
  // View of the transform as a comparison function; the derivative of the
  // transform is the inverse of base's derivative.
  ComparisonFunction as_comparison() const;
};

// alpha(s) = slope*s on all of R. slope <= 0 -> InvalidParameter.
ComparisonFunction make_linear_ek(double slope);

// gamma(s) = c*s^2 on s >= 0. c <= 0 -> InvalidParameter.
ComparisonFunction make_quadratic(double c);

// Inverts a strictly increasing function fn with fn(0) = 0 at target r >= 0
// by bracket doubling from [0,1] followed by bisection to absolute argument
// tolerance 1e-12. Used for (gamma')^{-1} and rho^{-1} when no analytic
// inverse is available.
double invert_increasing(const std::function<double(double)>& fn, double r);

// Builds l_gamma(r) = r*s - gamma(s) with s = (gamma')^{-1}(r). Uses
// deriv_inverse when available (argument first, then gamma.deriv_inverse),
// otherwise bisects gamma' (central differences if gamma.deriv is missing).
// gamma' is spot-checked for strict monotone growth; failure ->
// IllPosedTransform. Negative r -> std::domain_error.
LegendreFenchel lf_transform(const ComparisonFunction& gamma,
                             std::function<double(double)> deriv_inverse = {});

// l_{a*gamma}(r) computed from l_gamma alone as a*l_gamma(r/a).
// a <= 0 -> InvalidParameter.
double lf_scaled(const ComparisonFunction& gamma, double a, double r);

// gamma(|x|) + l_gamma(|y|) - x.y, the slack in Young's inequality.
// Dimension mismatch -> ShapeError.
double young_gap(const ComparisonFunction& gamma, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& y);

}  // namespace safegain
