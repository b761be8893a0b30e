#include "safegain/comparison.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "safegain/errors.hpp"

namespace safegain {

namespace {

constexpr double kInvertTol = 1e-12;

double central_diff(const std::function<double(double)>& f, double s) {
  const double step = 1e-6 * std::max(1.0, std::abs(s));
  return (f(s + step) - f(s - step)) / (2.0 * step);
}

}  // namespace

ComparisonFunction make_linear_ek(double slope) {
  if (!(slope > 0.0)) {
    throw InvalidParameter("make_linear_ek: slope must be positive, got " +
                           std::to_string(slope));
  }
  ComparisonFunction out;
  out.kind = FunctionClass::ExtendedKInf;
  out.extension = NegativeExtension::Linear;
  out.eval = [slope](double s) { return slope * s; };
  out.deriv = [slope](double) { return slope; };
  out.inverse = [slope](double r) { return r / slope; };
  return out;
}

ComparisonFunction make_quadratic(double c) {
  if (!(c > 0.0)) {
    throw InvalidParameter("make_quadratic: coefficient must be positive, got " +
                           std::to_string(c));
  }
  ComparisonFunction out;
  out.kind = FunctionClass::KInf;
  out.extension = NegativeExtension::None;
  out.eval = [c](double s) { return c * s * s; };
  out.deriv = [c](double s) { return 2.0 * c * s; };
  out.inverse = [c](double r) { return std::sqrt(r / c); };
  out.deriv_inverse = [c](double r) { return r / (2.0 * c); };
  return out;
}

double invert_increasing(const std::function<double(double)>& fn, double r) {
  if (r < 0.0) {
    throw std::domain_error("invert_increasing: negative target " +
                            std::to_string(r));
  }
  if (r == 0.0) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (fn(hi) < r) {
    lo = hi;
    hi *= 2.0;
    if (!(hi < 1e300)) {
      throw IllPosedTransform(
          "invert_increasing: function never reaches target " +
          std::to_string(r));
    }
  }
  while (hi - lo > kInvertTol) {
    const double mid = 0.5 * (lo + hi);
    if (fn(mid) < r) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

LegendreFenchel lf_transform(const ComparisonFunction& gamma,
                             std::function<double(double)> deriv_inverse) {
  std::function<double(double)> dgamma = gamma.deriv;
  if (!dgamma) {
    auto eval = gamma.eval;
    dgamma = [eval](double s) { return central_diff(eval, s); };
  }

  // Spot check: gamma' must grow strictly along a coarse grid, i.e. gamma'
  // is plausibly a KInf function itself.
  const double grid[] = {0.25, 0.5, 1.0, 2.0, 4.0};
  double prev = dgamma(grid[0]);
  if (!(prev > 0.0)) {
    throw IllPosedTransform("lf_transform: derivative not positive at s=0.25");
  }
  for (int i = 1; i < 5; ++i) {
    const double cur = dgamma(grid[i]);
    if (!(cur > prev)) {
      throw IllPosedTransform(
          "lf_transform: derivative not strictly increasing between s=" +
          std::to_string(grid[i - 1]) + " and s=" + std::to_string(grid[i]));
    }
    prev = cur;
  }

  std::function<double(double)> dinv = std::move(deriv_inverse);
  if (!dinv && gamma.deriv_inverse) dinv = gamma.deriv_inverse;
  if (!dinv) {
    dinv = [dgamma](double r) { return invert_increasing(dgamma, r); };
  }

  LegendreFenchel out;
  out.base = gamma;
  auto geval = gamma.eval;
  out.transform = [geval, dinv](double r) {
    if (r < 0.0) {
      throw std::domain_error("lf_transform: negative argument r=" +
                              std::to_string(r));
    }
    if (r == 0.0) return 0.0;
    const double s = dinv(r);
    return r * s - geval(s);
  };
  out.base.deriv_inverse = dinv;  // keep the resolved inverter for reuse
  return out;
}

ComparisonFunction LegendreFenchel::as_comparison() const {
  ComparisonFunction out;
  out.kind = FunctionClass::KInf;
  out.extension = NegativeExtension::None;
  out.eval = transform;
  if (base.deriv_inverse) out.deriv = base.deriv_inverse;
  if (base.deriv) out.deriv_inverse = base.deriv;
  return out;
}

double lf_scaled(const ComparisonFunction& gamma, double a, double r) {
  if (!(a > 0.0)) {
    throw InvalidParameter("lf_scaled: scale must be positive, got " +
                           std::to_string(a));
  }
  const LegendreFenchel lf = lf_transform(gamma);
  return a * lf(r / a);
}

double young_gap(const ComparisonFunction& gamma, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& y) {
  if (x.size() != y.size()) {
    throw ShapeError("young_gap: dimension mismatch, " +
                     std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()));
  }
  const LegendreFenchel lf = lf_transform(gamma);
  return gamma.eval(x.norm()) + lf(y.norm()) - x.dot(y);
}

}  // namespace safegain
