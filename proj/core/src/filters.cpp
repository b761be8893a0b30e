#include "safegain/filters.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "safegain/errors.hpp"

namespace safegain {

namespace {

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

// l_gamma(2 |Lg1 h|); zero when there is no disturbance channel.
double shaping_term(const BarrierCandidate& barrier,
                    const LieDerivatives& lie) {
  if (lie.Lg1.size() == 0) return 0.0;
  const LegendreFenchel lf = lf_transform(*barrier.gamma);
  return lf(2.0 * lie.Lg1.norm());
}

double checked_omega(const ControlAffinePlant& plant,
                     const BarrierCandidate& barrier, const Vec& x,
                     const Vec& u0, bool uses_gamma,
                     const LieDerivatives& lie) {
  if (u0.size() != plant.ctrl_dim) {
    throw ShapeError("filter: u0 has dimension " + std::to_string(u0.size()) +
                     ", plant expects " + std::to_string(plant.ctrl_dim));
  }
  double omega = lie.Lf + lie.Lg2.dot(u0) + barrier.alpha(barrier.h(x));
  if (uses_gamma) {
    if (!barrier.gamma) {
      throw InvalidParameter("filter: uses_gamma set but barrier has no gamma");
    }
    omega -= shaping_term(barrier, lie);
  }
  if (!std::isfinite(omega)) {
    throw NumericError("filter: non-finite constraint value at x=" +
                           format_point(x),
                       to_std(x));
  }
  return omega;
}

FilterOutput make_output(const Vec& u0, const Vec& override_u, double omega,
                         double r_inv, double q, bool degenerate) {
  FilterOutput out;
  out.override_u = override_u;
  out.u_total = u0 + out.override_u;
  out.omega = omega;
  out.r_inv = r_inv;
  out.r_inv_quadratic = r_inv * q;
  out.degenerate = degenerate;
  return out;
}

}  // namespace

const char* to_string(FilterKind k) {
  switch (k) {
    case FilterKind::CbfQp: return "cbf_qp";
    case FilterKind::InverseOptimal: return "inverse_optimal";
    case FilterKind::Sontag: return "sontag";
    case FilterKind::ImprovedZeroDist: return "improved_zero_dist";
    case FilterKind::ImprovedIssf: return "improved_issf";
  }
  return "unknown";
}

void validate(const FilterSpec& spec) {
  if (!spec.barrier.h) {
    throw InvalidParameter("FilterSpec: barrier.h is missing");
  }
  if (!spec.barrier.alpha.eval) {
    throw InvalidParameter("FilterSpec: barrier.alpha is missing");
  }
  if ((spec.uses_gamma || spec.kind == FilterKind::ImprovedIssf) &&
      !spec.barrier.gamma) {
    throw InvalidParameter("FilterSpec: gamma requested but barrier has none");
  }
  if (spec.kind == FilterKind::Sontag && !spec.barrier.rho) {
    throw InvalidParameter("FilterSpec: Sontag filter requires barrier.rho");
  }
}

double bare_constraint(const ControlAffinePlant& plant,
                       const BarrierCandidate& barrier, const Vec& x,
                       const Vec& u0, bool uses_gamma) {
  const LieDerivatives lie = lie_derivatives(plant, barrier, x);
  return checked_omega(plant, barrier, x, u0, uses_gamma, lie);
}

FilterOutput cbf_qp(const ControlAffinePlant& plant,
                    const BarrierCandidate& barrier, const Vec& x,
                    const Vec& u0, bool uses_gamma) {
  const LieDerivatives lie = lie_derivatives(plant, barrier, x);
  const double omega = checked_omega(plant, barrier, x, u0, uses_gamma, lie);
  const double q = lie.Lg2.squaredNorm();
  if (q == 0.0) {
    if (omega < 0.0) {
      throw InfeasibleFilter(
          "cbf_qp: no control authority (Lg2 h = 0) and constraint violated "
          "(omega = " +
          std::to_string(omega) + ") at x=" + format_point(x));
    }
    return make_output(u0, Vec::Zero(u0.size()), omega, 0.0, q, true);
  }
  const double r_inv = (omega < 0.0) ? -omega / q : 0.0;
  const Vec override_u = r_inv * lie.Lg2.transpose();
  return make_output(u0, override_u, omega, r_inv, q, false);
}

FilterOutput inverse_optimal(const ControlAffinePlant& plant,
                             const BarrierCandidate& barrier, const Vec& x,
                             const Vec& u0, bool uses_gamma) {
  const LieDerivatives lie = lie_derivatives(plant, barrier, x);
  const double omega = checked_omega(plant, barrier, x, u0, uses_gamma, lie);
  const double q = lie.Lg2.squaredNorm();
  if (q == 0.0) {
    if (omega < 0.0) {
      throw InfeasibleFilter(
          "inverse_optimal: no control authority (Lg2 h = 0) and constraint "
          "violated (omega = " +
          std::to_string(omega) + ") at x=" + format_point(x));
    }
    return make_output(u0, Vec::Zero(u0.size()), omega, 0.0, q, true);
  }
  const double r_inv = (omega < 0.0) ? -omega / q : 0.0;
  const Vec override_u = 2.0 * r_inv * lie.Lg2.transpose();
  return make_output(u0, override_u, omega, r_inv, q, false);
}

FilterOutput inverse_optimal_with_r(const ControlAffinePlant& plant,
                                    const BarrierCandidate& barrier,
                                    const Vec& x, const Vec& u0, double r_inv,
                                    bool uses_gamma) {
  if (r_inv < 0.0 || !std::isfinite(r_inv)) {
    throw InvalidR("inverse_optimal_with_r: scalar R^{-1} must be finite and "
                   "nonnegative, got " +
                   std::to_string(r_inv));
  }
  const LieDerivatives lie = lie_derivatives(plant, barrier, x);
  const double omega = checked_omega(plant, barrier, x, u0, uses_gamma, lie);
  const double q = lie.Lg2.squaredNorm();
  const Vec override_u = 2.0 * r_inv * lie.Lg2.transpose();
  return make_output(u0, override_u, omega, r_inv, q, q == 0.0);
}

FilterOutput inverse_optimal_with_r(const ControlAffinePlant& plant,
                                    const BarrierCandidate& barrier,
                                    const Vec& x, const Vec& u0,
                                    const Mat& r_inv, bool uses_gamma) {
  if (r_inv.rows() != plant.ctrl_dim || r_inv.cols() != plant.ctrl_dim) {
    throw InvalidR("inverse_optimal_with_r: R^{-1} is " +
                   std::to_string(r_inv.rows()) + "x" +
                   std::to_string(r_inv.cols()) + ", expected " +
                   std::to_string(plant.ctrl_dim) + "x" +
                   std::to_string(plant.ctrl_dim));
  }
  const double scale = std::max(1.0, r_inv.cwiseAbs().maxCoeff());
  if ((r_inv - r_inv.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidR("inverse_optimal_with_r: R^{-1} is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(r_inv);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw InvalidR("inverse_optimal_with_r: R^{-1} has negative eigenvalue " +
                   std::to_string(eig.eigenvalues().minCoeff()));
  }
  const LieDerivatives lie = lie_derivatives(plant, barrier, x);
  const double omega = checked_omega(plant, barrier, x, u0, uses_gamma, lie);
  const double q = lie.Lg2.squaredNorm();
  const Vec override_u = 2.0 * (r_inv * lie.Lg2.transpose());
  FilterOutput out;
  out.override_u = override_u;
  out.u_total = u0 + out.override_u;
  out.omega = omega;
  out.r_inv_quadratic = (lie.Lg2 * r_inv * lie.Lg2.transpose()).value();
  out.r_inv = (q > 0.0) ? out.r_inv_quadratic / q : 0.0;
  out.degenerate = (q == 0.0);
  return out;
}

FilterOutput sontag(const ControlAffinePlant& plant,
                    const BarrierCandidate& barrier, const Vec& x,
                    const Vec& u0) {
  if (!barrier.rho) {
    throw InvalidParameter("sontag: barrier has no rho");
  }
  const LieDerivatives lie = lie_derivatives(plant, barrier, x);
  const double h = barrier.h(x);
  const double V = std::max(0.0, -h);
  const auto& rho = *barrier.rho;
  const double rho_inv =
      rho.has_inverse() ? rho.inverse(V) : invert_increasing(rho.eval, V);
  double omega = lie.Lf + lie.Lg2.dot(u0) + barrier.alpha(h);
  if (lie.Lg1.size() > 0) omega -= lie.Lg1.norm() * rho_inv;
  if (!std::isfinite(omega)) {
    throw NumericError("sontag: non-finite constraint value at x=" +
                           format_point(x),
                       to_std(x));
  }
  const double q = lie.Lg2.squaredNorm();
  if (q == 0.0) {
    return make_output(u0, Vec::Zero(u0.size()), omega, 0.0, q, true);
  }
  // kappa = (-omega + sqrt(omega^2 + q^2)) / q, evaluated without
  // cancellation for omega > 0.
  const double root = std::sqrt(omega * omega + q * q);
  const double kappa = (omega > 0.0) ? q / (omega + root) : (root - omega) / q;
  const Vec override_u = kappa * lie.Lg2.transpose();
  return make_output(u0, override_u, omega, 0.5 * kappa, q, false);
}

double improved_r_inv(const ControlAffinePlant& plant,
                      const BarrierCandidate& barrier, const Vec& x,
                      const Vec& u0, double r_inv) {
  const LieDerivatives lie = lie_derivatives(plant, barrier, x);
  const double drift_part = std::max(lie.Lf, 0.0);
  const double nominal_part = std::max(lie.Lg2.dot(u0), 0.0);
  const double num = drift_part + nominal_part;
  const double q = lie.Lg2.squaredNorm();
  if (q == 0.0) {
    if (num == 0.0) return r_inv;
    throw DegenerateAugmentation(
        "improved_r_inv: Lg2 h = 0 with positive numerator " +
        std::to_string(num) + " at x=" + format_point(x));
  }
  return r_inv + num / q;
}

FilterOutput improved_filter(const ControlAffinePlant& plant,
                             const BarrierCandidate& barrier, const Vec& x,
                             const Vec& u0, bool with_gamma) {
  if (with_gamma && !barrier.gamma) {
    throw InvalidParameter("improved_filter: with_gamma set but barrier has "
                           "no gamma");
  }
  const FilterOutput base = cbf_qp(plant, barrier, x, u0, with_gamma);
  const double rt_inv = improved_r_inv(plant, barrier, x, u0, base.r_inv);
  const LieDerivatives lie = lie_derivatives(plant, barrier, x);
  const double q = lie.Lg2.squaredNorm();
  const Vec override_u = 2.0 * rt_inv * lie.Lg2.transpose();
  return make_output(u0, override_u, base.omega, rt_inv, q, base.degenerate);
}

FilterOutput eval_filter(const ControlAffinePlant& plant,
                         const FilterSpec& spec, const Vec& x, const Vec& u0) {
  validate(spec);
  switch (spec.kind) {
    case FilterKind::CbfQp:
      return cbf_qp(plant, spec.barrier, x, u0, spec.uses_gamma);
    case FilterKind::InverseOptimal:
      return inverse_optimal(plant, spec.barrier, x, u0, spec.uses_gamma);
    case FilterKind::Sontag:
      return sontag(plant, spec.barrier, x, u0);
    case FilterKind::ImprovedZeroDist:
      return improved_filter(plant, spec.barrier, x, u0, false);
    case FilterKind::ImprovedIssf:
      return improved_filter(plant, spec.barrier, x, u0, true);
  }
  throw InvalidParameter("eval_filter: unknown filter kind");
}

}  // namespace safegain
