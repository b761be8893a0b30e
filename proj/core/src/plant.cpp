#include "safegain/plant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "safegain/errors.hpp"

namespace safegain {

namespace {

constexpr double kBoundaryTol = 1e-9;

std::vector<double> to_std(const Vec& x) {
  return std::vector<double>(x.data(), x.data() + x.size());
}

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

Vec uniform_in_box(const Box& box, std::mt19937_64& rng) {
  Vec x(box.dim());
  for (int i = 0; i < box.dim(); ++i) {
    std::uniform_real_distribution<double> dist(box.lo[i], box.hi[i]);
    x[i] = dist(rng);
  }
  return x;
}

BoundaryVerdict verdict_from_range(double lo, double hi) {
  if (lo > kClassificationTol) return BoundaryVerdict::ActsSafely;
  if (hi < -kClassificationTol) return BoundaryVerdict::ActsUnsafely;
  return BoundaryVerdict::Mixed;
}

}  // namespace

const char* to_string(BoundaryVerdict v) {
  switch (v) {
    case BoundaryVerdict::ActsSafely: return "acts_safely";
    case BoundaryVerdict::ActsUnsafely: return "acts_unsafely";
    case BoundaryVerdict::Mixed: return "mixed";
    case BoundaryVerdict::Degenerate: return "degenerate";
  }
  return "unknown";
}

Vec BarrierCandidate::gradient(const Vec& x) const {
  if (grad_h) return grad_h(x);
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = 1e-6 * std::max(1.0, std::abs(x[i]));
    const double xi = x[i];
    xp[i] = xi + step;
    const double hp = h(xp);
    xp[i] = xi - step;
    const double hm = h(xp);
    xp[i] = xi;
    g[i] = (hp - hm) / (2.0 * step);
  }
  return g;
}

LieDerivatives lie_derivatives(const ControlAffinePlant& plant,
                               const BarrierCandidate& barrier, const Vec& x) {
  if (x.size() != plant.state_dim) {
    throw ShapeError("lie_derivatives: state has dimension " +
                     std::to_string(x.size()) + ", plant expects " +
                     std::to_string(plant.state_dim));
  }
  const Vec grad = barrier.gradient(x);
  const Vec fx = plant.f(x);
  if (fx.size() != plant.state_dim) {
    throw ShapeError("lie_derivatives: f(x) has dimension " +
                     std::to_string(fx.size()));
  }
  LieDerivatives out;
  out.Lf = grad.dot(fx);
  if (plant.dist_dim > 0) {
    if (!plant.g1) {
      throw ShapeError("lie_derivatives: dist_dim > 0 but g1 is missing");
    }
    const Mat G1 = plant.g1(x);
    if (G1.rows() != plant.state_dim || G1.cols() != plant.dist_dim) {
      throw ShapeError("lie_derivatives: g1(x) is " + std::to_string(G1.rows()) +
                       "x" + std::to_string(G1.cols()));
    }
    out.Lg1 = grad.transpose() * G1;
  } else {
    out.Lg1 = RowVec(0);
  }
  const Mat G2 = plant.g2(x);
  if (G2.rows() != plant.state_dim || G2.cols() != plant.ctrl_dim) {
    throw ShapeError("lie_derivatives: g2(x) is " + std::to_string(G2.rows()) +
                     "x" + std::to_string(G2.cols()));
  }
  out.Lg2 = grad.transpose() * G2;

  const bool finite = std::isfinite(out.Lf) && out.Lg1.allFinite() &&
                      out.Lg2.allFinite();
  if (!finite) {
    throw NumericError("lie_derivatives: non-finite value at x=" +
                           format_point(x),
                       to_std(x));
  }
  return out;
}

std::vector<Vec> sample_boundary(const BarrierCandidate& barrier,
                                 const Box& box, int n_samples,
                                 std::uint64_t seed) {
  if (n_samples <= 0) {
    throw InvalidParameter("sample_boundary: n_samples must be positive");
  }
  std::mt19937_64 rng(seed);
  std::vector<Vec> out;
  out.reserve(n_samples);
  double h_seen_min = std::numeric_limits<double>::infinity();
  double h_seen_max = -std::numeric_limits<double>::infinity();
  const long budget = 10L * n_samples;
  long attempts = 0;
  while (static_cast<int>(out.size()) < n_samples && attempts < budget) {
    ++attempts;
    Vec a = uniform_in_box(box, rng);
    Vec b = uniform_in_box(box, rng);
    double ha = barrier.h(a);
    double hb = barrier.h(b);
    h_seen_min = std::min({h_seen_min, ha, hb});
    h_seen_max = std::max({h_seen_max, ha, hb});
    if ((ha < 0.0) == (hb < 0.0)) continue;
    // Bisect the chord until the midpoint pins the zero level set.
    Vec mid = a;
    for (int it = 0; it < 200; ++it) {
      mid = 0.5 * (a + b);
      const double hm = barrier.h(mid);
      if (std::abs(hm) <= kBoundaryTol) break;
      if ((hm < 0.0) == (ha < 0.0)) {
        a = mid;
        ha = hm;
      } else {
        b = mid;
        hb = hm;
      }
    }
    if (std::abs(barrier.h(mid)) <= kBoundaryTol) out.push_back(mid);
  }
  if (out.empty()) {
    std::ostringstream os;
    os << "sample_boundary: no sign change of h found in box after " << attempts
       << " chords; observed h range [" << h_seen_min << ", " << h_seen_max
       << "]";
    throw BoundaryNotFound(os.str());
  }
  return out;
}

BoundaryClassification classify_boundary(
    const ControlAffinePlant& plant, const BarrierCandidate& barrier,
    const std::function<Vec(const Vec&)>& u0,
    const std::vector<Vec>& samples) {
  if (samples.empty()) {
    throw InvalidParameter("classify_boundary: empty sample set");
  }
  for (const Vec& x : samples) {
    const double hx = barrier.h(x);
    if (!(std::abs(hx) <= 1e-6)) {
      throw InvalidParameter("classify_boundary: sample " + format_point(x) +
                             " has |h| = " + std::to_string(std::abs(hx)) +
                             " > 1e-6");
    }
  }
  BoundaryClassification out;
  out.n_samples = static_cast<int>(samples.size());
  out.f_min = std::numeric_limits<double>::infinity();
  out.f_max = -std::numeric_limits<double>::infinity();
  out.u0_min = std::numeric_limits<double>::infinity();
  out.u0_max = -std::numeric_limits<double>::infinity();
  bool degenerate_u0 = false;
  for (const Vec& x : samples) {
    const LieDerivatives lie = lie_derivatives(plant, barrier, x);
    out.f_min = std::min(out.f_min, lie.Lf);
    out.f_max = std::max(out.f_max, lie.Lf);
    if (lie.Lg2.norm() < kClassificationTol) degenerate_u0 = true;
    const double lu = lie.Lg2.dot(u0(x));
    out.u0_min = std::min(out.u0_min, lu);
    out.u0_max = std::max(out.u0_max, lu);
  }
  out.f_verdict = verdict_from_range(out.f_min, out.f_max);
  out.u0_verdict = degenerate_u0 ? BoundaryVerdict::Degenerate
                                 : verdict_from_range(out.u0_min, out.u0_max);
  return out;
}

double lipschitz_estimate(const std::function<Vec(const Vec&)>& field,
                          const Box& box, int n_pairs, std::uint64_t seed) {
  if (n_pairs <= 0) {
    throw InvalidParameter("lipschitz_estimate: n_pairs must be positive");
  }
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int i = 0; i < n_pairs; ++i) {
    const Vec a = uniform_in_box(box, rng);
    const Vec b = uniform_in_box(box, rng);
    const double d = (a - b).norm();
    if (d < 1e-12) continue;
    worst = std::max(worst, (field(a) - field(b)).norm() / d);
  }
  return worst;
}

}  // namespace safegain
