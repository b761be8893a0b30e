#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "safegain/errors.hpp"
#include "safegain/filters.hpp"
#include "safegain/scenarios.hpp"
#include "test_helpers.hpp"

using namespace safegain;
using test::vec1;
using test::vec2;

namespace {

BarrierCandidate line_barrier() {
  BarrierCandidate b;
  b.h = [](const Vec& x) { return x[0]; };
  b.grad_h = [](const Vec&) { return test::vec1(1.0); };
  b.alpha = make_linear_ek(1.0);
  return b;
}

ComparisonFunction identity_fn() {
  ComparisonFunction f;
  f.kind = FunctionClass::KInf;
  f.eval = [](double s) { return s; };
  f.inverse = [](double r) { return r; };
  return f;
}

Vec sample_in(const Box& box, std::mt19937_64& rng) {
  Vec x(box.dim());
  for (int i = 0; i < box.dim(); ++i) {
    std::uniform_real_distribution<double> d(box.lo[i], box.hi[i]);
    x[i] = d(rng);
  }
  return x;
}

}  // namespace

TEST_SUITE("filters") {

TEST_CASE("bare_constraint is identically zero on the scalar registry") {
  std::mt19937_64 rng(12);
  for (const char* name : {"example2", "example3"}) {
    const Scenario sc = make_scenario(name);
    for (int i = 0; i < 50; ++i) {
      const Vec x = sample_in(sc.working_box, rng);
      const double w =
          bare_constraint(sc.plant, sc.barrier, x, sc.u0(x), false);
      CHECK(std::abs(w) <= 1e-12 * std::max(1.0, std::abs(x[0])));
    }
  }
}

TEST_CASE("disturbance shaping shifts the bare constraint by -2") {
  const Scenario sc = make_scenario("example2_revisited");
  for (double xv : {-1.0, 0.0, 0.4, 2.0}) {
    const Vec x = vec1(xv);
    const double w = bare_constraint(sc.plant, sc.barrier, x, sc.u0(x), true);
    CHECK(w == doctest::Approx(-2.0).epsilon(1e-12));
  }
}

TEST_CASE("filters leave the nominal law alone when omega >= 0") {
  const Scenario sc = make_scenario("example2");
  for (double xv : {-2.0, 0.0, 0.5, 3.0}) {
    const Vec x = vec1(xv);
    const FilterOutput qp = cbf_qp(sc.plant, sc.barrier, x, sc.u0(x));
    const FilterOutput io = inverse_optimal(sc.plant, sc.barrier, x, sc.u0(x));
    CHECK(std::abs(qp.u_total[0] - sc.u0(x)[0]) <= 1e-12);
    CHECK(std::abs(io.u_total[0] - sc.u0(x)[0]) <= 1e-12);
  }
}

TEST_CASE("hand-computed override on a constant-drift fixture") {
  // xdot = -2 + u, h = x, alpha(s) = s. At x = 0.5 with u0 = 0:
  // omega = -2 + 0.5 = -1.5, q = 1.
  const ControlAffinePlant plant = test::scalar_plant([](double) { return -2.0; });
  const BarrierCandidate barrier = line_barrier();
  const Vec x = vec1(0.5);
  const Vec u0 = Vec::Zero(1);

  const FilterOutput qp = cbf_qp(plant, barrier, x, u0);
  CHECK(qp.omega == doctest::Approx(-1.5).epsilon(1e-14));
  CHECK(qp.r_inv == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(qp.override_u[0] == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(qp.u_total[0] == doctest::Approx(1.5).epsilon(1e-14));
  CHECK_FALSE(qp.degenerate);

  const FilterOutput io = inverse_optimal(plant, barrier, x, u0);
  CHECK(io.omega == doctest::Approx(-1.5).epsilon(1e-14));
  CHECK(io.r_inv == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(io.override_u[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(io.u_total[0] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("zero control authority: infeasible vs degenerate pass-through") {
  ControlAffinePlant plant = test::scalar_plant([](double) { return -2.0; });
  plant.g2 = [](const Vec&) { return Mat(Mat::Zero(1, 1)); };
  const BarrierCandidate barrier = line_barrier();
  const Vec u0 = Vec::Zero(1);

  CHECK_THROWS_AS(cbf_qp(plant, barrier, vec1(0.5), u0), InfeasibleFilter);
  CHECK_THROWS_AS(inverse_optimal(plant, barrier, vec1(0.5), u0),
                  InfeasibleFilter);

  // At x = 3 the constraint already holds (omega = 1), so the filter just
  // reports a degenerate pass-through.
  const FilterOutput ok = cbf_qp(plant, barrier, vec1(3.0), u0);
  CHECK(ok.degenerate);
  CHECK(ok.omega == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ok.override_u.norm() == 0.0);
  CHECK(ok.u_total[0] == u0[0]);
  CHECK(ok.r_inv == 0.0);
}

TEST_CASE("inverse_optimal doubles the QP correction everywhere") {
  std::mt19937_64 rng(21);
  for (const std::string& name : scenario_names()) {
    const Scenario sc = make_scenario(name);
    const bool with_gamma = static_cast<bool>(sc.barrier.gamma);
    for (int i = 0; i < 200; ++i) {
      const Vec x = sample_in(sc.working_box, rng);
      const Vec u0 = sc.u0(x);
      const FilterOutput qp = cbf_qp(sc.plant, sc.barrier, x, u0, with_gamma);
      const FilterOutput io =
          inverse_optimal(sc.plant, sc.barrier, x, u0, with_gamma);
      CHECK(io.omega == doctest::Approx(qp.omega).epsilon(1e-14));
      CHECK(io.r_inv == doctest::Approx(qp.r_inv).epsilon(1e-14));
      CHECK((io.override_u - 2.0 * qp.override_u).norm() <=
            1e-12 * std::max(1.0, qp.override_u.norm()));
    }
  }
}

TEST_CASE("filtered controls satisfy the pointwise constraint") {
  std::mt19937_64 rng(33);
  for (const std::string& name : scenario_names()) {
    CAPTURE(name);
    const Scenario sc = make_scenario(name);
    const bool with_gamma = static_cast<bool>(sc.barrier.gamma);
    for (int i = 0; i < 1000; ++i) {
      const Vec x = sample_in(sc.working_box, rng);
      const Vec u0 = sc.u0(x);
      for (int variant = 0; variant < 3; ++variant) {
        FilterOutput out;
        if (variant == 0) {
          out = cbf_qp(sc.plant, sc.barrier, x, u0, with_gamma);
        } else if (variant == 1) {
          out = inverse_optimal(sc.plant, sc.barrier, x, u0, with_gamma);
        } else {
          out = improved_filter(sc.plant, sc.barrier, x, u0, with_gamma);
        }
        const double after = bare_constraint(sc.plant, sc.barrier, x,
                                             out.u_total, with_gamma);
        CHECK(after >= -1e-9);
      }
    }
  }
}

TEST_CASE("override is parallel to (Lg2 h)^T and sums exactly") {
  const Scenario sc = make_scenario("disk2d");
  const Vec x = vec2(1.0, 0.5);
  const Vec u0 = sc.u0(x);
  const FilterOutput out = inverse_optimal(sc.plant, sc.barrier, x, u0);
  CHECK(out.omega == doctest::Approx(1.0 - 3.0 * 1.25).epsilon(1e-12));
  const Vec dir = sc.barrier.gradient(x);  // Lg2 h = grad h here (g2 = I)
  const double cross =
      out.override_u[0] * dir[1] - out.override_u[1] * dir[0];
  CHECK(std::abs(cross) <= 1e-12 * out.override_u.norm() * dir.norm());
  for (int i = 0; i < 2; ++i) {
    CHECK(out.u_total[i] == u0[i] + out.override_u[i]);
  }
}

TEST_CASE("QP override has minimal norm among feasible corrections") {
  const Scenario sc = make_scenario("disk2d");
  std::mt19937_64 rng(44);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int tested = 0;
  for (int i = 0; i < 400 && tested < 20; ++i) {
    const Vec x = sample_in(sc.working_box, rng);
    const Vec u0 = sc.u0(x);
    const double omega = bare_constraint(sc.plant, sc.barrier, x, u0, false);
    if (omega >= -1e-5) continue;
    ++tested;
    const FilterOutput qp = cbf_qp(sc.plant, sc.barrier, x, u0, false);
    const double target = qp.override_u.norm() * (1.0 - 1e-3);
    for (int k = 0; k < 100; ++k) {
      Vec v(2);
      v << gauss(rng), gauss(rng);
      v *= target / v.norm();
      const double after =
          bare_constraint(sc.plant, sc.barrier, x, u0 + v, false);
      CHECK(after < 0.0);
    }
  }
  CHECK(tested == 20);
}

TEST_CASE("sontag formula on a hand fixture") {
  // xdot = -x + u, h = x, rho = identity. At x = 0.7 with u0 = 0: V = 0,
  // omega = -0.7 + 0.7 = 0, q = 1, kappa = 1.
  const ControlAffinePlant plant =
      test::scalar_plant([](double s) { return -s; });
  BarrierCandidate barrier = line_barrier();
  barrier.rho = identity_fn();
  const FilterOutput out = sontag(plant, barrier, vec1(0.7), Vec::Zero(1));
  CHECK(out.omega == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(out.override_u[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.u_total[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sontag degenerates quietly when q = 0") {
  ControlAffinePlant plant = test::scalar_plant([](double) { return -2.0; });
  plant.g2 = [](const Vec&) { return Mat(Mat::Zero(1, 1)); };
  BarrierCandidate barrier = line_barrier();
  barrier.rho = identity_fn();
  const FilterOutput out = sontag(plant, barrier, vec1(0.5), Vec::Zero(1));
  CHECK(out.degenerate);
  CHECK(out.override_u.norm() == 0.0);
  CHECK(out.omega == doctest::Approx(-1.5).epsilon(1e-14));
}

TEST_CASE("sontag requires rho") {
  const ControlAffinePlant plant =
      test::scalar_plant([](double s) { return -s; });
  const BarrierCandidate barrier = line_barrier();  // no rho
  CHECK_THROWS_AS(sontag(plant, barrier, vec1(0.5), Vec::Zero(1)),
                  InvalidParameter);
}

TEST_CASE("sontag control meets its margin inequality") {
  const Scenario sc = make_scenario("example2_revisited");
  std::mt19937_64 rng(55);
  for (int i = 0; i < 300; ++i) {
    const Vec x = sample_in(sc.working_box, rng);
    const Vec u0 = sc.u0(x);
    const FilterOutput out = sontag(sc.plant, sc.barrier, x, u0);
    const LieDerivatives lie = lie_derivatives(sc.plant, sc.barrier, x);
    const double h = sc.barrier.h(x);
    const double V = std::max(0.0, -h);
    const double rho_inv = std::sqrt(8.0 * V);  // rho(s) = s^2/8
    const double lhs = lie.Lf + lie.Lg2.dot(out.u_total) +
                       sc.barrier.alpha(h) - lie.Lg1.norm() * rho_inv;
    CHECK(lhs >= -1e-9);
  }
}

TEST_CASE("improved_r_inv augments by the positive parts") {
  const Scenario ex2 = make_scenario("example2_revisited");
  CHECK(improved_r_inv(ex2.plant, ex2.barrier, vec1(1.0), ex2.u0(vec1(1.0)),
                       0.0) == doctest::Approx(11.1).epsilon(1e-14));

  const Scenario ex3 = make_scenario("example3_revisited");
  CHECK(improved_r_inv(ex3.plant, ex3.barrier, vec1(0.0), ex3.u0(vec1(0.0)),
                       0.4) == doctest::Approx(1.4).epsilon(1e-14));

  // Both Lie terms negative: the weight passes through unchanged.
  const ControlAffinePlant neg = test::scalar_plant([](double) { return -2.0; });
  const BarrierCandidate barrier = line_barrier();
  CHECK(improved_r_inv(neg, barrier, vec1(0.0), vec1(-1.0), 0.7) ==
        doctest::Approx(0.7).epsilon(1e-15));

  ControlAffinePlant no_authority = neg;
  no_authority.g2 = [](const Vec&) { return Mat(Mat::Zero(1, 1)); };
  CHECK(improved_r_inv(no_authority, barrier, vec1(0.0), vec1(-1.0), 0.7) ==
        doctest::Approx(0.7).epsilon(1e-15));
  ControlAffinePlant pos_drift =
      test::scalar_plant([](double) { return 2.0; });
  pos_drift.g2 = [](const Vec&) { return Mat(Mat::Zero(1, 1)); };
  CHECK_THROWS_AS(
      improved_r_inv(pos_drift, barrier, vec1(0.0), vec1(-1.0), 0.0),
      DegenerateAugmentation);
}

TEST_CASE("improved filter closed form on example2_revisited") {
  const Scenario sc = make_scenario("example2_revisited");
  const auto u_at = [&](double xv) {
    const Vec x = vec1(xv);
    return improved_filter(sc.plant, sc.barrier, x, sc.u0(x), false)
        .u_total[0];
  };
  CHECK(u_at(-1.0) == doctest::Approx(11.1).epsilon(1e-12));
  CHECK(u_at(0.0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(u_at(1.0) == doctest::Approx(33.3).epsilon(1e-12));

  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> unif(-8.0, 8.0);
  for (int i = 0; i < 100; ++i) {
    const double xv = unif(rng);
    const double closed = std::max(
        {8.1 * xv + 1.0, -12.1 * xv - 1.0, 30.3 * xv + 3.0, 0.0});
    CHECK(u_at(xv) == doctest::Approx(closed).epsilon(1e-10));
  }
}

TEST_CASE("improved filter closed form on example3_revisited") {
  const Scenario sc = make_scenario("example3_revisited");
  const auto u_at = [&](double xv) {
    const Vec x = vec1(xv);
    return improved_filter(sc.plant, sc.barrier, x, sc.u0(x), false)
        .u_total[0];
  };
  CHECK(u_at(0.0) == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(67);
  std::uniform_real_distribution<double> unif(-8.0, 8.0);
  for (int i = 0; i < 100; ++i) {
    const double xv = unif(rng);
    const double closed = std::max(
        {8.1 * xv + 1.0, -12.1 * xv - 1.0, -30.3 * xv - 3.0, 0.0});
    CHECK(u_at(xv) == doctest::Approx(closed).epsilon(1e-10));
  }
}

TEST_CASE("shaped improved filter on example2_revisited") {
  const Scenario sc = make_scenario("example2_revisited");
  const auto out_at = [&](double xv) {
    const Vec x = vec1(xv);
    return improved_filter(sc.plant, sc.barrier, x, sc.u0(x), true);
  };
  const FilterOutput at0 = out_at(0.0);
  CHECK(at0.omega == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(at0.r_inv == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(at0.u_total[0] == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(out_at(-1.0).u_total[0] == doctest::Approx(15.1).epsilon(1e-12));
}

TEST_CASE("improvement never weakens the inward push") {
  std::mt19937_64 rng(77);
  for (const char* name : {"example2", "example3", "example2_revisited"}) {
    const Scenario sc = make_scenario(name);
    const bool with_gamma = static_cast<bool>(sc.barrier.gamma);
    for (int i = 0; i < 500; ++i) {
      const Vec x = sample_in(sc.working_box, rng);
      const Vec u0 = sc.u0(x);
      const FilterOutput std_out =
          cbf_qp(sc.plant, sc.barrier, x, u0, with_gamma);
      const FilterOutput imp =
          improved_filter(sc.plant, sc.barrier, x, u0, with_gamma);
      const LieDerivatives lie = lie_derivatives(sc.plant, sc.barrier, x);
      const double push_std = lie.Lg2.dot(std_out.override_u);
      const double push_imp = lie.Lg2.dot(imp.override_u);
      CHECK(push_imp >= push_std - 1e-12);
    }
  }
}

TEST_CASE("inverse_optimal_with_r, scalar weight") {
  const ControlAffinePlant plant =
      test::scalar_plant([](double) { return -2.0; });
  const BarrierCandidate barrier = line_barrier();
  const FilterOutput out =
      inverse_optimal_with_r(plant, barrier, vec1(0.5), Vec::Zero(1), 0.7);
  CHECK(out.override_u[0] == doctest::Approx(1.4).epsilon(1e-14));
  CHECK(out.r_inv == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(out.omega == doctest::Approx(-1.5).epsilon(1e-14));
  CHECK_THROWS_AS(
      inverse_optimal_with_r(plant, barrier, vec1(0.5), Vec::Zero(1), -0.1),
      InvalidR);
  CHECK_THROWS_AS(
      inverse_optimal_with_r(plant, barrier, vec1(0.5), Vec::Zero(1),
                             std::numeric_limits<double>::infinity()),
      InvalidR);
}

TEST_CASE("inverse_optimal_with_r, matrix weight") {
  const Scenario sc = make_scenario("disk2d");
  const Vec x = vec2(1.0, 0.5);
  const Vec u0 = Vec::Zero(2);
  Mat r_inv(2, 2);
  r_inv << 0.5, 0.1, 0.1, 0.3;
  const FilterOutput out =
      inverse_optimal_with_r(sc.plant, sc.barrier, x, u0, r_inv);
  CHECK(out.override_u[0] == doctest::Approx(-2.2).epsilon(1e-13));
  CHECK(out.override_u[1] == doctest::Approx(-1.0).epsilon(1e-13));
  CHECK(out.r_inv_quadratic == doctest::Approx(2.7).epsilon(1e-13));
  CHECK(out.r_inv == doctest::Approx(0.54).epsilon(1e-13));

  Mat indefinite(2, 2);
  indefinite << 1.0, 0.0, 0.0, -0.1;
  CHECK_THROWS_AS(
      inverse_optimal_with_r(sc.plant, sc.barrier, x, u0, indefinite),
      InvalidR);
  Mat asym(2, 2);
  asym << 1.0, 0.2, 0.0, 1.0;
  CHECK_THROWS_AS(inverse_optimal_with_r(sc.plant, sc.barrier, x, u0, asym),
                  InvalidR);
  CHECK_THROWS_AS(inverse_optimal_with_r(sc.plant, sc.barrier, x, u0,
                                         Mat(Mat::Identity(1, 1))),
                  InvalidR);
}

TEST_CASE("eval_filter dispatches to the direct entry points") {
  const Scenario sc = make_scenario("example2_revisited");
  const Vec x = vec1(0.3);
  const Vec u0 = sc.u0(x);

  FilterSpec spec;
  spec.barrier = sc.barrier;

  spec.kind = FilterKind::CbfQp;
  spec.uses_gamma = true;
  CHECK(eval_filter(sc.plant, spec, x, u0).u_total[0] ==
        cbf_qp(sc.plant, sc.barrier, x, u0, true).u_total[0]);

  spec.kind = FilterKind::InverseOptimal;
  CHECK(eval_filter(sc.plant, spec, x, u0).u_total[0] ==
        inverse_optimal(sc.plant, sc.barrier, x, u0, true).u_total[0]);

  spec.kind = FilterKind::ImprovedIssf;
  CHECK(eval_filter(sc.plant, spec, x, u0).u_total[0] ==
        improved_filter(sc.plant, sc.barrier, x, u0, true).u_total[0]);

  spec.kind = FilterKind::ImprovedZeroDist;
  spec.uses_gamma = false;
  CHECK(eval_filter(sc.plant, spec, x, u0).u_total[0] ==
        improved_filter(sc.plant, sc.barrier, x, u0, false).u_total[0]);

  spec.kind = FilterKind::Sontag;
  CHECK(eval_filter(sc.plant, spec, x, u0).u_total[0] ==
        sontag(sc.plant, sc.barrier, x, u0).u_total[0]);
}

TEST_CASE("FilterSpec validation") {
  const Scenario plain = make_scenario("example2");

  FilterSpec spec;
  spec.kind = FilterKind::CbfQp;
  spec.barrier = plain.barrier;
  spec.uses_gamma = true;  // no gamma on the plain barrier
  CHECK_THROWS_AS(validate(spec), InvalidParameter);

  spec.uses_gamma = false;
  spec.kind = FilterKind::ImprovedIssf;  // needs gamma regardless of the flag
  CHECK_THROWS_AS(validate(spec), InvalidParameter);

  spec.kind = FilterKind::Sontag;
  spec.barrier.rho.reset();
  CHECK_THROWS_AS(validate(spec), InvalidParameter);

  FilterSpec empty;
  empty.barrier.h = nullptr;
  CHECK_THROWS_AS(validate(empty), InvalidParameter);
}

TEST_CASE("filter kinds print stable names") {
  CHECK(std::string(to_string(FilterKind::CbfQp)) == "cbf_qp");
  CHECK(std::string(to_string(FilterKind::InverseOptimal)) ==
        "inverse_optimal");
  CHECK(std::string(to_string(FilterKind::Sontag)) == "sontag");
  CHECK(std::string(to_string(FilterKind::ImprovedZeroDist)) ==
        "improved_zero_dist");
  CHECK(std::string(to_string(FilterKind::ImprovedIssf)) == "improved_issf");
}

}  // TEST_SUITE("filters")
