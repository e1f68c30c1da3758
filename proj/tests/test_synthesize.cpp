#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "clfcbf/synthesize.hpp"

using namespace clfcbf;

namespace {

CertificatePair toy_initial_pair(const ControlAffineSystem& sys) {
  CertificatePair cert;
  cert.V = parse_polynomial("10*(x1^2 + x2^2 + x3^2)", sys.vars);
  cert.h = Polynomial(1.0) - cert.V;
  cert.kappa_V = KappaFunction::linear(0.1);
  cert.kappa_h = KappaFunction::linear(0.1);
  return cert;
}

std::vector<Eigen::VectorXd> candidate_ring(double radius, int count) {
  std::vector<Eigen::VectorXd> out;
  for (int k = 0; k < count; ++k) {
    const double phi = 2.0 * M_PI * k / count;
    out.push_back(toy_state_from_angles(radius * std::cos(phi), radius * std::sin(phi)));
  }
  return out;
}

SynthesisConfig toy_config() {
  SynthesisConfig config;
  config.candidate_states = candidate_ring(0.8, 12);
  config.max_iter = 3;
  return config;
}

}  // namespace

TEST_CASE("care: double integrator has the closed-form solution") {
  Eigen::MatrixXd A(2, 2), B(2, 1), Q = Eigen::MatrixXd::Identity(2, 2), R(1, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  R << 1;
  const CareResult res = solve_care(A, B, Q, R);
  CHECK(res.residual <= 1e-8);
  const double s3 = std::sqrt(3.0);
  CHECK(res.P(0, 0) == doctest::Approx(s3).epsilon(1e-9));
  CHECK(res.P(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.P(1, 1) == doctest::Approx(s3).epsilon(1e-9));
}

TEST_CASE("care: uncontrollable pair is rejected") {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  const Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(solve_care(A, B, Eigen::MatrixXd::Identity(2, 2),
                             Eigen::MatrixXd::Identity(1, 1)),
                  NotStabilizable);
}

TEST_CASE("lqr initialization on the constrained toy system") {
  auto [sys, region] = make_toy_system();
  (void)region;
  LqrInitInfo info;
  const CertificatePair pair =
      lqr_initialize(sys, Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(1, 1), 1.0,
                     0.1, 0.1, &info);
  CHECK(info.care_residual <= 1e-8);
  CHECK(info.A_projected.rows() == 2);  // tangent space of the circle constraint
  CHECK(pair.V.constant_term() == 0.0);
  // positive on the manifold away from the origin
  for (double theta : {0.3, -0.5, 1.0}) {
    for (double gamma : {0.2, -0.4}) {
      CHECK(pair.V.evaluate(toy_state_from_angles(theta, gamma)) > 0.0);
    }
  }
  CHECK(pair.h == Polynomial(1.0) - pair.V);
}

TEST_CASE("hinge objective arithmetic") {
  VariableSet vars;
  vars.add("x1");
  // V(1) = 1.5, h(1) = -0.2 contributes 0.5 + 0.2
  const Polynomial V = parse_polynomial("1.5*x1", vars);
  const Polynomial h = parse_polynomial("0 - 0.2*x1", vars);
  std::vector<Eigen::VectorXd> candidates{Eigen::VectorXd::Constant(1, 1.0)};
  CHECK(hinge_objective(V, h, candidates, 1.0, 1.0) == doctest::Approx(0.7));
  // inside the region: zero cost
  const Polynomial V0 = parse_polynomial("0.5*x1", vars);
  const Polynomial h0 = parse_polynomial("0.2*x1", vars);
  CHECK(hinge_objective(V0, h0, candidates, 1.0, 1.0) == 0.0);
  CHECK(covered_candidates(V0, h0, candidates) == 1);
}

TEST_CASE("lagrangian step: verified, vacuous, and failing pairs") {
  auto [sys, region] = make_toy_system();
  const CertificatePair init = toy_initial_pair(sys);
  const LagrangianStepResult ok = lagrangian_step(sys, init, region, MultiplierDegrees{});
  REQUIRE(ok.ok);
  CHECK(ok.bundle->compat.s0.size() == 1);
  CHECK(ok.bundle->safety.q.size() == 1);

  CertificatePair vacuous = init;
  vacuous.h = parse_polynomial("0 - 1 - 10*(x1^2 + x2^2 + x3^2)", sys.vars);
  CHECK(lagrangian_step(sys, vacuous, region, MultiplierDegrees{}).ok);

  CertificatePair bad;
  bad.V = parse_polynomial("0.5*x1^2 + 0.1*x2^2 + 0.5*x3^2", sys.vars);
  bad.h = parse_polynomial("x1 + x2 + x3 + 2", sys.vars);
  const LagrangianStepResult fail = lagrangian_step(sys, bad, region, MultiplierDegrees{});
  CHECK_FALSE(fail.ok);
}

TEST_CASE("certificate step lowers the coverage cost after one iteration") {
  auto [sys, region] = make_toy_system();
  const CertificatePair init = toy_initial_pair(sys);
  const SynthesisConfig config = toy_config();
  const LagrangianStepResult lag =
      lagrangian_step(sys, init, region, config.degrees, config.certify);
  REQUIRE(lag.ok);
  const double initial_cost =
      hinge_objective(init.V, init.h, config.candidate_states, config.c1, config.c2);
  const CertificateStepResult step = certificate_step(sys, *lag.bundle, region, config);
  REQUIRE(step.ok);
  MESSAGE("initial cost ", initial_cost, " after one update ", step.objective);
  CHECK(step.objective < initial_cost);
  // scaling bound honored
  const Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  CHECK(step.h.evaluate(origin) >= config.h_lower - 1e-9);
  CHECK(step.h.evaluate(origin) <= config.h_upper + 1e-9);
}

TEST_CASE("synthesize: zero iterations returns just the verified init") {
  auto [sys, region] = make_toy_system();
  SynthesisConfig config = toy_config();
  config.max_iter = 0;
  const SynthesisTrace trace = synthesize(sys, region, toy_initial_pair(sys), config);
  CHECK(trace.iterations.size() == 1);
  CHECK(trace.iterations.front().verified);
}

TEST_CASE("synthesize: unverifiable init throws") {
  auto [sys, region] = make_toy_system();
  CertificatePair bad;
  bad.V = parse_polynomial("0.5*x1^2 + 0.1*x2^2 + 0.5*x3^2", sys.vars);
  bad.h = parse_polynomial("x1 + x2 + x3 + 2", sys.vars);
  CHECK_THROWS_AS(synthesize(sys, region, bad, toy_config()), InitNotVerified);
}

TEST_CASE("synthesize: three iterations stay verified with monotone objective") {
  auto [sys, region] = make_toy_system();
  const SynthesisConfig config = toy_config();
  const SynthesisTrace trace = synthesize(sys, region, toy_initial_pair(sys), config);
  REQUIRE(trace.iterations.size() >= 2);
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    CHECK(trace.iterations[i].verified);
    if (i > 0) {
      const double scale = 1.0 + std::abs(trace.iterations[i - 1].objective);
      CHECK(trace.iterations[i].objective <=
            trace.iterations[i - 1].objective + 1e-6 * scale);
    }
  }
  CHECK(trace.iterations.back().covered >= trace.iterations.front().covered);
  // every iterate re-verifies from scratch
  CertificatePair last = trace.final_pair;
  CHECK(lagrangian_step(sys, last, region, config.degrees, config.certify).ok);
  // the scaling bound holds along the trace
  const Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  for (std::size_t i = 1; i < trace.iterations.size(); ++i) {
    CHECK(trace.iterations[i].h.evaluate(origin) >= config.h_lower - 1e-9);
    CHECK(trace.iterations[i].h.evaluate(origin) <= config.h_upper + 1e-9);
  }
}

TEST_CASE("synthesis config validation") {
  auto [sys, region] = make_toy_system();
  (void)region;
  SynthesisConfig config = toy_config();
  config.h_lower = 0.0;
  CHECK_THROWS_AS(config.validate(sys), std::invalid_argument);
  config = toy_config();
  config.candidate_states.push_back(Eigen::Vector3d(0.5, 0.5, 0.0));  // off manifold
  CHECK_THROWS_AS(config.validate(sys), std::invalid_argument);
}
