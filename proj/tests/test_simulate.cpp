#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "clfcbf/simulate.hpp"

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

}  // namespace

TEST_CASE("qp at the equilibrium returns zero input") {
  auto [sys, region] = make_toy_system();
  (void)region;
  const QpResult qp = clf_cbf_qp(sys, toy_initial_pair(sys), Eigen::Vector3d::Zero());
  REQUIRE(qp.kind == QpResult::Kind::kInput);
  CHECK(std::abs(qp.input[0]) <= 1e-6);
}

TEST_CASE("qp projects zero onto the feasible interval") {
  auto [sys, region] = make_toy_system();
  (void)region;
  const CertificatePair cert = toy_initial_pair(sys);
  // on-manifold state with x1 = 0.1: feasible set is [-1, -V/20ish]; the
  // minimum-norm input sits at the upper end
  const Eigen::Vector3d state = toy_state_from_angles(std::asin(0.1), 0.0);
  const QpResult qp = clf_cbf_qp(sys, cert, state);
  REQUIRE(qp.kind == QpResult::Kind::kInput);
  const auto [rows, rhs] = lambda_xi_at(assemble_lambda_xi(sys, cert), state);
  CHECK(((rows * qp.input - rhs).array() <= 1e-8).all());
  // the interval's upper endpoint is xi_0 / 2 (the binding CLF row)
  const double upper = rhs[0] / rows(0, 0);
  CHECK(qp.input[0] == doctest::Approx(upper).epsilon(1e-4));
}

TEST_CASE("qp reports the runtime incompatibility event with a certificate") {
  auto [sys, region] = make_toy_system();
  (void)region;
  CertificatePair cert;
  cert.V = parse_polynomial("0.5*x1^2 + 0.1*x2^2 + 0.5*x3^2", sys.vars);
  cert.h = parse_polynomial("x1 + x2 + x3 + 2", sys.vars);
  const double theta = 2.9;
  const double gamma = std::sin(theta) * (1.0 + 0.8 * (std::cos(theta) - 1.0));
  const Eigen::Vector3d state = toy_state_from_angles(theta, gamma);
  const QpResult qp = clf_cbf_qp(sys, cert, state);
  REQUIRE(qp.kind == QpResult::Kind::kInfeasible);
  const auto [rows, rhs] = lambda_xi_at(assemble_lambda_xi(sys, cert), state);
  CHECK(qp.farkas.minCoeff() >= 0.0);
  CHECK((rows.transpose() * qp.farkas).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(rhs.dot(qp.farkas) == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("simulation from the equilibrium stays at rest") {
  auto [sys, region] = make_toy_system();
  (void)region;
  const Trajectory traj =
      simulate(sys, toy_initial_pair(sys), Eigen::Vector3d::Zero(), 0.5, 1e-3);
  CHECK_FALSE(traj.qp_infeasible_at.has_value());
  CHECK(traj.states.back().lpNorm<Eigen::Infinity>() <= 1e-6);
  for (const auto& u : traj.inputs) CHECK(std::abs(u[0]) <= 1e-5);
}

TEST_CASE("simulation rejects starts outside the region") {
  auto [sys, region] = make_toy_system();
  (void)region;
  const Eigen::Vector3d outside = toy_state_from_angles(0.0, std::sqrt(0.2));  // V = 2
  CHECK_THROWS_AS(simulate(sys, toy_initial_pair(sys), outside, 1.0, 1e-3),
                  std::invalid_argument);
}

TEST_CASE("closed-loop invariants over ten seconds") {
  auto [sys, region] = make_toy_system();
  (void)region;
  const CertificatePair cert = toy_initial_pair(sys);
  const Eigen::Vector3d x0 = toy_state_from_angles(0.2, 0.1).eval();
  REQUIRE(cert.V.evaluate(x0) <= 1.0);
  const Trajectory traj = simulate(sys, cert, x0, 10.0, 1e-3);
  REQUIRE_FALSE(traj.qp_infeasible_at.has_value());
  REQUIRE(traj.states.size() == 10001);

  const double kappa_v = cert.kappa_V.linear_gain();
  const double v0 = traj.V_values.front();
  double max_drift = 0.0;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    // exponential CLF envelope with discretization slack
    CHECK(traj.V_values[k] <= v0 * std::exp(-kappa_v * traj.times[k]) * 1.02 + 1e-6);
    // barrier positivity
    CHECK(traj.h_values[k] >= -1e-3);
    // logged values match the definition exactly
    CHECK(traj.V_values[k] == cert.V.evaluate(traj.states[k]));
    max_drift = std::max(max_drift,
                         std::abs(sys.state_constraints[0].evaluate(traj.states[k])));
  }
  CHECK(max_drift <= 1e-5);
  for (const auto& u : traj.inputs) {
    CHECK(((sys.input_A * u - sys.input_c).array() <= 1e-8).all());
  }
}

TEST_CASE("csv emission carries the expected header and width") {
  auto [sys, region] = make_toy_system();
  (void)region;
  const Trajectory traj =
      simulate(sys, toy_initial_pair(sys), toy_state_from_angles(0.1, 0.0).eval(), 0.01, 1e-3);
  const std::string csv = trajectory_to_csv(sys, traj);
  CHECK(csv.rfind("t,x1,x2,x3,u1,V,h\n", 0) == 0);
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 12);  // header + 11 samples
}
