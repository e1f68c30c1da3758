#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "clfcbf/conic_solver.hpp"

using namespace clfcbf;

namespace {

ConicProblem lp_problem() {
  // min t  s.t.  t - s = 1, s >= 0  (i.e. t >= 1)
  ConicProblem p;
  p.num_vars = 2;
  p.objective = Eigen::Vector2d(1.0, 0.0);
  p.eq_rhs = Eigen::VectorXd::Constant(1, 1.0);
  std::vector<Eigen::Triplet<double>> t{{0, 0, 1.0}, {0, 1, -1.0}};
  p.eq_matrix.resize(1, 2);
  p.eq_matrix.setFromTriplets(t.begin(), t.end());
  p.cones.push_back({ConeKind::kZero, 0, 1, 0});
  p.cones.push_back({ConeKind::kNonnegative, 1, 1, 0});
  return p;
}

}  // namespace

TEST_CASE("lp: min t subject to t >= 1") {
  const ConicSolution sol = solve(lp_problem());
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.primal[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.stats.primal_residual <= 1e-9);
  CHECK(sol.stats.dual_residual <= 1e-9);
}

TEST_CASE("solver is deterministic across calls") {
  const ConicSolution a = solve(lp_problem());
  const ConicSolution b = solve(lp_problem());
  CHECK(a.primal == b.primal);
  CHECK(a.dual_eq == b.dual_eq);
  CHECK(a.stats.iterations == b.stats.iterations);
  CHECK(lp_problem().serialize() == lp_problem().serialize());
}

TEST_CASE("lp oracle: contradictory bounds give a Farkas vector") {
  Eigen::MatrixXd rows(2, 1);
  rows << 1.0, -1.0;
  Eigen::Vector2d rhs(-1.0, -1.0);  // u <= -1 and u >= 1
  const LpResult r = solve_lp(rows, rhs);
  REQUIRE(r.kind == LpResult::Kind::kInfeasible);
  CHECK(r.farkas.minCoeff() >= 0.0);
  CHECK((rows.transpose() * r.farkas).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(rhs.dot(r.farkas) == doctest::Approx(-1.0).epsilon(1e-8));
  // the certificate is essentially (0.5, 0.5)
  CHECK(r.farkas[0] == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(r.farkas[1] == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("lp oracle: feasible band") {
  Eigen::MatrixXd rows(2, 1);
  rows << 1.0, -1.0;
  Eigen::Vector2d rhs(1.0, 1.0);  // -1 <= u <= 1
  const LpResult r = solve_lp(rows, rhs);
  REQUIRE(r.kind == LpResult::Kind::kFeasible);
  CHECK(((rows * r.witness - rhs).array() <= 1e-8).all());
}

TEST_CASE("lp oracle: toy pointwise system at x=(0.1,0,0)") {
  // CLF row 2u <= -0.01, CBF row 2u <= 0.09, limits -1 <= u <= 1
  Eigen::MatrixXd rows(4, 1);
  rows << 2.0, 2.0, 1.0, -1.0;
  Eigen::Vector4d rhs(-0.01, 0.09, 1.0, 1.0);
  const LpResult r = solve_lp(rows, rhs);
  REQUIRE(r.kind == LpResult::Kind::kFeasible);
  CHECK(r.witness[0] <= -0.005 + 1e-8);
  CHECK(r.witness[0] >= -1.0 - 1e-8);
}

TEST_CASE("socp: min t with (t, 3, 4) in the second-order cone") {
  ConicProblem p;
  p.num_vars = 3;
  p.objective = Eigen::Vector3d(1.0, 0.0, 0.0);
  p.eq_rhs = Eigen::Vector2d(3.0, 4.0);
  std::vector<Eigen::Triplet<double>> t{{0, 1, 1.0}, {1, 2, 1.0}};
  p.eq_matrix.resize(2, 3);
  p.eq_matrix.setFromTriplets(t.begin(), t.end());
  p.cones.push_back({ConeKind::kSecondOrder, 0, 3, 0});
  const ConicSolution sol = solve(p);
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.objective == doctest::Approx(5.0).epsilon(1e-7));
}

TEST_CASE("sdp: 2x2 completion, min -X12 with unit diagonal") {
  // svec vars [X11, sqrt(2) X21, X22]
  ConicProblem p;
  p.num_vars = 3;
  p.objective = Eigen::Vector3d(0.0, -1.0 / std::sqrt(2.0), 0.0);
  p.eq_rhs = Eigen::Vector2d(1.0, 1.0);
  std::vector<Eigen::Triplet<double>> t{{0, 0, 1.0}, {1, 2, 1.0}};
  p.eq_matrix.resize(2, 3);
  p.eq_matrix.setFromTriplets(t.begin(), t.end());
  p.cones.push_back({ConeKind::kPsd, 0, 3, 2});
  const ConicSolution sol = solve(p);
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.objective == doctest::Approx(-1.0).epsilon(1e-6));
  const Eigen::MatrixXd X = svec_to_matrix(sol.primal, 2);
  CHECK(X(0, 1) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("sdp: X11 = -1 with X psd is primal infeasible") {
  ConicProblem p;
  p.num_vars = 3;
  p.objective = Eigen::Vector3d::Zero();
  p.eq_rhs = Eigen::VectorXd::Constant(1, -1.0);
  std::vector<Eigen::Triplet<double>> t{{0, 0, 1.0}};
  p.eq_matrix.resize(1, 3);
  p.eq_matrix.setFromTriplets(t.begin(), t.end());
  p.cones.push_back({ConeKind::kPsd, 0, 3, 2});
  const ConicSolution sol = solve(p);
  CHECK(sol.status == SolveStatus::kPrimalInfeasible);
}

TEST_CASE("structurally empty rows: contradiction and no-op") {
  ConicProblem p;
  p.num_vars = 1;
  p.objective = Eigen::VectorXd::Zero(1);
  p.eq_rhs = Eigen::Vector2d(0.0, 3.0);  // row 1: 0 = 3
  p.eq_matrix.resize(2, 1);
  std::vector<Eigen::Triplet<double>> t{{0, 0, 1.0}};
  p.eq_matrix.setFromTriplets(t.begin(), t.end());
  p.cones.push_back({ConeKind::kNonnegative, 0, 1, 0});
  const ConicSolution sol = solve(p);
  CHECK(sol.status == SolveStatus::kPrimalInfeasible);

  p.eq_rhs[1] = 0.0;  // redundant zero row is dropped
  const ConicSolution sol2 = solve(p);
  CHECK(sol2.status == SolveStatus::kOptimal);
}

TEST_CASE("time limit surfaces as unknown") {
  ConicProblem p = lp_problem();
  SolverSettings s;
  s.time_limit_s = 0.0;
  const ConicSolution sol = solve(p, s);
  CHECK(sol.status == SolveStatus::kUnknown);
  CHECK(sol.unknown_reason == "time_limit");
}

TEST_CASE("dimension mismatch is rejected") {
  ConicProblem p = lp_problem();
  p.cones.back().size = 2;  // spans no longer partition the vector
  CHECK_THROWS_AS(solve(p), DimensionMismatch);
}

TEST_CASE("property: Farkas exactness on 1000 random LPs") {
  std::mt19937 rng(123456);
  std::uniform_int_distribution<int> pn(1, 6), nn(1, 4);
  std::uniform_real_distribution<double> entry(-2.0, 2.0), rhsd(-1.0, 1.0);
  int feas = 0, infeas = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int p = pn(rng), n = nn(rng);
    Eigen::MatrixXd rows(p, n);
    Eigen::VectorXd rhs(p);
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < n; ++j) rows(i, j) = entry(rng);
      rhs[i] = rhsd(rng);
    }
    const LpResult r = solve_lp(rows, rhs);
    if (r.kind == LpResult::Kind::kFeasible) {
      ++feas;
      CHECK(((rows * r.witness - rhs).array() <= 1e-8).all());
    } else if (r.kind == LpResult::Kind::kInfeasible) {
      ++infeas;
      CHECK(r.farkas.minCoeff() >= 0.0);
      CHECK((rows.transpose() * r.farkas).lpNorm<Eigen::Infinity>() <= 1e-8);
      CHECK(std::abs(rhs.dot(r.farkas) + 1.0) <= 1e-8);
    } else {
      FAIL("unexpected Unknown on trial ", trial, ": ", r.reason);
    }
  }
  // both branches must actually be exercised
  CHECK(feas > 100);
  CHECK(infeas > 100);
}

TEST_CASE("property: weak duality on random optimal LPs") {
  std::mt19937 rng(777);
  std::uniform_real_distribution<double> entry(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    // min c'u s.t. rows*u <= rhs with a box keeping it bounded
    const int n = 2;
    Eigen::MatrixXd rows(2 * n + 2, n);
    Eigen::VectorXd rhs(2 * n + 2);
    for (int i = 0; i < n; ++i) {
      rows.row(2 * i).setZero();
      rows(2 * i, i) = 1.0;
      rhs[2 * i] = 1.0;
      rows.row(2 * i + 1).setZero();
      rows(2 * i + 1, i) = -1.0;
      rhs[2 * i + 1] = 1.0;
    }
    for (int j = 0; j < n; ++j) {
      rows(2 * n, j) = entry(rng);
      rows(2 * n + 1, j) = entry(rng);
    }
    rhs[2 * n] = 1.5;
    rhs[2 * n + 1] = 1.5;

    ConicProblem p;
    const int m = static_cast<int>(rows.rows());
    p.num_vars = n + m;
    p.objective = Eigen::VectorXd::Zero(p.num_vars);
    for (int j = 0; j < n; ++j) p.objective[j] = entry(rng);
    p.eq_rhs = rhs;
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        if (rows(i, j) != 0.0) t.emplace_back(i, j, rows(i, j));
      }
      t.emplace_back(i, n + i, 1.0);
    }
    p.eq_matrix.resize(m, p.num_vars);
    p.eq_matrix.setFromTriplets(t.begin(), t.end());
    p.cones.push_back({ConeKind::kZero, 0, n, 0});
    p.cones.push_back({ConeKind::kNonnegative, n, m, 0});

    const ConicSolution sol = solve(p);
    REQUIRE(sol.status == SolveStatus::kOptimal);
    const double dual_obj = -p.eq_rhs.dot(sol.dual_eq);
    const double scale = std::max(1.0, std::abs(sol.objective));
    CHECK(sol.objective >= dual_obj - 1e-6 * scale);
  }
}
