#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "clfcbf/sos_program.hpp"

using namespace clfcbf;

namespace {

VariableSet make_vars(int n) {
  VariableSet vars;
  for (int i = 0; i < n; ++i) vars.add("x" + std::to_string(i + 1));
  return vars;
}

}  // namespace

TEST_CASE("new_free_polynomial slot counts") {
  SosProgram prog;
  CHECK(prog.new_free_polynomial({0}, 1).slots.size() == 2);
  CHECK(prog.new_free_polynomial({0, 1}, 2).slots.size() == 6);  // C(4,2)
  CHECK(prog.new_free_polynomial({0, 1}, 0).slots.size() == 1);
}

TEST_CASE("sos constraint on (x1-1)^2 is feasible with the expected gram") {
  VariableSet vars = make_vars(1);
  SosProgram prog;
  const PolyExpr expr{parse_polynomial("(x1 - 1)^2", vars)};
  const GramHandle h = prog.add_sos_constraint(expr);
  const ConicSolution sol = solve(prog.compile());
  REQUIRE(sol.status == SolveStatus::kOptimal);
  const auto rec = prog.recover(sol);
  const GramCertificate gram = rec.gram(h);
  REQUIRE(gram.basis.size() == 2);  // [1, x1]
  const CheckReport report = check_sos_certificate(parse_polynomial("(x1 - 1)^2", vars), gram);
  CHECK(report.passed);
  CHECK(report.min_eigenvalue >= -1e-8);
  // the unique gram here is [[1, -1], [-1, 1]] with eigenvalues {0, 2}
  CHECK(gram.matrix(0, 0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(gram.matrix(0, 1) == doctest::Approx(-1.0).epsilon(1e-5));
}

TEST_CASE("sos constraint on -x1^2 is infeasible") {
  VariableSet vars = make_vars(1);
  SosProgram prog;
  prog.add_sos_constraint(PolyExpr{parse_polynomial("0 - x1^2", vars)});
  const ConicSolution sol = solve(prog.compile());
  CHECK(sol.status == SolveStatus::kPrimalInfeasible);
  CHECK_THROWS_AS(prog.recover(sol), StatusNotFeasible);
}

TEST_CASE("sos constraint on 2x1^2 matches the single term") {
  VariableSet vars = make_vars(1);
  SosProgram prog;
  const GramHandle h = prog.add_sos_constraint(PolyExpr{parse_polynomial("2*x1^2", vars)});
  const ConicSolution sol = solve(prog.compile());
  REQUIRE(sol.status == SolveStatus::kOptimal);
  const GramCertificate gram = prog.recover(sol).gram(h);
  // basis [1, x1]: the constant and cross rows are pinned to zero, so the
  // x1-diagonal carries the full weight 2
  const CheckReport report = check_sos_certificate(parse_polynomial("2*x1^2", vars), gram);
  CHECK(report.passed);
  CHECK(gram.matrix(1, 1) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(std::abs(gram.matrix(0, 0)) <= 1e-7);
}

TEST_CASE("sdsos: diagonal and binomial forms feasible, indefinite form not") {
  VariableSet vars = make_vars(2);

  SosProgram p1;
  p1.add_sdsos_constraint(PolyExpr{parse_polynomial("x1^2 + x2^2", vars)});
  CHECK(solve(p1.compile()).status == SolveStatus::kOptimal);

  SosProgram p2;
  p2.add_sdsos_constraint(PolyExpr{parse_polynomial("x1^2 + 4*x1*x2 + x2^2", vars)});
  CHECK(solve(p2.compile()).status != SolveStatus::kOptimal);

  SosProgram p3;
  const GramHandle h = p3.add_sdsos_constraint(PolyExpr{parse_polynomial("(x1 + x2)^2", vars)});
  const ConicSolution sol = solve(p3.compile());
  REQUIRE(sol.status == SolveStatus::kOptimal);
  const GramCertificate gram = p3.recover(sol).gram(h);
  CHECK(check_sos_certificate(parse_polynomial("(x1 + x2)^2", vars), gram).passed);
}

TEST_CASE("linear equality pins slots; zero expression is a no-op") {
  SosProgram prog;
  DecisionPolynomial v = prog.new_free_polynomial({0}, 1);  // c0 + c1 x1
  // pin the constant slot to zero and the linear slot to 3
  Eigen::VectorXd origin = Eigen::VectorXd::Zero(1);
  prog.add_scalar_eq(v.expr().evaluate(origin), 0.0);
  prog.add_scalar_eq(LinExpr::scalar(v.slots[1]), 3.0);
  prog.add_linear_eq(PolyExpr{});  // identically zero: accepted, no rows
  // keep the program bounded with a dummy cone variable
  prog.add_scalar_bounds(LinExpr::scalar(v.slots[1]), -10.0, 10.0);
  const ConicSolution sol = solve(prog.compile());
  REQUIRE(sol.status == SolveStatus::kOptimal);
  const Polynomial vp = prog.recover(sol).value(v);
  CHECK(vp.constant_term() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(vp.coefficient(Monomial::variable(0)) == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("scalar bounds: interval on a free functional") {
  SosProgram prog;
  const int t = prog.new_scalar();
  prog.add_scalar_bounds(LinExpr::scalar(t), 0.5, 2.0);
  prog.set_objective(LinExpr::scalar(t));
  const ConicSolution sol = solve(prog.compile());
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.primal[t] == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("bilinear products are rejected at build time") {
  SosProgram prog;
  DecisionPolynomial a = prog.new_free_polynomial({0}, 1);
  DecisionPolynomial b = prog.new_free_polynomial({0}, 1);
  CHECK_THROWS_AS(a.expr() * b.expr(), BilinearExpression);
}

TEST_CASE("compile: min t subject to t >= 1 through the program layer") {
  SosProgram prog;
  const int t = prog.new_scalar();
  prog.add_scalar_bounds(LinExpr::scalar(t), 1.0, std::numeric_limits<double>::infinity());
  prog.set_objective(LinExpr::scalar(t));
  const ConicSolution sol = solve(prog.compile());
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("check_sos_certificate hand cases") {
  VariableSet vars = make_vars(1);
  GramCertificate good;
  good.basis = {Monomial(), Monomial::variable(0)};
  good.matrix.resize(2, 2);
  good.matrix << 1.0, -1.0, -1.0, 1.0;
  const CheckReport ok = check_sos_certificate(parse_polynomial("(x1 - 1)^2", vars), good);
  CHECK(ok.passed);
  CHECK(ok.min_eigenvalue == doctest::Approx(0.0).epsilon(1e-12));

  GramCertificate bad;
  bad.basis = {Monomial::variable(0)};
  bad.matrix = Eigen::MatrixXd::Constant(1, 1, -1.0);
  const CheckReport fail = check_sos_certificate(parse_polynomial("x1^2", vars), bad);
  CHECK_FALSE(fail.passed);
  CHECK(fail.max_residual == doctest::Approx(2.0));
  CHECK(fail.min_eigenvalue == doctest::Approx(-1.0));

  const CheckReport zero = check_sos_certificate(Polynomial(), GramCertificate{});
  CHECK(zero.passed);

  GramCertificate mismatched;
  mismatched.basis = {Monomial()};
  mismatched.matrix = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(check_sos_certificate(Polynomial(), mismatched), BasisMismatch);
}

TEST_CASE("determinism: identical programs compile to identical bytes") {
  auto build = [] {
    VariableSet vars = make_vars(2);
    SosProgram prog;
    DecisionPolynomial d = prog.new_free_polynomial({0, 1}, 2);
    prog.add_sos_constraint(d.expr() + PolyExpr{parse_polynomial("x1^2 + x2^2", vars)});
    prog.add_scalar_bounds(LinExpr::scalar(d.slots[0]), -1.0, 1.0);
    prog.set_objective(LinExpr::scalar(d.slots[0]));
    return prog.compile().serialize();
  };
  CHECK(build() == build());
}

TEST_CASE("sign symmetry: gram is block-diagonal across parity classes") {
  VariableSet vars = make_vars(2);  // x1 plain, x2 sign-symmetric
  SosProgram prog;
  SignSymmetry sym{{1}};
  const Polynomial p = parse_polynomial("x1^2 + x2^2 + 1", vars);
  const GramHandle h =
      prog.add_sos_constraint(PolyExpr{p}, monomial_basis({0, 1}, 1), sym);
  const ConicSolution sol = solve(prog.compile());
  REQUIRE(sol.status == SolveStatus::kOptimal);
  const GramCertificate gram = prog.recover(sol).gram(h);
  CHECK(check_sos_certificate(p, gram).passed);
  // basis is reordered into classes {1, x1} and {x2}; cross entries are zero
  for (std::size_t i = 0; i < gram.basis.size(); ++i) {
    for (std::size_t j = 0; j < gram.basis.size(); ++j) {
      const int pi = gram.basis[i].exponent_of(1) % 2;
      const int pj = gram.basis[j].exponent_of(1) % 2;
      if (pi != pj) CHECK(gram.matrix(i, j) == 0.0);
    }
  }
}

TEST_CASE("property: sos-constructed polynomials compile feasible and round trip") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> coeff(-2.0, 2.0);
  VariableSet vars = make_vars(2);
  for (int trial = 0; trial < 100; ++trial) {
    // p = sum of squares of random quadratics over {x1, x2}
    Polynomial p;
    const auto basis = monomial_basis({0, 1}, 1);
    for (int k = 0; k < 2; ++k) {
      Polynomial q;
      for (const Monomial& m : basis) q.add_term(m, coeff(rng));
      p = p + q * q;
    }
    SosProgram prog;
    const GramHandle h = prog.add_sos_constraint(PolyExpr{p});
    const ConicSolution sol = solve(prog.compile());
    REQUIRE(sol.status == SolveStatus::kOptimal);
    const CheckReport report = check_sos_certificate(p, prog.recover(sol).gram(h), 1e-6);
    CHECK(report.passed);
  }
}

TEST_CASE("property: sdsos feasibility implies sos feasibility") {
  std::mt19937 rng(91);
  std::uniform_real_distribution<double> coeff(-1.5, 1.5);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int trial = 0; trial < 50; ++trial) {
    // binomial squares are sdsos by construction
    const auto basis = monomial_basis({0, 1}, 1);
    Polynomial p;
    for (int k = 0; k < 2; ++k) {
      const int i = pick(rng);
      int j = pick(rng);
      if (j == i) j = (j + 1) % 3;
      Polynomial q;
      q.add_term(basis[i], coeff(rng));
      q.add_term(basis[j], coeff(rng));
      p = p + q * q;
    }
    SosProgram sdsos_prog;
    sdsos_prog.add_sdsos_constraint(PolyExpr{p});
    REQUIRE(solve(sdsos_prog.compile()).status == SolveStatus::kOptimal);

    SosProgram sos_prog;
    sos_prog.add_sos_constraint(PolyExpr{p});
    CHECK(solve(sos_prog.compile()).status == SolveStatus::kOptimal);
  }
}

TEST_CASE("property: recovered programs satisfy equalities and certificates") {
  std::mt19937 rng(5150);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  VariableSet vars = make_vars(2);
  for (int trial = 0; trial < 30; ++trial) {
    SosProgram prog;
    DecisionPolynomial d = prog.new_free_polynomial({0, 1}, 2);
    // a known feasible assignment: d = q*q for random q
    Polynomial q;
    for (const Monomial& m : monomial_basis({0, 1}, 1)) q.add_term(m, coeff(rng));
    const Polynomial target = q * q;
    // pin two random coefficients of d to the target's
    const auto& basis = d.basis;
    for (int pin : {1, 3}) {
      prog.add_scalar_eq(LinExpr::scalar(d.slots[pin]), target.coefficient(basis[pin]));
    }
    const GramHandle h = prog.add_sos_constraint(d.expr());
    const ConicSolution sol = solve(prog.compile());
    REQUIRE(sol.status == SolveStatus::kOptimal);
    const auto rec = prog.recover(sol);
    const Polynomial dv = rec.value(d);
    for (int pin : {1, 3}) {
      CHECK(std::abs(dv.coefficient(basis[pin]) - target.coefficient(basis[pin])) <= 1e-6);
    }
    CHECK(check_sos_certificate(dv, rec.gram(h), 1e-6).passed);
  }
}
