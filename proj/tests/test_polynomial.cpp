#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "clfcbf/polynomial.hpp"

using namespace clfcbf;

namespace {

VariableSet make_vars(int n) {
  VariableSet vars;
  for (int i = 0; i < n; ++i) vars.add("x" + std::to_string(i + 1));
  return vars;
}

Polynomial random_polynomial(std::mt19937& rng, int n_vars, int max_degree,
                             int max_terms = 12) {
  std::uniform_int_distribution<int> n_terms(0, max_terms);
  std::uniform_int_distribution<int> expo(0, max_degree);
  std::uniform_real_distribution<double> coeff(-10.0, 10.0);
  Polynomial p;
  const int terms = n_terms(rng);
  for (int t = 0; t < terms; ++t) {
    std::vector<std::pair<int, int>> factors;
    int budget = max_degree;
    for (int v = 0; v < n_vars; ++v) {
      const int e = std::min(budget, expo(rng));
      budget -= e;
      if (e > 0) factors.emplace_back(v, e);
    }
    p.add_term(Monomial(std::move(factors)), coeff(rng));
  }
  return p;
}

Eigen::VectorXd random_point(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = d(rng);
  return x;
}

}  // namespace

TEST_CASE("parse: unsafe-region polynomial of the toy example") {
  VariableSet vars = make_vars(3);
  const Polynomial p = parse_polynomial("x1 + x2 + x3 + 2", vars);
  CHECK(p.terms().size() == 4);
  CHECK(p.degree() == 1);
  CHECK(p.coefficient(Monomial::variable(0)) == 1.0);
  CHECK(p.constant_term() == 2.0);
}

TEST_CASE("parse: zero polynomial has empty term map") {
  VariableSet vars = make_vars(1);
  const Polynomial p = parse_polynomial("0", vars);
  CHECK(p.is_zero());
  CHECK(p.terms().empty());
  CHECK(p.degree() == 0);
}

TEST_CASE("parse: (x1 - 1)^2 expands to x1^2 - 2 x1 + 1") {
  VariableSet vars = make_vars(1);
  const Polynomial p = parse_polynomial("(x1 - 1)^2", vars);
  Polynomial expected;
  expected.add_term(Monomial::variable(0, 2), 1.0);
  expected.add_term(Monomial::variable(0), -2.0);
  expected.add_term(Monomial(), 1.0);
  CHECK(p == expected);
}

TEST_CASE("parse errors carry location / name") {
  VariableSet vars = make_vars(2);
  CHECK_THROWS_AS(parse_polynomial("x1 + ", vars), SyntaxError);
  CHECK_THROWS_AS(parse_polynomial("x1 ^ x2", vars), SyntaxError);
  CHECK_THROWS_AS(parse_polynomial("(x1 + 1", vars), SyntaxError);
  CHECK_THROWS_AS(parse_polynomial("x9", vars), UnknownVariable);
  try {
    parse_polynomial("x1 + q7", vars);
    FAIL("expected UnknownVariable");
  } catch (const UnknownVariable& e) {
    CHECK(e.name == "q7");
  }
}

TEST_CASE("arithmetic: cancellation, products, scaling") {
  VariableSet vars = make_vars(2);
  const Polynomial x1 = parse_polynomial("x1", vars);
  CHECK((x1 + (-x1)).is_zero());

  const Polynomial prod = parse_polynomial("x1 + 1", vars) * parse_polynomial("x1 - 1", vars);
  CHECK(prod == parse_polynomial("x1^2 - 1", vars));

  const Polynomial scaled = parse_polynomial("x1^2", vars) * 10.0;
  CHECK(scaled == parse_polynomial("10*x1^2", vars));
}

TEST_CASE("differentiate: power rule, independence, hand oracle") {
  VariableSet vars = make_vars(3);
  const Polynomial p = parse_polynomial("x1^2 * x2", vars);
  CHECK(p.differentiate(0) == parse_polynomial("2*x1*x2", vars));
  CHECK(parse_polynomial("x1", vars).differentiate(1).is_zero());
  const Polynomial v = parse_polynomial("10*(x1^2 + x2^2 + x3^2)", vars);
  CHECK(v.differentiate(2) == parse_polynomial("20*x3", vars));
}

TEST_CASE("evaluate: hand arithmetic") {
  VariableSet vars = make_vars(3);
  const Polynomial v = parse_polynomial("10*(x1^2 + x2^2 + x3^2)", vars);
  Eigen::Vector3d x(0.1, 0.0, 0.0);
  CHECK(v.evaluate(x) == doctest::Approx(0.1).epsilon(1e-12));

  const Polynomial l = parse_polynomial("x1 + x2 + x3 + 2", vars);
  Eigen::Vector3d inside(-1.0, -1.0, -1.0);
  CHECK(l.evaluate(inside) == doctest::Approx(-1.0).epsilon(1e-12));

  // all-zeros point returns the constant term
  CHECK(l.evaluate(Eigen::Vector3d::Zero().eval()) == 2.0);

  CHECK_THROWS_AS(l.evaluate(std::map<int, double>{{0, 1.0}}), UnboundVariable);
}

TEST_CASE("monomial_basis: counts and order") {
  auto b1 = monomial_basis({0, 1}, 1);
  REQUIRE(b1.size() == 3);
  CHECK(b1[0].is_one());
  CHECK(b1[1] == Monomial::variable(0));
  CHECK(b1[2] == Monomial::variable(1));

  CHECK(monomial_basis({0, 1, 2}, 0).size() == 1);
  CHECK(monomial_basis({0, 1, 2}, 2).size() == 10);  // C(5,2)

  // graded-lex within a degree: x1^2, x1*x2, x2^2
  auto b2 = monomial_basis({0, 1}, 2);
  REQUIRE(b2.size() == 6);
  CHECK(b2[3] == Monomial::variable(0, 2));
  CHECK(b2[4] == Monomial::variable(0) * Monomial::variable(1));
  CHECK(b2[5] == Monomial::variable(1, 2));

  for (int n = 1; n <= 4; ++n) {
    for (int d = 0; d <= 5; ++d) {
      std::vector<int> idx(n);
      for (int i = 0; i < n; ++i) idx[i] = i;
      CHECK(static_cast<std::int64_t>(monomial_basis(idx, d).size()) == binomial(n + d, d));
    }
  }
}

TEST_CASE("property: print/parse round trip on 1000 random polynomials") {
  std::mt19937 rng(20240701);
  VariableSet vars = make_vars(4);
  for (int i = 0; i < 1000; ++i) {
    const Polynomial p = random_polynomial(rng, 4, 6);
    const Polynomial q = parse_polynomial(p.to_string(vars), vars);
    CHECK(p == q);  // exact term equality
  }
}

TEST_CASE("property: ring axioms on random triples") {
  std::mt19937 rng(42);
  for (int i = 0; i < 200; ++i) {
    const Polynomial a = random_polynomial(rng, 3, 4, 6);
    const Polynomial b = random_polynomial(rng, 3, 4, 6);
    const Polynomial c = random_polynomial(rng, 3, 4, 6);
    CHECK(((a + b) + c).almost_equal(a + (b + c), 1e-9));
    CHECK((a * (b + c)).almost_equal(a * b + a * c, 1e-9));
  }
}

TEST_CASE("property: derivative linearity and product rule") {
  std::mt19937 rng(7);
  for (int i = 0; i < 200; ++i) {
    const Polynomial a = random_polynomial(rng, 3, 4, 6);
    const Polynomial b = random_polynomial(rng, 3, 4, 6);
    for (int v = 0; v < 3; ++v) {
      const Polynomial lhs = (a * b).differentiate(v);
      const Polynomial rhs = a * b.differentiate(v) + b * a.differentiate(v);
      CHECK(lhs.almost_equal(rhs, 1e-9));
      CHECK((a + b).differentiate(v).almost_equal(a.differentiate(v) + b.differentiate(v), 1e-9));
    }
  }
}

TEST_CASE("property: evaluate is a ring homomorphism") {
  std::mt19937 rng(99);
  for (int i = 0; i < 200; ++i) {
    const Polynomial a = random_polynomial(rng, 3, 3, 5);
    const Polynomial b = random_polynomial(rng, 3, 3, 5);
    const Eigen::VectorXd x = random_point(rng, 3);
    const double lhs = (a * b).evaluate(x);
    const double rhs = a.evaluate(x) * b.evaluate(x);
    const double scale = std::max(1.0, std::max(std::abs(lhs), std::abs(rhs)));
    CHECK(std::abs(lhs - rhs) <= 1e-9 * scale);
  }
}

TEST_CASE("printing emits graded-lex order with explicit operators") {
  VariableSet vars = make_vars(2);
  Polynomial p;
  p.add_term(Monomial::variable(1, 2), 3.0);
  p.add_term(Monomial::variable(0), -1.0);
  p.add_term(Monomial(), 2.0);
  CHECK(p.to_string(vars) == "2 - x1 + 3*x2^2");
}
