#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace clfcbf {

// Coefficients with magnitude at or below this are dropped on normalization.
inline constexpr double kCoefficientPruneTol = 1e-12;

struct Variable {
  std::string name;
  int index = -1;
};

// Ordered universe of variables. Indices are assigned by declaration order and
// never change, so every downstream artifact (monomial order, compiled conic
// problems, printed polynomials) is deterministic.
class VariableSet {
 public:
  VariableSet() = default;

  Variable add(const std::string& name);
  bool contains(const std::string& name) const;
  int index_of(const std::string& name) const;  // -1 if absent
  const std::string& name_of(int index) const;
  Variable variable(int index) const { return {name_of(index), index}; }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_by_name_;
};

// Product of variables raised to positive integer powers. Factors are kept
// sorted by variable index with no zero exponents.
class Monomial {
 public:
  Monomial() = default;  // the monomial 1
  explicit Monomial(std::vector<std::pair<int, int>> factors);
  static Monomial variable(int var_index, int exponent = 1);

  int degree() const;
  int exponent_of(int var_index) const;
  bool is_one() const { return factors_.empty(); }
  const std::vector<std::pair<int, int>>& factors() const { return factors_; }

  Monomial operator*(const Monomial& other) const;
  bool operator==(const Monomial& other) const { return factors_ == other.factors_; }
  bool operator!=(const Monomial& other) const { return !(*this == other); }

  // Graded lexicographic: lower total degree first; within a degree, the
  // monomial with the larger exponent on the earliest-index variable first
  // (so x1^2 precedes x1*x2 precedes x2^2).
  bool operator<(const Monomial& other) const;

  double evaluate(const Eigen::VectorXd& values) const;
  std::string to_string(const VariableSet& vars) const;

 private:
  std::vector<std::pair<int, int>> factors_;
};

// Sparse multivariate polynomial with real coefficients. Terms live in a map
// keyed by Monomial, so iteration order is the graded-lex term order and all
// derived computations are deterministic. Immutable value semantics: every
// operation returns a new normalized polynomial.
class Polynomial {
 public:
  Polynomial() = default;  // zero polynomial, empty term map
  Polynomial(double constant);  // NOLINT: implicit by design, mirrors ring use
  explicit Polynomial(const Monomial& m, double coeff = 1.0);
  static Polynomial variable(int var_index) { return Polynomial(Monomial::variable(var_index)); }

  const std::map<Monomial, double>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;  // 0 for the zero polynomial
  double coefficient(const Monomial& m) const;
  double constant_term() const { return coefficient(Monomial()); }
  double max_abs_coefficient() const;
  std::vector<int> variables() const;  // sorted indices actually present

  Polynomial operator+(const Polynomial& other) const;
  Polynomial operator-(const Polynomial& other) const;
  Polynomial operator-() const;
  Polynomial operator*(const Polynomial& other) const;
  Polynomial operator*(double k) const;
  Polynomial pow(int exponent) const;

  bool operator==(const Polynomial& other) const { return terms_ == other.terms_; }
  bool operator!=(const Polynomial& other) const { return !(*this == other); }
  // True when all coefficients match within tol.
  bool almost_equal(const Polynomial& other, double tol) const;

  Polynomial differentiate(int var_index) const;
  double evaluate(const Eigen::VectorXd& values) const;
  double evaluate(const std::map<int, double>& values) const;

  std::string to_string(const VariableSet& vars) const;

  // Adds c * m and re-normalizes; used by builders.
  void add_term(const Monomial& m, double c);

 private:
  void normalize();
  std::map<Monomial, double> terms_;
};

inline Polynomial operator*(double k, const Polynomial& p) { return p * k; }

struct SyntaxError : std::runtime_error {
  SyntaxError(const std::string& what, std::size_t offset_in)
      : std::runtime_error(what + " (at byte " + std::to_string(offset_in) + ")"),
        offset(offset_in) {}
  std::size_t offset;
};

struct UnknownVariable : std::runtime_error {
  explicit UnknownVariable(const std::string& name_in)
      : std::runtime_error("unknown variable '" + name_in + "'"), name(name_in) {}
  std::string name;
};

struct UnboundVariable : std::runtime_error {
  explicit UnboundVariable(int index_in)
      : std::runtime_error("unbound variable #" + std::to_string(index_in)),
        index(index_in) {}
  int index;
};

// Grammar (documented in docs/polynomial_grammar.md): real literals, declared
// variable names, + - * ^ and parentheses; exponents are nonnegative integer
// literals. The result is the expanded canonical form; parse(print(p)) == p.
Polynomial parse_polynomial(const std::string& text, const VariableSet& vars);

// All monomials over `var_indices` with total degree <= max_degree, in graded
// lex order. Size is C(n + d, d).
std::vector<Monomial> monomial_basis(const std::vector<int>& var_indices, int max_degree);

// Formal gradient with respect to the listed variables.
std::vector<Polynomial> gradient(const Polynomial& p, const std::vector<int>& var_indices);

std::int64_t binomial(int n, int k);

}  // namespace clfcbf
