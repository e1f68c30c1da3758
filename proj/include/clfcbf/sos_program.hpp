#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "clfcbf/conic_problem.hpp"
#include "clfcbf/conic_solver.hpp"
#include "clfcbf/polynomial.hpp"

namespace clfcbf {

struct BilinearExpression : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StatusNotFeasible : std::runtime_error {
  explicit StatusNotFeasible(SolveStatus s)
      : std::runtime_error(std::string("cannot recover from solver status ") + to_string(s)),
        status(s) {}
  SolveStatus status;
};

struct BasisMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Affine function of decision scalars.
class LinExpr {
 public:
  LinExpr() = default;
  LinExpr(double constant) : constant_(constant) {}  // NOLINT
  static LinExpr scalar(int id);

  const std::map<int, double>& coefficients() const { return coeffs_; }
  double constant() const { return constant_; }
  bool is_constant() const { return coeffs_.empty(); }

  LinExpr& operator+=(const LinExpr& other);
  LinExpr& operator-=(const LinExpr& other);
  LinExpr& operator*=(double k);
  LinExpr operator+(const LinExpr& other) const;
  LinExpr operator-(const LinExpr& other) const;
  LinExpr operator*(double k) const;
  LinExpr operator-() const;

  double evaluate(const Eigen::VectorXd& scalars) const;

 private:
  void prune();
  std::map<int, double> coeffs_;
  double constant_ = 0.0;
};

inline LinExpr operator*(double k, const LinExpr& e) { return e * k; }

// Polynomial whose coefficients are affine in decision scalars. Products of
// two expressions that both carry decision scalars throw BilinearExpression.
class PolyExpr {
 public:
  PolyExpr() = default;
  PolyExpr(const Polynomial& p);  // NOLINT
  PolyExpr(double constant) : PolyExpr(Polynomial(constant)) {}  // NOLINT

  const std::map<Monomial, LinExpr>& terms() const { return terms_; }
  void set_term(const Monomial& m, LinExpr e);
  LinExpr coefficient(const Monomial& m) const;
  int degree() const;
  std::vector<int> variables() const;
  bool has_decision_scalars() const;

  PolyExpr operator+(const PolyExpr& other) const;
  PolyExpr operator-(const PolyExpr& other) const;
  PolyExpr operator-() const;
  PolyExpr operator*(const PolyExpr& other) const;  // at most one side decisioned
  PolyExpr operator*(double k) const;

  PolyExpr differentiate(int var_index) const;
  LinExpr evaluate(const Eigen::VectorXd& point) const;

  // Drops terms whose coefficients are structurally zero.
  void prune();

 private:
  std::map<Monomial, LinExpr> terms_;
};

inline PolyExpr operator*(double k, const PolyExpr& e) { return e * k; }
inline PolyExpr operator*(const Polynomial& p, const PolyExpr& e) { return PolyExpr(p) * e; }

struct DecisionPolynomial {
  std::vector<Monomial> basis;
  std::vector<int> slots;  // one decision scalar per basis monomial
  PolyExpr expr() const;
};

using GramHandle = int;

// SOS decomposition witness: basis m and symmetric G with p = mᵀ G m.
struct GramCertificate {
  std::vector<Monomial> basis;
  Eigen::MatrixXd matrix;
};

struct CheckReport {
  double min_eigenvalue = 0.0;
  double max_residual = 0.0;
  double gram_norm = 0.0;  // max |G_ij|
  double poly_norm = 0.0;  // max |coefficient|
  bool passed = false;
};

// Validates p == mᵀGm and G ⪰ 0 within tol: passes iff
// min_eig >= -tol*(1+gram_norm) and residual <= tol*(1+poly_norm).
CheckReport check_sos_certificate(const Polynomial& p, const GramCertificate& gram,
                                  double tol = 1e-6);

// Declares variables whose sign flips leave the certificate program invariant.
// Gram bases are then partitioned into parity classes and each class gets its
// own PSD (or scaled-diagonally-dominant) block, which is equivalent for
// sign-symmetric data and much smaller.
struct SignSymmetry {
  std::vector<int> variables;
};

// Declarative SOS/SDSOS certificate program over decision scalars, lowered by
// compile() to the standard conic form. Building is single-threaded; the
// compiled problem is immutable.
class SosProgram {
 public:
  SosProgram() = default;

  int num_scalars() const { return next_scalar_; }
  int new_scalar();

  DecisionPolynomial new_free_polynomial(const std::vector<int>& vars, int degree);
  DecisionPolynomial new_free_polynomial(std::vector<Monomial> basis);

  // A polynomial constrained to be SOS, parameterized directly by its Gram
  // matrix entries (no extra matching rows).
  std::pair<PolyExpr, GramHandle> new_sos_polynomial(
      std::vector<Monomial> basis, const std::optional<SignSymmetry>& symmetry = {},
      bool sdsos = false);

  // expr(x) == m(x)ᵀ G m(x) with G PSD; returns the Gram handle.
  GramHandle add_sos_constraint(const PolyExpr& expr);
  GramHandle add_sos_constraint(const PolyExpr& expr, std::vector<Monomial> basis,
                                const std::optional<SignSymmetry>& symmetry = {});

  // Same interface with G scaled diagonally dominant: G = sum of 2x2 PSD
  // blocks, each lowered to a rotated second-order cone.
  GramHandle add_sdsos_constraint(const PolyExpr& expr);
  GramHandle add_sdsos_constraint(const PolyExpr& expr, std::vector<Monomial> basis,
                                  const std::optional<SignSymmetry>& symmetry = {});

  // expr == 0, matched coefficient-wise. An identically zero expr is a no-op.
  void add_linear_eq(const PolyExpr& expr);
  void add_scalar_eq(const LinExpr& e, double value);
  // lo <= e <= hi (either side may be infinite).
  void add_scalar_bounds(const LinExpr& e, double lo, double hi);

  void set_objective(const LinExpr& minimize) { objective_ = minimize; }

  // Trace of the Gram matrix behind `handle` as a linear functional. Pure
  // feasibility programs minimize the summed traces: certificate families are
  // unbounded along Gram rays (grow a multiplier, absorb it in the Gram), and
  // without a bounding objective the central path has no limit point.
  LinExpr gram_trace(GramHandle handle) const;

  ConicProblem compile() const;

  struct Recovered {
    Eigen::VectorXd scalars;
    const SosProgram* program = nullptr;
    Polynomial value(const PolyExpr& e) const;
    Polynomial value(const DecisionPolynomial& p) const;
    GramCertificate gram(GramHandle handle) const;
  };
  // Throws StatusNotFeasible unless the solution is Optimal.
  Recovered recover(const ConicSolution& solution) const;

  int num_gram_handles() const { return static_cast<int>(grams_.size()); }

 private:
  struct ConeAlloc {
    ConeKind kind;
    int first_scalar;
    int count;
    int psd_dim;
  };
  struct SdsosPairBlock {
    int scalar_start;  // 3 contiguous scalars (t0, t1, t2) in a second-order cone
    int i, j;          // basis indices
  };
  struct SdsosDiagBlock {
    int scalar;  // nonnegative scalar
    int i;
  };
  struct GramRecord {
    std::vector<Monomial> basis;        // concatenated parity classes
    std::vector<int> class_offsets;     // class c spans [offsets[c], offsets[c+1])
    std::vector<int> psd_scalar_start;  // per class, for SOS records
    bool sdsos = false;
    std::vector<SdsosPairBlock> pairs;  // for SDSOS records
    std::vector<SdsosDiagBlock> diags;
  };

  std::vector<int> allocate(int count, ConeKind kind, int psd_dim = 0);
  GramRecord make_gram(std::vector<Monomial> basis, const std::optional<SignSymmetry>& symmetry,
                       bool sdsos);
  // The Gram-side quadratic form of record as a PolyExpr.
  PolyExpr gram_form(const GramRecord& record) const;
  GramHandle add_gram_constraint(const PolyExpr& expr, std::vector<Monomial> basis,
                                 const std::optional<SignSymmetry>& symmetry, bool sdsos);

  int next_scalar_ = 0;
  std::vector<ConeAlloc> allocs_;
  std::vector<GramRecord> grams_;
  std::vector<PolyExpr> equalities_;      // expr == 0
  std::vector<LinExpr> scalar_rows_;      // e == rhs
  std::vector<double> scalar_rhs_;
  LinExpr objective_;
};

// Full monomial basis of degree <= degree over vars, keeping only monomials
// whose exponents are even in every listed symmetric variable.
std::vector<Monomial> even_restricted_basis(const std::vector<int>& vars, int degree,
                                            const std::vector<int>& even_vars);

}  // namespace clfcbf
