#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace clfcbf {

// Cone kinds for contiguous variable spans of the standard form
//   min cᵀx  s.t.  A x = b,  x restricted span-wise.
// kZero marks free variables (their dual block is pinned to zero; this is the
// usual zero-cone convention for unrestricted scalars). kPsd spans hold the
// scaled lower-triangular vectorization of a symmetric matrix, column-major,
// with off-diagonal entries multiplied by sqrt(2) so that the Euclidean inner
// product of two svec vectors equals the trace inner product of the matrices.
enum class ConeKind { kZero, kNonnegative, kSecondOrder, kPsd };

struct ConeSpan {
  ConeKind kind;
  int start = 0;
  int size = 0;     // length of the variable span (svec length for kPsd)
  int psd_dim = 0;  // matrix dimension for kPsd, else 0
};

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConicProblem {
  int num_vars = 0;
  Eigen::SparseMatrix<double> eq_matrix;  // m x num_vars
  Eigen::VectorXd eq_rhs;                 // m
  std::vector<ConeSpan> cones;            // spans partition [0, num_vars)
  Eigen::VectorXd objective;              // minimized

  int num_equalities() const { return static_cast<int>(eq_rhs.size()); }

  // Throws DimensionMismatch unless spans partition the variable vector and
  // all dimensions agree.
  void validate() const;

  // Deterministic text serialization (sparse triplets + cone list), see
  // docs/conic_form.md. Used for backend debugging and byte-stability tests.
  std::string serialize() const;
};

inline int svec_size(int dim) { return dim * (dim + 1) / 2; }

// svec position of matrix entry (i, j), i >= j, for dimension `dim`.
inline int svec_index(int i, int j, int dim) {
  return j * dim - j * (j - 1) / 2 + (i - j);
}

Eigen::MatrixXd svec_to_matrix(const Eigen::VectorXd& v, int dim);
Eigen::VectorXd matrix_to_svec(const Eigen::MatrixXd& m);

}  // namespace clfcbf
