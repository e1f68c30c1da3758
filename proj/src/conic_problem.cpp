#include "clfcbf/conic_problem.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace clfcbf {

void ConicProblem::validate() const {
  if (objective.size() != num_vars) {
    throw DimensionMismatch("objective length != num_vars");
  }
  if (eq_matrix.cols() != num_vars) {
    throw DimensionMismatch("equality matrix column count != num_vars");
  }
  if (eq_matrix.rows() != eq_rhs.size()) {
    throw DimensionMismatch("equality matrix row count != rhs length");
  }
  int cursor = 0;
  for (const ConeSpan& span : cones) {
    if (span.start != cursor) {
      throw DimensionMismatch("cone spans must be contiguous and ordered");
    }
    if (span.size <= 0) throw DimensionMismatch("empty cone span");
    if (span.kind == ConeKind::kPsd && span.size != svec_size(span.psd_dim)) {
      throw DimensionMismatch("psd span size != dim*(dim+1)/2");
    }
    cursor += span.size;
  }
  if (cursor != num_vars) {
    throw DimensionMismatch("cone spans do not cover the variable vector");
  }
}

namespace {

std::string fmt(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

const char* kind_name(ConeKind k) {
  switch (k) {
    case ConeKind::kZero: return "zero";
    case ConeKind::kNonnegative: return "nonneg";
    case ConeKind::kSecondOrder: return "soc";
    case ConeKind::kPsd: return "psd";
  }
  return "?";
}

}  // namespace

std::string ConicProblem::serialize() const {
  std::ostringstream out;
  out << "conic-problem v1\n";
  out << "vars " << num_vars << "\n";
  out << "equalities " << num_equalities() << " " << eq_matrix.nonZeros() << "\n";
  for (int col = 0; col < eq_matrix.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(eq_matrix, col); it; ++it) {
      out << it.row() << " " << it.col() << " " << fmt(it.value()) << "\n";
    }
  }
  out << "rhs";
  for (int i = 0; i < eq_rhs.size(); ++i) out << " " << fmt(eq_rhs[i]);
  out << "\n";
  out << "objective";
  for (int i = 0; i < objective.size(); ++i) out << " " << fmt(objective[i]);
  out << "\n";
  out << "cones " << cones.size() << "\n";
  for (const ConeSpan& span : cones) {
    out << kind_name(span.kind) << " " << span.start << " "
        << (span.kind == ConeKind::kPsd ? span.psd_dim : span.size) << "\n";
  }
  return out.str();
}

Eigen::MatrixXd svec_to_matrix(const Eigen::VectorXd& v, int dim) {
  static const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXd m(dim, dim);
  int pos = 0;
  for (int j = 0; j < dim; ++j) {
    for (int i = j; i < dim; ++i, ++pos) {
      const double value = (i == j) ? v[pos] : v[pos] * kInvSqrt2;
      m(i, j) = value;
      m(j, i) = value;
    }
  }
  return m;
}

Eigen::VectorXd matrix_to_svec(const Eigen::MatrixXd& m) {
  static const double kSqrt2 = std::sqrt(2.0);
  const int dim = static_cast<int>(m.rows());
  Eigen::VectorXd v(svec_size(dim));
  int pos = 0;
  for (int j = 0; j < dim; ++j) {
    for (int i = j; i < dim; ++i, ++pos) {
      v[pos] = (i == j) ? m(i, j) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
    }
  }
  return v;
}

}  // namespace clfcbf
