#include "clfcbf/riccati.hpp"

#include <complex>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace clfcbf {

namespace {

double care_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd K = R.ldlt().solve(B.transpose() * P);
  const Eigen::MatrixXd res = A.transpose() * P + P * A - P * B * K + Q;
  return res.cwiseAbs().maxCoeff();
}

// Lyapunov solve A_clᵀ X + X A_cl = -W via Kronecker vectorization; the
// dimensions here are small enough for the dense n² x n² system.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A_cl, const Eigen::MatrixXd& W) {
  const int n = static_cast<int>(A_cl.rows());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n * n, n * n);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      // vec(AᵀX) = (I ⊗ Aᵀ) vec(X); vec(X A) = (Aᵀ ⊗ I) vec(X)
      M.block(j * n, j * n, n, n) += A_cl.transpose();
      M.block(j * n, i * n, n, n) += A_cl(i, j) * I;
    }
  }
  Eigen::VectorXd rhs(n * n);
  for (int j = 0; j < n; ++j) rhs.segment(j * n, n) = -W.col(j);
  const Eigen::VectorXd x = M.partialPivLu().solve(rhs);
  Eigen::MatrixXd X(n, n);
  for (int j = 0; j < n; ++j) X.col(j) = x.segment(j * n, n);
  return 0.5 * (X + X.transpose());
}

}  // namespace

CareResult solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                      const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw std::invalid_argument("CARE dimension mismatch");
  }
  const Eigen::MatrixXd Rinv_Bt = R.ldlt().solve(B.transpose());

  Eigen::MatrixXd H(2 * n, 2 * n);
  H << A, -B * Rinv_Bt, -Q, -A.transpose();

  Eigen::EigenSolver<Eigen::MatrixXd> es(H);
  if (es.info() != Eigen::Success) throw RiccatiNoConvergence("Hamiltonian eigensolver failed");

  // stack the eigenvectors of the stable (Re < 0) eigenvalues
  Eigen::MatrixXcd basis(2 * n, n);
  int count = 0;
  for (int k = 0; k < 2 * n; ++k) {
    if (es.eigenvalues()[k].real() < -1e-9) {
      if (count == n) throw NotStabilizable("more than n stable Hamiltonian eigenvalues");
      basis.col(count++) = es.eigenvectors().col(k);
    }
  }
  if (count != n) {
    throw NotStabilizable("Hamiltonian has no n-dimensional stable subspace");
  }
  const Eigen::MatrixXcd X1 = basis.topRows(n);
  const Eigen::MatrixXcd X2 = basis.bottomRows(n);
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(X1);
  if (lu.rank() < n) throw NotStabilizable("stable subspace not a graph over the state space");
  Eigen::MatrixXd P = (X2 * lu.inverse()).real();
  P = 0.5 * (P + P.transpose());

  // Newton-Kleinman polish
  double residual = care_residual(A, B, Q, R, P);
  for (int it = 0; it < 20 && residual > 1e-12; ++it) {
    const Eigen::MatrixXd K = R.ldlt().solve(B.transpose() * P);
    const Eigen::MatrixXd A_cl = A - B * K;
    const Eigen::MatrixXd W = Q + K.transpose() * R * K;
    const Eigen::MatrixXd P_next = solve_lyapunov(A_cl, W);
    const double next_residual = care_residual(A, B, Q, R, P_next);
    if (!P_next.allFinite() || next_residual >= residual) break;
    P = P_next;
    residual = next_residual;
  }
  if (residual > 1e-8) {
    throw RiccatiNoConvergence("CARE residual " + std::to_string(residual) + " above 1e-8");
  }
  return {P, residual};
}

}  // namespace clfcbf
