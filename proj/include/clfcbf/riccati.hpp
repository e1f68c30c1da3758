#pragma once

#include <stdexcept>

#include <Eigen/Core>

namespace clfcbf {

struct NotStabilizable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RiccatiNoConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CareResult {
  Eigen::MatrixXd P;  // symmetric stabilizing solution
  double residual;    // ||AᵀP + PA - PBR⁻¹BᵀP + Q||_inf
};

// Continuous algebraic Riccati equation AᵀP + PA - P B R⁻¹ Bᵀ P + Q = 0 via
// the stable invariant subspace of the Hamiltonian, polished with
// Newton-Kleinman steps (Lyapunov solves). Throws NotStabilizable when the
// Hamiltonian has no n-dimensional stable subspace and RiccatiNoConvergence
// when the residual cannot be brought below 1e-8.
CareResult solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                      const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

}  // namespace clfcbf
