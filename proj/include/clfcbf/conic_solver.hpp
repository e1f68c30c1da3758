#pragma once

#include <limits>
#include <string>

#include "clfcbf/conic_problem.hpp"

namespace clfcbf {

struct SolverSettings {
  int max_iters = 200;
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  double feas_tol = 1e-9;
  // Reduced tolerance accepted when the iteration stalls near the solution
  // (no strictly complementary point, or the double-precision KKT floor).
  // The actual residuals are always reported in SolverStats.
  double accept_tol = 1e-5;
  double time_limit_s = std::numeric_limits<double>::infinity();
  // Ruiz equilibration sweeps applied to the problem data (0 disables).
  int equilibration_iters = 10;
  bool verbose = false;
};

enum class SolveStatus { kOptimal, kPrimalInfeasible, kDualInfeasible, kUnknown };

const char* to_string(SolveStatus status);

struct SolverStats {
  int iterations = 0;
  double primal_residual = std::numeric_limits<double>::quiet_NaN();
  double dual_residual = std::numeric_limits<double>::quiet_NaN();
  double duality_gap = std::numeric_limits<double>::quiet_NaN();
  double solve_seconds = 0.0;
};

// Result of a conic solve.
//  kOptimal:            primal/dual/slack hold the de-homogenized solution and
//                       the reported residuals are at or below the tolerances.
//  kPrimalInfeasible:   dual_eq/dual_cone hold a Farkas ray normalized so that
//                       eq_rhsᵀ dual_eq = -1; Aᵀ dual_eq matches the scattered
//                       dual_cone on cone spans and vanishes on free spans.
//  kDualInfeasible:     primal/slack hold an unbounded improving ray with
//                       objectiveᵀ primal = -1.
//  kUnknown:            unknown_reason says why (time limit, max iters, ...).
struct ConicSolution {
  SolveStatus status = SolveStatus::kUnknown;
  std::string unknown_reason;
  Eigen::VectorXd primal;     // x
  Eigen::VectorXd dual_eq;    // y, one per equality row
  Eigen::VectorXd dual_cone;  // z, stacked over non-free cone spans
  Eigen::VectorXd slack;      // s, same layout as dual_cone
  double objective = std::numeric_limits<double>::quiet_NaN();
  SolverStats stats;
};

// Embedded primal-dual interior-point solver (homogeneous self-dual
// embedding with Nesterov-Todd scaling) for the standard form of
// ConicProblem. Deterministic and single-threaded per call; distinct
// problems may be solved concurrently.
ConicSolution solve(const ConicProblem& problem, const SolverSettings& settings = {});

// Pointwise Farkas oracle for `rows * u <= rhs`.
//  kFeasible:   witness satisfies rows*u <= rhs + 1e-8 (verified).
//  kInfeasible: farkas z >= 0, ||zᵀ rows||_inf <= 1e-8, rhsᵀ z = -1 +- 1e-8
//               (verified before returning).
//  kUnknown:    the backend could not certify either way.
struct LpResult {
  enum class Kind { kFeasible, kInfeasible, kUnknown } kind = Kind::kUnknown;
  Eigen::VectorXd witness;
  Eigen::VectorXd farkas;
  std::string reason;
};

LpResult solve_lp(const Eigen::MatrixXd& rows, const Eigen::VectorXd& rhs,
                  const SolverSettings& settings = {});

}  // namespace clfcbf
