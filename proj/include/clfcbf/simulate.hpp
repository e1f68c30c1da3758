#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clfcbf/control_system.hpp"

namespace clfcbf {

// Minimum-effort admissible input at a state: minimize |u| subject to the
// CLF row, the CBF row, and the input polytope (solved as a second-order cone
// program through the conic backend). An infeasible QP is exactly the
// runtime incompatibility event and carries the verified Farkas certificate.
struct QpResult {
  enum class Kind { kInput, kInfeasible } kind = Kind::kInfeasible;
  Eigen::VectorXd input;
  Eigen::VectorXd farkas;
};

QpResult clf_cbf_qp(const ControlAffineSystem& sys, const CertificatePair& cert,
                    const Eigen::VectorXd& state, const SolverSettings& settings = {});

// Reusable controller that caches the symbolic Lambda/xi rows.
class ClfCbfController {
 public:
  ClfCbfController(const ControlAffineSystem& sys, const CertificatePair& cert);
  QpResult control(const Eigen::VectorXd& state, const SolverSettings& settings = {}) const;

 private:
  const ControlAffineSystem& sys_;
  LambdaXi symbolic_;
};

struct Trajectory {
  std::vector<double> times;                // size N+1
  std::vector<Eigen::VectorXd> states;      // size N+1
  std::vector<Eigen::VectorXd> inputs;      // size N (zero-order hold)
  std::vector<double> V_values;             // size N+1
  std::vector<double> h_values;             // size N+1
  std::optional<double> qp_infeasible_at;   // time of an early stop, if any
};

// Fixed-step fourth-order integration with the QP input held over each step.
// Requires x0 in the compatible region and on the constraint manifold; stops
// early (with the event time recorded) if the QP ever becomes infeasible.
Trajectory simulate(const ControlAffineSystem& sys, const CertificatePair& cert,
                    const Eigen::VectorXd& x0, double t_final, double dt,
                    const SolverSettings& settings = {});

// CSV with header t, x1..xn, u1..um, V, h (inputs blank on the final row).
std::string trajectory_to_csv(const ControlAffineSystem& sys, const Trajectory& traj);

}  // namespace clfcbf
