#include "clfcbf/simulate.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace clfcbf {

namespace {

// min t s.t. (t, u) in the second-order cone, rows u + slack = rhs.
QpResult solve_min_norm(const Eigen::MatrixXd& rows, const Eigen::VectorXd& rhs,
                        const SolverSettings& settings) {
  QpResult out;
  const int p = static_cast<int>(rows.rows());
  const int nu = static_cast<int>(rows.cols());

  ConicProblem prob;
  prob.num_vars = 1 + nu + p;
  prob.objective = Eigen::VectorXd::Zero(prob.num_vars);
  prob.objective[0] = 1.0;
  prob.eq_rhs = rhs;
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < nu; ++j) {
      if (rows(i, j) != 0.0) trips.emplace_back(i, 1 + j, rows(i, j));
    }
    trips.emplace_back(i, 1 + nu + i, 1.0);
  }
  prob.eq_matrix.resize(p, prob.num_vars);
  prob.eq_matrix.setFromTriplets(trips.begin(), trips.end());
  prob.cones.push_back({ConeKind::kSecondOrder, 0, 1 + nu, 0});
  if (p > 0) prob.cones.push_back({ConeKind::kNonnegative, 1 + nu, p, 0});

  const ConicSolution sol = solve(prob, settings);
  if (sol.status == SolveStatus::kOptimal) {
    const Eigen::VectorXd u = sol.primal.segment(1, nu);
    if (p == 0 || ((rows * u - rhs).array() <= 1e-8).all()) {
      out.kind = QpResult::Kind::kInput;
      out.input = u;
      return out;
    }
    throw SolverUnknownError("qp witness failed row verification");
  }
  if (sol.status == SolveStatus::kPrimalInfeasible) {
    Eigen::VectorXd z = sol.dual_eq.cwiseMax(0.0);
    const double scale = -rhs.dot(z);
    if (scale > 0.0) {
      z /= scale;
      if ((rows.transpose() * z).lpNorm<Eigen::Infinity>() <= 1e-8 &&
          std::abs(rhs.dot(z) + 1.0) <= 1e-8) {
        out.kind = QpResult::Kind::kInfeasible;
        out.farkas = z;
        return out;
      }
    }
    throw SolverUnknownError("qp infeasibility certificate failed verification");
  }
  throw SolverUnknownError("qp solve status: " + std::string(to_string(sol.status)) +
                           (sol.unknown_reason.empty() ? "" : " (" + sol.unknown_reason + ")"));
}

}  // namespace

ClfCbfController::ClfCbfController(const ControlAffineSystem& sys, const CertificatePair& cert)
    : sys_(sys), symbolic_(assemble_lambda_xi(sys, cert)) {}

QpResult ClfCbfController::control(const Eigen::VectorXd& state,
                                   const SolverSettings& settings) const {
  if (!state.allFinite()) throw std::invalid_argument("non-finite state");
  const auto [rows, rhs] = lambda_xi_at(symbolic_, state);
  return solve_min_norm(rows, rhs, settings);
}

QpResult clf_cbf_qp(const ControlAffineSystem& sys, const CertificatePair& cert,
                    const Eigen::VectorXd& state, const SolverSettings& settings) {
  return ClfCbfController(sys, cert).control(state, settings);
}

Trajectory simulate(const ControlAffineSystem& sys, const CertificatePair& cert,
                    const Eigen::VectorXd& x0, double t_final, double dt,
                    const SolverSettings& settings) {
  if (!(dt > 0.0) || !(t_final >= 0.0)) throw std::invalid_argument("bad time grid");
  if (cert.h.evaluate(x0) < -kRegionTol || cert.V.evaluate(x0) > 1.0 + kRegionTol) {
    throw std::invalid_argument("x0 outside the compatible region");
  }
  if (!sys.state_constraints.empty() &&
      sys.constraint_values(x0).lpNorm<Eigen::Infinity>() > 1e-9) {
    throw std::invalid_argument("x0 off the constraint manifold");
  }

  const ClfCbfController controller(sys, cert);
  const int steps = static_cast<int>(std::llround(t_final / dt));

  Trajectory traj;
  Eigen::VectorXd x = x0;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  traj.V_values.push_back(cert.V.evaluate(x));
  traj.h_values.push_back(cert.h.evaluate(x));

  for (int k = 0; k < steps; ++k) {
    const QpResult qp = controller.control(x, settings);
    if (qp.kind == QpResult::Kind::kInfeasible) {
      traj.qp_infeasible_at = k * dt;
      break;
    }
    const Eigen::VectorXd& u = qp.input;
    const Eigen::VectorXd k1 = sys.dynamics(x, u);
    const Eigen::VectorXd k2 = sys.dynamics(x + 0.5 * dt * k1, u);
    const Eigen::VectorXd k3 = sys.dynamics(x + 0.5 * dt * k2, u);
    const Eigen::VectorXd k4 = sys.dynamics(x + dt * k3, u);
    x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    traj.inputs.push_back(u);
    traj.times.push_back((k + 1) * dt);
    traj.states.push_back(x);
    traj.V_values.push_back(cert.V.evaluate(x));
    traj.h_values.push_back(cert.h.evaluate(x));
  }
  return traj;
}

namespace {

std::string fmt(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string trajectory_to_csv(const ControlAffineSystem& sys, const Trajectory& traj) {
  std::ostringstream out;
  out << "t";
  for (int i = 0; i < sys.num_states(); ++i) out << "," << sys.vars.name_of(i);
  for (int j = 0; j < sys.num_inputs; ++j) out << ",u" << (j + 1);
  out << ",V,h\n";
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    out << fmt(traj.times[k]);
    for (int i = 0; i < sys.num_states(); ++i) out << "," << fmt(traj.states[k][i]);
    for (int j = 0; j < sys.num_inputs; ++j) {
      out << ",";
      if (k < traj.inputs.size()) out << fmt(traj.inputs[k][j]);
    }
    out << "," << fmt(traj.V_values[k]) << "," << fmt(traj.h_values[k]) << "\n";
  }
  return out.str();
}

}  // namespace clfcbf
