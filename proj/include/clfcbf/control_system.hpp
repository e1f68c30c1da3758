#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "clfcbf/conic_solver.hpp"
#include "clfcbf/polynomial.hpp"

namespace clfcbf {

// Extended class-kappa rate function as a polynomial with zero constant term:
// kappa(t) = coeffs[0] t + coeffs[1] t² + ... Synthesis uses the linear case;
// verification accepts any zero-at-zero polynomial (the monotone-increasing
// property cannot be checked globally and is not enforced).
struct KappaFunction {
  std::vector<double> coeffs;

  static KappaFunction linear(double gain) { return {{gain}}; }
  bool is_linear() const { return coeffs.size() == 1; }
  double linear_gain() const {
    if (!is_linear()) throw std::logic_error("kappa is not linear");
    return coeffs[0];
  }
  double evaluate(double t) const;
  Polynomial apply(const Polynomial& p) const;  // kappa(p(x)) by composition
};

// Control-affine polynomial system
//   xdot = f(x) + g(x) u,   u in { A u <= c },   e(x) = 0,
// with the equilibrium at the origin (f(0) = 0, e(0) = 0, both validated).
// Systems whose physical equilibrium needs a nonzero input (the quadrotor's
// hover thrust) are expressed in shifted input coordinates; nominal_input
// records the raw input that the shifted origin corresponds to.
struct ControlAffineSystem {
  VariableSet vars;
  int num_inputs = 0;
  std::vector<Polynomial> f;
  std::vector<std::vector<Polynomial>> g;  // num_states rows, num_inputs cols
  Eigen::MatrixXd input_A;                 // p x num_inputs; 0 rows = unconstrained
  Eigen::VectorXd input_c;                 // p
  std::vector<Polynomial> state_constraints;  // e(x), possibly empty
  Eigen::VectorXd nominal_input;           // raw input at the origin (empty = zero)
  std::string builtin;                     // "", "toy", "quadrotor", "double_integrator"

  int num_states() const { return static_cast<int>(f.size()); }
  int num_input_rows() const { return static_cast<int>(input_A.rows()); }
  std::vector<int> state_indices() const;

  void validate() const;
  Eigen::VectorXd dynamics(const Eigen::VectorXd& state, const Eigen::VectorXd& input) const;
  Eigen::VectorXd constraint_values(const Eigen::VectorXd& state) const;
};

struct CertificatePair {
  Polynomial V;
  Polynomial h;
  KappaFunction kappa_V = KappaFunction::linear(0.1);
  KappaFunction kappa_h = KappaFunction::linear(0.1);
};

struct UnsafeRegion {
  enum class Mode { kUnion, kIntersection };
  Mode mode = Mode::kUnion;
  std::vector<Polynomial> l;  // unsafe iff any (union) / all (intersection) l_j <= 0
};

struct LieDerivatives {
  Polynomial along_f;
  std::vector<Polynomial> along_g;  // one per input column
};

// L_f phi = d(phi)/dx · f,  L_g phi = d(phi)/dx · g.
LieDerivatives lie_derivatives(const ControlAffineSystem& sys, const Polynomial& phi);

// The stacked input-feasibility system Lambda(x) u <= xi(x) over C ∩ D, rows
// ordered [L_g V; -L_g h; A] and [-kappa_V(V) - L_f V; kappa_h(h) + L_f h; c].
struct LambdaXi {
  std::vector<std::vector<Polynomial>> lambda;  // (p+2) x num_inputs
  std::vector<Polynomial> xi;                   // p+2
};

LambdaXi assemble_lambda_xi(const ControlAffineSystem& sys, const CertificatePair& cert);

// Numeric instantiation at a state.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> lambda_xi_at(const LambdaXi& symbolic,
                                                         const Eigen::VectorXd& state);

struct SolverUnknownError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PointwiseResult {
  enum class Kind { kCompatible, kIncompatible, kNotInRegion } kind;
  Eigen::VectorXd input;   // witness u in U (kCompatible)
  Eigen::VectorXd farkas;  // verified certificate z (kIncompatible)
};

// Region-membership tolerances: h >= -1e-9, V <= 1 + 1e-9 (avoids boundary
// flapping in region charts).
inline constexpr double kRegionTol = 1e-9;
// States handed to the pointwise oracle must satisfy |e(x)| <= this.
inline constexpr double kManifoldTol = 1e-6;

// Caches the symbolic Lambda/xi so grids of pointwise queries stay cheap.
// Queries are independent and may run concurrently.
class CompatibilityOracle {
 public:
  CompatibilityOracle(const ControlAffineSystem& sys, const CertificatePair& cert);
  PointwiseResult query(const Eigen::VectorXd& state, const SolverSettings& settings = {}) const;

 private:
  const ControlAffineSystem& sys_;
  CertificatePair cert_;
  LambdaXi symbolic_;
};

// NotInRegion iff h(x) < 0 or V(x) > 1 (with kRegionTol); otherwise the exact
// pointwise Farkas LP decides. Throws SolverUnknownError if the LP backend
// cannot certify either way, std::invalid_argument if x is off the manifold.
PointwiseResult pointwise_compatibility(const ControlAffineSystem& sys,
                                        const CertificatePair& cert,
                                        const Eigen::VectorXd& state,
                                        const SolverSettings& settings = {});

// ---------------------------------------------------------------------------
// Built-in example systems

// Unicycle-style toy system recast to polynomial form with x = [sin th,
// cos th - 1, gamma], unsafe half-space x1 + x2 + x3 + 2 <= 0.
std::pair<ControlAffineSystem, UnsafeRegion> make_toy_system();

// Display-coordinate map of the toy system: (theta, gamma) -> state.
Eigen::Vector3d toy_state_from_angles(double theta, double gamma);

struct QuadrotorParams {
  double mass = 0.775;
  double arm_length = 0.15;
  Eigen::Vector3d inertia{0.0015, 0.0025, 0.0035};
  double thrust_to_torque = 0.0245;
  double gravity = 9.81;
  // per-rotor thrust limit as a multiple of per-rotor hover thrust
  double max_thrust_factor = 3.0;
};

// 13-state quadrotor (position, shifted unit quaternion, linear and angular
// velocity), 4 rotor thrusts, algebraic constraint |q|² = 1 expressed so that
// e(0) = 0. Inputs are shifted by hover so the origin is an equilibrium; the
// raw box 0 <= u_i <= u_max becomes the polytope A u <= c in shifted inputs.
ControlAffineSystem make_quadrotor_system(const QuadrotorParams& params = {});

ControlAffineSystem make_double_integrator();

}  // namespace clfcbf
