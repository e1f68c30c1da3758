#include "clfcbf/control_system.hpp"

#include <cmath>

namespace clfcbf {

double KappaFunction::evaluate(double t) const {
  double acc = 0.0;
  double power = t;
  for (double c : coeffs) {
    acc += c * power;
    power *= t;
  }
  return acc;
}

Polynomial KappaFunction::apply(const Polynomial& p) const {
  Polynomial acc;
  Polynomial power = p;
  for (double c : coeffs) {
    acc = acc + power * c;
    power = power * p;
  }
  return acc;
}

std::vector<int> ControlAffineSystem::state_indices() const {
  std::vector<int> idx(static_cast<std::size_t>(num_states()));
  for (int i = 0; i < num_states(); ++i) idx[static_cast<std::size_t>(i)] = i;
  return idx;
}

void ControlAffineSystem::validate() const {
  const int n = num_states();
  if (vars.size() < n) throw std::invalid_argument("variable set smaller than state dimension");
  if (static_cast<int>(g.size()) != n) throw std::invalid_argument("g row count != state count");
  for (const auto& row : g) {
    if (static_cast<int>(row.size()) != num_inputs) {
      throw std::invalid_argument("g column count != input count");
    }
  }
  if (input_A.rows() != input_c.size()) {
    throw std::invalid_argument("input polytope A/c row mismatch");
  }
  if (input_A.rows() > 0 && input_A.cols() != num_inputs) {
    throw std::invalid_argument("input polytope column count != input count");
  }
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(n);
  for (const Polynomial& fi : f) {
    if (std::abs(fi.evaluate(origin)) > 1e-12) {
      throw std::invalid_argument("f(0) != 0: the origin must be an equilibrium");
    }
  }
  for (const Polynomial& ek : state_constraints) {
    if (std::abs(ek.evaluate(origin)) > 1e-12) {
      throw std::invalid_argument("e(0) != 0: the origin must lie on the constraint manifold");
    }
  }
}

Eigen::VectorXd ControlAffineSystem::dynamics(const Eigen::VectorXd& state,
                                              const Eigen::VectorXd& input) const {
  const int n = num_states();
  Eigen::VectorXd dx(n);
  for (int i = 0; i < n; ++i) {
    double v = f[static_cast<std::size_t>(i)].evaluate(state);
    for (int j = 0; j < num_inputs; ++j) {
      v += g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].evaluate(state) * input[j];
    }
    dx[i] = v;
  }
  return dx;
}

Eigen::VectorXd ControlAffineSystem::constraint_values(const Eigen::VectorXd& state) const {
  Eigen::VectorXd e(static_cast<Eigen::Index>(state_constraints.size()));
  for (std::size_t k = 0; k < state_constraints.size(); ++k) {
    e[static_cast<Eigen::Index>(k)] = state_constraints[k].evaluate(state);
  }
  return e;
}

LieDerivatives lie_derivatives(const ControlAffineSystem& sys, const Polynomial& phi) {
  LieDerivatives out;
  const int n = sys.num_states();
  std::vector<Polynomial> grad;
  grad.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) grad.push_back(phi.differentiate(i));
  for (int i = 0; i < n; ++i) {
    out.along_f =
        out.along_f + grad[static_cast<std::size_t>(i)] * sys.f[static_cast<std::size_t>(i)];
  }
  out.along_g.resize(static_cast<std::size_t>(sys.num_inputs));
  for (int j = 0; j < sys.num_inputs; ++j) {
    Polynomial acc;
    for (int i = 0; i < n; ++i) {
      acc = acc + grad[static_cast<std::size_t>(i)] *
                      sys.g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    out.along_g[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

LambdaXi assemble_lambda_xi(const ControlAffineSystem& sys, const CertificatePair& cert) {
  const LieDerivatives dv = lie_derivatives(sys, cert.V);
  const LieDerivatives dh = lie_derivatives(sys, cert.h);
  const int p = sys.num_input_rows();
  const int nu = sys.num_inputs;

  LambdaXi out;
  out.lambda.resize(static_cast<std::size_t>(p + 2));
  out.xi.resize(static_cast<std::size_t>(p + 2));

  out.lambda[0] = dv.along_g;
  out.xi[0] = -cert.kappa_V.apply(cert.V) - dv.along_f;

  out.lambda[1].resize(static_cast<std::size_t>(nu));
  for (int j = 0; j < nu; ++j) {
    out.lambda[1][static_cast<std::size_t>(j)] = -dh.along_g[static_cast<std::size_t>(j)];
  }
  out.xi[1] = cert.kappa_h.apply(cert.h) + dh.along_f;

  for (int r = 0; r < p; ++r) {
    auto& row = out.lambda[static_cast<std::size_t>(r + 2)];
    row.resize(static_cast<std::size_t>(nu));
    for (int j = 0; j < nu; ++j) row[static_cast<std::size_t>(j)] = Polynomial(sys.input_A(r, j));
    out.xi[static_cast<std::size_t>(r + 2)] = Polynomial(sys.input_c[r]);
  }
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> lambda_xi_at(const LambdaXi& symbolic,
                                                         const Eigen::VectorXd& state) {
  const int rows = static_cast<int>(symbolic.xi.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(symbolic.lambda[0].size());
  Eigen::MatrixXd m(rows, cols);
  Eigen::VectorXd v(rows);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m(r, c) =
          symbolic.lambda[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].evaluate(state);
    }
    v[r] = symbolic.xi[static_cast<std::size_t>(r)].evaluate(state);
  }
  return {m, v};
}

CompatibilityOracle::CompatibilityOracle(const ControlAffineSystem& sys,
                                         const CertificatePair& cert)
    : sys_(sys), cert_(cert), symbolic_(assemble_lambda_xi(sys, cert)) {}

PointwiseResult CompatibilityOracle::query(const Eigen::VectorXd& state,
                                           const SolverSettings& settings) const {
  if (!sys_.state_constraints.empty()) {
    const double drift = sys_.constraint_values(state).lpNorm<Eigen::Infinity>();
    if (drift > kManifoldTol) {
      throw std::invalid_argument("state violates e(x) = 0 beyond tolerance");
    }
  }
  PointwiseResult out;
  if (cert_.h.evaluate(state) < -kRegionTol || cert_.V.evaluate(state) > 1.0 + kRegionTol) {
    out.kind = PointwiseResult::Kind::kNotInRegion;
    return out;
  }
  const auto [rows, rhs] = lambda_xi_at(symbolic_, state);
  const LpResult lp = solve_lp(rows, rhs, settings);
  switch (lp.kind) {
    case LpResult::Kind::kFeasible:
      out.kind = PointwiseResult::Kind::kCompatible;
      out.input = lp.witness;
      return out;
    case LpResult::Kind::kInfeasible:
      out.kind = PointwiseResult::Kind::kIncompatible;
      out.farkas = lp.farkas;
      return out;
    default:
      throw SolverUnknownError("pointwise LP could not be certified: " + lp.reason);
  }
}

PointwiseResult pointwise_compatibility(const ControlAffineSystem& sys,
                                        const CertificatePair& cert,
                                        const Eigen::VectorXd& state,
                                        const SolverSettings& settings) {
  return CompatibilityOracle(sys, cert).query(state, settings);
}

// ---------------------------------------------------------------------------
// Built-in systems

std::pair<ControlAffineSystem, UnsafeRegion> make_toy_system() {
  ControlAffineSystem sys;
  sys.builtin = "toy";
  sys.vars.add("x1");
  sys.vars.add("x2");
  sys.vars.add("x3");
  sys.num_inputs = 1;

  const Polynomial x1 = Polynomial::variable(0);
  const Polynomial x2 = Polynomial::variable(1);
  const Polynomial x3 = Polynomial::variable(2);

  sys.f = {Polynomial(), Polynomial(), -x1};
  sys.g = {{x2 + 1.0}, {-x1}, {Polynomial(-1.0)}};
  sys.input_A.resize(2, 1);
  sys.input_A << 1.0, -1.0;
  sys.input_c.resize(2);
  sys.input_c << 1.0, 1.0;
  // sin² + cos² = 1 in the shifted coordinates
  sys.state_constraints = {x1 * x1 + (x2 + 1.0) * (x2 + 1.0) - 1.0};
  sys.validate();

  UnsafeRegion region;
  region.mode = UnsafeRegion::Mode::kUnion;
  region.l = {x1 + x2 + x3 + 2.0};
  return {std::move(sys), std::move(region)};
}

Eigen::Vector3d toy_state_from_angles(double theta, double gamma) {
  return {std::sin(theta), std::cos(theta) - 1.0, gamma};
}

ControlAffineSystem make_quadrotor_system(const QuadrotorParams& params) {
  ControlAffineSystem sys;
  sys.builtin = "quadrotor";
  for (const char* name :
       {"px", "py", "pz", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "wx", "wy", "wz"}) {
    sys.vars.add(name);
  }
  sys.num_inputs = 4;

  auto sv = [](int i) { return Polynomial::variable(i); };
  const Polynomial qw = sv(3), qx = sv(4), qy = sv(5), qz = sv(6);
  const Polynomial vx = sv(7), vy = sv(8), vz = sv(9);
  const Polynomial wx = sv(10), wy = sv(11), wz = sv(12);

  const double m = params.mass;
  const double grav = params.gravity;
  const double l = params.arm_length;
  const double km = params.thrust_to_torque;
  const double jx = params.inertia[0], jy = params.inertia[1], jz = params.inertia[2];
  const double hover = m * grav / 4.0;  // per rotor

  // body-z axis in world coordinates; qw is the shifted scalar part (qw + 1
  // is the physical quaternion scalar on the unit sphere)
  const Polynomial w_full = qw + 1.0;
  const Polynomial rz_x = 2.0 * (qx * qz + w_full * qy);
  const Polynomial rz_y = 2.0 * (qy * qz - w_full * qx);
  const Polynomial rz_z_minus_one = -2.0 * (qx * qx + qy * qy);  // R33 - 1 on the manifold

  sys.f.resize(13);
  sys.f[0] = vx;
  sys.f[1] = vy;
  sys.f[2] = vz;
  // quaternion kinematics qdot = 1/2 q ⊗ (0, w)
  sys.f[3] = -0.5 * (qx * wx + qy * wy + qz * wz);
  sys.f[4] = 0.5 * (w_full * wx + qy * wz - qz * wy);
  sys.f[5] = 0.5 * (w_full * wy + qz * wx - qx * wz);
  sys.f[6] = 0.5 * (w_full * wz + qx * wy - qy * wx);
  // gravity plus hover thrust: g (R e3 - e3)
  sys.f[7] = grav * rz_x;
  sys.f[8] = grav * rz_y;
  sys.f[9] = grav * rz_z_minus_one;
  // Euler rigid-body terms, torque-free at hover
  sys.f[10] = wy * wz * ((jy - jz) / jx);
  sys.f[11] = wz * wx * ((jz - jx) / jy);
  sys.f[12] = wx * wy * ((jx - jy) / jz);

  sys.g.assign(13, std::vector<Polynomial>(4));
  for (std::size_t j = 0; j < 4; ++j) {
    sys.g[7][j] = rz_x * (1.0 / m);
    sys.g[8][j] = rz_y * (1.0 / m);
    sys.g[9][j] = (rz_z_minus_one + 1.0) * (1.0 / m);
  }
  // '+' rotor layout: rotors 0..3 on the +x, +y, -x, -y arms
  sys.g[10][1] = Polynomial(l / jx);
  sys.g[10][3] = Polynomial(-l / jx);
  sys.g[11][0] = Polynomial(-l / jy);
  sys.g[11][2] = Polynomial(l / jy);
  sys.g[12][0] = Polynomial(km / jz);
  sys.g[12][1] = Polynomial(-km / jz);
  sys.g[12][2] = Polynomial(km / jz);
  sys.g[12][3] = Polynomial(-km / jz);

  // raw box 0 <= u_i <= factor * hover in shifted inputs u~ = u - hover
  const double u_max = params.max_thrust_factor * hover;
  sys.input_A.resize(8, 4);
  sys.input_A << Eigen::MatrixXd::Identity(4, 4), -Eigen::MatrixXd::Identity(4, 4);
  sys.input_c.resize(8);
  sys.input_c << Eigen::Vector4d::Constant(u_max - hover), Eigen::Vector4d::Constant(hover);
  sys.nominal_input = Eigen::Vector4d::Constant(hover);

  // |q|² = 1 with the shifted scalar part
  sys.state_constraints = {qw * qw + 2.0 * qw + qx * qx + qy * qy + qz * qz};
  sys.validate();
  return sys;
}

ControlAffineSystem make_double_integrator() {
  ControlAffineSystem sys;
  sys.builtin = "double_integrator";
  sys.vars.add("x1");
  sys.vars.add("x2");
  sys.num_inputs = 1;
  sys.f = {Polynomial::variable(1), Polynomial()};
  sys.g = {{Polynomial()}, {Polynomial(1.0)}};
  sys.input_A.resize(0, 1);
  sys.input_c.resize(0);
  sys.validate();
  return sys;
}

}  // namespace clfcbf
