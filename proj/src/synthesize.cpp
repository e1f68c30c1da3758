#include "clfcbf/synthesize.hpp"

#include <chrono>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace clfcbf {

void SynthesisConfig::validate(const ControlAffineSystem& sys) const {
  if (!(h_lower > 0.0) || !(h_lower <= h_upper)) {
    throw std::invalid_argument("require 0 < h_lower <= h_upper");
  }
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw std::invalid_argument("require c1, c2 > 0");
  if (!(kappa_V > 0.0) || !(kappa_h > 0.0)) throw std::invalid_argument("require kappa > 0");
  if (max_iter < 0) throw std::invalid_argument("max_iter must be >= 0");
  if (V_degree < 2 || h_degree < 1) throw std::invalid_argument("V_degree >= 2, h_degree >= 1");
  degrees.validate();
  for (const Eigen::VectorXd& x : candidate_states) {
    if (x.size() != sys.num_states()) {
      throw std::invalid_argument("candidate state dimension mismatch");
    }
    if (!sys.state_constraints.empty() &&
        sys.constraint_values(x).lpNorm<Eigen::Infinity>() > kManifoldTol) {
      throw std::invalid_argument("candidate state violates e(x) = 0");
    }
  }
}

double hinge_objective(const Polynomial& V, const Polynomial& h,
                       const std::vector<Eigen::VectorXd>& candidates, double c1, double c2) {
  double acc = 0.0;
  for (const Eigen::VectorXd& x : candidates) {
    acc += c1 * std::max(V.evaluate(x) - 1.0, 0.0);
    acc += c2 * std::max(-h.evaluate(x), 0.0);
  }
  return acc;
}

int covered_candidates(const Polynomial& V, const Polynomial& h,
                       const std::vector<Eigen::VectorXd>& candidates) {
  int covered = 0;
  for (const Eigen::VectorXd& x : candidates) {
    if (V.evaluate(x) <= 1.0 + kRegionTol && h.evaluate(x) >= -kRegionTol) ++covered;
  }
  return covered;
}

CertificatePair lqr_initialize(const ControlAffineSystem& sys, const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& R, double scale, double kappa_V,
                               double kappa_h, LqrInitInfo* info) {
  const int n = sys.num_states();
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(n);

  Eigen::MatrixXd A_lin(n, n);
  Eigen::MatrixXd B_lin(n, sys.num_inputs);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      A_lin(i, j) = sys.f[static_cast<std::size_t>(i)].differentiate(j).evaluate(origin);
    }
    for (int j = 0; j < sys.num_inputs; ++j) {
      B_lin(i, j) = sys.g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].evaluate(origin);
    }
  }

  // restriction to the tangent space of {e(x) = 0} at the origin
  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(n, n);
  if (!sys.state_constraints.empty()) {
    const int k = static_cast<int>(sys.state_constraints.size());
    Eigen::MatrixXd C(k, n);
    for (int r = 0; r < k; ++r) {
      for (int j = 0; j < n; ++j) {
        C(r, j) = sys.state_constraints[static_cast<std::size_t>(r)].differentiate(j).evaluate(origin);
      }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
    int rank = 0;
    const double tol = 1e-10 * std::max(1.0, svd.singularValues().maxCoeff());
    for (int i = 0; i < svd.singularValues().size(); ++i) {
      if (svd.singularValues()[i] > tol) ++rank;
    }
    basis = svd.matrixV().rightCols(n - rank);
    // deterministic sign convention: largest-magnitude entry positive
    for (int j = 0; j < basis.cols(); ++j) {
      int imax = 0;
      basis.col(j).cwiseAbs().maxCoeff(&imax);
      if (basis(imax, j) < 0.0) basis.col(j) *= -1.0;
    }
  }

  const Eigen::MatrixXd A_proj = basis.transpose() * A_lin * basis;
  const Eigen::MatrixXd B_proj = basis.transpose() * B_lin;
  const Eigen::MatrixXd Q_proj = basis.transpose() * Q * basis;
  const CareResult care = solve_care(A_proj, B_proj, Q_proj, R);
  const Eigen::MatrixXd P_lifted = basis * care.P * basis.transpose();

  if (info != nullptr) {
    info->A_projected = A_proj;
    info->B_projected = B_proj;
    info->P_projected = care.P;
    info->care_residual = care.residual;
  }

  Polynomial V;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double coeff = scale * P_lifted(i, j);
      if (coeff != 0.0) {
        V.add_term(Monomial::variable(i) * Monomial::variable(j), coeff);
      }
    }
  }
  CertificatePair pair;
  pair.V = V;
  pair.h = Polynomial(1.0) - V;
  pair.kappa_V = KappaFunction::linear(kappa_V);
  pair.kappa_h = KappaFunction::linear(kappa_h);
  return pair;
}

LagrangianStepResult lagrangian_step(const ControlAffineSystem& sys, const CertificatePair& cert,
                                     const UnsafeRegion& region, const MultiplierDegrees& degrees,
                                     const CertifyOptions& options) {
  LagrangianStepResult out;
  const VerificationOutcome compat = verify_compatibility(sys, cert, degrees, options);
  out.compat_seconds = compat.solve_seconds;
  if (!compat.verified) {
    out.reason = "compatibility: " + compat.reason;
    return out;
  }
  const SafetyOutcome safety = region.mode == UnsafeRegion::Mode::kUnion
                                   ? verify_safety_union(cert.h, region, degrees, options)
                                   : verify_safety_intersection(cert.h, region, degrees, options);
  out.safety_seconds = safety.solve_seconds;
  if (!safety.verified) {
    out.reason = "safety: " + safety.reason;
    return out;
  }
  out.ok = true;
  out.bundle = MultiplierBundle{*compat.certificate, *safety.certificate};
  return out;
}

namespace {

struct LiePolyExpr {
  PolyExpr along_f;
  std::vector<PolyExpr> along_g;
};

LiePolyExpr lie_derivatives_expr(const ControlAffineSystem& sys, const PolyExpr& phi) {
  LiePolyExpr out;
  const int n = sys.num_states();
  std::vector<PolyExpr> grad;
  grad.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) grad.push_back(phi.differentiate(i));
  for (int i = 0; i < n; ++i) {
    out.along_f = out.along_f + grad[static_cast<std::size_t>(i)] * sys.f[static_cast<std::size_t>(i)];
  }
  out.along_g.resize(static_cast<std::size_t>(sys.num_inputs));
  for (int j = 0; j < sys.num_inputs; ++j) {
    PolyExpr acc;
    for (int i = 0; i < n; ++i) {
      acc = acc + grad[static_cast<std::size_t>(i)] *
                      sys.g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    out.along_g[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

}  // namespace

CertificateStepResult certificate_step(const ControlAffineSystem& sys,
                                       const MultiplierBundle& bundle, const UnsafeRegion& region,
                                       const SynthesisConfig& config) {
  config.validate(sys);
  CertificateStepResult out;
  const int n = sys.num_states();
  const int p_rows = sys.num_input_rows();
  const std::vector<int> x_idx = sys.state_indices();
  const std::vector<int>& y_idx = bundle.compat.y_indices;

  SosProgram prog;
  DecisionPolynomial V = prog.new_free_polynomial(x_idx, config.V_degree);
  DecisionPolynomial h = prog.new_free_polynomial(x_idx, config.h_degree);
  const PolyExpr V_expr = V.expr();
  const PolyExpr h_expr = h.expr();

  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(n);
  prog.add_scalar_eq(V_expr.evaluate(origin), 0.0);
  prog.add_scalar_bounds(h_expr.evaluate(origin), config.h_lower, config.h_upper);

  // positive definiteness proxy: V - eps |x|² is SOS
  Polynomial norm_sq;
  for (int i = 0; i < n; ++i) norm_sq.add_term(Monomial::variable(i, 2), 1.0);
  prog.add_sos_constraint(V_expr - PolyExpr{norm_sq * config.pd_epsilon},
                          monomial_basis(x_idx, (config.V_degree + 1) / 2));

  // master compatibility identity with the multipliers held fixed
  const LiePolyExpr dv = lie_derivatives_expr(sys, V_expr);
  const LiePolyExpr dh = lie_derivatives_expr(sys, h_expr);
  std::vector<PolyExpr> xi_rows(static_cast<std::size_t>(p_rows + 2));
  // row order [L_gV; -L_gh; A] and [-kappa_V V - L_fV; kappa_h h + L_fh; c]
  xi_rows[0] = -(V_expr * config.kappa_V) - dv.along_f;
  xi_rows[1] = h_expr * config.kappa_h + dh.along_f;
  for (int r = 0; r < p_rows; ++r) {
    xi_rows[static_cast<std::size_t>(r + 2)] = PolyExpr{Polynomial(sys.input_c[r])};
  }

  PolyExpr master{Polynomial(-1.0)};
  for (int i = 0; i < sys.num_inputs; ++i) {
    PolyExpr column_form;  // (y²)ᵀ Λ_i as a function of (V, h)
    for (int k = 0; k < p_rows + 2; ++k) {
      const Polynomial ysq{Monomial::variable(y_idx[static_cast<std::size_t>(k)], 2)};
      PolyExpr entry;
      if (k == 0) {
        entry = dv.along_g[static_cast<std::size_t>(i)];
      } else if (k == 1) {
        entry = -dh.along_g[static_cast<std::size_t>(i)];
      } else {
        entry = PolyExpr{Polynomial(sys.input_A(k - 2, i))};
      }
      column_form = column_form + entry * ysq;
    }
    master = master - column_form * bundle.compat.s0[static_cast<std::size_t>(i)];
  }
  PolyExpr xi_form{Polynomial(1.0)};
  for (int k = 0; k < p_rows + 2; ++k) {
    const Polynomial ysq{Monomial::variable(y_idx[static_cast<std::size_t>(k)], 2)};
    xi_form = xi_form + xi_rows[static_cast<std::size_t>(k)] * ysq;
  }
  master = master - xi_form * bundle.compat.s1;
  master = master - (PolyExpr{Polynomial(1.0)} - V_expr) * bundle.compat.s2;
  master = master - h_expr * bundle.compat.s3;
  for (std::size_t k = 0; k < sys.state_constraints.size(); ++k) {
    master = master - PolyExpr{bundle.compat.s4[k] * sys.state_constraints[k]};
  }

  std::optional<SignSymmetry> symmetry;
  if (config.certify.exploit_sign_symmetry) symmetry = SignSymmetry{y_idx};
  const GramHandle master_gram = prog.add_sos_constraint(
      master, monomial_basis(master.variables(), (master.degree() + 1) / 2), symmetry);

  // correctness constraints with q fixed, (h, p_j) decision variables
  std::vector<PolyExpr> p_exprs;
  std::vector<GramHandle> p_grams;
  std::vector<GramHandle> safety_grams;
  const bool union_mode = region.mode == UnsafeRegion::Mode::kUnion;
  for (std::size_t j = 0; j < region.l.size(); ++j) {
    auto [p_expr, p_gram] =
        prog.new_sos_polynomial(monomial_basis(x_idx, (config.degrees.p + 1) / 2));
    p_exprs.push_back(p_expr);
    p_grams.push_back(p_gram);
  }
  if (union_mode) {
    for (std::size_t j = 0; j < region.l.size(); ++j) {
      const PolyExpr expr = PolyExpr{Polynomial(-1.0)} - h_expr * bundle.safety.q[j] +
                            p_exprs[j] * region.l[j];
      safety_grams.push_back(prog.add_sos_constraint(
          expr, monomial_basis(expr.variables(), (expr.degree() + 1) / 2)));
    }
  } else {
    PolyExpr expr = PolyExpr{Polynomial(-1.0)} - h_expr * bundle.safety.q.front();
    for (std::size_t j = 0; j < region.l.size(); ++j) expr = expr + p_exprs[j] * region.l[j];
    safety_grams.push_back(prog.add_sos_constraint(
        expr, monomial_basis(expr.variables(), (expr.degree() + 1) / 2)));
  }

  // hinge slacks a_i >= relu(V(x_i) - 1), b_i >= relu(-h(x_i))
  LinExpr objective;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (const Eigen::VectorXd& x : config.candidate_states) {
    const int a = prog.new_scalar();
    const int b = prog.new_scalar();
    prog.add_scalar_bounds(LinExpr::scalar(a), 0.0, kInf);
    prog.add_scalar_bounds(LinExpr::scalar(b), 0.0, kInf);
    prog.add_scalar_bounds(LinExpr::scalar(a) - V_expr.evaluate(x), -1.0, kInf);
    prog.add_scalar_bounds(LinExpr::scalar(b) + h_expr.evaluate(x), 0.0, kInf);
    objective += LinExpr::scalar(a) * config.c1 + LinExpr::scalar(b) * config.c2;
  }
  // a light trace term keeps the Gram rays bounded without disturbing the
  // coverage cost at the reported precision
  LinExpr trace = prog.gram_trace(master_gram);
  for (GramHandle g : p_grams) trace += prog.gram_trace(g);
  for (GramHandle g : safety_grams) trace += prog.gram_trace(g);
  prog.set_objective(objective + trace * 1e-6);

  const ConicSolution sol = solve(prog.compile(), config.certify.solver);
  if (sol.status != SolveStatus::kOptimal) {
    out.reason = std::string("solver: ") + to_string(sol.status) +
                 (sol.unknown_reason.empty() ? "" : " (" + sol.unknown_reason + ")");
    return out;
  }
  const auto rec = prog.recover(sol);
  out.V = rec.value(V);
  out.h = rec.value(h);
  for (const auto& pe : p_exprs) out.p.push_back(rec.value(pe));
  out.objective = hinge_objective(out.V, out.h, config.candidate_states, config.c1, config.c2);
  out.ok = true;
  return out;
}

namespace {

bool positive_definite_proxy(const ControlAffineSystem& sys, const Polynomial& V,
                             double epsilon, const SolverSettings& settings) {
  Polynomial norm_sq;
  for (int i = 0; i < sys.num_states(); ++i) norm_sq.add_term(Monomial::variable(i, 2), 1.0);
  SosProgram prog;
  const GramHandle g = prog.add_sos_constraint(PolyExpr{V - norm_sq * epsilon});
  prog.set_objective(prog.gram_trace(g));
  return solve(prog.compile(), settings).status == SolveStatus::kOptimal;
}

}  // namespace

SynthesisTrace synthesize(const ControlAffineSystem& sys, const UnsafeRegion& region,
                          const CertificatePair& init, const SynthesisConfig& config) {
  config.validate(sys);
  SynthesisTrace trace;

  auto now = [] { return std::chrono::steady_clock::now(); };
  auto seconds = [](auto t0, auto t1) { return std::chrono::duration<double>(t1 - t0).count(); };

  CertificatePair current = init;
  current.kappa_V = KappaFunction::linear(config.kappa_V);
  current.kappa_h = KappaFunction::linear(config.kappa_h);

  auto t0 = now();
  LagrangianStepResult lag = lagrangian_step(sys, current, region, config.degrees, config.certify);
  if (!lag.ok) {
    throw InitNotVerified("initial pair failed verification: " + lag.reason);
  }
  SynthesisIteration entry;
  entry.V = current.V;
  entry.h = current.h;
  entry.objective = hinge_objective(current.V, current.h, config.candidate_states, config.c1,
                                    config.c2);
  entry.covered = covered_candidates(current.V, current.h, config.candidate_states);
  entry.t_lagrangian_s = seconds(t0, now());
  entry.verified = true;
  entry.multipliers = lag.bundle;
  trace.iterations.push_back(entry);

  int stall_count = 0;
  for (int iter = 0; iter < config.max_iter; ++iter) {
    auto t_update = now();
    CertificateStepResult step = certificate_step(sys, *lag.bundle, region, config);
    if (!step.ok) {
      // one retry at a looser stall acceptance; the pair is re-verified below
      // either way, so a low-accuracy update cannot poison the trace
      SynthesisConfig relaxed = config;
      relaxed.certify.solver.accept_tol =
          std::max(1e-4, config.certify.solver.accept_tol * 10.0);
      step = certificate_step(sys, *lag.bundle, region, relaxed);
    }
    const double update_seconds = seconds(t_update, now());
    if (!step.ok) {
      trace.stop_reason = "update step failed: " + step.reason;
      break;
    }
    CertificatePair candidate = current;
    candidate.V = step.V;
    candidate.h = step.h;

    auto t_lag = now();
    LagrangianStepResult next_lag =
        lagrangian_step(sys, candidate, region, config.degrees, config.certify);
    const double lag_seconds = seconds(t_lag, now());
    if (!next_lag.ok) {
      trace.stop_reason = "re-verification failed: " + next_lag.reason;
      break;
    }
    current = candidate;
    lag = std::move(next_lag);

    // level-set rescaling line search: shrink V while the pair re-verifies
    double rescale_seconds = 0.0;
    if (config.rescale_level_set) {
      auto t_rescale = now();
      const int total = static_cast<int>(config.candidate_states.size());
      for (int accepts = 0; accepts < 4; ++accepts) {
        if (covered_candidates(current.V, current.h, config.candidate_states) == total) break;
        bool accepted = false;
        for (double rho : {0.5, 0.7, 0.85, 0.95}) {
          CertificatePair scaled = current;
          scaled.V = current.V * rho;
          if (!positive_definite_proxy(sys, scaled.V, config.pd_epsilon,
                                       config.certify.solver)) {
            continue;
          }
          LagrangianStepResult probe =
              lagrangian_step(sys, scaled, region, config.degrees, config.certify);
          if (probe.ok) {
            current = scaled;
            lag = std::move(probe);
            accepted = true;
            break;
          }
        }
        if (!accepted) break;
      }
      rescale_seconds = seconds(t_rescale, now());
    }

    SynthesisIteration it;
    it.V = current.V;
    it.h = current.h;
    it.objective = hinge_objective(current.V, current.h, config.candidate_states, config.c1,
                                   config.c2);
    it.covered = covered_candidates(current.V, current.h, config.candidate_states);
    it.t_update_s = update_seconds;
    it.t_lagrangian_s = lag_seconds + rescale_seconds;
    it.verified = true;
    it.multipliers = lag.bundle;
    const double previous = trace.iterations.back().objective;
    if (it.objective > previous + 1e-9 * (1.0 + std::abs(previous))) {
      // a low-accuracy retry solution would break the monotone trace; stop at
      // the last verified pair instead of recording it
      trace.stop_reason = "update step stalled (non-improving iterate)";
      break;
    }
    trace.iterations.push_back(it);
    stall_count = (previous - it.objective < config.objective_improvement_tol)
                      ? stall_count + 1
                      : 0;
    if (stall_count >= config.stall_patience) {
      trace.stop_reason = "objective improvement below tolerance";
      break;
    }
  }
  if (trace.stop_reason.empty()) trace.stop_reason = "max_iter reached";
  trace.final_pair.V = trace.iterations.back().V;
  trace.final_pair.h = trace.iterations.back().h;
  trace.final_pair.kappa_V = current.kappa_V;
  trace.final_pair.kappa_h = current.kappa_h;
  return trace;
}

}  // namespace clfcbf
