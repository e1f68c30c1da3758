#include "clfcbf/certify.hpp"

#include <chrono>

namespace clfcbf {

void MultiplierDegrees::validate() const {
  for (int d : {s0, s1, s2, s3, s4, p, q}) {
    if (d < 0) throw std::invalid_argument("multiplier degrees must be nonnegative");
  }
}

CompatibilityGenerators compatibility_generators(const ControlAffineSystem& sys,
                                                 const CertificatePair& cert) {
  CompatibilityGenerators out;
  out.ext_vars = sys.vars;
  const int rows = sys.num_input_rows() + 2;
  for (int k = 0; k < rows; ++k) {
    std::string name = "y" + std::to_string(k);
    int suffix = 0;
    while (out.ext_vars.contains(name)) {
      name = "y" + std::to_string(k) + "_" + std::to_string(++suffix);
    }
    out.y_indices.push_back(out.ext_vars.add(name).index);
  }

  const LambdaXi lx = assemble_lambda_xi(sys, cert);
  out.ideal.resize(static_cast<std::size_t>(sys.num_inputs));
  for (int i = 0; i < sys.num_inputs; ++i) {
    Polynomial acc;
    for (int k = 0; k < rows; ++k) {
      const Polynomial ysq = Polynomial(Monomial::variable(out.y_indices[static_cast<std::size_t>(k)], 2));
      acc = acc + ysq * lx.lambda[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
    }
    out.ideal[static_cast<std::size_t>(i)] = acc;
  }
  Polynomial xi_acc(1.0);
  for (int k = 0; k < rows; ++k) {
    const Polynomial ysq = Polynomial(Monomial::variable(out.y_indices[static_cast<std::size_t>(k)], 2));
    xi_acc = xi_acc + ysq * lx.xi[static_cast<std::size_t>(k)];
  }
  out.xi_form = xi_acc;
  return out;
}

namespace {

std::vector<int> concat_indices(int num_states, const std::vector<int>& y_indices) {
  std::vector<int> all;
  for (int i = 0; i < num_states; ++i) all.push_back(i);
  all.insert(all.end(), y_indices.begin(), y_indices.end());
  return all;
}

}  // namespace

VerificationOutcome verify_compatibility(const ControlAffineSystem& sys,
                                         const CertificatePair& cert,
                                         const MultiplierDegrees& degrees,
                                         const CertifyOptions& options) {
  degrees.validate();
  if (std::abs(cert.V.constant_term()) > 1e-9) {
    throw std::invalid_argument("verify_compatibility requires V(0) = 0");
  }
  const auto t0 = std::chrono::steady_clock::now();

  VerificationOutcome outcome;
  CompatibilityGenerators gens = compatibility_generators(sys, cert);
  const std::vector<int> all_idx = concat_indices(sys.num_states(), gens.y_indices);

  const bool reduce = options.exploit_sign_symmetry;
  std::optional<SignSymmetry> symmetry;
  if (reduce) symmetry = SignSymmetry{gens.y_indices};

  auto multiplier_basis = [&](int degree) {
    return reduce ? even_restricted_basis(all_idx, degree, gens.y_indices)
                  : monomial_basis(all_idx, degree);
  };

  SosProgram prog;
  std::vector<DecisionPolynomial> s0;
  for (int i = 0; i < sys.num_inputs; ++i) {
    s0.push_back(prog.new_free_polynomial(multiplier_basis(degrees.s0)));
  }
  DecisionPolynomial s1 = prog.new_free_polynomial(multiplier_basis(degrees.s1));
  auto [s2_expr, s2_gram_h] =
      prog.new_sos_polynomial(monomial_basis(all_idx, (degrees.s2 + 1) / 2), symmetry,
                              options.use_sdsos);
  auto [s3_expr, s3_gram_h] =
      prog.new_sos_polynomial(monomial_basis(all_idx, (degrees.s3 + 1) / 2), symmetry,
                              options.use_sdsos);
  std::vector<DecisionPolynomial> s4;
  for (std::size_t k = 0; k < sys.state_constraints.size(); ++k) {
    s4.push_back(prog.new_free_polynomial(multiplier_basis(degrees.s4)));
  }

  PolyExpr master{Polynomial(-1.0)};
  for (int i = 0; i < sys.num_inputs; ++i) {
    master = master - s0[static_cast<std::size_t>(i)].expr() *
                          gens.ideal[static_cast<std::size_t>(i)];
  }
  master = master - s1.expr() * gens.xi_form;
  master = master - s2_expr * (Polynomial(1.0) - cert.V);
  master = master - s3_expr * cert.h;
  for (std::size_t k = 0; k < sys.state_constraints.size(); ++k) {
    master = master - s4[k].expr() * sys.state_constraints[k];
  }

  const int master_degree = master.degree();
  const bool padded = master_degree % 2 != 0;
  const int half = (master_degree + 1) / 2;
  const std::vector<Monomial> master_basis = monomial_basis(master.variables(), half);

  int margin_scalar = -1;
  Polynomial margin_weight_poly;
  if (options.master_margin_weight > 0.0) {
    margin_scalar = prog.new_scalar();
    prog.add_scalar_bounds(LinExpr::scalar(margin_scalar), 0.0, 1.0);
    for (const Monomial& m : master_basis) margin_weight_poly.add_term(m * m, 1.0);
    PolyExpr margin_expr;
    for (const auto& [mono, coeff] : margin_weight_poly.terms()) {
      margin_expr.set_term(mono, LinExpr::scalar(margin_scalar) * coeff);
    }
    master = master - margin_expr;
  }
  const GramHandle master_gram_h = prog.add_sos_constraint(master, master_basis, symmetry);

  LinExpr objective = prog.gram_trace(s2_gram_h) + prog.gram_trace(s3_gram_h) +
                      prog.gram_trace(master_gram_h);
  if (margin_scalar >= 0) {
    objective -= LinExpr::scalar(margin_scalar) * options.master_margin_weight;
  }
  prog.set_objective(objective);

  const ConicSolution sol = solve(prog.compile(), options.solver);
  outcome.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  outcome.solver_iterations = sol.stats.iterations;
  if (sol.status != SolveStatus::kOptimal) {
    outcome.reason = std::string("solver: ") + to_string(sol.status) +
                     (sol.unknown_reason.empty() ? "" : " (" + sol.unknown_reason + ")");
    return outcome;
  }

  const auto rec = prog.recover(sol);
  CompatibilityCertificate result;
  result.ext_vars = gens.ext_vars;
  result.y_indices = gens.y_indices;
  for (const auto& s : s0) result.s0.push_back(rec.value(s));
  result.s1 = rec.value(s1);
  result.s2 = rec.value(s2_expr);
  result.s3 = rec.value(s3_expr);
  result.s2_gram = rec.gram(s2_gram_h);
  result.s3_gram = rec.gram(s3_gram_h);
  for (const auto& s : s4) result.s4.push_back(rec.value(s));
  result.master_gram = rec.gram(master_gram_h);
  if (margin_scalar >= 0) {
    // recovered Gram certifies master - delta sum m_i²; shift the diagonal
    // back so the certificate matches the full master polynomial
    const double delta = rec.scalars[margin_scalar];
    result.master_gram.matrix.diagonal().array() += delta;
  }
  result.parity_padded = padded;

  // Reassemble the master identity from the recovered multipliers; the Gram
  // check below then validates both the identity and positive semidefiniteness.
  Polynomial lhs(-1.0);
  for (int i = 0; i < sys.num_inputs; ++i) {
    lhs = lhs - result.s0[static_cast<std::size_t>(i)] * gens.ideal[static_cast<std::size_t>(i)];
  }
  lhs = lhs - result.s1 * gens.xi_form;
  lhs = lhs - result.s2 * (Polynomial(1.0) - cert.V);
  lhs = lhs - result.s3 * cert.h;
  for (std::size_t k = 0; k < sys.state_constraints.size(); ++k) {
    lhs = lhs - result.s4[k] * sys.state_constraints[k];
  }
  result.master = lhs;

  outcome.checks.emplace_back("s2", check_sos_certificate(result.s2, result.s2_gram,
                                                          options.check_tol));
  outcome.checks.emplace_back("s3", check_sos_certificate(result.s3, result.s3_gram,
                                                          options.check_tol));
  outcome.checks.emplace_back("master", check_sos_certificate(result.master, result.master_gram,
                                                              options.check_tol));
  for (const auto& [name, report] : outcome.checks) {
    if (!report.passed) {
      outcome.reason = "certificate check failed: " + name;
      return outcome;
    }
  }
  outcome.verified = true;
  outcome.certificate = std::move(result);
  return outcome;
}

// ---------------------------------------------------------------------------
// Barrier correctness

namespace {

struct SafetyProgramParts {
  SosProgram prog;
  PolyExpr q_expr;
  std::vector<PolyExpr> p_exprs;
  GramHandle q_gram;
  std::vector<GramHandle> p_grams;
  GramHandle master_gram;
};

// -1 - q h + sum_j p_j l_j in SOS with q, p_j in SOS.
SafetyProgramParts build_safety_program(const Polynomial& h, const std::vector<Polynomial>& ls,
                                        const MultiplierDegrees& degrees,
                                        double margin_weight, int* margin_scalar) {
  SafetyProgramParts parts;
  std::vector<int> vars = h.variables();
  for (const Polynomial& l : ls) {
    for (int v : l.variables()) {
      if (!std::binary_search(vars.begin(), vars.end(), v)) {
        vars.insert(std::lower_bound(vars.begin(), vars.end(), v), v);
      }
    }
  }
  auto [q_expr, q_gram] =
      parts.prog.new_sos_polynomial(monomial_basis(vars, (degrees.q + 1) / 2));
  parts.q_expr = std::move(q_expr);
  parts.q_gram = q_gram;
  PolyExpr master = PolyExpr{Polynomial(-1.0)} - parts.q_expr * h;
  for (const Polynomial& l : ls) {
    auto [p_expr, p_gram] =
        parts.prog.new_sos_polynomial(monomial_basis(vars, (degrees.p + 1) / 2));
    master = master + p_expr * l;
    parts.p_exprs.push_back(std::move(p_expr));
    parts.p_grams.push_back(p_gram);
  }
  const std::vector<Monomial> basis =
      monomial_basis(master.variables(), (master.degree() + 1) / 2);
  *margin_scalar = -1;
  if (margin_weight > 0.0) {
    *margin_scalar = parts.prog.new_scalar();
    parts.prog.add_scalar_bounds(LinExpr::scalar(*margin_scalar), 0.0, 1.0);
    PolyExpr margin_expr;
    for (const Monomial& m : basis) {
      LinExpr acc = margin_expr.coefficient(m * m);
      acc += LinExpr::scalar(*margin_scalar);
      margin_expr.set_term(m * m, acc);
    }
    master = master - margin_expr;
  }
  parts.master_gram = parts.prog.add_sos_constraint(master, basis);
  LinExpr trace = parts.prog.gram_trace(parts.q_gram) + parts.prog.gram_trace(parts.master_gram);
  for (GramHandle g : parts.p_grams) trace += parts.prog.gram_trace(g);
  if (*margin_scalar >= 0) trace -= LinExpr::scalar(*margin_scalar) * margin_weight;
  parts.prog.set_objective(trace);
  return parts;
}

struct SafetySolve {
  bool ok = false;
  std::string reason;
  Polynomial q;
  std::vector<Polynomial> p;
  GramCertificate master;
};

SafetySolve solve_safety_program(const Polynomial& h, const std::vector<Polynomial>& ls,
                                 const MultiplierDegrees& degrees,
                                 const CertifyOptions& options) {
  int margin_scalar = -1;
  SafetyProgramParts parts =
      build_safety_program(h, ls, degrees, options.master_margin_weight, &margin_scalar);
  const ConicSolution sol = solve(parts.prog.compile(), options.solver);
  SafetySolve out;
  if (sol.status != SolveStatus::kOptimal) {
    out.reason = std::string("solver: ") + to_string(sol.status) +
                 (sol.unknown_reason.empty() ? "" : " (" + sol.unknown_reason + ")");
    return out;
  }
  const auto rec = parts.prog.recover(sol);
  out.q = rec.value(parts.q_expr);
  for (const auto& pe : parts.p_exprs) out.p.push_back(rec.value(pe));
  out.master = rec.gram(parts.master_gram);
  if (margin_scalar >= 0) {
    out.master.matrix.diagonal().array() += rec.scalars[margin_scalar];
  }

  Polynomial lhs = Polynomial(-1.0) - out.q * h;
  for (std::size_t j = 0; j < ls.size(); ++j) lhs = lhs + out.p[j] * ls[j];
  if (!check_sos_certificate(lhs, out.master, options.check_tol).passed) {
    out.reason = "master certificate check failed";
    return out;
  }
  if (!check_sos_certificate(out.q, rec.gram(parts.q_gram), options.check_tol).passed) {
    out.reason = "q certificate check failed";
    return out;
  }
  for (std::size_t j = 0; j < parts.p_grams.size(); ++j) {
    if (!check_sos_certificate(out.p[j], rec.gram(parts.p_grams[j]), options.check_tol).passed) {
      out.reason = "p certificate check failed";
      return out;
    }
  }
  out.ok = true;
  return out;
}

}  // namespace

SafetyOutcome verify_safety_union(const Polynomial& h, const UnsafeRegion& region,
                                  const MultiplierDegrees& degrees,
                                  const CertifyOptions& options) {
  if (region.mode != UnsafeRegion::Mode::kUnion) {
    throw std::invalid_argument("verify_safety_union requires a union-mode region");
  }
  if (region.l.empty()) throw std::invalid_argument("unsafe region needs at least one l_j");
  degrees.validate();
  const auto t0 = std::chrono::steady_clock::now();

  SafetyOutcome outcome;
  SafetyCertificate cert;
  outcome.verified = true;
  for (std::size_t j = 0; j < region.l.size(); ++j) {
    SafetySolve sub = solve_safety_program(h, {region.l[j]}, degrees, options);
    outcome.per_constraint_ok.push_back(sub.ok);
    if (sub.ok) {
      cert.q.push_back(sub.q);
      cert.p.push_back(sub.p.front());
      cert.master_grams.push_back(sub.master);
    } else {
      outcome.verified = false;
      if (!outcome.reason.empty()) outcome.reason += "; ";
      outcome.reason += "l_" + std::to_string(j + 1) + ": " + sub.reason;
    }
  }
  if (outcome.verified) outcome.certificate = std::move(cert);
  outcome.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return outcome;
}

SafetyOutcome verify_safety_intersection(const Polynomial& h, const UnsafeRegion& region,
                                         const MultiplierDegrees& degrees,
                                         const CertifyOptions& options) {
  if (region.mode != UnsafeRegion::Mode::kIntersection) {
    throw std::invalid_argument("verify_safety_intersection requires an intersection-mode region");
  }
  if (region.l.empty()) throw std::invalid_argument("unsafe region needs at least one l_j");
  degrees.validate();
  const auto t0 = std::chrono::steady_clock::now();

  SafetyOutcome outcome;
  SafetySolve sub = solve_safety_program(h, region.l, degrees, options);
  outcome.per_constraint_ok.push_back(sub.ok);
  outcome.verified = sub.ok;
  if (sub.ok) {
    SafetyCertificate cert;
    cert.q.push_back(sub.q);
    cert.p = std::move(sub.p);
    cert.master_grams.push_back(sub.master);
    outcome.certificate = std::move(cert);
  } else {
    outcome.reason = sub.reason;
  }
  outcome.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return outcome;
}

}  // namespace clfcbf
