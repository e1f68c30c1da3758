#include "clfcbf/sos_program.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace clfcbf {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
}

// ---------------------------------------------------------------------------
// LinExpr

LinExpr LinExpr::scalar(int id) {
  LinExpr e;
  e.coeffs_[id] = 1.0;
  return e;
}

void LinExpr::prune() {
  for (auto it = coeffs_.begin(); it != coeffs_.end();) {
    if (it->second == 0.0) {
      it = coeffs_.erase(it);
    } else {
      ++it;
    }
  }
}

LinExpr& LinExpr::operator+=(const LinExpr& other) {
  for (const auto& [id, v] : other.coeffs_) coeffs_[id] += v;
  constant_ += other.constant_;
  prune();
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& other) {
  for (const auto& [id, v] : other.coeffs_) coeffs_[id] -= v;
  constant_ -= other.constant_;
  prune();
  return *this;
}

LinExpr& LinExpr::operator*=(double k) {
  for (auto& [id, v] : coeffs_) v *= k;
  constant_ *= k;
  prune();
  return *this;
}

LinExpr LinExpr::operator+(const LinExpr& other) const {
  LinExpr r = *this;
  r += other;
  return r;
}

LinExpr LinExpr::operator-(const LinExpr& other) const {
  LinExpr r = *this;
  r -= other;
  return r;
}

LinExpr LinExpr::operator*(double k) const {
  LinExpr r = *this;
  r *= k;
  return r;
}

LinExpr LinExpr::operator-() const { return *this * -1.0; }

double LinExpr::evaluate(const Eigen::VectorXd& scalars) const {
  double r = constant_;
  for (const auto& [id, v] : coeffs_) r += v * scalars[id];
  return r;
}

// ---------------------------------------------------------------------------
// PolyExpr

PolyExpr::PolyExpr(const Polynomial& p) {
  for (const auto& [m, c] : p.terms()) terms_[m] = LinExpr(c);
}

void PolyExpr::set_term(const Monomial& m, LinExpr e) {
  if (e.is_constant() && e.constant() == 0.0) {
    terms_.erase(m);
  } else {
    terms_[m] = std::move(e);
  }
}

LinExpr PolyExpr::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? LinExpr(0.0) : it->second;
}

int PolyExpr::degree() const {
  return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
}

std::vector<int> PolyExpr::variables() const {
  std::vector<int> out;
  for (const auto& [m, e] : terms_) {
    (void)e;
    for (const auto& [v, ex] : m.factors()) {
      (void)ex;
      if (!std::binary_search(out.begin(), out.end(), v)) {
        out.insert(std::lower_bound(out.begin(), out.end(), v), v);
      }
    }
  }
  return out;
}

bool PolyExpr::has_decision_scalars() const {
  for (const auto& [m, e] : terms_) {
    (void)m;
    if (!e.is_constant()) return true;
  }
  return false;
}

void PolyExpr::prune() {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (it->second.is_constant() && it->second.constant() == 0.0) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
}

PolyExpr PolyExpr::operator+(const PolyExpr& other) const {
  PolyExpr r = *this;
  for (const auto& [m, e] : other.terms_) {
    auto it = r.terms_.find(m);
    if (it == r.terms_.end()) {
      r.terms_[m] = e;
    } else {
      it->second += e;
    }
  }
  r.prune();
  return r;
}

PolyExpr PolyExpr::operator-(const PolyExpr& other) const { return *this + (-other); }

PolyExpr PolyExpr::operator-() const {
  PolyExpr r = *this;
  for (auto& [m, e] : r.terms_) e *= -1.0;
  return r;
}

PolyExpr PolyExpr::operator*(const PolyExpr& other) const {
  if (has_decision_scalars() && other.has_decision_scalars()) {
    throw BilinearExpression("product of two decision-bearing expressions");
  }
  PolyExpr r;
  for (const auto& [ma, ea] : terms_) {
    for (const auto& [mb, eb] : other.terms_) {
      LinExpr prod = ea.is_constant() ? eb * ea.constant() : ea * eb.constant();
      const Monomial m = ma * mb;
      auto it = r.terms_.find(m);
      if (it == r.terms_.end()) {
        r.terms_[m] = std::move(prod);
      } else {
        it->second += prod;
      }
    }
  }
  r.prune();
  return r;
}

PolyExpr PolyExpr::operator*(double k) const {
  PolyExpr r = *this;
  for (auto& [m, e] : r.terms_) e *= k;
  r.prune();
  return r;
}

PolyExpr PolyExpr::differentiate(int var_index) const {
  PolyExpr r;
  for (const auto& [m, e] : terms_) {
    const int ex = m.exponent_of(var_index);
    if (ex == 0) continue;
    std::vector<std::pair<int, int>> factors = m.factors();
    for (auto& [v, p] : factors) {
      if (v == var_index) p -= 1;
    }
    const Monomial dm{std::move(factors)};
    auto it = r.terms_.find(dm);
    if (it == r.terms_.end()) {
      r.terms_[dm] = e * static_cast<double>(ex);
    } else {
      it->second += e * static_cast<double>(ex);
    }
  }
  r.prune();
  return r;
}

LinExpr PolyExpr::evaluate(const Eigen::VectorXd& point) const {
  LinExpr r;
  for (const auto& [m, e] : terms_) r += e * m.evaluate(point);
  return r;
}

PolyExpr DecisionPolynomial::expr() const {
  PolyExpr r;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    r.set_term(basis[i], LinExpr::scalar(slots[i]));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Certificate check

CheckReport check_sos_certificate(const Polynomial& p, const GramCertificate& gram, double tol) {
  const int n = static_cast<int>(gram.basis.size());
  if (gram.matrix.rows() != n || gram.matrix.cols() != n) {
    throw BasisMismatch("gram matrix dimension != basis size");
  }
  CheckReport report;
  report.poly_norm = p.max_abs_coefficient();
  if (n > 0) {
    report.gram_norm = gram.matrix.cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram.matrix, Eigen::EigenvaluesOnly);
    report.min_eigenvalue = es.eigenvalues().minCoeff();
  }
  Polynomial reconstructed;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      reconstructed.add_term(gram.basis[i] * gram.basis[j], gram.matrix(i, j));
    }
  }
  report.max_residual = (p - reconstructed).max_abs_coefficient();
  report.passed = report.min_eigenvalue >= -tol * (1.0 + report.gram_norm) &&
                  report.max_residual <= tol * (1.0 + report.poly_norm);
  return report;
}

// ---------------------------------------------------------------------------
// SosProgram

int SosProgram::new_scalar() { return next_scalar_++; }

std::vector<int> SosProgram::allocate(int count, ConeKind kind, int psd_dim) {
  std::vector<int> ids(count);
  for (int i = 0; i < count; ++i) ids[i] = next_scalar_++;
  allocs_.push_back({kind, ids.front(), count, psd_dim});
  return ids;
}

DecisionPolynomial SosProgram::new_free_polynomial(const std::vector<int>& vars, int degree) {
  return new_free_polynomial(monomial_basis(vars, degree));
}

DecisionPolynomial SosProgram::new_free_polynomial(std::vector<Monomial> basis) {
  DecisionPolynomial p;
  p.basis = std::move(basis);
  p.slots.reserve(p.basis.size());
  for (std::size_t i = 0; i < p.basis.size(); ++i) p.slots.push_back(new_scalar());
  return p;
}

namespace {

// Parity bitmask of m over the listed variables.
std::uint64_t parity_key(const Monomial& m, const std::vector<int>& sym_vars) {
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < sym_vars.size(); ++i) {
    if (m.exponent_of(sym_vars[i]) % 2 != 0) key |= (std::uint64_t{1} << i);
  }
  return key;
}

}  // namespace

SosProgram::GramRecord SosProgram::make_gram(std::vector<Monomial> basis,
                                             const std::optional<SignSymmetry>& symmetry,
                                             bool sdsos) {
  GramRecord record;
  record.sdsos = sdsos;

  std::vector<std::vector<Monomial>> classes;
  if (symmetry && !symmetry->variables.empty()) {
    if (symmetry->variables.size() > 63) {
      throw std::invalid_argument("too many sign-symmetric variables");
    }
    std::map<std::uint64_t, std::vector<Monomial>> by_key;
    for (const Monomial& m : basis) by_key[parity_key(m, symmetry->variables)].push_back(m);
    for (auto& [key, members] : by_key) {
      (void)key;
      classes.push_back(std::move(members));
    }
  } else {
    classes.push_back(std::move(basis));
  }

  record.class_offsets.push_back(0);
  for (auto& cls : classes) {
    for (const Monomial& m : cls) record.basis.push_back(m);
    record.class_offsets.push_back(static_cast<int>(record.basis.size()));
  }

  for (std::size_t c = 0; c + 1 < record.class_offsets.size(); ++c) {
    const int begin = record.class_offsets[c];
    const int end = record.class_offsets[c + 1];
    const int dim = end - begin;
    if (!sdsos) {
      auto ids = allocate(svec_size(dim), ConeKind::kPsd, dim);
      record.psd_scalar_start.push_back(ids.front());
    } else {
      record.psd_scalar_start.push_back(-1);
      if (dim == 1) {
        auto ids = allocate(1, ConeKind::kNonnegative);
        record.diags.push_back({ids.front(), begin});
      } else {
        for (int i = 0; i < dim; ++i) {
          for (int j = i + 1; j < dim; ++j) {
            auto ids = allocate(3, ConeKind::kSecondOrder);
            record.pairs.push_back({ids.front(), begin + i, begin + j});
          }
        }
      }
    }
  }
  return record;
}

PolyExpr SosProgram::gram_form(const GramRecord& record) const {
  PolyExpr form;
  auto add_to = [&form](const Monomial& m, const LinExpr& e) {
    LinExpr acc = form.coefficient(m);
    acc += e;
    form.set_term(m, acc);
  };

  if (!record.sdsos) {
    for (std::size_t c = 0; c + 1 < record.class_offsets.size(); ++c) {
      const int begin = record.class_offsets[c];
      const int end = record.class_offsets[c + 1];
      const int dim = end - begin;
      const int base = record.psd_scalar_start[c];
      int pos = 0;
      for (int j = 0; j < dim; ++j) {
        for (int i = j; i < dim; ++i, ++pos) {
          const Monomial prod = record.basis[begin + i] * record.basis[begin + j];
          // diagonal svec slots hold G_ii; off-diagonal slots hold sqrt(2) G_ij
          // and contribute 2 G_ij = sqrt(2) * slot to the product monomial
          const double w = (i == j) ? 1.0 : kSqrt2;
          add_to(prod, LinExpr::scalar(base + pos) * w);
        }
      }
    }
  } else {
    for (const SdsosDiagBlock& d : record.diags) {
      add_to(record.basis[d.i] * record.basis[d.i], LinExpr::scalar(d.scalar));
    }
    for (const SdsosPairBlock& p : record.pairs) {
      // rotated-cone coordinates (t0, t1, t2): 2x2 block [[a, b], [b, g]] with
      // a = (t0+t2)/2, g = (t0-t2)/2, b = t1/2; (t0, t1, t2) in the standard
      // second-order cone is equivalent to a, g >= 0 and a g >= b².
      const LinExpr t0 = LinExpr::scalar(p.scalar_start);
      const LinExpr t1 = LinExpr::scalar(p.scalar_start + 1);
      const LinExpr t2 = LinExpr::scalar(p.scalar_start + 2);
      add_to(record.basis[p.i] * record.basis[p.i], (t0 + t2) * 0.5);
      add_to(record.basis[p.j] * record.basis[p.j], (t0 - t2) * 0.5);
      add_to(record.basis[p.i] * record.basis[p.j], t1);
    }
  }
  return form;
}

std::pair<PolyExpr, GramHandle> SosProgram::new_sos_polynomial(
    std::vector<Monomial> basis, const std::optional<SignSymmetry>& symmetry, bool sdsos) {
  GramRecord record = make_gram(std::move(basis), symmetry, sdsos);
  PolyExpr form = gram_form(record);
  grams_.push_back(std::move(record));
  return {std::move(form), static_cast<GramHandle>(grams_.size() - 1)};
}

GramHandle SosProgram::add_gram_constraint(const PolyExpr& expr, std::vector<Monomial> basis,
                                           const std::optional<SignSymmetry>& symmetry,
                                           bool sdsos) {
  auto [form, handle] = new_sos_polynomial(std::move(basis), symmetry, sdsos);
  add_linear_eq(expr - form);
  return handle;
}

GramHandle SosProgram::add_sos_constraint(const PolyExpr& expr) {
  const int half = (expr.degree() + 1) / 2;
  return add_gram_constraint(expr, monomial_basis(expr.variables(), half), {}, false);
}

GramHandle SosProgram::add_sos_constraint(const PolyExpr& expr, std::vector<Monomial> basis,
                                          const std::optional<SignSymmetry>& symmetry) {
  return add_gram_constraint(expr, std::move(basis), symmetry, false);
}

GramHandle SosProgram::add_sdsos_constraint(const PolyExpr& expr) {
  const int half = (expr.degree() + 1) / 2;
  return add_gram_constraint(expr, monomial_basis(expr.variables(), half), {}, true);
}

GramHandle SosProgram::add_sdsos_constraint(const PolyExpr& expr, std::vector<Monomial> basis,
                                            const std::optional<SignSymmetry>& symmetry) {
  return add_gram_constraint(expr, std::move(basis), symmetry, true);
}

void SosProgram::add_linear_eq(const PolyExpr& expr) {
  for (const auto& [m, e] : expr.terms()) {
    (void)m;
    if (e.is_constant() && e.constant() == 0.0) continue;
    scalar_rows_.push_back(e);
    scalar_rhs_.push_back(0.0);
  }
}

void SosProgram::add_scalar_eq(const LinExpr& e, double value) {
  scalar_rows_.push_back(e);
  scalar_rhs_.push_back(value);
}

void SosProgram::add_scalar_bounds(const LinExpr& e, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("add_scalar_bounds: lo > hi");
  if (lo == hi) {
    add_scalar_eq(e, lo);
    return;
  }
  if (std::isfinite(lo)) {
    const int slack = allocate(1, ConeKind::kNonnegative).front();
    scalar_rows_.push_back(e - LinExpr::scalar(slack));
    scalar_rhs_.push_back(lo);
  }
  if (std::isfinite(hi)) {
    const int slack = allocate(1, ConeKind::kNonnegative).front();
    scalar_rows_.push_back(e + LinExpr::scalar(slack));
    scalar_rhs_.push_back(hi);
  }
}

ConicProblem SosProgram::compile() const {
  ConicProblem prob;
  prob.num_vars = next_scalar_;

  // cone spans: allocations in id order with free gaps as zero-cone spans
  int cursor = 0;
  for (const ConeAlloc& alloc : allocs_) {
    if (alloc.first_scalar > cursor) {
      prob.cones.push_back({ConeKind::kZero, cursor, alloc.first_scalar - cursor, 0});
    }
    prob.cones.push_back({alloc.kind, alloc.first_scalar, alloc.count, alloc.psd_dim});
    cursor = alloc.first_scalar + alloc.count;
  }
  if (cursor < next_scalar_) {
    prob.cones.push_back({ConeKind::kZero, cursor, next_scalar_ - cursor, 0});
  }

  const int m = static_cast<int>(scalar_rows_.size());
  prob.eq_rhs.resize(m);
  std::vector<Eigen::Triplet<double>> trips;
  for (int r = 0; r < m; ++r) {
    const LinExpr& e = scalar_rows_[r];
    for (const auto& [id, v] : e.coefficients()) trips.emplace_back(r, id, v);
    prob.eq_rhs[r] = scalar_rhs_[r] - e.constant();
  }
  prob.eq_matrix.resize(m, prob.num_vars);
  prob.eq_matrix.setFromTriplets(trips.begin(), trips.end());
  prob.eq_matrix.makeCompressed();

  prob.objective = Eigen::VectorXd::Zero(prob.num_vars);
  for (const auto& [id, v] : objective_.coefficients()) prob.objective[id] = v;

  prob.validate();
  return prob;
}

LinExpr SosProgram::gram_trace(GramHandle handle) const {
  const GramRecord& record = grams_.at(static_cast<std::size_t>(handle));
  LinExpr trace;
  if (!record.sdsos) {
    for (std::size_t c = 0; c + 1 < record.class_offsets.size(); ++c) {
      const int dim = record.class_offsets[c + 1] - record.class_offsets[c];
      const int base = record.psd_scalar_start[c];
      int pos = 0;
      for (int j = 0; j < dim; ++j) {
        trace += LinExpr::scalar(base + pos);  // diagonal svec slot
        pos += dim - j;
      }
    }
  } else {
    for (const SdsosDiagBlock& d : record.diags) trace += LinExpr::scalar(d.scalar);
    for (const SdsosPairBlock& p : record.pairs) trace += LinExpr::scalar(p.scalar_start);
  }
  return trace;
}

SosProgram::Recovered SosProgram::recover(const ConicSolution& solution) const {
  if (solution.status != SolveStatus::kOptimal) throw StatusNotFeasible(solution.status);
  if (solution.primal.size() != next_scalar_) {
    throw DimensionMismatch("solution primal size != program scalar count");
  }
  Recovered rec;
  rec.scalars = solution.primal;
  rec.program = this;
  return rec;
}

Polynomial SosProgram::Recovered::value(const PolyExpr& e) const {
  Polynomial p;
  for (const auto& [m, le] : e.terms()) p.add_term(m, le.evaluate(scalars));
  return p;
}

Polynomial SosProgram::Recovered::value(const DecisionPolynomial& p) const {
  return value(p.expr());
}

GramCertificate SosProgram::Recovered::gram(GramHandle handle) const {
  const GramRecord& record = program->grams_.at(static_cast<std::size_t>(handle));
  GramCertificate cert;
  cert.basis = record.basis;
  const int n = static_cast<int>(record.basis.size());
  cert.matrix = Eigen::MatrixXd::Zero(n, n);
  if (!record.sdsos) {
    for (std::size_t c = 0; c + 1 < record.class_offsets.size(); ++c) {
      const int begin = record.class_offsets[c];
      const int dim = record.class_offsets[c + 1] - begin;
      const int base = record.psd_scalar_start[c];
      int pos = 0;
      for (int j = 0; j < dim; ++j) {
        for (int i = j; i < dim; ++i, ++pos) {
          const double raw = scalars[base + pos];
          const double value = (i == j) ? raw : raw / kSqrt2;
          cert.matrix(begin + i, begin + j) = value;
          cert.matrix(begin + j, begin + i) = value;
        }
      }
    }
  } else {
    for (const SdsosDiagBlock& d : record.diags) cert.matrix(d.i, d.i) += scalars[d.scalar];
    for (const SdsosPairBlock& p : record.pairs) {
      const double t0 = scalars[p.scalar_start];
      const double t1 = scalars[p.scalar_start + 1];
      const double t2 = scalars[p.scalar_start + 2];
      cert.matrix(p.i, p.i) += (t0 + t2) * 0.5;
      cert.matrix(p.j, p.j) += (t0 - t2) * 0.5;
      cert.matrix(p.i, p.j) += t1 * 0.5;
      cert.matrix(p.j, p.i) += t1 * 0.5;
    }
  }
  return cert;
}

std::vector<Monomial> even_restricted_basis(const std::vector<int>& vars, int degree,
                                            const std::vector<int>& even_vars) {
  std::vector<Monomial> all = monomial_basis(vars, degree);
  std::vector<Monomial> out;
  for (const Monomial& m : all) {
    bool keep = true;
    for (int v : even_vars) {
      if (m.exponent_of(v) % 2 != 0) {
        keep = false;
        break;
      }
    }
    if (keep) out.push_back(m);
  }
  return out;
}

}  // namespace clfcbf
