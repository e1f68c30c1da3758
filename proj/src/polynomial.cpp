#include "clfcbf/polynomial.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace clfcbf {

// ---------------------------------------------------------------------------
// VariableSet

Variable VariableSet::add(const std::string& name) {
  if (name.empty()) throw std::invalid_argument("variable name must be nonempty");
  if (index_by_name_.count(name)) {
    throw std::invalid_argument("duplicate variable name '" + name + "'");
  }
  const int idx = static_cast<int>(names_.size());
  names_.push_back(name);
  index_by_name_[name] = idx;
  return {name, idx};
}

bool VariableSet::contains(const std::string& name) const {
  return index_by_name_.count(name) > 0;
}

int VariableSet::index_of(const std::string& name) const {
  auto it = index_by_name_.find(name);
  return it == index_by_name_.end() ? -1 : it->second;
}

const std::string& VariableSet::name_of(int index) const {
  if (index < 0 || index >= size()) {
    throw std::out_of_range("variable index " + std::to_string(index) + " out of range");
  }
  return names_[static_cast<std::size_t>(index)];
}

// ---------------------------------------------------------------------------
// Monomial

Monomial::Monomial(std::vector<std::pair<int, int>> factors) : factors_(std::move(factors)) {
  std::sort(factors_.begin(), factors_.end());
  std::vector<std::pair<int, int>> merged;
  for (const auto& [v, e] : factors_) {
    if (e < 0) throw std::invalid_argument("negative exponent in monomial");
    if (e == 0) continue;
    if (!merged.empty() && merged.back().first == v) {
      merged.back().second += e;
    } else {
      merged.emplace_back(v, e);
    }
  }
  factors_ = std::move(merged);
}

Monomial Monomial::variable(int var_index, int exponent) {
  return Monomial({{var_index, exponent}});
}

int Monomial::degree() const {
  int d = 0;
  for (const auto& [v, e] : factors_) {
    (void)v;
    d += e;
  }
  return d;
}

int Monomial::exponent_of(int var_index) const {
  for (const auto& [v, e] : factors_) {
    if (v == var_index) return e;
  }
  return 0;
}

Monomial Monomial::operator*(const Monomial& other) const {
  std::vector<std::pair<int, int>> merged;
  merged.reserve(factors_.size() + other.factors_.size());
  auto a = factors_.begin();
  auto b = other.factors_.begin();
  while (a != factors_.end() || b != other.factors_.end()) {
    if (b == other.factors_.end() || (a != factors_.end() && a->first < b->first)) {
      merged.push_back(*a++);
    } else if (a == factors_.end() || b->first < a->first) {
      merged.push_back(*b++);
    } else {
      merged.emplace_back(a->first, a->second + b->second);
      ++a;
      ++b;
    }
  }
  Monomial m;
  m.factors_ = std::move(merged);
  return m;
}

bool Monomial::operator<(const Monomial& other) const {
  const int da = degree();
  const int db = other.degree();
  if (da != db) return da < db;
  // Same degree: walk factors in variable-index order. The monomial holding
  // more of the earliest differing variable sorts first.
  auto a = factors_.begin();
  auto b = other.factors_.begin();
  while (a != factors_.end() && b != other.factors_.end()) {
    if (a->first != b->first) return a->first < b->first;
    if (a->second != b->second) return a->second > b->second;
    ++a;
    ++b;
  }
  return false;  // identical
}

double Monomial::evaluate(const Eigen::VectorXd& values) const {
  double r = 1.0;
  for (const auto& [v, e] : factors_) {
    if (v >= values.size()) throw UnboundVariable(v);
    double base = values[v];
    double acc = 1.0;
    int n = e;
    while (n > 0) {  // exponentiation by squaring, deterministic
      if (n & 1) acc *= base;
      base *= base;
      n >>= 1;
    }
    r *= acc;
  }
  return r;
}

std::string Monomial::to_string(const VariableSet& vars) const {
  if (factors_.empty()) return "1";
  std::string out;
  bool first = true;
  for (const auto& [v, e] : factors_) {
    if (!first) out += "*";
    out += vars.name_of(v);
    if (e != 1) out += "^" + std::to_string(e);
    first = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Polynomial

Polynomial::Polynomial(double constant) {
  if (std::abs(constant) > kCoefficientPruneTol) terms_[Monomial()] = constant;
}

Polynomial::Polynomial(const Monomial& m, double coeff) {
  if (std::abs(coeff) > kCoefficientPruneTol) terms_[m] = coeff;
}

int Polynomial::degree() const {
  // Graded order means the last key has maximal total degree.
  return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::max_abs_coefficient() const {
  double r = 0.0;
  for (const auto& [m, c] : terms_) {
    (void)m;
    r = std::max(r, std::abs(c));
  }
  return r;
}

std::vector<int> Polynomial::variables() const {
  std::vector<int> out;
  for (const auto& [m, c] : terms_) {
    (void)c;
    for (const auto& [v, e] : m.factors()) {
      (void)e;
      if (!std::binary_search(out.begin(), out.end(), v)) {
        out.insert(std::lower_bound(out.begin(), out.end(), v), v);
      }
    }
  }
  return out;
}

void Polynomial::normalize() {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (std::abs(it->second) <= kCoefficientPruneTol) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
}

void Polynomial::add_term(const Monomial& m, double c) {
  terms_[m] += c;
  if (std::abs(terms_[m]) <= kCoefficientPruneTol) terms_.erase(m);
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
  Polynomial r = *this;
  for (const auto& [m, c] : other.terms_) r.terms_[m] += c;
  r.normalize();
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& other) const {
  Polynomial r = *this;
  for (const auto& [m, c] : other.terms_) r.terms_[m] -= c;
  r.normalize();
  return r;
}

Polynomial Polynomial::operator-() const {
  Polynomial r;
  for (const auto& [m, c] : terms_) r.terms_[m] = -c;
  return r;
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
  Polynomial r;
  for (const auto& [ma, ca] : terms_) {
    for (const auto& [mb, cb] : other.terms_) {
      r.terms_[ma * mb] += ca * cb;
    }
  }
  r.normalize();
  return r;
}

Polynomial Polynomial::operator*(double k) const {
  Polynomial r;
  for (const auto& [m, c] : terms_) r.terms_[m] = c * k;
  r.normalize();
  return r;
}

Polynomial Polynomial::pow(int exponent) const {
  if (exponent < 0) throw std::invalid_argument("negative polynomial power");
  Polynomial r(1.0);
  for (int i = 0; i < exponent; ++i) r = r * (*this);
  return r;
}

bool Polynomial::almost_equal(const Polynomial& other, double tol) const {
  Polynomial diff = *this - other;
  return diff.max_abs_coefficient() <= tol;
}

Polynomial Polynomial::differentiate(int var_index) const {
  Polynomial r;
  for (const auto& [m, c] : terms_) {
    const int e = m.exponent_of(var_index);
    if (e == 0) continue;
    std::vector<std::pair<int, int>> factors = m.factors();
    for (auto& [v, ex] : factors) {
      if (v == var_index) ex -= 1;
    }
    r.terms_[Monomial(std::move(factors))] += c * e;
  }
  r.normalize();
  return r;
}

double Polynomial::evaluate(const Eigen::VectorXd& values) const {
  double r = 0.0;
  for (const auto& [m, c] : terms_) r += c * m.evaluate(values);
  return r;
}

double Polynomial::evaluate(const std::map<int, double>& values) const {
  int max_index = -1;
  for (const auto& [v, x] : values) {
    (void)x;
    max_index = std::max(max_index, v);
  }
  Eigen::VectorXd dense = Eigen::VectorXd::Zero(max_index + 1);
  std::vector<bool> bound(static_cast<std::size_t>(max_index + 1), false);
  for (const auto& [v, x] : values) {
    dense[v] = x;
    bound[static_cast<std::size_t>(v)] = true;
  }
  for (const int v : variables()) {
    if (v > max_index || !bound[static_cast<std::size_t>(v)]) throw UnboundVariable(v);
  }
  return evaluate(dense);
}

namespace {

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);  // shortest round trip
  return std::string(buf, res.ptr);
}

}  // namespace

std::string Polynomial::to_string(const VariableSet& vars) const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : terms_) {
    const double a = std::abs(c);
    if (first) {
      if (c < 0) out += "-";
    } else {
      out += (c < 0) ? " - " : " + ";
    }
    if (m.is_one()) {
      out += format_double(a);
    } else if (a == 1.0) {
      out += m.to_string(vars);
    } else {
      out += format_double(a) + "*" + m.to_string(vars);
    }
    first = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parser: expr := ('+'|'-')? term (('+'|'-') term)*
//         term := factor ('*' factor)*
//         factor := primary ('^' UINT)?
//         primary := NUMBER | IDENT | '(' expr ')'

namespace {

struct Parser {
  const std::string& text;
  const VariableSet& vars;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }

  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }

  bool accept(char c) {
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) { throw SyntaxError(msg, pos); }

  Polynomial parse_expr() {
    double sign = 1.0;
    if (accept('+')) {
    } else if (accept('-')) {
      sign = -1.0;
    }
    Polynomial r = parse_term() * sign;
    while (true) {
      if (accept('+')) {
        r = r + parse_term();
      } else if (accept('-')) {
        r = r - parse_term();
      } else {
        break;
      }
    }
    return r;
  }

  Polynomial parse_term() {
    Polynomial r = parse_factor();
    while (accept('*')) r = r * parse_factor();
    return r;
  }

  Polynomial parse_factor() {
    Polynomial base = parse_primary();
    if (accept('^')) {
      skip_ws();
      const std::size_t start = pos;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
      if (pos == start) fail("expected nonnegative integer exponent");
      int e = 0;
      std::from_chars(text.data() + start, text.data() + pos, e);
      return base.pow(e);
    }
    return base;
  }

  Polynomial parse_primary() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of input");
    const char c = text[pos];
    if (c == '(') {
      ++pos;
      Polynomial inner = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    fail(std::string("unexpected character '") + c + "'");
  }

  Polynomial parse_number() {
    const std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
      std::size_t mark = pos + 1;
      if (mark < text.size() && (text[mark] == '+' || text[mark] == '-')) ++mark;
      if (mark < text.size() && std::isdigit(static_cast<unsigned char>(text[mark]))) {
        pos = mark;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
      }
    }
    double value = 0.0;
    auto res = std::from_chars(text.data() + start, text.data() + pos, value);
    if (res.ec != std::errc()) fail("malformed number literal");
    return Polynomial(value);
  }

  Polynomial parse_ident() {
    const std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
      ++pos;
    }
    const std::string name = text.substr(start, pos - start);
    const int idx = vars.index_of(name);
    if (idx < 0) throw UnknownVariable(name);
    return Polynomial::variable(idx);
  }
};

}  // namespace

Polynomial parse_polynomial(const std::string& text, const VariableSet& vars) {
  Parser p{text, vars};
  Polynomial r = p.parse_expr();
  if (!p.at_end()) p.fail("trailing input");
  return r;
}

// ---------------------------------------------------------------------------

namespace {

void enumerate_monomials(const std::vector<int>& vars, std::size_t i, int remaining,
                         std::vector<std::pair<int, int>>& current,
                         std::vector<Monomial>& out) {
  if (i == vars.size()) {
    out.emplace_back(current);
    return;
  }
  for (int e = 0; e <= remaining; ++e) {
    if (e > 0) current.emplace_back(vars[i], e);
    enumerate_monomials(vars, i + 1, remaining - e, current, out);
    if (e > 0) current.pop_back();
  }
}

}  // namespace

std::vector<Monomial> monomial_basis(const std::vector<int>& var_indices, int max_degree) {
  if (max_degree < 0) throw std::invalid_argument("max_degree must be >= 0");
  std::vector<int> vars = var_indices;
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  std::vector<Monomial> out;
  std::vector<std::pair<int, int>> current;
  enumerate_monomials(vars, 0, max_degree, current, out);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Polynomial> gradient(const Polynomial& p, const std::vector<int>& var_indices) {
  std::vector<Polynomial> out;
  out.reserve(var_indices.size());
  for (int v : var_indices) out.push_back(p.differentiate(v));
  return out;
}

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace clfcbf
