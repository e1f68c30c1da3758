#include "clfcbf/problem_file.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace clfcbf {

namespace {

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

struct Sections {
  std::string file;
  std::map<std::string, std::map<std::string, Entry>> data;
  std::map<std::string, int> section_lines;

  bool has(const std::string& section) const { return data.count(section) > 0; }

  std::optional<std::string> get(const std::string& section, const std::string& key) {
    auto sit = data.find(section);
    if (sit == data.end()) return std::nullopt;
    auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return std::nullopt;
    kit->second.used = true;
    return kit->second.value;
  }

  void reject_unused() const {
    for (const auto& [section, entries] : data) {
      for (const auto& [key, entry] : entries) {
        if (!entry.used) {
          throw ProblemFileError("unknown key '" + key + "' in [" + section + "]", file,
                                 entry.line);
        }
      }
    }
  }
};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

Sections parse_sections(const std::string& path, const std::vector<std::string>& known) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  Sections out;
  out.file = path;
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ProblemFileError("malformed section header", path, line_no);
      section = trim(line.substr(1, line.size() - 2));
      if (std::find(known.begin(), known.end(), section) == known.end()) {
        throw ProblemFileError("unknown section [" + section + "]", path, line_no);
      }
      out.data[section];
      out.section_lines[section] = line_no;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ProblemFileError("expected key = value", path, line_no);
    if (section.empty()) throw ProblemFileError("key outside any section", path, line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (out.data[section].count(key)) {
      throw ProblemFileError("duplicate key '" + key + "'", path, line_no);
    }
    out.data[section][key] = {value, line_no, false};
  }
  return out;
}

double parse_double(const std::string& text, const std::string& file, int line) {
  const std::string t = trim(text);
  if (t == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ProblemFileError("malformed number '" + t + "'", file, line);
  }
  return v;
}

int parse_int(const std::string& text, const std::string& file, int line) {
  const std::string t = trim(text);
  int v = 0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ProblemFileError("malformed integer '" + t + "'", file, line);
  }
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (c == sep) {
      out.push_back(trim(current));
      current.clear();
    } else {
      current += c;
    }
  }
  out.push_back(trim(current));
  return out;
}

Eigen::VectorXd parse_vector(const std::string& text, const std::string& file, int line) {
  const auto parts = split(text, ',');
  Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = parse_double(parts[i], file, line);
  }
  return v;
}

KappaFunction parse_kappa(const std::string& text, const std::string& file, int line) {
  // a bare number means the linear rate kappa * t; a semicolon-separated list
  // gives higher-order coefficients (t, t², ...)
  const auto parts = split(text, ';');
  KappaFunction k;
  for (const auto& part : parts) k.coeffs.push_back(parse_double(part, file, line));
  if (k.coeffs.empty() || k.coeffs.front() <= 0.0) {
    throw ProblemFileError("kappa needs a positive leading coefficient", file, line);
  }
  return k;
}

}  // namespace

ProblemFile load_problem_file(const std::string& path) {
  Sections sections =
      parse_sections(path, {"system", "unsafe", "certificates", "synthesis", "solver"});
  ProblemFile out;

  // ---- [system] -----------------------------------------------------------
  if (!sections.has("system")) {
    throw ProblemFileError("missing [system] section", path, 1);
  }
  const int system_line = sections.section_lines["system"];
  if (auto builtin = sections.get("system", "builtin")) {
    if (*builtin == "toy") {
      auto [sys, region] = make_toy_system();
      out.system = std::move(sys);
      out.unsafe = std::move(region);
      out.has_unsafe = true;
    } else if (*builtin == "quadrotor") {
      out.system = make_quadrotor_system();
      // ground obstacle: unsafe below -0.5 m
      out.unsafe.mode = UnsafeRegion::Mode::kUnion;
      out.unsafe.l = {Polynomial::variable(2) + 0.5};
      out.has_unsafe = true;
    } else if (*builtin == "double_integrator") {
      out.system = make_double_integrator();
    } else {
      throw ProblemFileError("unknown builtin '" + *builtin + "'", path, system_line);
    }
  } else {
    auto vars_text = sections.get("system", "variables");
    auto inputs_text = sections.get("system", "inputs");
    auto f_text = sections.get("system", "f");
    auto g_text = sections.get("system", "g");
    if (!vars_text || !inputs_text || !f_text || !g_text) {
      throw ProblemFileError("explicit [system] needs variables, inputs, f, g", path,
                             system_line);
    }
    for (const std::string& name : split(*vars_text, ' ')) {
      if (!name.empty()) out.system.vars.add(name);
    }
    out.system.num_inputs = parse_int(*inputs_text, path, system_line);
    for (const std::string& row : split(*f_text, ';')) {
      out.system.f.push_back(parse_polynomial(row, out.system.vars));
    }
    for (const std::string& row : split(*g_text, ';')) {
      std::vector<Polynomial> cols;
      for (const std::string& entry : split(row, ',')) {
        cols.push_back(parse_polynomial(entry, out.system.vars));
      }
      out.system.g.push_back(std::move(cols));
    }
    if (auto a_text = sections.get("system", "A")) {
      const auto rows = split(*a_text, ';');
      out.system.input_A.resize(static_cast<Eigen::Index>(rows.size()), out.system.num_inputs);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const Eigen::VectorXd row = parse_vector(rows[r], path, system_line);
        if (row.size() != out.system.num_inputs) {
          throw ProblemFileError("input row width != inputs", path, system_line);
        }
        out.system.input_A.row(static_cast<Eigen::Index>(r)) = row.transpose();
      }
      auto c_text = sections.get("system", "c");
      if (!c_text) throw ProblemFileError("A given without c", path, system_line);
      out.system.input_c = parse_vector(*c_text, path, system_line);
    } else {
      out.system.input_A.resize(0, out.system.num_inputs);
      out.system.input_c.resize(0);
    }
    if (auto e_text = sections.get("system", "e")) {
      for (const std::string& row : split(*e_text, ';')) {
        out.system.state_constraints.push_back(parse_polynomial(row, out.system.vars));
      }
    }
    out.system.validate();
  }

  // ---- [unsafe] -----------------------------------------------------------
  if (sections.has("unsafe")) {
    const int line = sections.section_lines["unsafe"];
    UnsafeRegion region;
    if (auto mode = sections.get("unsafe", "mode")) {
      if (*mode == "union") {
        region.mode = UnsafeRegion::Mode::kUnion;
      } else if (*mode == "intersection") {
        region.mode = UnsafeRegion::Mode::kIntersection;
      } else {
        throw ProblemFileError("mode must be union or intersection", path, line);
      }
    }
    auto l_text = sections.get("unsafe", "l");
    if (!l_text) throw ProblemFileError("[unsafe] needs l", path, line);
    for (const std::string& row : split(*l_text, ';')) {
      region.l.push_back(parse_polynomial(row, out.system.vars));
    }
    out.unsafe = std::move(region);
    out.has_unsafe = true;
  }

  // ---- [certificates] -----------------------------------------------------
  if (sections.has("certificates")) {
    const int line = sections.section_lines["certificates"];
    CertificatePair cert;
    auto v_text = sections.get("certificates", "V");
    auto h_text = sections.get("certificates", "h");
    if (!v_text || !h_text) {
      throw ProblemFileError("[certificates] needs V and h", path, line);
    }
    cert.V = parse_polynomial(*v_text, out.system.vars);
    cert.h = parse_polynomial(*h_text, out.system.vars);
    if (auto k = sections.get("certificates", "kappa_V")) cert.kappa_V = parse_kappa(*k, path, line);
    if (auto k = sections.get("certificates", "kappa_h")) cert.kappa_h = parse_kappa(*k, path, line);
    out.certificates = std::move(cert);
  }

  // ---- [synthesis] --------------------------------------------------------
  if (sections.has("synthesis")) {
    const int line = sections.section_lines["synthesis"];
    out.has_synthesis = true;
    SynthesisConfig& config = out.synthesis;
    if (auto v = sections.get("synthesis", "kappa_V")) config.kappa_V = parse_double(*v, path, line);
    if (auto v = sections.get("synthesis", "kappa_h")) config.kappa_h = parse_double(*v, path, line);
    if (auto v = sections.get("synthesis", "c1")) config.c1 = parse_double(*v, path, line);
    if (auto v = sections.get("synthesis", "c2")) config.c2 = parse_double(*v, path, line);
    if (auto v = sections.get("synthesis", "h_lower")) config.h_lower = parse_double(*v, path, line);
    if (auto v = sections.get("synthesis", "h_upper")) config.h_upper = parse_double(*v, path, line);
    if (auto v = sections.get("synthesis", "max_iter")) config.max_iter = parse_int(*v, path, line);
    if (auto v = sections.get("synthesis", "V_degree")) config.V_degree = parse_int(*v, path, line);
    if (auto v = sections.get("synthesis", "h_degree")) config.h_degree = parse_int(*v, path, line);
    if (auto v = sections.get("synthesis", "pd_epsilon")) {
      config.pd_epsilon = parse_double(*v, path, line);
    }
    if (auto v = sections.get("synthesis", "objective_improvement_tol")) {
      config.objective_improvement_tol = parse_double(*v, path, line);
    }
    if (auto v = sections.get("synthesis", "rescale_level_set")) {
      config.rescale_level_set = parse_int(*v, path, line) != 0;
    }
    if (auto v = sections.get("synthesis", "candidates")) {
      for (const std::string& point : split(*v, ';')) {
        config.candidate_states.push_back(parse_vector(point, path, line));
      }
    }
    if (auto v = sections.get("synthesis", "candidate_ring")) {
      if (out.system.builtin != "toy") {
        throw ProblemFileError("candidate_ring is only defined for the toy system", path, line);
      }
      const Eigen::VectorXd rc = parse_vector(*v, path, line);
      if (rc.size() != 2) throw ProblemFileError("candidate_ring = radius, count", path, line);
      const int count = static_cast<int>(rc[1]);
      for (int k = 0; k < count; ++k) {
        const double phi = 2.0 * M_PI * k / count;
        config.candidate_states.push_back(
            toy_state_from_angles(rc[0] * std::cos(phi), rc[0] * std::sin(phi)));
      }
    }
    for (const auto& [key, field] :
         std::map<std::string, int MultiplierDegrees::*>{
             {"s0_degree", &MultiplierDegrees::s0}, {"s1_degree", &MultiplierDegrees::s1},
             {"s2_degree", &MultiplierDegrees::s2}, {"s3_degree", &MultiplierDegrees::s3},
             {"s4_degree", &MultiplierDegrees::s4}, {"p_degree", &MultiplierDegrees::p},
             {"q_degree", &MultiplierDegrees::q}}) {
      if (auto v = sections.get("synthesis", key)) {
        config.degrees.*field = parse_int(*v, path, line);
        out.degrees.*field = config.degrees.*field;
      }
    }
  }

  // ---- [solver] -----------------------------------------------------------
  if (sections.has("solver")) {
    const int line = sections.section_lines["solver"];
    if (auto v = sections.get("solver", "tol")) {
      const double tol = parse_double(*v, path, line);
      out.solver.abs_tol = tol;
      out.solver.rel_tol = tol;
      out.solver.feas_tol = tol;
    }
    if (auto v = sections.get("solver", "max_iters")) {
      out.solver.max_iters = parse_int(*v, path, line);
    }
    if (auto v = sections.get("solver", "time_limit")) {
      out.solver.time_limit_s = parse_double(*v, path, line);
    }
    if (auto v = sections.get("solver", "accept_tol")) {
      out.solver.accept_tol = parse_double(*v, path, line);
    }
    if (auto v = sections.get("solver", "mode")) {
      if (*v == "sdsos") {
        out.certify.use_sdsos = true;
      } else if (*v != "sos") {
        throw ProblemFileError("mode must be sos or sdsos", path, line);
      }
    }
    if (auto v = sections.get("solver", "sign_symmetry")) {
      out.certify.exploit_sign_symmetry = parse_int(*v, path, line) != 0;
    }
  }
  out.certify.solver = out.solver;
  out.synthesis.certify = out.certify;

  sections.reject_unused();
  return out;
}

MultiplierDegrees load_degrees_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  MultiplierDegrees degrees;
  std::string line;
  int line_no = 0;
  const std::map<std::string, int MultiplierDegrees::*> fields{
      {"s0", &MultiplierDegrees::s0}, {"s1", &MultiplierDegrees::s1},
      {"s2", &MultiplierDegrees::s2}, {"s3", &MultiplierDegrees::s3},
      {"s4", &MultiplierDegrees::s4}, {"p", &MultiplierDegrees::p},
      {"q", &MultiplierDegrees::q}};
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ProblemFileError("expected key = value", path, line_no);
    const std::string key = trim(line.substr(0, eq));
    auto it = fields.find(key);
    if (it == fields.end()) throw ProblemFileError("unknown degree '" + key + "'", path, line_no);
    degrees.*(it->second) = parse_int(line.substr(eq + 1), path, line_no);
  }
  degrees.validate();
  return degrees;
}

CertificatePair load_certificates_file(const std::string& path, const VariableSet& vars) {
  Sections sections = parse_sections(path, {"certificates"});
  if (!sections.has("certificates")) {
    throw ProblemFileError("missing [certificates] section", path, 1);
  }
  const int line = sections.section_lines["certificates"];
  CertificatePair cert;
  auto v_text = sections.get("certificates", "V");
  auto h_text = sections.get("certificates", "h");
  if (!v_text || !h_text) throw ProblemFileError("needs V and h", path, line);
  cert.V = parse_polynomial(*v_text, vars);
  cert.h = parse_polynomial(*h_text, vars);
  if (auto k = sections.get("certificates", "kappa_V")) cert.kappa_V = parse_kappa(*k, path, line);
  if (auto k = sections.get("certificates", "kappa_h")) cert.kappa_h = parse_kappa(*k, path, line);
  sections.reject_unused();
  return cert;
}

namespace {

std::string kappa_to_string(const KappaFunction& k) {
  std::string out;
  for (std::size_t i = 0; i < k.coeffs.size(); ++i) {
    if (i > 0) out += " ; ";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), k.coeffs[i]);
    out.append(buf, res.ptr);
  }
  return out;
}

}  // namespace

std::string certificates_to_string(const ControlAffineSystem& sys, const CertificatePair& cert,
                                   const std::string& metadata_comment) {
  std::ostringstream out;
  if (!metadata_comment.empty()) {
    std::istringstream lines(metadata_comment);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << "\n";
  }
  out << "[certificates]\n";
  out << "V = " << cert.V.to_string(sys.vars) << "\n";
  out << "h = " << cert.h.to_string(sys.vars) << "\n";
  out << "kappa_V = " << kappa_to_string(cert.kappa_V) << "\n";
  out << "kappa_h = " << kappa_to_string(cert.kappa_h) << "\n";
  return out.str();
}

}  // namespace clfcbf
