#pragma once

#include <optional>
#include <string>

#include "clfcbf/certify.hpp"
#include "clfcbf/control_system.hpp"
#include "clfcbf/synthesize.hpp"

namespace clfcbf {

struct ProblemFileError : std::runtime_error {
  ProblemFileError(const std::string& what, const std::string& file, int line)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what) {}
};

// Parsed problem file: sections [system], [unsafe], [certificates],
// [synthesis], [solver]. Unknown sections or keys are rejected with their
// location. The built-in systems provide a default unsafe region that an
// explicit [unsafe] section overrides.
struct ProblemFile {
  ControlAffineSystem system;
  UnsafeRegion unsafe;
  bool has_unsafe = false;
  std::optional<CertificatePair> certificates;
  SynthesisConfig synthesis;
  bool has_synthesis = false;
  SolverSettings solver;
  CertifyOptions certify;  // solver settings mirrored in, plus sdsos / symmetry
  MultiplierDegrees degrees;
};

ProblemFile load_problem_file(const std::string& path);

// Degrees file: one `name = value` per line with names s0, s1, s2, s3, s4,
// p, q; omitted names keep their defaults.
MultiplierDegrees load_degrees_file(const std::string& path);

// Certificate files reuse the [certificates] section grammar.
CertificatePair load_certificates_file(const std::string& path, const VariableSet& vars);
std::string certificates_to_string(const ControlAffineSystem& sys, const CertificatePair& cert,
                                   const std::string& metadata_comment = "");

}  // namespace clfcbf
