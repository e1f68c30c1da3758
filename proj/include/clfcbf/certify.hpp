#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clfcbf/control_system.hpp"
#include "clfcbf/sos_program.hpp"

namespace clfcbf {

// Degrees of the certificate multipliers. Defaults match the toy benchmark
// configuration (s0 = s1 = 2, s2 = s3 = 4, p = q = 0); s4 multiplies the
// algebraic state constraints and defaults to the same degree as s2/s3.
struct MultiplierDegrees {
  int s0 = 2;
  int s1 = 2;
  int s2 = 4;
  int s3 = 4;
  int s4 = 4;
  int p = 0;
  int q = 0;
  void validate() const;
};

struct CertifyOptions {
  // SDSOS instead of SOS on the multipliers s2, s3 (cheaper, more restrictive).
  bool use_sdsos = false;
  // Exploit the y -> -y sign symmetry of the compatibility program: every
  // generator contains the auxiliary variables only as squares, so multipliers
  // can be restricted to even-y polynomials and Gram matrices split into
  // parity blocks without loss of generality (average any certificate over
  // the sign group to see this). Off reproduces the plain full-basis program.
  bool exploit_sign_symmetry = true;
  // When positive, the multiplier search maximizes the SOS margin delta of
  // the master constraint (master - delta * sum m_i² stays SOS, delta in
  // [0, 1]) with this weight against the Gram-trace regularizer. Margin-
  // maximizing multipliers certify the pair with slack, which is what gives
  // the alternation's update step room to move.
  double master_margin_weight = 0.0;
  SolverSettings solver;
  double check_tol = 1e-6;
};

// The Farkas-form generators of the compatibility program in (x, y):
// ideal members (y²)ᵀ Λ_i(x) for each input column and the affine form
// ξ(x)ᵀ y² + 1, over the state variables extended with y (one per row of
// Λ). Fresh y names are chosen to avoid collisions.
struct CompatibilityGenerators {
  VariableSet ext_vars;
  std::vector<int> y_indices;          // p + 2 entries
  std::vector<Polynomial> ideal;       // n_u entries: (y²)ᵀ Λ_i
  Polynomial xi_form;                  // ξᵀ y² + 1
};

CompatibilityGenerators compatibility_generators(const ControlAffineSystem& sys,
                                                 const CertificatePair& cert);

// Everything recovered from a successful compatibility verification. The
// master identity
//   -1 - s0ᵀ((y²)ᵀΛ) - s1(ξᵀy² + 1) - s2(1 - V) - s3 h - s4ᵀ e = mᵀ G m
// holds with G ⪰ 0, and s2, s3 carry their own positive-semidefinite Grams.
struct CompatibilityCertificate {
  VariableSet ext_vars;
  std::vector<int> y_indices;
  std::vector<Polynomial> s0;  // one per input column (free)
  Polynomial s1;               // free
  Polynomial s2, s3;           // SOS (or SDSOS)
  GramCertificate s2_gram, s3_gram;
  std::vector<Polynomial> s4;  // one per state constraint (free)
  Polynomial master;           // certified left-hand side
  GramCertificate master_gram;
  bool parity_padded = false;  // master had odd degree; Gram basis was padded
};

struct VerificationOutcome {
  bool verified = false;
  std::string reason;  // set when not verified
  std::optional<CompatibilityCertificate> certificate;
  std::vector<std::pair<std::string, CheckReport>> checks;
  double solve_seconds = 0.0;
  int solver_iterations = 0;
};

// Compatibility of (V, h) over C ∩ D as an SOS feasibility problem at fixed
// multiplier degrees. Verified only when the conic solve is optimal AND every
// recovered certificate passes check_sos_certificate at options.check_tol.
// Infeasibility at fixed degree proves nothing, so the result is Unknown,
// never "incompatible"; disproof is pointwise_compatibility's job.
VerificationOutcome verify_compatibility(const ControlAffineSystem& sys,
                                         const CertificatePair& cert,
                                         const MultiplierDegrees& degrees,
                                         const CertifyOptions& options = {});

// One barrier-correctness certificate: -1 - q h + sum_j p_j l_j is SOS with
// q and every p_j SOS.
struct SafetyCertificate {
  std::vector<Polynomial> q;  // per j for union mode, single shared for intersection
  std::vector<Polynomial> p;  // one per l_j
  std::vector<GramCertificate> master_grams;
};

struct SafetyOutcome {
  bool verified = false;
  std::string reason;
  std::vector<bool> per_constraint_ok;  // per j (union); single entry (intersection)
  std::optional<SafetyCertificate> certificate;
  double solve_seconds = 0.0;
};

// {h >= 0} avoids the union of {l_j <= 0}: one independent certificate per j,
// verified only if all K succeed.
SafetyOutcome verify_safety_union(const Polynomial& h, const UnsafeRegion& region,
                                  const MultiplierDegrees& degrees,
                                  const CertifyOptions& options = {});

// {h >= 0} avoids the intersection of {l_j <= 0}: a single certificate with a
// shared q and per-j p_j. With K = 1 this builds byte-identical programs to
// the union mode.
SafetyOutcome verify_safety_intersection(const Polynomial& h, const UnsafeRegion& region,
                                         const MultiplierDegrees& degrees,
                                         const CertifyOptions& options = {});

}  // namespace clfcbf
