#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clfcbf/certify.hpp"
#include "clfcbf/control_system.hpp"
#include "clfcbf/riccati.hpp"

namespace clfcbf {

struct SynthesisConfig {
  double kappa_V = 0.1;
  double kappa_h = 0.1;
  std::vector<Eigen::VectorXd> candidate_states;
  double c1 = 1.0;
  double c2 = 1.0;
  double h_lower = 0.5;
  double h_upper = 2.0;
  int max_iter = 20;
  MultiplierDegrees degrees;
  int V_degree = 2;
  int h_degree = 2;
  double pd_epsilon = 1e-4;
  double objective_improvement_tol = 1e-4;
  // the loop stops once the improvement stays below tolerance this many
  // consecutive iterations (plateaus of one or two updates are common)
  int stall_patience = 3;
  // After each accepted update, probe V <- rho V (rho < 1) and keep any scale
  // that still re-verifies. Scaling V leaves the linear-kappa CLF row
  // unchanged while growing {V <= 1}, which counteracts the boundary-pinning
  // of fixed-multiplier updates; every accepted scale is a verified pair and
  // only ever lowers the coverage cost.
  bool rescale_level_set = true;
  CertifyOptions certify;
  void validate(const ControlAffineSystem& sys) const;
};

// Hinge coverage cost: sum_i c1 relu(V(x_i) - 1) + c2 relu(-h(x_i)).
double hinge_objective(const Polynomial& V, const Polynomial& h,
                       const std::vector<Eigen::VectorXd>& candidates, double c1, double c2);

// Candidates inside the compatible region {V <= 1} ∩ {h >= 0} (kRegionTol).
int covered_candidates(const Polynomial& V, const Polynomial& h,
                       const std::vector<Eigen::VectorXd>& candidates);

struct LqrInitInfo {
  Eigen::MatrixXd A_projected;
  Eigen::MatrixXd B_projected;
  Eigen::MatrixXd P_projected;
  double care_residual = 0.0;
};

// Initial (V, h) from the LQR value function of the linearization at the
// origin: V = scale xᵀ P̃ x, h = 1 - V. With algebraic constraints e(x) = 0
// the linearization is projected onto the tangent space null(de/dx(0)) and
// the Riccati solution lifted back.
CertificatePair lqr_initialize(const ControlAffineSystem& sys, const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& R, double scale, double kappa_V = 0.1,
                               double kappa_h = 0.1, LqrInitInfo* info = nullptr);

struct MultiplierBundle {
  CompatibilityCertificate compat;
  SafetyCertificate safety;
};

struct LagrangianStepResult {
  bool ok = false;
  std::string reason;
  std::optional<MultiplierBundle> bundle;
  double compat_seconds = 0.0;
  double safety_seconds = 0.0;
};

// Fix (V, h), search the multipliers: the compatibility program plus the
// barrier-correctness program. The returned bundle certifies the pair.
LagrangianStepResult lagrangian_step(const ControlAffineSystem& sys, const CertificatePair& cert,
                                     const UnsafeRegion& region, const MultiplierDegrees& degrees,
                                     const CertifyOptions& options = {});

struct CertificateStepResult {
  bool ok = false;
  std::string reason;
  Polynomial V;
  Polynomial h;
  std::vector<Polynomial> p;
  double objective = 0.0;  // hinge cost of the recovered pair
};

// Fix the multipliers (s0..s4 and q), search (V, h, p) minimizing the hinge
// coverage cost subject to: V(0) = 0, V - pd_epsilon |x|² SOS, the master
// compatibility identity, the correctness constraints, and the scaling bound
// h_lower <= h(0) <= h_upper. Convex given the fixed multipliers.
CertificateStepResult certificate_step(const ControlAffineSystem& sys,
                                       const MultiplierBundle& bundle, const UnsafeRegion& region,
                                       const SynthesisConfig& config);

struct SynthesisIteration {
  Polynomial V;
  Polynomial h;
  double objective = 0.0;
  int covered = 0;
  double t_lagrangian_s = 0.0;
  double t_update_s = 0.0;
  bool verified = false;
  std::optional<MultiplierBundle> multipliers;
};

struct SynthesisTrace {
  std::vector<SynthesisIteration> iterations;  // entry 0 is the verified init
  CertificatePair final_pair;
  std::string stop_reason;
};

struct InitNotVerified : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bilinear alternation: every recorded iterate carries a passing certificate
// bundle, and the hinge objective is non-increasing across the trace. On a
// mid-loop solver failure the trace is truncated at the last verified pair.
SynthesisTrace synthesize(const ControlAffineSystem& sys, const UnsafeRegion& region,
                          const CertificatePair& init, const SynthesisConfig& config);

}  // namespace clfcbf
