#include "clfcbf/conic_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace clfcbf {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kPrimalInfeasible: return "primal_infeasible";
    case SolveStatus::kDualInfeasible: return "dual_infeasible";
    case SolveStatus::kUnknown: return "unknown";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kStepScale = 0.99;

// ---------------------------------------------------------------------------
// Cone block views and Nesterov-Todd scalings.
//
// The solver works on the homogeneous self-dual embedding of
//   min cᵀx  s.t.  A x = b,  x_cone ∈ K,
// written in slack form G x + s = h with G = -Sel (selector of cone-backed
// variables) and h = 0, following the classic primal-dual path-following
// scheme: scaled complementarity lambda = W z = W^{-T} s, Mehrotra
// predictor-corrector, and a reduced KKT solve.

struct Block {
  ConeKind kind;
  int global_start;  // column index into x
  int offset;        // offset into the stacked cone vectors s, z
  int size;          // span length (svec length for PSD)
  int dim;           // matrix dimension for PSD, size for SOC, else size

  // NT scaling state
  Eigen::VectorXd w;       // nonneg: w = sqrt(s/z)
  double beta = 0.0;       // soc
  Eigen::VectorXd wbar;    // soc normalized scaling point
  Eigen::MatrixXd R;       // psd
  Eigen::MatrixXd Rinv;    // psd
  Eigen::MatrixXd Gm;      // psd: R Rᵀ
  Eigen::VectorXd lam;     // scaled point lambda (svec of diag for PSD)
};

Eigen::VectorXd soc_J(const Eigen::VectorXd& u) {
  Eigen::VectorXd r = -u;
  r[0] = u[0];
  return r;
}

// Minimum "eigenvalue" of a cone point (distance to the boundary in the
// spectral sense); used for interior checks and initial shifts.
double cone_min_eig(const Block& b, const Eigen::VectorXd& v) {
  switch (b.kind) {
    case ConeKind::kNonnegative:
      return v.minCoeff();
    case ConeKind::kSecondOrder:
      return v[0] - v.tail(v.size() - 1).norm();
    case ConeKind::kPsd: {
      Eigen::MatrixXd m = svec_to_matrix(v, b.dim);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
      return es.eigenvalues().minCoeff();
    }
    default:
      return kInf;
  }
}

Eigen::VectorXd cone_identity(const Block& b) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(b.size);
  switch (b.kind) {
    case ConeKind::kNonnegative:
      e.setOnes();
      break;
    case ConeKind::kSecondOrder:
      e[0] = 1.0;
      break;
    case ConeKind::kPsd:
      for (int i = 0; i < b.dim; ++i) e[svec_index(i, i, b.dim)] = 1.0;
      break;
    default:
      break;
  }
  return e;
}

// Degree of the standard log barrier of the block.
int cone_degree(const Block& b) {
  switch (b.kind) {
    case ConeKind::kNonnegative: return b.size;
    case ConeKind::kSecondOrder: return 1;
    case ConeKind::kPsd: return b.dim;
    default: return 0;
  }
}

Eigen::VectorXd apply_W(const Block& b, const Eigen::VectorXd& u);

bool compute_scaling(Block& b, const Eigen::VectorXd& s, const Eigen::VectorXd& z) {
  switch (b.kind) {
    case ConeKind::kNonnegative: {
      b.w = (s.array() / z.array()).sqrt();
      b.lam = (s.array() * z.array()).sqrt();
      return b.w.allFinite() && b.lam.allFinite();
    }
    case ConeKind::kSecondOrder: {
      const double det_s = s[0] * s[0] - s.tail(s.size() - 1).squaredNorm();
      const double det_z = z[0] * z[0] - z.tail(z.size() - 1).squaredNorm();
      if (det_s <= 0.0 || det_z <= 0.0) return false;
      const Eigen::VectorXd sbar = s / std::sqrt(det_s);
      const Eigen::VectorXd zbar = z / std::sqrt(det_z);
      const double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
      b.beta = std::pow(det_s / det_z, 0.25);
      // scaling point wbar = (sbar + J zbar) / (2 gamma), normalized so that
      // wbar' J wbar = 1; W = beta * ((wbar+e)(wbar+e)' / (1+wbar0) - J)
      b.wbar = (sbar + soc_J(zbar)) / (2.0 * gamma);
      b.lam = apply_W(b, z);
      return b.lam.allFinite();
    }
    case ConeKind::kPsd: {
      Eigen::MatrixXd S = svec_to_matrix(s, b.dim);
      Eigen::MatrixXd Z = svec_to_matrix(z, b.dim);
      Eigen::LLT<Eigen::MatrixXd> llt_s(S);
      Eigen::LLT<Eigen::MatrixXd> llt_z(Z);
      if (llt_s.info() != Eigen::Success || llt_z.info() != Eigen::Success) return false;
      Eigen::MatrixXd Ls = llt_s.matrixL();
      Eigen::MatrixXd Lz = llt_z.matrixL();
      Eigen::BDCSVD<Eigen::MatrixXd> svd(Lz.transpose() * Ls,
                                         Eigen::ComputeFullU | Eigen::ComputeFullV);
      const Eigen::VectorXd sigma = svd.singularValues();
      if (sigma.minCoeff() <= 0.0) return false;
      const Eigen::VectorXd rsqrt = sigma.array().rsqrt();
      b.R = Ls * svd.matrixV() * rsqrt.asDiagonal();
      b.Rinv = rsqrt.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
      b.Gm = b.R * b.R.transpose();
      b.lam = Eigen::VectorXd::Zero(b.size);
      for (int i = 0; i < b.dim; ++i) b.lam[svec_index(i, i, b.dim)] = sigma[i];
      return b.lam.allFinite();
    }
    default:
      return true;
  }
}

// W z (scale a dual-side vector); W is the symmetric NT scaling.
Eigen::VectorXd apply_W(const Block& b, const Eigen::VectorXd& u) {
  switch (b.kind) {
    case ConeKind::kNonnegative:
      return b.w.cwiseProduct(u);
    case ConeKind::kSecondOrder: {
      Eigen::VectorXd v = b.wbar;
      v[0] += 1.0;
      return b.beta * (v * (v.dot(u) / (1.0 + b.wbar[0])) - soc_J(u));
    }
    case ConeKind::kPsd:
      return matrix_to_svec(b.R.transpose() * svec_to_matrix(u, b.dim) * b.R);
    default:
      return u;
  }
}

// Wᵀ u; W is self-adjoint for the nonneg and second-order blocks but not for
// the PSD block, where the adjoint swaps R and Rᵀ.
Eigen::VectorXd apply_WT(const Block& b, const Eigen::VectorXd& u) {
  if (b.kind == ConeKind::kPsd) {
    return matrix_to_svec(b.R * svec_to_matrix(u, b.dim) * b.R.transpose());
  }
  return apply_W(b, u);
}

// W^{-T} s (scale a primal-side vector).
Eigen::VectorXd apply_WinvT(const Block& b, const Eigen::VectorXd& u) {
  switch (b.kind) {
    case ConeKind::kNonnegative:
      return u.cwiseQuotient(b.w);
    case ConeKind::kSecondOrder: {
      // W^{-1} = (1/beta) ((c+e)(c+e)'/(1+c0) - J), c = J wbar
      Eigen::VectorXd c = soc_J(b.wbar);
      c[0] += 1.0;
      return ((c * (c.dot(u) / (1.0 + b.wbar[0]))) - soc_J(u)) / b.beta;
    }
    case ConeKind::kPsd:
      return matrix_to_svec(b.Rinv * svec_to_matrix(u, b.dim) * b.Rinv.transpose());
    default:
      return u;
  }
}

// WᵀW u = W² u.
Eigen::VectorXd apply_W2(const Block& b, const Eigen::VectorXd& u) {
  switch (b.kind) {
    case ConeKind::kNonnegative:
      return b.w.array().square().matrix().cwiseProduct(u);
    case ConeKind::kSecondOrder:
      // W² = P(w) = beta² (2 wbar wbar' - J)
      return b.beta * b.beta * (2.0 * b.wbar * b.wbar.dot(u) - soc_J(u));
    case ConeKind::kPsd:
      return matrix_to_svec(b.Gm * svec_to_matrix(u, b.dim) * b.Gm);
    default:
      return u;
  }
}

// Jordan product u o v in the block's algebra.
Eigen::VectorXd jordan_product(const Block& b, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& v) {
  switch (b.kind) {
    case ConeKind::kNonnegative:
      return u.cwiseProduct(v);
    case ConeKind::kSecondOrder: {
      Eigen::VectorXd r(b.size);
      r[0] = u.dot(v);
      r.tail(b.size - 1) = u[0] * v.tail(b.size - 1) + v[0] * u.tail(b.size - 1);
      return r;
    }
    case ConeKind::kPsd: {
      Eigen::MatrixXd U = svec_to_matrix(u, b.dim);
      Eigen::MatrixXd V = svec_to_matrix(v, b.dim);
      return matrix_to_svec(0.5 * (U * V + V * U));
    }
    default:
      return u;
  }
}

// Solve lam o x = v for x; lam is the current scaled point of the block.
Eigen::VectorXd jordan_solve(const Block& b, const Eigen::VectorXd& v) {
  switch (b.kind) {
    case ConeKind::kNonnegative:
      return v.cwiseQuotient(b.lam);
    case ConeKind::kSecondOrder: {
      const double l0 = b.lam[0];
      const Eigen::VectorXd l1 = b.lam.tail(b.size - 1);
      const double det = l0 * l0 - l1.squaredNorm();
      Eigen::VectorXd x(b.size);
      x[0] = (l0 * v[0] - l1.dot(v.tail(b.size - 1))) / det;
      x.tail(b.size - 1) = (v.tail(b.size - 1) - x[0] * l1) / l0;
      return x;
    }
    case ConeKind::kPsd: {
      // lam is diagonal in the scaled space: X_ij = 2 V_ij / (sig_i + sig_j).
      Eigen::MatrixXd V = svec_to_matrix(v, b.dim);
      Eigen::VectorXd sig(b.dim);
      for (int i = 0; i < b.dim; ++i) sig[i] = b.lam[svec_index(i, i, b.dim)];
      for (int i = 0; i < b.dim; ++i) {
        for (int j = 0; j < b.dim; ++j) {
          V(i, j) = 2.0 * V(i, j) / (sig[i] + sig[j]);
        }
      }
      return matrix_to_svec(V);
    }
    default:
      return v;
  }
}

// Largest step alpha with lam + alpha d in the cone (lam strictly interior).
double max_step(const Block& b, const Eigen::VectorXd& d) {
  switch (b.kind) {
    case ConeKind::kNonnegative: {
      double step = kInf;
      for (int i = 0; i < b.size; ++i) {
        if (d[i] < 0.0) step = std::min(step, -b.lam[i] / d[i]);
      }
      return step;
    }
    case ConeKind::kSecondOrder: {
      // boundary: (l0 + a d0)² - |l1 + a d1|² = 0, l0 + a d0 >= 0
      const double l0 = b.lam[0];
      const Eigen::VectorXd l1 = b.lam.tail(b.size - 1);
      const double d0 = d[0];
      const Eigen::VectorXd d1 = d.tail(b.size - 1);
      const double qa = d0 * d0 - d1.squaredNorm();
      const double qb = 2.0 * (l0 * d0 - l1.dot(d1));
      const double qc = l0 * l0 - l1.squaredNorm();  // > 0 in the interior
      double step = kInf;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (std::abs(qa) < 1e-300) {
        if (qb < 0.0) step = -qc / qb;
      } else if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double r1 = (-qb - sq) / (2.0 * qa);
        const double r2 = (-qb + sq) / (2.0 * qa);
        for (double r : {std::min(r1, r2), std::max(r1, r2)}) {
          if (r > 0.0) {
            step = std::min(step, r);
            break;
          }
        }
      }
      if (d0 < 0.0) step = std::min(step, -l0 / d0);
      return step;
    }
    case ConeKind::kPsd: {
      Eigen::VectorXd sig(b.dim);
      for (int i = 0; i < b.dim; ++i) sig[i] = b.lam[svec_index(i, i, b.dim)];
      const Eigen::VectorXd isqrt = sig.array().rsqrt();
      Eigen::MatrixXd D = svec_to_matrix(d, b.dim);
      Eigen::MatrixXd M = isqrt.asDiagonal() * D * isqrt.asDiagonal();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
      const double mineig = es.eigenvalues().minCoeff();
      return mineig >= 0.0 ? kInf : 1.0 / (-mineig);
    }
    default:
      return kInf;
  }
}

// Sparse entry lists used when assembling the Schur complement.
struct PsdRowEntries {
  int row;  // equality row index
  // matrix-space entries (i >= j) with mat values (off-diagonals already
  // divided by sqrt(2) relative to the svec coordinates)
  std::vector<std::array<double, 3>> entries;  // {i, j, value} (i, j stored as双)
};

struct BlockStructure {
  // Per nonneg/soc column: sparse column entries (row, value).
  std::vector<std::vector<std::pair<int, double>>> columns;
  // PSD: per equality row touching the block, the decoded matrix entries.
  std::vector<int> rows;                                  // touching rows
  std::vector<std::vector<std::array<int, 2>>> mat_idx;   // per row: (i, j)
  std::vector<std::vector<double>> mat_val;               // per row: value
};

struct Workspace {
  int n = 0;      // variables
  int m = 0;      // equality rows (after dropping empties)
  int f = 0;      // free variables
  int nc = 0;     // stacked cone dimension
  int nu = 0;     // barrier degree
  std::vector<int> free_idx;
  std::vector<Block> blocks;
  std::vector<BlockStructure> structure;
  Eigen::SparseMatrix<double> A;   // m x n
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::MatrixXd Af;              // m x f dense
  std::vector<int> row_map;        // kept row -> original row
  std::vector<char> row_has_cone;  // per kept row
  std::vector<int> support_rows;   // rows with cone support
  std::vector<int> pin_rows;       // rows touching only free variables

  // gather x -> stacked cone coordinates
  Eigen::VectorXd gather(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(nc);
    for (const Block& b2 : blocks) {
      out.segment(b2.offset, b2.size) = x.segment(b2.global_start, b2.size);
    }
    return out;
  }
  // scatter stacked cone coordinates into an n-vector (zeros elsewhere)
  Eigen::VectorXd scatter(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (const Block& b2 : blocks) {
      out.segment(b2.global_start, b2.size) = v.segment(b2.offset, b2.size);
    }
    return out;
  }
};

// Factorization of the reduced KKT system for the current scalings.
struct KktFactor {
  const Workspace* ws = nullptr;
  Eigen::LLT<Eigen::MatrixXd> llt_S;    // Schur over support rows
  Eigen::MatrixXd F;                    // L^{-1} A_f (support rows only)
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_M;  // bordered (f + pins) system
  bool ok = false;
};

Eigen::VectorXd apply_W2_all(const Workspace& ws, const Eigen::VectorXd& v) {
  Eigen::VectorXd out(ws.nc);
  for (const Block& b : ws.blocks) {
    out.segment(b.offset, b.size) = apply_W2(b, v.segment(b.offset, b.size));
  }
  return out;
}

// Schur complement S = A_cone W² A_coneᵀ restricted to support rows.
Eigen::MatrixXd form_schur(const Workspace& ws) {
  const int ms = static_cast<int>(ws.support_rows.size());
  std::vector<int> row_pos(ws.m, -1);
  for (int i = 0; i < ms; ++i) row_pos[ws.support_rows[i]] = i;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(ms, ms);

  for (std::size_t bi = 0; bi < ws.blocks.size(); ++bi) {
    const Block& b = ws.blocks[bi];
    const BlockStructure& st = ws.structure[bi];
    if (b.kind == ConeKind::kNonnegative) {
      for (int j = 0; j < b.size; ++j) {
        const auto& col = st.columns[j];
        const double w2 = b.w[j] * b.w[j];
        for (const auto& [r1, v1] : col) {
          for (const auto& [r2, v2] : col) {
            S(row_pos[r1], row_pos[r2]) += w2 * v1 * v2;
          }
        }
      }
    } else if (b.kind == ConeKind::kSecondOrder) {
      // A W² Aᵀ = beta² (2 u uᵀ - A J Aᵀ), u = A wbar
      const double b2 = b.beta * b.beta;
      std::vector<int> support;
      for (const auto& col : st.columns) {
        for (const auto& [r, v] : col) {
          (void)v;
          support.push_back(r);
        }
      }
      std::sort(support.begin(), support.end());
      support.erase(std::unique(support.begin(), support.end()), support.end());
      std::vector<double> u(support.size(), 0.0);
      std::vector<int> pos_of(ws.m, -1);
      for (std::size_t i = 0; i < support.size(); ++i) pos_of[support[i]] = static_cast<int>(i);
      for (int j = 0; j < b.size; ++j) {
        for (const auto& [r, val] : st.columns[j]) u[pos_of[r]] += val * b.wbar[j];
      }
      for (std::size_t i = 0; i < support.size(); ++i) {
        for (std::size_t j = 0; j < support.size(); ++j) {
          S(row_pos[support[i]], row_pos[support[j]]) += b2 * 2.0 * u[i] * u[j];
        }
      }
      for (int j = 0; j < b.size; ++j) {
        const double sign = (j == 0) ? 1.0 : -1.0;
        const auto& col = st.columns[j];
        for (const auto& [r1, v1] : col) {
          for (const auto& [r2, v2] : col) {
            S(row_pos[r1], row_pos[r2]) -= b2 * sign * v1 * v2;
          }
        }
      }
    } else if (b.kind == ConeKind::kPsd) {
      const int k = b.dim;
      Eigen::MatrixXd Bwork(k, k);
      Eigen::MatrixXd Mq(k, k);
      for (std::size_t qi = 0; qi < st.rows.size(); ++qi) {
        // Mq = Gm mat(a_q) Gm, exploiting the sparsity of a_q
        Bwork.setZero();
        std::vector<int> touched;
        for (std::size_t t = 0; t < st.mat_idx[qi].size(); ++t) {
          const int i = st.mat_idx[qi][t][0];
          const int j = st.mat_idx[qi][t][1];
          const double v = st.mat_val[qi][t];
          Bwork.row(i) += v * b.Gm.row(j);
          touched.push_back(i);
          if (i != j) {
            Bwork.row(j) += v * b.Gm.row(i);
            touched.push_back(j);
          }
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        Mq.setZero();
        for (int r : touched) Mq += b.Gm.col(r) * Bwork.row(r);
        // lower-triangular fill: pair with rows p <= q
        for (std::size_t pi = 0; pi <= qi; ++pi) {
          double acc = 0.0;
          for (std::size_t t = 0; t < st.mat_idx[pi].size(); ++t) {
            const int i = st.mat_idx[pi][t][0];
            const int j = st.mat_idx[pi][t][1];
            const double v = st.mat_val[pi][t];
            acc += (i == j) ? v * Mq(i, i) : v * (Mq(i, j) + Mq(j, i));
          }
          const int rp = row_pos[st.rows[pi]];
          const int rq = row_pos[st.rows[qi]];
          S(rp, rq) += acc;
          if (rp != rq) S(rq, rp) += acc;
        }
      }
    }
  }
  return S;
}

bool factor_kkt(const Workspace& ws, KktFactor& kf) {
  const int ms = static_cast<int>(ws.support_rows.size());
  const int m0 = static_cast<int>(ws.pin_rows.size());
  Eigen::MatrixXd S = form_schur(ws);
  double reg = 1e-12 * std::max(1.0, S.diagonal().maxCoeff());
  for (int attempt = 0; attempt < 4; ++attempt) {
    Eigen::MatrixXd Sreg = S + reg * Eigen::MatrixXd::Identity(ms, ms);
    kf.llt_S.compute(Sreg);
    if (kf.llt_S.info() == Eigen::Success) break;
    reg *= 1e3;
  }
  if (kf.llt_S.info() != Eigen::Success) return false;

  Eigen::MatrixXd Af_support(ms, ws.f);
  for (int i = 0; i < ms; ++i) Af_support.row(i) = ws.Af.row(ws.support_rows[i]);
  kf.F = kf.llt_S.matrixL().solve(Af_support);

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(ws.f + m0, ws.f + m0);
  if (ws.f > 0) {
    M.topLeftCorner(ws.f, ws.f) = kf.F.transpose() * kf.F;
    M.topLeftCorner(ws.f, ws.f).diagonal().array() +=
        1e-13 * std::max(1.0, M.topLeftCorner(ws.f, ws.f).diagonal().maxCoeff());
    for (int i = 0; i < m0; ++i) {
      M.block(ws.f + i, 0, 1, ws.f) = ws.Af.row(ws.pin_rows[i]);
      M.block(0, ws.f + i, ws.f, 1) = ws.Af.row(ws.pin_rows[i]).transpose();
    }
  }
  if (ws.f + m0 > 0) kf.lu_M.compute(M);
  kf.ws = &ws;
  kf.ok = true;
  return true;
}

// Solve the 3x3 scaled KKT system
//   [ 0   Aᵀ   Gᵀ ] [dx]   [r1]
//   [ A   0    0  ] [dy] = [r2]
//   [ G   0  -W²  ] [dz]   [r3]
// with G = -Sel. Two refinement passes keep the residual near roundoff.
void kkt_solve(const KktFactor& kf, const Eigen::VectorXd& r1, const Eigen::VectorXd& r2,
               const Eigen::VectorXd& r3, Eigen::VectorXd& dx, Eigen::VectorXd& dy,
               Eigen::VectorXd& dz) {
  const Workspace& ws = *kf.ws;
  const int ms = static_cast<int>(ws.support_rows.size());
  const int m0 = static_cast<int>(ws.pin_rows.size());

  auto solve_once = [&](const Eigen::VectorXd& a1, const Eigen::VectorXd& a2,
                        const Eigen::VectorXd& a3, Eigen::VectorXd& ox, Eigen::VectorXd& oy,
                        Eigen::VectorXd& oz) {
    Eigen::VectorXd r1_v = ws.gather(a1);
    Eigen::VectorXd rhat = a2 + ws.A * ws.scatter(a3) - ws.A * ws.scatter(apply_W2_all(ws, r1_v));

    Eigen::VectorXd rhat_s(ms), w(ms);
    for (int i = 0; i < ms; ++i) rhat_s[i] = rhat[ws.support_rows[i]];
    w = kf.llt_S.matrixL().solve(rhat_s);

    Eigen::VectorXd rhs_border(ws.f + m0);
    for (int i = 0; i < ws.f; ++i) rhs_border[i] = a1[ws.free_idx[i]];
    rhs_border.head(ws.f) += kf.F.transpose() * w;
    for (int i = 0; i < m0; ++i) rhs_border[ws.f + i] = rhat[ws.pin_rows[i]];

    Eigen::VectorXd sol = (ws.f + m0 > 0) ? kf.lu_M.solve(rhs_border).eval()
                                          : Eigen::VectorXd::Zero(0).eval();
    Eigen::VectorXd dx_f = sol.head(ws.f);

    Eigen::VectorXd dy_support = kf.llt_S.matrixU().solve(kf.F * dx_f - w);
    oy = Eigen::VectorXd::Zero(ws.m);
    for (int i = 0; i < ms; ++i) oy[ws.support_rows[i]] = dy_support[i];
    for (int i = 0; i < m0; ++i) oy[ws.pin_rows[i]] = sol[ws.f + i];

    Eigen::VectorXd Aty = ws.A.transpose() * oy;
    oz = ws.gather(Aty) - r1_v;
    Eigen::VectorXd dx_v = -apply_W2_all(ws, oz) - a3;

    ox = Eigen::VectorXd::Zero(ws.n);
    for (int i = 0; i < ws.f; ++i) ox[ws.free_idx[i]] = dx_f[i];
    for (const Block& blk : ws.blocks) {
      ox.segment(blk.global_start, blk.size) = dx_v.segment(blk.offset, blk.size);
    }
  };

  solve_once(r1, r2, r3, dx, dy, dz);
  for (int pass = 0; pass < 2; ++pass) {
    // residuals of the 3x3 system (rows 1 free-part and 2 are the only
    // nontrivial ones by construction, but compute all for safety)
    Eigen::VectorXd e1 = r1 - (ws.A.transpose() * dy - ws.scatter(dz));
    Eigen::VectorXd e2 = r2 - ws.A * dx;
    Eigen::VectorXd e3 = r3 - (-ws.gather(dx) - apply_W2_all(ws, dz));
    const double resid = std::max({e1.lpNorm<Eigen::Infinity>(), e2.lpNorm<Eigen::Infinity>(),
                                   e3.lpNorm<Eigen::Infinity>()});
    const double scale = std::max({1.0, r1.lpNorm<Eigen::Infinity>(),
                                   r2.lpNorm<Eigen::Infinity>(), r3.lpNorm<Eigen::Infinity>()});
    if (resid <= 1e-13 * scale) break;
    Eigen::VectorXd cx, cy, cz;
    solve_once(e1, e2, e3, cx, cy, cz);
    dx += cx;
    dy += cy;
    dz += cz;
  }
}

struct Residuals {
  Eigen::VectorXd rx, ry, rz;
  double rtau = 0.0;
};

}  // namespace

// ---------------------------------------------------------------------------

namespace {

ConicSolution solve_core(const ConicProblem& problem, const SolverSettings& settings) {
  const auto t_start = std::chrono::steady_clock::now();

  ConicSolution result;
  result.primal = Eigen::VectorXd::Zero(problem.num_vars);
  result.dual_eq = Eigen::VectorXd::Zero(problem.num_equalities());

  Workspace ws;
  ws.n = problem.num_vars;
  ws.c = problem.objective;

  // classify variable spans
  int cone_offset = 0;
  for (const ConeSpan& span : problem.cones) {
    if (span.kind == ConeKind::kZero) {
      for (int i = 0; i < span.size; ++i) ws.free_idx.push_back(span.start + i);
    } else {
      Block b;
      b.kind = span.kind;
      b.global_start = span.start;
      b.offset = cone_offset;
      b.size = span.size;
      b.dim = span.kind == ConeKind::kPsd ? span.psd_dim : span.size;
      cone_offset += span.size;
      ws.blocks.push_back(std::move(b));
    }
  }
  ws.f = static_cast<int>(ws.free_idx.size());
  ws.nc = cone_offset;
  ws.nu = 0;
  for (const Block& b : ws.blocks) ws.nu += cone_degree(b);

  // Drop structurally empty equality rows. A zero row with nonzero rhs is an
  // immediate Farkas certificate.
  {
    const int m_orig = problem.num_equalities();
    std::vector<char> empty(static_cast<std::size_t>(m_orig), 1);
    for (int col = 0; col < problem.eq_matrix.outerSize(); ++col) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(problem.eq_matrix, col); it; ++it) {
        if (it.value() != 0.0) empty[static_cast<std::size_t>(it.row())] = 0;
      }
    }
    for (int r = 0; r < m_orig; ++r) {
      if (empty[static_cast<std::size_t>(r)] && std::abs(problem.eq_rhs[r]) > 1e-14) {
        result.status = SolveStatus::kPrimalInfeasible;
        result.dual_eq[r] = -1.0 / problem.eq_rhs[r];
        result.dual_cone = Eigen::VectorXd::Zero(ws.nc);
        return result;
      }
      if (!empty[static_cast<std::size_t>(r)]) ws.row_map.push_back(r);
    }
    ws.m = static_cast<int>(ws.row_map.size());
    std::vector<int> old_to_new(static_cast<std::size_t>(m_orig), -1);
    for (int i = 0; i < ws.m; ++i) old_to_new[static_cast<std::size_t>(ws.row_map[i])] = i;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(problem.eq_matrix.nonZeros()));
    for (int col = 0; col < problem.eq_matrix.outerSize(); ++col) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(problem.eq_matrix, col); it; ++it) {
        const int nr = old_to_new[static_cast<std::size_t>(it.row())];
        if (nr >= 0 && it.value() != 0.0) trips.emplace_back(nr, static_cast<int>(it.col()), it.value());
      }
    }
    ws.A.resize(ws.m, ws.n);
    ws.A.setFromTriplets(trips.begin(), trips.end());
    ws.A.makeCompressed();
    ws.b.resize(ws.m);
    for (int i = 0; i < ws.m; ++i) ws.b[i] = problem.eq_rhs[ws.row_map[i]];
  }

  // dense free-column matrix and per-block sparse structure
  ws.Af.resize(ws.m, ws.f);
  ws.Af.setZero();
  for (int i = 0; i < ws.f; ++i) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(ws.A, ws.free_idx[i]); it; ++it) {
      ws.Af(it.row(), i) = it.value();
    }
  }
  ws.row_has_cone.assign(static_cast<std::size_t>(ws.m), 0);
  ws.structure.resize(ws.blocks.size());
  static const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
  for (std::size_t bi = 0; bi < ws.blocks.size(); ++bi) {
    const Block& b = ws.blocks[bi];
    BlockStructure& st = ws.structure[bi];
    if (b.kind == ConeKind::kPsd) {
      std::map<int, std::pair<std::vector<std::array<int, 2>>, std::vector<double>>> per_row;
      for (int local = 0; local < b.size; ++local) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(ws.A, b.global_start + local); it;
             ++it) {
          ws.row_has_cone[static_cast<std::size_t>(it.row())] = 1;
          // decode svec position -> (i, j)
          int j = 0;
          int pos = local;
          while (pos >= b.dim - j) {
            pos -= b.dim - j;
            ++j;
          }
          const int i = j + pos;
          auto& entry = per_row[static_cast<int>(it.row())];
          entry.first.push_back({i, j});
          entry.second.push_back(i == j ? it.value() : it.value() * kInvSqrt2);
        }
      }
      for (auto& [row, data] : per_row) {
        st.rows.push_back(row);
        st.mat_idx.push_back(std::move(data.first));
        st.mat_val.push_back(std::move(data.second));
      }
    } else {
      st.columns.resize(static_cast<std::size_t>(b.size));
      for (int local = 0; local < b.size; ++local) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(ws.A, b.global_start + local); it;
             ++it) {
          ws.row_has_cone[static_cast<std::size_t>(it.row())] = 1;
          st.columns[static_cast<std::size_t>(local)].emplace_back(static_cast<int>(it.row()),
                                                                   it.value());
        }
      }
    }
  }
  for (int r = 0; r < ws.m; ++r) {
    if (ws.row_has_cone[static_cast<std::size_t>(r)]) {
      ws.support_rows.push_back(r);
    } else {
      ws.pin_rows.push_back(r);
    }
  }

  auto elapsed = [&]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };
  auto finish_unknown = [&](const std::string& reason) {
    result.status = SolveStatus::kUnknown;
    result.unknown_reason = reason;
    result.stats.solve_seconds = elapsed();
    return result;
  };

  // Identity-scaling blocks for the initial point.
  for (Block& b : ws.blocks) {
    Eigen::VectorXd e = cone_identity(b);
    if (!compute_scaling(b, e, e)) return finish_unknown("initial scaling failed");
  }
  KktFactor kf;
  if (!factor_kkt(ws, kf)) return finish_unknown("initial factorization failed");

  Eigen::VectorXd x(ws.n), y(ws.m), z(ws.nc), s(ws.nc);
  {
    Eigen::VectorXd zero_n = Eigen::VectorXd::Zero(ws.n);
    Eigen::VectorXd zero_c = Eigen::VectorXd::Zero(ws.nc);
    Eigen::VectorXd x1, y1, z1;
    kkt_solve(kf, zero_n, ws.b, zero_c, x1, y1, z1);
    x = x1;
    Eigen::VectorXd s_raw = -z1;
    Eigen::VectorXd x2, y2, z2;
    kkt_solve(kf, -ws.c, Eigen::VectorXd::Zero(ws.m), zero_c, x2, y2, z2);
    y = y2;
    Eigen::VectorXd z_raw = z2;
    for (const Block& b : ws.blocks) {
      auto sb = s_raw.segment(b.offset, b.size);
      auto zb = z_raw.segment(b.offset, b.size);
      const double mins = cone_min_eig(b, sb);
      const double minz = cone_min_eig(b, zb);
      Eigen::VectorXd e = cone_identity(b);
      if (mins < 1e-8) sb += (1.0 - mins) * e;
      if (minz < 1e-8) zb += (1.0 - minz) * e;
    }
    s = s_raw;
    z = z_raw;
  }
  double tau = 1.0, kappa = 1.0;
  if (ws.nc == 0) {
    // No cone variables: pure linear algebra feasibility. The path-following
    // loop would divide by a zero barrier degree; solve directly instead.
    Eigen::VectorXd x1, y1, z1;
    kkt_solve(kf, -ws.c, ws.b, Eigen::VectorXd::Zero(0), x1, y1, z1);
    result.primal = x1;
    result.dual_eq = Eigen::VectorXd::Zero(problem.num_equalities());
    for (int i = 0; i < ws.m; ++i) result.dual_eq[ws.row_map[i]] = y1[i];
    const double pres = (ws.A * x1 - ws.b).norm() / std::max(1.0, ws.b.norm());
    if (pres > settings.feas_tol * 10) return finish_unknown("singular equality system");
    result.status = SolveStatus::kOptimal;
    result.objective = ws.c.dot(x1);
    result.stats.primal_residual = pres;
    result.stats.dual_residual = 0.0;
    result.stats.duality_gap = 0.0;
    result.stats.solve_seconds = elapsed();
    result.dual_cone.resize(0);
    result.slack.resize(0);
    return result;
  }

  const double norm_b = std::max(1.0, ws.b.norm());
  const double norm_c = std::max(1.0, ws.c.norm());

  // Accepts the current iterate when it meets the tolerances scaled by
  // `relax`; used with relax = 1 on the main path and a looser factor when
  // the iteration stalls near the solution (boundary-feasible programs have
  // no strictly complementary point and the step size can collapse there).
  auto try_accept = [&](double relax, int iter) -> bool {
    const double pcost = ws.c.dot(x) / tau;
    const double dcost = -ws.b.dot(y) / tau;
    const double gap = s.dot(z) / (tau * tau);
    const double relgap = gap / std::max({1.0, std::abs(pcost), std::abs(dcost)});
    const double pres = std::max((ws.A * x / tau - ws.b).norm() / norm_b,
                                 (ws.gather(x) - s).norm() / tau);
    const double dres =
        (ws.A.transpose() * y - ws.scatter(z) + ws.c * tau).norm() / (tau * norm_c);
    const double feas_t = relax > 1.0 ? std::max(settings.accept_tol, settings.feas_tol)
                                      : settings.feas_tol;
    const double gap_t = relax > 1.0 ? std::max(settings.accept_tol, settings.abs_tol)
                                     : settings.abs_tol;
    const double relgap_t = relax > 1.0 ? std::max(settings.accept_tol, settings.rel_tol)
                                        : settings.rel_tol;
    if (pres <= feas_t && dres <= feas_t && (gap <= gap_t || relgap <= relgap_t)) {
      result.status = SolveStatus::kOptimal;
      result.primal = x / tau;
      // primal polish: least-squares projection onto the equality system
      // wipes out the KKT noise floor without touching the dual
      if (ws.m > 0) {
        const Eigen::VectorXd resid = ws.b - ws.A * result.primal;
        Eigen::MatrixXd AAt = Eigen::MatrixXd(ws.A * ws.A.transpose());
        AAt.diagonal().array() += 1e-12 * std::max(1.0, AAt.diagonal().maxCoeff());
        Eigen::LLT<Eigen::MatrixXd> llt(AAt);
        if (llt.info() == Eigen::Success) {
          const Eigen::VectorXd candidate = result.primal + ws.A.transpose() * llt.solve(resid);
          if ((ws.b - ws.A * candidate).norm() < resid.norm()) result.primal = candidate;
        }
      }
      for (int i = 0; i < ws.m; ++i) result.dual_eq[ws.row_map[i]] = y[i] / tau;
      result.dual_cone = z / tau;
      result.slack = s / tau;
      result.objective = ws.c.dot(result.primal);
      const double polished_pres = std::max((ws.A * result.primal - ws.b).norm() / norm_b,
                                            (ws.gather(x) - s).norm() / tau);
      result.stats = {iter, polished_pres, dres, gap, elapsed()};
      return true;
    }
    return false;
  };
  constexpr double kStallRelax = 1e3;

  Eigen::VectorXd lam_all(ws.nc);
  Eigen::VectorXd dx, dy, dz;  // reused
  int iter = 0;
  for (; iter < settings.max_iters; ++iter) {
    if (elapsed() > settings.time_limit_s) return finish_unknown("time_limit");

    // residuals of the homogeneous embedding
    Eigen::VectorXd Aty = ws.A.transpose() * y;
    Eigen::VectorXd rx = Aty - ws.scatter(z) + ws.c * tau;  // Gᵀz = -scatter(z)
    Eigen::VectorXd ry = ws.A * x - ws.b * tau;
    Eigen::VectorXd rz = s - ws.gather(x);                  // Gx + s, h = 0
    const double rtau = ws.c.dot(x) + ws.b.dot(y) + kappa;

    const double stz = s.dot(z);
    const double mu = (stz + tau * kappa) / (ws.nu + 1);

    if (settings.verbose) {
      std::printf(
          "it %3d  pcost % .6e  gap %.2e  pres %.2e  tau %.2e  |x| %.1e  |z| %.1e  kap %.1e\n",
          iter, ws.c.dot(x) / tau, stz / (tau * tau),
          (ws.A * x / tau - ws.b).norm() / norm_b, tau, x.norm(), z.norm(), kappa);
    }

    if (try_accept(1.0, iter)) return result;

    // infeasibility certificates
    const double ip_denom = -ws.b.dot(y);
    if (ip_denom > 0.0) {
      const double pinfres = (Aty - ws.scatter(z)).norm() / ip_denom / norm_c;
      if (pinfres <= settings.feas_tol) {
        result.status = SolveStatus::kPrimalInfeasible;
        for (int i = 0; i < ws.m; ++i) result.dual_eq[ws.row_map[i]] = y[i] / ip_denom;
        result.dual_cone = z / ip_denom;
        result.stats = {iter, pinfres, 0.0, 0.0, elapsed()};
        return result;
      }
    }
    const double di_denom = -ws.c.dot(x);
    if (di_denom > 0.0) {
      const double dinfres =
          std::max((ws.A * x).norm() / norm_b, (ws.gather(x) - s).norm()) / di_denom;
      if (dinfres <= settings.feas_tol) {
        result.status = SolveStatus::kDualInfeasible;
        result.primal = x / di_denom;
        result.slack = s / di_denom;
        result.stats = {iter, dinfres, 0.0, 0.0, elapsed()};
        return result;
      }
    }

    // NT scalings at the current iterate
    bool scaling_ok = true;
    for (Block& b : ws.blocks) {
      scaling_ok = scaling_ok &&
                   compute_scaling(b, s.segment(b.offset, b.size), z.segment(b.offset, b.size));
      if (scaling_ok) lam_all.segment(b.offset, b.size) = b.lam;
    }
    if (!scaling_ok) {
      if (try_accept(kStallRelax, iter)) return result;
      return finish_unknown("scaling breakdown (iterate left the cone)");
    }
    if (!factor_kkt(ws, kf)) return finish_unknown("KKT factorization failed");

    // constant-column solve shared by both passes: K u1 = [-c; b; 0]
    Eigen::VectorXd x1, y1, z1;
    kkt_solve(kf, -ws.c, ws.b, Eigen::VectorXd::Zero(ws.nc), x1, y1, z1);

    auto direction = [&](double sigma, const Eigen::VectorXd& dcompl, double dtk,
                         Eigen::VectorXd& odx, Eigen::VectorXd& ody, Eigen::VectorXd& odz,
                         Eigen::VectorXd& ods, double& odtau, double& odkappa) {
      const double fac = 1.0 - sigma;
      // b~z = bz - Wᵀ(lam \ dcompl), bz = -fac * rz
      Eigen::VectorXd bz_tilde(ws.nc);
      for (const Block& b : ws.blocks) {
        Eigen::VectorXd inner = jordan_solve(b, dcompl.segment(b.offset, b.size));
        bz_tilde.segment(b.offset, b.size) =
            -fac * rz.segment(b.offset, b.size) - apply_WT(b, inner);
      }
      Eigen::VectorXd x2, y2, z2;
      kkt_solve(kf, -fac * rx, -fac * ry, bz_tilde, x2, y2, z2);
      const double denom = ws.c.dot(x1) + ws.b.dot(y1) - kappa / tau;
      const double num = -fac * rtau - dtk / tau - (ws.c.dot(x2) + ws.b.dot(y2));
      odtau = num / denom;
      odx = x2 + odtau * x1;
      ody = y2 + odtau * y1;
      odz = z2 + odtau * z1;
      // row 3: G dx + ds = bz (original residual row)
      ods = -fac * rz + ws.gather(odx);
      odkappa = (dtk - kappa * odtau) / tau;
    };

    auto step_bound = [&](const Eigen::VectorXd& ds, const Eigen::VectorXd& dz2, double dtau,
                          double dkappa) {
      double alpha = kInf;
      for (const Block& b : ws.blocks) {
        Eigen::VectorXd dsl = apply_WinvT(b, ds.segment(b.offset, b.size));
        Eigen::VectorXd dzl = apply_W(b, dz2.segment(b.offset, b.size));
        alpha = std::min(alpha, max_step(b, dsl));
        alpha = std::min(alpha, max_step(b, dzl));
      }
      if (dtau < 0.0) alpha = std::min(alpha, -tau / dtau);
      if (dkappa < 0.0) alpha = std::min(alpha, -kappa / dkappa);
      return alpha;
    };

    // predictor (affine) pass
    Eigen::VectorXd dcompl(ws.nc);
    for (const Block& b : ws.blocks) {
      dcompl.segment(b.offset, b.size) =
          -jordan_product(b, b.lam, b.lam);
    }
    Eigen::VectorXd ds_a, dz_a, dx_a, dy_a;
    double dtau_a, dkappa_a;
    direction(0.0, dcompl, -tau * kappa, dx_a, dy_a, dz_a, ds_a, dtau_a, dkappa_a);
    const double alpha_aff = std::min(1.0, step_bound(ds_a, dz_a, dtau_a, dkappa_a));
    double sigma = std::pow(1.0 - alpha_aff, 3);
    sigma = std::min(1.0, std::max(0.0, sigma));

    // corrector pass
    for (const Block& b : ws.blocks) {
      Eigen::VectorXd dsl = apply_WinvT(b, ds_a.segment(b.offset, b.size));
      Eigen::VectorXd dzl = apply_W(b, dz_a.segment(b.offset, b.size));
      dcompl.segment(b.offset, b.size) = -jordan_product(b, b.lam, b.lam) -
                                         jordan_product(b, dsl, dzl) +
                                         sigma * mu * cone_identity(b);
    }
    const double dtk = -tau * kappa - dtau_a * dkappa_a + sigma * mu;
    direction(sigma, dcompl, dtk, dx, dy, dz, ds_a, dtau_a, dkappa_a);
    Eigen::VectorXd& ds = ds_a;
    const double dtau = dtau_a;
    const double dkappa = dkappa_a;

    double alpha = std::min(1.0, kStepScale * step_bound(ds, dz, dtau, dkappa));
    if (!std::isfinite(alpha) || alpha <= 1e-10) {
      if (try_accept(kStallRelax, iter)) return result;
      return finish_unknown("step size collapsed");
    }

    // Step with interior backtracking: the fraction-to-boundary cap can still
    // land numerically outside the cone when the solution lacks strict
    // complementarity; halve until both s and z stay strictly inside.
    bool stepped = false;
    for (int bt = 0; bt < 40 && !stepped; ++bt) {
      bool interior = tau + alpha * dtau > 0.0 && kappa + alpha * dkappa > 0.0;
      for (const Block& b : ws.blocks) {
        if (!interior) break;
        interior = cone_min_eig(b, (s + alpha * ds).segment(b.offset, b.size)) > 0.0 &&
                   cone_min_eig(b, (z + alpha * dz).segment(b.offset, b.size)) > 0.0;
      }
      if (interior) {
        x += alpha * dx;
        y += alpha * dy;
        z += alpha * dz;
        s += alpha * ds;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        stepped = true;
      } else {
        alpha *= 0.5;
      }
    }
    if (!stepped) {
      if (try_accept(kStallRelax, iter)) return result;
      return finish_unknown("step size collapsed");
    }
    if (tau <= 0.0 || kappa < 0.0 || !x.allFinite() || !s.allFinite()) {
      return finish_unknown("iterate diverged");
    }
  }
  if (try_accept(kStallRelax, settings.max_iters)) return result;
  return finish_unknown("max_iters");
}

}  // namespace

ConicSolution solve(const ConicProblem& problem, const SolverSettings& settings) {
  problem.validate();
  if (settings.equilibration_iters <= 0) return solve_core(problem, settings);

  // Ruiz equilibration. Column scales are uniform across each cone span so
  // membership is preserved (cones are invariant under positive scaling);
  // free and nonnegative variables scale individually.
  const int n = problem.num_vars;
  const int m = problem.num_equalities();
  Eigen::VectorXd col_scale = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(m);
  std::vector<int> span_of(static_cast<std::size_t>(n), -1);
  for (std::size_t k = 0; k < problem.cones.size(); ++k) {
    const ConeSpan& span = problem.cones[k];
    if (span.kind == ConeKind::kZero || span.kind == ConeKind::kNonnegative) continue;
    for (int j = span.start; j < span.start + span.size; ++j) {
      span_of[static_cast<std::size_t>(j)] = static_cast<int>(k);
    }
  }
  for (int sweep = 0; sweep < settings.equilibration_iters; ++sweep) {
    Eigen::VectorXd row_max = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd col_max = Eigen::VectorXd::Zero(n);
    for (int col = 0; col < problem.eq_matrix.outerSize(); ++col) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(problem.eq_matrix, col); it; ++it) {
        const double v = std::abs(it.value()) * row_scale[it.row()] * col_scale[col];
        row_max[it.row()] = std::max(row_max[it.row()], v);
        col_max[col] = std::max(col_max[col], v);
      }
    }
    // unify column maxima inside each cone span
    for (const ConeSpan& span : problem.cones) {
      if (span.kind == ConeKind::kZero || span.kind == ConeKind::kNonnegative) continue;
      double g = 0.0;
      for (int j = span.start; j < span.start + span.size; ++j) g = std::max(g, col_max[j]);
      for (int j = span.start; j < span.start + span.size; ++j) col_max[j] = g;
    }
    for (int i = 0; i < m; ++i) {
      if (row_max[i] > 0.0) row_scale[i] /= std::sqrt(row_max[i]);
    }
    for (int j = 0; j < n; ++j) {
      if (col_max[j] > 0.0) col_scale[j] /= std::sqrt(col_max[j]);
    }
  }

  ConicProblem scaled = problem;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(problem.eq_matrix.nonZeros()));
  for (int col = 0; col < problem.eq_matrix.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(problem.eq_matrix, col); it; ++it) {
      trips.emplace_back(static_cast<int>(it.row()), col,
                         it.value() * row_scale[it.row()] * col_scale[col]);
    }
  }
  scaled.eq_matrix.setFromTriplets(trips.begin(), trips.end());
  scaled.eq_rhs = problem.eq_rhs.cwiseProduct(row_scale);
  scaled.objective = problem.objective.cwiseProduct(col_scale);

  ConicSolution sol = solve_core(scaled, settings);
  if (sol.primal.size() == n) sol.primal = sol.primal.cwiseProduct(col_scale);
  if (sol.dual_eq.size() == m) sol.dual_eq = sol.dual_eq.cwiseProduct(row_scale);
  // stacked cone vectors unscale by the inverse (dual) / direct (slack) span scale
  if (sol.dual_cone.size() > 0 || sol.slack.size() > 0) {
    int offset = 0;
    for (const ConeSpan& span : problem.cones) {
      if (span.kind == ConeKind::kZero) continue;
      for (int j = 0; j < span.size; ++j) {
        const double d = col_scale[span.start + j];
        if (sol.dual_cone.size() > offset + j) sol.dual_cone[offset + j] /= d;
        if (sol.slack.size() > offset + j) sol.slack[offset + j] *= d;
      }
      offset += span.size;
    }
  }
  if (sol.status == SolveStatus::kOptimal) sol.objective = problem.objective.dot(sol.primal);
  return sol;
}

// ---------------------------------------------------------------------------

LpResult solve_lp(const Eigen::MatrixXd& rows, const Eigen::VectorXd& rhs,
                  const SolverSettings& settings) {
  LpResult out;
  const int p = static_cast<int>(rows.rows());
  const int nu = static_cast<int>(rows.cols());
  if (p != rhs.size()) throw DimensionMismatch("rows/rhs size mismatch");
  if (!rows.allFinite() || !rhs.allFinite()) throw std::invalid_argument("non-finite LP data");
  if (p == 0) {
    out.kind = LpResult::Kind::kFeasible;
    out.witness = Eigen::VectorXd::Zero(nu);
    return out;
  }
  if (nu == 0) {
    int bad = -1;
    for (int i = 0; i < p; ++i) {
      if (rhs[i] < 0.0) bad = i;
    }
    if (bad < 0) {
      out.kind = LpResult::Kind::kFeasible;
      out.witness = Eigen::VectorXd::Zero(0);
    } else {
      out.kind = LpResult::Kind::kInfeasible;
      out.farkas = Eigen::VectorXd::Zero(p);
      out.farkas[bad] = -1.0 / rhs[bad];
    }
    return out;
  }

  ConicProblem prob;
  prob.num_vars = nu + p;
  prob.objective = Eigen::VectorXd::Zero(prob.num_vars);
  prob.eq_rhs = rhs;
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < nu; ++j) {
      if (rows(i, j) != 0.0) trips.emplace_back(i, j, rows(i, j));
    }
    trips.emplace_back(i, nu + i, 1.0);
  }
  prob.eq_matrix.resize(p, prob.num_vars);
  prob.eq_matrix.setFromTriplets(trips.begin(), trips.end());
  prob.cones.push_back({ConeKind::kZero, 0, nu, 0});
  prob.cones.push_back({ConeKind::kNonnegative, nu, p, 0});

  const ConicSolution sol = solve(prob, settings);
  if (sol.status == SolveStatus::kOptimal) {
    Eigen::VectorXd u = sol.primal.head(nu);
    if (((rows * u - rhs).array() <= 1e-8).all()) {
      out.kind = LpResult::Kind::kFeasible;
      out.witness = u;
      return out;
    }
    out.kind = LpResult::Kind::kUnknown;
    out.reason = "witness failed verification";
    return out;
  }
  if (sol.status == SolveStatus::kPrimalInfeasible) {
    Eigen::VectorXd zf = sol.dual_eq.cwiseMax(0.0);
    const double scale = -rhs.dot(zf);
    if (scale > 0.0) {
      zf /= scale;
      const bool ok = (rows.transpose() * zf).lpNorm<Eigen::Infinity>() <= 1e-8 &&
                      std::abs(rhs.dot(zf) + 1.0) <= 1e-8;
      if (ok) {
        out.kind = LpResult::Kind::kInfeasible;
        out.farkas = zf;
        return out;
      }
    }
    out.kind = LpResult::Kind::kUnknown;
    out.reason = "farkas certificate failed verification";
    return out;
  }
  out.kind = LpResult::Kind::kUnknown;
  out.reason = sol.unknown_reason.empty() ? std::string(to_string(sol.status))
                                          : sol.unknown_reason;
  return out;
}

}  // namespace clfcbf
