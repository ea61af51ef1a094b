// Implementation of the sharp-constant audit engine.  Eigen mode extracts the
// largest generalized Rayleigh quotient of a form pair through one of two
// paths (dense whitening reduction, or an anchored sparse factorization of a
// positive definite B combined with a low-rank correction and Lanczos in the
// B inner product) and confirms every eigenvalue with an independent power
// iteration.  Sample mode draws Gaussian coefficient vectors and reports the
// maximal quotient.  Sweeps assemble the registered inequalities on
// structured meshes of increasing resolution and apply a boundedness verdict.

#include "hfem/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/SparseCholesky>

#include "hfem/linalg.hpp"

namespace hfem {

namespace {

constexpr int kSmallDense = 700;       // at or below: dense reduction directly
constexpr double kLanczosTol = 1e-10;  // requested Ritz residual
constexpr double kAcceptTol = 1e-8;    // accepted residual / solve closure
constexpr double kCrossTol = 1e-8;     // power-iteration agreement
constexpr double kSampleSkip = 1e-14;  // draws with x^T B x below are skipped

double u01(std::uint64_t bits) {
  // Uniform on (0,1]: 53 high bits, shifted away from zero for the log.
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1p-53;
}

}  // namespace

Eigen::VectorXd gaussian_vector(int n, unsigned long seed) {
  std::mt19937_64 rng(seed);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; i += 2) {
    const double r = std::sqrt(-2.0 * std::log(u01(rng())));
    const double t = 2.0 * std::numbers::pi * u01(rng());
    x[i] = r * std::cos(t);
    if (i + 1 < n) x[i + 1] = r * std::sin(t);
  }
  return x;
}

namespace {

//------------------------------------------------------------------------------
// Sampling
//------------------------------------------------------------------------------

void run_samples(const QuadraticForm& A, const QuadraticForm& B,
                 const AuditOptions& opts, AuditResult& out) {
  if (opts.n_samples <= 0) return;
  double best = 0.0;
  int used = 0;
  for (int s = 0; s < opts.n_samples; ++s) {
    const Eigen::VectorXd x = gaussian_vector(
        A.layout.n, opts.seed + static_cast<unsigned long>(s));
    const double den = B.energy(x);
    if (den < kSampleSkip) continue;  // null-aligned draw carries no quotient
    best = std::max(best, A.energy(x) / den);
    ++used;
  }
  out.sample_max = best;
  out.samples = used;
}

//------------------------------------------------------------------------------
// Eigen paths
//------------------------------------------------------------------------------

struct EigenOutcome {
  bool unbounded = false;
  double lambda = 0.0;
  Eigen::VectorXd witness;
  double cross_check = 0.0;
  std::string path_used;
};

// Every accepted eigenvalue must be reproduced by a power iteration started
// from a slightly perturbed witness; disagreement means the two solvers do
// not describe the same operator and is a hard failure.
void confirm_by_power_iteration(const ApplyFn& apply_A,
                                const ApplyFn& apply_Binv,
                                const ApplyFn& apply_B, EigenOutcome& out) {
  Eigen::VectorXd x0 = out.witness;
  x0 += 1e-3 * x0.norm() *
        deterministic_unit_vector(static_cast<int>(x0.size()), 23u);
  out.cross_check =
      power_iteration_rayleigh(apply_A, apply_Binv, apply_B, x0, 80);
  if (!(std::abs(out.cross_check - out.lambda) <=
        kCrossTol * std::max(1.0, std::abs(out.lambda)))) {
    std::ostringstream os;
    os << "audit: power-iteration cross-check " << out.cross_check
       << " disagrees with eigenvalue " << out.lambda;
    throw std::runtime_error(os.str());
  }
}

// Factorization of a positive definite B = S + sum_j g_j g_j^T.  The sparse
// part alone may be singular exactly on the directions the rank-one terms
// pin, so an anchor w e_0 e_0^T is added before the LDLT and folded into the
// low-rank correction: B = S2 + U C U^T with S2 = S + w e_0 e_0^T,
// U = [g_1 .. g_m, sqrt(w) e_0] and C = diag(1, .., 1, -1).  Solves use the
// Woodbury identity and are validated against B on deterministic probes; any
// defect (indefinite pivot, failed closure) simply marks the factorization
// unusable and the caller falls back to the dense path.
struct FastBFactor {
  bool ok = false;
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt;
  Eigen::MatrixXd U;
  Eigen::MatrixXd Y;  // S2^{-1} U
  Eigen::FullPivLU<Eigen::MatrixXd> capacitance;

  Eigen::VectorXd solve(const Eigen::VectorXd& x) const {
    Eigen::VectorXd z = ldlt->solve(x);
    z -= Y * capacitance.solve(U.transpose() * z);
    return z;
  }
};

FastBFactor factor_b_sparse(const QuadraticForm& B) {
  FastBFactor f;
  const int n = B.layout.n;
  if (n == 0) return f;
  Eigen::SparseMatrix<double> s2 = B.S.lower();
  const double w = s2.diagonal().sum() / n;
  if (!(w > 0.0)) return f;
  s2.coeffRef(0, 0) += w;
  s2.makeCompressed();
  f.ldlt = std::make_shared<
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
  f.ldlt->compute(s2);
  if (f.ldlt->info() != Eigen::Success) return f;
  if (!(f.ldlt->vectorD().minCoeff() > 0.0)) return f;

  const int m = static_cast<int>(B.rank_one.size());
  f.U.resize(n, m + 1);
  for (int j = 0; j < m; ++j) f.U.col(j) = B.rank_one[j];
  f.U.col(m).setZero();
  f.U(0, m) = std::sqrt(w);
  f.Y.resize(n, m + 1);
  for (int j = 0; j <= m; ++j) f.Y.col(j) = f.ldlt->solve(f.U.col(j));
  Eigen::MatrixXd H = f.U.transpose() * f.Y;
  for (int j = 0; j < m; ++j) H(j, j) += 1.0;
  H(m, m) -= 1.0;
  f.capacitance.compute(H);
  if (!f.capacitance.isInvertible()) return f;

  for (unsigned salt : {11u, 12u}) {
    const Eigen::VectorXd x = deterministic_unit_vector(n, salt);
    const Eigen::VectorXd r = B.apply(f.solve(x)) - x;
    if (!(r.norm() <= kAcceptTol * x.norm())) return f;  // also rejects NaN
  }
  f.ok = true;
  return f;
}

// Shared analysis of one B, reused across numerators: at most one of the two
// members is engaged at a time, the dense one lazily.
struct SharedB {
  std::optional<FastBFactor> fast;
  std::optional<SymEig> eig_b;
};

SharedB prepare_b(const QuadraticForm& B, const AuditOptions& opts) {
  SharedB shared;
  bool try_sparse = false;
  switch (opts.path) {
    case EigenPath::Sparse:
      try_sparse = true;
      break;
    case EigenPath::Dense:
      break;
    case EigenPath::Auto:
      try_sparse = B.layout.n > kSmallDense;
      break;
  }
  if (try_sparse) {
    shared.fast = factor_b_sparse(B);
    if (!shared.fast->ok) shared.fast.reset();
  }
  return shared;
}

std::optional<EigenOutcome> solve_sparse_one(const QuadraticForm& A,
                                             const QuadraticForm& B,
                                             const FastBFactor& fb) {
  const int n = A.layout.n;
  ApplyFn apply_A = [&A](const Eigen::VectorXd& x) { return A.apply(x); };
  ApplyFn apply_B = [&B](const Eigen::VectorXd& x) { return B.apply(x); };
  ApplyFn apply_Binv = [&fb](const Eigen::VectorXd& x) { return fb.solve(x); };
  LanczosResult lr = lanczos_gen_eig_max(apply_A, apply_Binv, apply_B, n,
                                         std::min(n, 650), kLanczosTol);
  if (!(lr.residual <= kAcceptTol)) return std::nullopt;
  EigenOutcome out;
  out.path_used = "sparse";
  out.lambda = std::max(lr.lambda, 0.0);
  out.witness = lr.witness;
  confirm_by_power_iteration(apply_A, apply_Binv, apply_B, out);
  return out;
}

EigenOutcome solve_dense_one(const QuadraticForm& A, const QuadraticForm& B,
                             const SymEig& eig_b, double null_tol) {
  EigenOutcome out;
  out.path_used = "dense";
  GenEigResult r = gen_eig_max_reduced(A.full(), eig_b, null_tol);
  if (r.unbounded) {
    out.unbounded = true;
    out.witness = r.witness;
    return out;
  }
  out.lambda = r.lambda;
  out.witness = r.witness;

  // Independent confirmation through the original operators, with B inverted
  // on its numerical range only.
  const int n = static_cast<int>(eig_b.values.size());
  const double cut = null_tol * std::max(eig_b.values(n - 1), 0.0);
  Eigen::VectorXd pinv(n);
  for (int i = 0; i < n; ++i)
    pinv[i] = eig_b.values[i] > cut ? 1.0 / eig_b.values[i] : 0.0;
  ApplyFn apply_A = [&A](const Eigen::VectorXd& x) { return A.apply(x); };
  ApplyFn apply_B = [&B](const Eigen::VectorXd& x) { return B.apply(x); };
  ApplyFn apply_Binv = [&eig_b, pinv](const Eigen::VectorXd& x) {
    return eig_b.vectors *
           (pinv.asDiagonal() * (eig_b.vectors.transpose() * x));
  };
  confirm_by_power_iteration(apply_A, apply_Binv, apply_B, out);
  return out;
}

EigenOutcome eigen_audit_one(const QuadraticForm& A, const QuadraticForm& B,
                             const AuditOptions& opts, SharedB& shared) {
  if (shared.fast) {
    auto out = solve_sparse_one(A, B, *shared.fast);
    if (out) return *out;
  }
  if (!shared.eig_b) shared.eig_b = sym_eig(B.full());
  return solve_dense_one(A, B, *shared.eig_b, opts.null_tol);
}

AuditResult one_result(const QuadraticForm& A, const QuadraticForm& B,
                       const AuditOptions& opts, SharedB& shared) {
  if (!A.layout.compatible(B.layout))
    throw std::invalid_argument("audit: form layouts differ");
  AuditResult out;
  out.n_dof = A.layout.n;
  out.mode = opts.mode;
  out.seed = opts.seed;
  if (opts.mode == AuditMode::Eigen) {
    EigenOutcome eo = eigen_audit_one(A, B, opts, shared);
    out.unbounded = eo.unbounded;
    out.lambda =
        eo.unbounded ? std::numeric_limits<double>::quiet_NaN() : eo.lambda;
    out.witness = eo.witness;
    out.cross_check = eo.cross_check;
    out.path_used = eo.path_used;
  } else {
    if (opts.n_samples <= 0)
      throw std::invalid_argument("audit: sample mode needs n_samples > 0");
    out.path_used = "sample";
  }
  run_samples(A, B, opts, out);
  return out;
}

}  // namespace

AuditResult audit(const QuadraticForm& A, const QuadraticForm& B,
                  const AuditOptions& opts) {
  SharedB shared =
      opts.mode == AuditMode::Eigen ? prepare_b(B, opts) : SharedB{};
  return one_result(A, B, opts, shared);
}

std::array<AuditResult, 2> audit_pair(const QuadraticForm& A1,
                                      const QuadraticForm& A2,
                                      const QuadraticForm& B,
                                      const AuditOptions& opts) {
  SharedB shared =
      opts.mode == AuditMode::Eigen ? prepare_b(B, opts) : SharedB{};
  return {one_result(A1, B, opts, shared), one_result(A2, B, opts, shared)};
}

//------------------------------------------------------------------------------
// Registered inequalities and refinement sweeps
//------------------------------------------------------------------------------

const std::vector<std::string>& audit_inequality_ids() {
  static const std::vector<std::string> ids = {"simplex-trace",
                                               "simplex-poincare",
                                               "brenner-mean",
                                               "brenner-boundary",
                                               "hybrid-poincare-mean-cr",
                                               "hybrid-poincare-boundary",
                                               "hybrid-poincare-mean-u",
                                               "cr-trace-mean",
                                               "cr-trace-boundary",
                                               "hybrid-trace-u",
                                               "hybrid-trace-uhat",
                                               "ph-poincare-mean",
                                               "ph-poincare-boundary",
                                               "ph-poincare-mean-u",
                                               "ph-trace-u",
                                               "ph-trace-uhat"};
  return ids;
}

namespace {

bool is_simplex_id(const std::string& id) {
  return id == "simplex-trace" || id == "simplex-poincare";
}

std::vector<int> all_boundary_faces(const Mesh& mesh) {
  std::vector<int> gamma;
  for (int f = 0; f < mesh.n_faces(); ++f)
    if (mesh.faces[f].is_boundary()) gamma.push_back(f);
  return gamma;
}

std::string unknown_id_message(const std::string& id) {
  std::ostringstream os;
  os << "unknown inequality '" << id << "'; valid identifiers:";
  for (const auto& s : audit_inequality_ids()) os << ' ' << s;
  return os.str();
}

}  // namespace

FormPair build_registered_forms(const std::string& id, const FeSpace& space) {
  const Mesh& mesh = *space.mesh;
  const std::vector<int> gamma = all_boundary_faces(mesh);
  if (id == "brenner-mean") return form_brenner(space, BrennerVariant::Mean);
  if (id == "brenner-boundary")
    return form_brenner(space, BrennerVariant::Boundary, gamma);
  if (id == "hybrid-poincare-mean-cr")
    return form_hybrid_poincare(space, HybridPoincareVariant::MeanCr);
  if (id == "hybrid-poincare-boundary")
    return form_hybrid_poincare(space, HybridPoincareVariant::Boundary, gamma);
  if (id == "hybrid-poincare-mean-u")
    return form_hybrid_poincare(space, HybridPoincareVariant::MeanU);
  if (id == "cr-trace-mean") return form_cr_trace(mesh, CrTraceVariant::Mean);
  if (id == "cr-trace-boundary")
    return form_cr_trace(mesh, CrTraceVariant::Boundary, gamma);
  if (id == "hybrid-trace-u")
    return form_hybrid_trace(space, HybridTraceWhich::U, gamma);
  if (id == "hybrid-trace-uhat")
    return form_hybrid_trace(space, HybridTraceWhich::Uhat, gamma);
  if (id == "ph-poincare-mean")
    return form_ph_poincare(space, HybridPoincareVariant::MeanCr);
  if (id == "ph-poincare-boundary")
    return form_ph_poincare(space, HybridPoincareVariant::Boundary, gamma);
  if (id == "ph-poincare-mean-u")
    return form_ph_poincare(space, HybridPoincareVariant::MeanU);
  if (id == "ph-trace-u") return form_ph_trace(space, HybridTraceWhich::U, gamma);
  if (id == "ph-trace-uhat")
    return form_ph_trace(space, HybridTraceWhich::Uhat, gamma);
  if (is_simplex_id(id))
    throw std::invalid_argument("'" + id +
                                "' is audited per cell; use sweep()");
  throw std::invalid_argument(unknown_id_message(id));
}

namespace {

// Worst scale-normalized constant over the cells of one mesh: the trace
// flavor normalizes each eigenvalue by |K| / |e|, the mean-oscillation flavor
// by 1 / diam(K)^2, making the per-cell constants mesh-size free.
AuditResult audit_simplex_level(const std::string& id, int k, const Mesh& mesh,
                                const AuditOptions& opts) {
  AuditOptions local = opts;
  local.path = EigenPath::Dense;  // instances are tiny
  AuditResult best;
  double best_val = -std::numeric_limits<double>::infinity();
  auto consider = [&](FormPair&& p, double scale) {
    AuditResult r = audit(p.A, p.B, local);
    r.lambda *= scale;
    r.sample_max *= scale;
    r.cross_check *= scale;
    const double v =
        opts.mode == AuditMode::Eigen ? r.lambda : r.sample_max;
    if (r.unbounded || v > best_val) {
      best_val =
          r.unbounded ? std::numeric_limits<double>::infinity() : v;
      best = std::move(r);
    }
  };
  for (int K = 0; K < mesh.n_cells(); ++K) {
    const CellGeometry& cg = mesh.cell_geom[K];
    if (id == "simplex-trace") {
      for (int l = 0; l < 3; ++l) {
        const FaceGeometry& fg = mesh.face_geom[mesh.cell_faces[K][l]];
        consider(form_simplex_trace(cg, fg, k), cg.area / fg.length);
      }
    } else {
      consider(form_simplex_poincare(cg, k, SimplexPoincareMode::Mean),
               1.0 / (cg.diam * cg.diam));
    }
  }
  best.n_dof = (k + 1) * (k + 2) / 2;
  return best;
}

}  // namespace

SweepResult sweep(const std::string& id, int k, const std::vector<int>& levels,
                  const SweepOptions& opts) {
  const auto& ids = audit_inequality_ids();
  if (std::find(ids.begin(), ids.end(), id) == ids.end())
    throw std::invalid_argument(unknown_id_message(id));
  if (levels.empty()) throw std::invalid_argument("sweep: no levels given");
  std::vector<int> ls = levels;
  std::sort(ls.begin(), ls.end());
  ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
  if (ls.front() < 0 || ls.front() > 30)
    throw std::invalid_argument("sweep: level out of range");

  SweepResult sr;
  for (int level : ls) {
    const Mesh mesh = build_structured(1 << level, opts.tag_rule);
    AuditResult row;
    if (is_simplex_id(id)) {
      row = audit_simplex_level(id, k, mesh, opts.audit);
    } else {
      const FeSpace space = make_space(mesh, k);
      const FormPair p = build_registered_forms(id, space);
      row = audit(p.A, p.B, opts.audit);
    }
    row.inequality = id;
    row.k = k;
    row.level = level;
    row.h_max = mesh.h_max;
    sr.rows.push_back(std::move(row));
  }

  std::vector<double> hs, vals;
  for (const AuditResult& r : sr.rows) {
    if (r.unbounded) {
      sr.pass = false;
      sr.note = "unbounded at level " + std::to_string(r.level);
      return sr;
    }
    const double v =
        opts.audit.mode == AuditMode::Eigen ? r.lambda : r.sample_max;
    if (!(v > 0.0) || !std::isfinite(v)) {
      sr.pass = false;
      sr.note = "degenerate constant at level " + std::to_string(r.level);
      return sr;
    }
    hs.push_back(r.h_max);
    vals.push_back(v);
  }
  const double vmax = *std::max_element(vals.begin(), vals.end());
  const double vmin = *std::min_element(vals.begin(), vals.end());
  const double ratio = vmax / vmin;
  const double slope =
      hs.size() >= 2 ? least_squares_loglog_slope(hs, vals) : 0.0;
  sr.pass = ratio <= opts.max_ratio && std::abs(slope) <= opts.max_slope;
  std::ostringstream os;
  os.precision(4);
  os << "ratio=" << ratio << " slope=" << slope;
  if (!sr.pass) os << " exceeds policy";
  sr.note = os.str();
  return sr;
}

double least_squares_loglog_slope(const std::vector<double>& x,
                                  const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("slope: need two matching samples");
  const int n = static_cast<int>(x.size());
  std::vector<double> lx(n), ly(n);
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw std::invalid_argument("slope: samples must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx < 1e-30) return 0.0;
  return sxy / sxx;
}

}  // namespace hfem
