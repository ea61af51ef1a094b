// Sharp-constant audits: given a form pair (A, B), compute the largest
// generalized Rayleigh quotient x^T A x / x^T B x over the discrete space
// (eigen mode) or its maximum over random coefficient draws (sample mode),
// then certify inequality constants across mesh refinement sweeps with a
// boundedness verdict.  Two eigen paths: a dense whitening reduction, and a
// factorization path for positive definite B that keeps the sparse part and
// the rank-one corrections separate (anchored LDLT plus a low-rank update)
// and runs Lanczos in the B inner product.  Every eigenvalue is confirmed by
// an independent power iteration.

#ifndef HFEM_AUDIT_HPP
#define HFEM_AUDIT_HPP

#include <array>
#include <string>
#include <vector>

#include "hfem/forms.hpp"

namespace hfem {

enum class AuditMode { Eigen, Sample };
enum class EigenPath { Auto, Dense, Sparse };

struct AuditOptions {
  AuditMode mode = AuditMode::Eigen;
  int n_samples = 0;  // random draws; required positive in Sample mode
  unsigned long seed = 1;
  double null_tol = 1e-10;
  EigenPath path = EigenPath::Auto;
};

struct AuditResult {
  std::string inequality;
  int k = 0;
  int level = 0;
  double h_max = 0.0;
  int n_dof = 0;
  AuditMode mode = AuditMode::Eigen;

  bool unbounded = false;  // quotient carries energy on null(B)
  double lambda = 0.0;     // sharp constant (eigen mode, bounded case)
  double sample_max = 0.0;
  int samples = 0;  // draws actually evaluated
  unsigned long seed = 0;

  Eigen::VectorXd witness;   // maximizer, or counterexample when unbounded
  double cross_check = 0.0;  // power-iteration Rayleigh quotient of lambda
  std::string path_used;     // "dense", "sparse", or "sample"
};

// Sharp constant of one pair.  Eigen mode picks the factorization path when B
// is positive definite and the problem is large, falling back to the dense
// reduction otherwise (or as forced by opts.path); each eigenvalue must agree
// with an independent power iteration to 1e-8 or the audit throws.  A
// positive n_samples additionally reports the sampled maximum.
AuditResult audit(const QuadraticForm& A, const QuadraticForm& B,
                  const AuditOptions& opts);

// Two numerators over one shared B: the expensive B analysis (dense
// eigendecomposition or sparse factorization) is performed once.
std::array<AuditResult, 2> audit_pair(const QuadraticForm& A1,
                                      const QuadraticForm& A2,
                                      const QuadraticForm& B,
                                      const AuditOptions& opts);

// Standard normal coefficient vector (Box-Muller over a fixed 64-bit mersenne
// generator; avoids distribution classes with unspecified output).
Eigen::VectorXd gaussian_vector(int n, unsigned long seed);

//------------------------------------------------------------------------------
// Registered inequalities and refinement sweeps
//------------------------------------------------------------------------------

// Identifiers accepted by sweep(); stable, documented in the tool help.
const std::vector<std::string>& audit_inequality_ids();

// Forms of a registered mesh-level inequality on the given space; the
// boundary subset is all boundary faces.  Per-cell identifiers
// (simplex-trace, simplex-poincare) are handled inside sweep() and rejected
// here.
FormPair build_registered_forms(const std::string& id, const FeSpace& space);

struct SweepOptions {
  AuditOptions audit;
  double max_ratio = 4.0;  // max lambda / min lambda across levels
  double max_slope = 0.2;  // |least-squares slope of log lambda vs log h|
  std::string tag_rule = "all-dirichlet";
};

struct SweepResult {
  std::vector<AuditResult> rows;  // one per level, ascending level order
  bool pass = false;
  std::string note;  // ratio/slope summary or failure reason
};

// Audits the inequality on structured meshes with n = 2^level, one row per
// level, and applies the boundedness verdict.  Per-cell identifiers report
// the worst (scale-normalized) constant over all cells of each mesh.
// Unknown identifiers throw std::invalid_argument listing the valid ones.
SweepResult sweep(const std::string& id, int k, const std::vector<int>& levels,
                  const SweepOptions& opts);

// Least-squares slope of log(y) against log(x); 0 when x has no spread.
double least_squares_loglog_slope(const std::vector<double>& x,
                                  const std::vector<double>& y);

}  // namespace hfem

#endif  // HFEM_AUDIT_HPP
