// Quadratic forms over finite element coefficient vectors.  Every side of the
// certified inequalities (cell norms, broken seminorms, skeleton mismatches,
// midpoint-lift energies, flux energies, squared integrals) is expressed as
// x^T M x with M = S + sum_j g_j g_j^T: a sparse PSD part S holding all local
// terms and a short list of global rank-one terms g for squared integrals.
// The split is what lets large audits avoid densifying M.

#ifndef HFEM_FORMS_HPP
#define HFEM_FORMS_HPP

#include <vector>

#include "hfem/fields.hpp"
#include "hfem/linalg.hpp"
#include "hfem/mesh.hpp"

namespace hfem {

//------------------------------------------------------------------------------
// Dof layouts
//------------------------------------------------------------------------------

enum class LayoutKind {
  SingleCell,  // coefficients of one polynomial on one cell
  CellOnly,    // x = u, cell-major blocks of size nd
  CR,          // x = midpoint values, one per face
  Hybrid       // x = [u; uhat], cells then faces
};

struct DofLayout {
  LayoutKind kind = LayoutKind::SingleCell;
  const Mesh* mesh = nullptr;  // null for SingleCell; must outlive the form
  int k = 0;
  int n = 0;                // total dof count
  int nd = 0;               // cell block size
  int nf = 0;               // face block size
  int cell_dofs_total = 0;  // offset of the face section in Hybrid

  int u_index(int K, int i) const { return K * nd + i; }
  int uhat_index(int f, int m) const { return cell_dofs_total + f * nf + m; }

  bool compatible(const DofLayout& o) const {
    return kind == o.kind && mesh == o.mesh && k == o.k && n == o.n;
  }
};

DofLayout layout_single_cell(int k);
DofLayout layout_cells(const FeSpace& space);
DofLayout layout_cr(const Mesh& mesh);
DofLayout layout_hybrid(const FeSpace& space);

// Pack / unpack hybrid vectors, e.g. to inspect eigen witnesses as fields.
Eigen::VectorXd join_hybrid(const FeSpace& space, const CellField& u,
                            const SkeletonField& uhat);
std::pair<CellField, SkeletonField> split_hybrid(const FeSpace& space,
                                                 const Eigen::VectorXd& x);

//------------------------------------------------------------------------------
// Quadratic form container
//------------------------------------------------------------------------------

struct QuadraticForm {
  DofLayout layout;
  SparseSymmetric S;
  std::vector<Eigen::VectorXd> rank_one;

  double energy(const Eigen::VectorXd& x) const;       // x^T M x
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;  // M x
  Eigen::MatrixXd full() const;                         // dense M
};

// (A, B) with the audited statement "x^T A x <= C x^T B x".
struct FormPair {
  QuadraticForm A;
  QuadraticForm B;
};

//------------------------------------------------------------------------------
// Single-cell forms
//------------------------------------------------------------------------------

// A = squared L2 norm of the trace on face e, B = squared L2 norm on K.
FormPair form_simplex_trace(const CellGeometry& K, const FaceGeometry& e,
                            int k);

enum class SimplexPoincareMode { Mean, FaceMean, MeanDiff };

// B = squared H1 seminorm on K.  A by mode: ||f - mean_K f||^2,
// ||f - mean_e f||^2, or |K| (mean_K f - mean_e f)^2.  The face is ignored
// for mode Mean.
FormPair form_simplex_poincare(const CellGeometry& K, int k,
                               SimplexPoincareMode mode,
                               const FaceGeometry* e = nullptr);

//------------------------------------------------------------------------------
// Mesh-level forms
//------------------------------------------------------------------------------

enum class BrennerVariant { Mean, Boundary };

// Piecewise (fully discontinuous) fields: A = ||f||^2 over the cells;
// B = broken H1 seminorm^2 + sum over interior faces of
// |e|^{-2} |int_e jump|^2 + squared domain integral (Mean) or squared
// integral of the trace over the boundary faces gamma (Boundary).
FormPair form_brenner(const FeSpace& space, BrennerVariant variant,
                      const std::vector<int>& gamma = {});

enum class HybridPoincareVariant { MeanCr, Boundary, MeanU };

// Hybrid pairs (u, uhat): A = ||u||^2 over the cells; B = h^2 |u|_H1^2
// + h ||u - uhat||^2 over all cell boundaries + |lift(uhat averages)|_H1^2
// + a squared integral selected by the variant: of the midpoint lift over
// the domain, of uhat over gamma, or of u over the domain.  h is the mesh
// h_max.
FormPair form_hybrid_poincare(const FeSpace& space,
                              HybridPoincareVariant variant,
                              const std::vector<int>& gamma = {});

// Negative control: the same right-hand side with the u - uhat mismatch term
// deliberately removed.  Used to prove the audits can fail.
FormPair form_hybrid_poincare_dropped_mismatch(const FeSpace& space,
                                               HybridPoincareVariant variant,
                                               const std::vector<int>& gamma =
                                                   {});

enum class HybridTraceWhich { U, Uhat };

// A = ||u||^2 (or ||uhat||^2) over the boundary faces; B = h |u|_H1^2
// + ||u - uhat||^2 over the boundary faces + (1 + h) |lift|_H1^2
// + squared integral of uhat over gamma.
FormPair form_hybrid_trace(const FeSpace& space, HybridTraceWhich which,
                           const std::vector<int>& gamma);

enum class CrTraceVariant { Mean, Boundary };

// Midpoint-dof fields: A = ||w||^2 over the boundary faces; B =
// (1 + h^2) |w|_H1^2 + squared domain integral (Mean) or (1 + h) |w|_H1^2
// + squared integral over gamma (Boundary).
FormPair form_cr_trace(const Mesh& mesh, CrTraceVariant variant,
                       const std::vector<int>& gamma = {});

// Variants with the gradient term replaced by the flux energy ||p||^2, where
// p is the local flux determined by (u, uhat) (composed as an explicit linear
// map).  Poincare flavor: A = ||u||^2, B = (1 + h^2) ||p||^2 + h ||u - uhat||^2
// over all cell boundaries + the variant's squared integral.
FormPair form_ph_poincare(const FeSpace& space, HybridPoincareVariant variant,
                          const std::vector<int>& gamma = {});

// Trace flavor: A as in form_hybrid_trace; B = (1 + h) ||p||^2
// + ||u - uhat||^2 over all cell boundaries + squared integral of uhat over
// gamma.
FormPair form_ph_trace(const FeSpace& space, HybridTraceWhich which,
                       const std::vector<int>& gamma);

//------------------------------------------------------------------------------
// Pointwise companion check
//------------------------------------------------------------------------------

// max over cells of ||grad lift(uhat averages)||_{L2(K)} - ||p||_{L2(K)},
// with p the local flux of (u, uhat); <= 0 (up to roundoff) for every pair.
double lift_flux_gap(const FeSpace& space, const CellField& u,
                     const SkeletonField& uhat);

}  // namespace hfem

#endif  // HFEM_FORMS_HPP
