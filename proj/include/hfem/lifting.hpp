// Nonconforming lift of piecewise-constant skeleton data (midpoint degrees of
// freedom, per-cell affine expansion) and the per-cell boundary lift of face
// data into vector polynomials, plus identities tying them to the flux.

#ifndef HFEM_LIFTING_HPP
#define HFEM_LIFTING_HPP

#include <utility>

#include "hfem/fields.hpp"

namespace hfem {

// Piecewise affine, midpoint-continuous function: one global value per face
// (its value at the face midpoint).  Storing face values makes the zero
// jump-integral property structural.  The restriction to a cell is
//   w|_K = sum_l mu_l (1 - 2 lambda_l'),
// where mu_l is the value on local edge l and lambda_l' is the barycentric
// coordinate of the vertex opposite that edge.
struct CRField {
  std::vector<double> face_value;
};

// Lift of a degree-0 skeleton field (throws on degree != 0).
CRField cr_lift(const Mesh& mesh, const SkeletonField& mu0);

// Value of w at reference coordinates within cell K.
double cr_eval(const Mesh& mesh, const CRField& w, int K,
               const Eigen::Vector2d& xhat);

// Per-cell (constant) gradient: (1/|K|) sum_l mu_l |e_l| n_{K,e_l}.
Eigen::Vector2d cr_gradient(const Mesh& mesh, const CRField& w, int K);

// Exact representation in a degree >= 1 cell space, for reuse of the field
// toolbox (jumps, trace norms, projections).
CellField cr_to_cell_field(const FeSpace& space, const CRField& w);

double cr_seminorm_H1(const Mesh& mesh, const CRField& w);

// int_Omega w = sum_K (|K|/3) sum_l mu_l (cell averages of affine functions
// are centroid values).
double cr_integral_domain(const Mesh& mesh, const CRField& w);

// sqrt(sum over the given boundary faces of ||w||^2_{L2(e)}), traces taken
// from the unique adjacent cell.
double cr_norm_boundary(const Mesh& mesh, const CRField& w,
                        const std::vector<int>& faces);

// (lhs, rhs) = (||mu||^2_{L2(dK)}, ||lift(mu)||^2_{L2(dK)}); the piecewise
// constant is the face average of its own lift, so lhs <= rhs.
std::pair<double, double> restriction_estimate_check(const Mesh& mesh,
                                                     const SkeletonField& mu0,
                                                     int K);

// Vector polynomial G with (G, w)_K = <mu, w . n>_{dK} for all w in P_k(K)^2;
// with orthonormal bases this is the direct assignment
// G_c = sum_l n_c^{K,l} T_l^T mu_l.
std::array<Eigen::VectorXd, 2> boundary_lift(const FeSpace& space,
                                             const SkeletonField& mu, int K);

// Max over cells of || grad u + p - G(u - uhat) ||_{L2(K)}.  The flux
// produced by the local solver satisfies this identity exactly.
double gradient_identity_check(const FeSpace& space, const CellField& u,
                               const SkeletonField& uhat,
                               const VectorCellField& p);

}  // namespace hfem

#endif  // HFEM_LIFTING_HPP
