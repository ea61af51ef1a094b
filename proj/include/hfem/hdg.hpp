// Hybridized solver for the Poisson model problem -div(grad u) = f with
// mixed Dirichlet/Neumann boundary data.  Per cell the pair (p, u) with
// p = -grad u is coupled to a single-valued skeleton trace uhat through the
// numerical flux phat.n = p.n + tau (u - uhat); static condensation
// eliminates (p, u) cell by cell and leaves a symmetric positive definite
// system on the non-Dirichlet skeleton dofs.  Pure Neumann problems are
// closed by a mean-zero gauge on the boundary trace.  Every solve carries
// diagnostics: condensed-solve residual, smallest factorization pivot, and
// the worst local-equation and flux-transmission residuals.

#ifndef HFEM_HDG_HPP
#define HFEM_HDG_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "hfem/fields.hpp"
#include "hfem/linalg.hpp"

namespace hfem {

// Gauge closing the skeleton system when no Dirichlet face pins constants.
enum class Gauge {
  None,
  SkeletonMeanZero,  // enforce int_{dOmega} uhat = 0 via a rank-one update
};

// Boundary value problem data.  Each datum is either a callable (projected
// with a quadrature rule exact to quad_exactness, default 2k+2) or a
// pre-projected field used verbatim.  tau is the stabilization weight in the
// numerical flux and must be positive.  Faces tagged Dirichlet consume
// dirichlet_*, faces tagged Neumann consume neumann_*; a datum may be left
// empty only when no face of its tag exists.
struct BVPData {
  ScalarFn f;                             // volume source, callable form
  std::optional<CellField> f_field;       // volume source, projected form
  ScalarFn dirichlet;                     // trace datum u_D, callable form
  std::optional<SkeletonField> dirichlet_field;  // per-face polynomial u_D
  ScalarFn neumann;                       // flux datum u_N (p.n = -u_N)
  std::optional<SkeletonField> neumann_field;    // per-face polynomial u_N
  double tau = 1.0;
  int quad_exactness = 0;  // 0 selects 2k+2; rough data should pass 20
};

struct SolveDiagnostics {
  double condensed_residual = 0.0;     // relative residual of skeleton solve
  double min_pivot = 0.0;              // smallest LDLT pivot (SPD witness)
  double local_residual = 0.0;         // worst cell equation residual, scaled
  double flux_residual = 0.0;          // worst flux-reconstruction residual
  double transmission_residual = 0.0;  // worst interior-face flux jump
  double gradient_identity = 0.0;      // lifting recomputation of the flux map
  double gauge_integral = 0.0;         // int_{dOmega} uhat when gauged
  double quad_residual = 0.0;          // data projection change under doubling
  int n_unknowns = 0;                  // condensed system size
  int n_dirichlet_dofs = 0;            // strongly eliminated skeleton dofs
};

struct Solution {
  VectorCellField p;
  CellField u;
  SkeletonField uhat;
  SolveDiagnostics diag;
};

// Statically condensed skeleton system.  Local blocks are retained so the
// cell unknowns can be recovered after the skeleton solve.
struct CondensedSystem {
  const FeSpace* space = nullptr;
  double tau = 1.0;
  // Per-cell elimination data: a_llt factors A_K, r_local maps the three
  // stacked face blocks into the cell equation, b_local is the load.
  std::vector<Eigen::LLT<Eigen::MatrixXd>> a_llt;
  std::vector<Eigen::MatrixXd> r_local;
  std::vector<Eigen::VectorXd> b_local;
  // Reduced skeleton system over non-Dirichlet face dofs.
  SparseSymmetric M;
  Eigen::VectorXd rhs;
  std::vector<int> reduced_of_dof;  // skeleton dof -> reduced index, -1 fixed
  Eigen::VectorXd uhat_fixed;       // Dirichlet projections, zero elsewhere
  bool pure_neumann = false;
  // Projected data kept for reporting (energy identity, boundary estimate).
  CellField f_proj{0, Eigen::VectorXd()};
  SkeletonField neumann_proj{0, Eigen::VectorXd()};
  double quad_residual = 0.0;  // projection change when doubling exactness
};

// Exact local flux reconstruction: component c of p solves
//   (p_c, phi_i)_K = (u, d_c phi_i)_K - sum_l n_c^l <uhat, phi_i>_{e_l}.
VectorCellField flux_from_primal(const FeSpace& space, const CellField& u,
                                 const SkeletonField& uhat);

// Worst per-cell residual of the two local equations evaluated against every
// local test function, relative to the local data magnitude.
double local_residual_check(const FeSpace& space, const BVPData& data,
                            const Solution& sol);

// Worst interior-face transmission residual <phat.n+ + phat.n-, mu>_e over
// all face test functions mu, relative to the one-sided flux magnitude.
double transmission_residual_check(const FeSpace& space, double tau,
                                   const Solution& sol);

// Build the condensed skeleton system.  Throws std::invalid_argument for
// non-positive tau or missing data on a tagged boundary face, and
// std::runtime_error if a local elimination block fails to factor.
CondensedSystem assemble_condensed(const FeSpace& space, const BVPData& data);

// Solve the condensed system and recover (p, u).  gauge selects the closure
// for pure Neumann problems; Gauge::None on a pure Neumann system throws
// std::invalid_argument naming the missing gauge.
Solution solve(const CondensedSystem& sys, Gauge gauge = Gauge::None);

// Convenience wrapper: assemble + solve.
Solution solve_bvp(const FeSpace& space, const BVPData& data,
                   Gauge gauge = Gauge::None);

// Energy accounting for a computed solution:
//   lhs             ||p||^2 + tau ||u - uhat||^2_{dT_h}
//   rhs             (f, u) + <u_N, uhat>_{Gamma_N}
//   generalized_rhs rhs - <phat.n, uhat>_{Gamma_D}
// lhs == rhs when the Dirichlet datum vanishes; the generalized form holds
// for any data.
struct EnergyReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double generalized_rhs = 0.0;
};
EnergyReport energy_check(const FeSpace& space, const BVPData& data,
                          const Solution& sol);

// Boundary trace estimate: the Dirichlet block of uhat is the face-wise L2
// projection of u_D, so ||uhat||^2 on Gamma_D never exceeds the datum norm.
struct DirichletEstimate {
  double uhat_norm2 = 0.0;   // sum over Dirichlet faces of ||uhat||^2_e
  double datum_norm2 = 0.0;  // quadrature value of ||u_D||^2_{Gamma_D}
};
DirichletEstimate dirichlet_estimate_check(const FeSpace& space,
                                           const BVPData& data,
                                           const Solution& sol);

// Stabilization energy ||p||^2 + tau ||u - uhat||^2_{dT_h} + ||uhat||^2_{Gamma_D}
// used by the mesh-refinement stability studies.
double stability_energy(const FeSpace& space, double tau, const Solution& sol);

}  // namespace hfem

#endif  // HFEM_HDG_HPP
