// Hybridized Poisson solver.  Local unknowns (p, u) satisfy, on each cell K
// with outward normal n and stabilization tau > 0,
//   (p, q)_K    = (u, div q)_K - <uhat, q.n>_dK          for all q,
//   (div p, v)_K + tau <u - uhat, v>_dK = (f, v)_K       for all v,
// written here against the orthonormal bases, and the numerical flux
// phat.n = p.n + tau (u - uhat) is continuous across interior faces and
// matches -u_N on Neumann faces.  In coefficients, with D_c the
// derivative-moment kernels and T_l the face trace kernels,
//   p_c  = D_c^T u - sum_l n_c^l T_l^T uhat_l,
//   A_K u = b_K + sum_l R_l uhat_l,   A_K = sum_c D_c D_c^T + tau S,
//   R_l  = sum_c n_c^l D_c T_l^T + tau T_l^T,   S = sum_l T_l^T T_l,
// and the condensed skeleton operator collects, per cell,
//   M_K = J_K + tau I - R_K^T A_K^{-1} R_K,
//   (J_K)_{l,l'} = sum_c n_c^l n_c^{l'} T_l T_{l'}^T,
// which is positive semidefinite with the cellwise constants as kernel;
// Dirichlet faces are eliminated strongly to the face L2 projection of the
// datum, so the reduced system is SPD whenever a Dirichlet face exists.

#include "hfem/hdg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Sparse>

#include "hfem/lifting.hpp"
#include "hfem/polybasis.hpp"

namespace hfem {

namespace {

int face_dof(const FeSpace& space, int f, int m) { return f * space.nf + m; }

int effective_exactness(const BVPData& data, int k) {
  return data.quad_exactness > 0 ? data.quad_exactness : 2 * k + 2;
}

// L2 projection of a boundary datum onto the face basis of tagged faces.
// Coefficients land in the tagged blocks of a full skeleton-length vector.
void project_on_tagged_faces(const FeSpace& space, const ScalarFn& g,
                             const std::vector<int>& faces, int exactness,
                             Eigen::VectorXd& out) {
  QuadratureRule quad = quad_segment(exactness);
  Eigen::MatrixXd V = space.face_basis.values_at(quad);  // (npts, nf)
  int npts = static_cast<int>(quad.points.rows());
  Eigen::VectorXd gx(npts);
  for (int f : faces) {
    const FaceGeometry& e = space.mesh->face_geom[f];
    for (int q = 0; q < npts; ++q) {
      double t = quad.points(q, 0);
      gx[q] = quad.weights[q] * g(e.a + t * (e.b - e.a));
    }
    out.segment(f * space.nf, space.nf) =
        std::sqrt(e.length) * (V.transpose() * gx);
  }
}

// Quadrature value of int_e g^2 over a set of faces.
double datum_norm2_on_faces(const FeSpace& space, const ScalarFn& g,
                            const std::vector<int>& faces, int exactness) {
  QuadratureRule quad = quad_segment(exactness);
  int npts = static_cast<int>(quad.points.rows());
  double total = 0.0;
  for (int f : faces) {
    const FaceGeometry& e = space.mesh->face_geom[f];
    double acc = 0.0;
    for (int q = 0; q < npts; ++q) {
      double t = quad.points(q, 0);
      double gv = g(e.a + t * (e.b - e.a));
      acc += quad.weights[q] * gv * gv;
    }
    total += e.length * acc;
  }
  return total;
}

CellField resolve_source(const FeSpace& space, const BVPData& data,
                         int exactness) {
  if (data.f_field) {
    if (data.f_field->k != space.k ||
        data.f_field->coeff.size() != space.n_cell_dofs())
      throw std::invalid_argument("hdg: source field layout mismatch");
    return *data.f_field;
  }
  if (!data.f) throw std::invalid_argument("hdg: missing source datum f");
  return project_to_cells(space, data.f, exactness);
}

// Boundary datum coefficients on the tagged faces (zero elsewhere).
Eigen::VectorXd resolve_boundary_datum(const FeSpace& space,
                                       const ScalarFn& fn,
                                       const std::optional<SkeletonField>& fld,
                                       const std::vector<int>& faces,
                                       int exactness, const char* what) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(space.n_face_dofs());
  if (faces.empty()) return out;
  if (fld) {
    if (fld->k != space.k || fld->coeff.size() != space.n_face_dofs())
      throw std::invalid_argument(std::string("hdg: ") + what +
                                  " field layout mismatch");
    for (int f : faces)
      out.segment(f * space.nf, space.nf) =
          fld->coeff.segment(f * space.nf, space.nf);
    return out;
  }
  if (!fn)
    throw std::invalid_argument(std::string("hdg: faces tagged for ") + what +
                                " but no datum was supplied");
  project_on_tagged_faces(space, fn, faces, exactness, out);
  return out;
}

// Local elimination blocks of one cell.
struct LocalBlocks {
  Eigen::MatrixXd A;  // nd x nd
  Eigen::MatrixXd R;  // nd x 3 nf, face blocks side by side
};

LocalBlocks local_blocks(const FeSpace& space, int K, double tau) {
  int nd = space.nd, nf = space.nf;
  LocalBlocks out;
  out.A = Eigen::MatrixXd::Zero(nd, nd);
  out.R = Eigen::MatrixXd::Zero(nd, 3 * nf);
  for (int c = 0; c < 2; ++c)
    out.A += space.deriv[K][c] * space.deriv[K][c].transpose();
  for (int l = 0; l < 3; ++l) {
    const Eigen::MatrixXd& T = space.trace[K][l];
    out.A += tau * (T.transpose() * T);
    Eigen::Vector2d n = space.mesh->outward_normal(K, l);
    Eigen::MatrixXd Rl = tau * T.transpose();
    for (int c = 0; c < 2; ++c)
      Rl += n[c] * (space.deriv[K][c] * T.transpose());
    out.R.middleCols(l * nf, nf) = Rl;
  }
  return out;
}

// Stack the three face blocks of a skeleton-length vector for cell K.
Eigen::VectorXd gather_faces(const FeSpace& space, int K,
                             const Eigen::VectorXd& skel) {
  Eigen::VectorXd out(3 * space.nf);
  for (int l = 0; l < 3; ++l)
    out.segment(l * space.nf, space.nf) =
        skel.segment(space.mesh->cell_faces[K][l] * space.nf, space.nf);
  return out;
}

// Coefficients of phat.n on face l of cell K: sum_c n_c T_l p_c
// + tau (T_l u - uhat).
Eigen::VectorXd numerical_flux(const FeSpace& space, double tau,
                               const Solution& sol, int K, int l) {
  int nd = space.nd, nf = space.nf;
  int f = space.mesh->cell_faces[K][l];
  Eigen::Vector2d n = space.mesh->outward_normal(K, l);
  Eigen::VectorXd uK = sol.u.coeff.segment(K * nd, nd);
  Eigen::VectorXd g = tau * (space.trace[K][l] * uK -
                             sol.uhat.coeff.segment(f * nf, nf));
  for (int c = 0; c < 2; ++c)
    g += n[c] * (space.trace[K][l] * sol.p.comp[c].segment(K * nd, nd));
  return g;
}

// One (cell, local face) incidence per face side.
std::vector<std::vector<std::pair<int, int>>> face_incidence(
    const Mesh& mesh) {
  std::vector<std::vector<std::pair<int, int>>> inc(mesh.n_faces());
  for (int K = 0; K < mesh.n_cells(); ++K)
    for (int l = 0; l < 3; ++l) inc[mesh.cell_faces[K][l]].push_back({K, l});
  return inc;
}

struct SkeletonFactor {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt;
  double min_pivot = 0.0;
};

void factor_spd(const SparseSymmetric& M, SkeletonFactor& out,
                const char* context) {
  out.ldlt.compute(M.lower());
  if (out.ldlt.info() != Eigen::Success)
    throw std::runtime_error(std::string(context) +
                             ": skeleton factorization failed");
  out.min_pivot = out.ldlt.vectorD().minCoeff();
  if (out.min_pivot <= 0.0)
    throw std::runtime_error(std::string(context) +
                             ": condensed system is not positive definite");
}

// LDLT solve with one refinement step; returns the relative residual.
Eigen::VectorXd refined_solve(const SkeletonFactor& F,
                              const SparseSymmetric& M,
                              const Eigen::VectorXd& b, double& rel_out) {
  double bnorm = b.norm();
  if (bnorm == 0.0) {
    rel_out = 0.0;
    return Eigen::VectorXd::Zero(b.size());
  }
  Eigen::VectorXd x = F.ldlt.solve(b);
  Eigen::VectorXd r = b - M.apply(x);
  if (r.norm() > 1e-12 * bnorm) x += F.ldlt.solve(r);
  rel_out = (b - M.apply(x)).norm() / bnorm;
  return x;
}

}  // namespace

VectorCellField flux_from_primal(const FeSpace& space, const CellField& u,
                                 const SkeletonField& uhat) {
  if (u.k != space.k || u.coeff.size() != space.n_cell_dofs() ||
      uhat.k != space.k || uhat.coeff.size() != space.n_face_dofs())
    throw std::invalid_argument("flux_from_primal: field layout mismatch");
  int nd = space.nd, nf = space.nf;
  VectorCellField p = zero_vector_field(space);
  for (int K = 0; K < space.mesh->n_cells(); ++K) {
    Eigen::VectorXd uK = u.coeff.segment(K * nd, nd);
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd pc = space.deriv[K][c].transpose() * uK;
      for (int l = 0; l < 3; ++l) {
        int f = space.mesh->cell_faces[K][l];
        double n_c = space.mesh->outward_normal(K, l)[c];
        pc -= n_c * (space.trace[K][l].transpose() *
                     uhat.coeff.segment(f * nf, nf));
      }
      p.comp[c].segment(K * nd, nd) = pc;
    }
  }
  return p;
}

CondensedSystem assemble_condensed(const FeSpace& space, const BVPData& data) {
  const Mesh& mesh = *space.mesh;
  if (!(data.tau > 0.0))
    throw std::invalid_argument("assemble_condensed: tau must be positive");
  auto inc = face_incidence(mesh);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    bool boundary = inc[f].size() == 1;
    bool tagged = mesh.faces[f].tag != BoundaryTag::Interior;
    if (boundary && !tagged)
      throw std::invalid_argument(
          "assemble_condensed: boundary face without Dirichlet or Neumann "
          "datum");
    if (!boundary && tagged)
      throw std::invalid_argument(
          "assemble_condensed: interior face carries a boundary tag");
  }

  int k = space.k, nd = space.nd, nf = space.nf;
  int qe = effective_exactness(data, k);
  std::vector<int> dir_faces = mesh.faces_with_tag(BoundaryTag::Dirichlet);
  std::vector<int> neu_faces = mesh.faces_with_tag(BoundaryTag::Neumann);

  CondensedSystem sys;
  sys.space = &space;
  sys.tau = data.tau;
  sys.pure_neumann = dir_faces.empty();
  sys.f_proj = resolve_source(space, data, qe);
  Eigen::VectorXd ud = resolve_boundary_datum(
      space, data.dirichlet, data.dirichlet_field, dir_faces, qe, "Dirichlet");
  Eigen::VectorXd un = resolve_boundary_datum(
      space, data.neumann, data.neumann_field, neu_faces, qe, "Neumann");
  sys.neumann_proj = zero_skeleton_field(space);
  sys.neumann_proj.coeff = un;

  // Projection sensitivity to the quadrature rule: redo every callable datum
  // with doubled exactness and record the largest coefficient change.
  double qres = 0.0;
  if (!data.f_field && data.f) {
    CellField f2 = project_to_cells(space, data.f, 2 * qe);
    qres = std::max(qres,
                    (f2.coeff - sys.f_proj.coeff).lpNorm<Eigen::Infinity>());
  }
  if (!data.dirichlet_field && data.dirichlet && !dir_faces.empty()) {
    Eigen::VectorXd ud2 = Eigen::VectorXd::Zero(space.n_face_dofs());
    project_on_tagged_faces(space, data.dirichlet, dir_faces, 2 * qe, ud2);
    qres = std::max(qres, (ud2 - ud).lpNorm<Eigen::Infinity>());
  }
  if (!data.neumann_field && data.neumann && !neu_faces.empty()) {
    Eigen::VectorXd un2 = Eigen::VectorXd::Zero(space.n_face_dofs());
    project_on_tagged_faces(space, data.neumann, neu_faces, 2 * qe, un2);
    qres = std::max(qres, (un2 - un).lpNorm<Eigen::Infinity>());
  }
  sys.quad_residual = qres;

  // Dirichlet dofs are fixed; the rest are condensed unknowns.
  sys.uhat_fixed = Eigen::VectorXd::Zero(space.n_face_dofs());
  sys.reduced_of_dof.assign(space.n_face_dofs(), -1);
  std::vector<bool> fixed(mesh.n_faces(), false);
  for (int f : dir_faces) fixed[f] = true;
  int n_red = 0;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    for (int m = 0; m < nf; ++m) {
      int d = face_dof(space, f, m);
      if (fixed[f])
        sys.uhat_fixed[d] = ud[d];
      else
        sys.reduced_of_dof[d] = n_red++;
    }
  }

  // Cellwise elimination and skeleton assembly.
  sys.a_llt.resize(mesh.n_cells());
  sys.r_local.resize(mesh.n_cells());
  sys.b_local.resize(mesh.n_cells());
  Eigen::VectorXd gfull = Eigen::VectorXd::Zero(space.n_face_dofs());
  for (int f : neu_faces)
    gfull.segment(f * nf, nf) += un.segment(f * nf, nf);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_red);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(mesh.n_cells()) * 9 * nf * nf);

  for (int K = 0; K < mesh.n_cells(); ++K) {
    LocalBlocks blk = local_blocks(space, K, data.tau);
    sys.a_llt[K].compute(blk.A);
    if (sys.a_llt[K].info() != Eigen::Success)
      throw std::runtime_error(
          "assemble_condensed: local elimination block is not positive "
          "definite");
    sys.r_local[K] = blk.R;
    sys.b_local[K] = sys.f_proj.coeff.segment(K * nd, nd);

    // M_K = J + tau I - R^T A^{-1} R on the three stacked face blocks.
    Eigen::MatrixXd MK =
        data.tau * Eigen::MatrixXd::Identity(3 * nf, 3 * nf) -
        blk.R.transpose() * sys.a_llt[K].solve(blk.R);
    for (int l = 0; l < 3; ++l) {
      Eigen::Vector2d nl = space.mesh->outward_normal(K, l);
      for (int lp = 0; lp < 3; ++lp) {
        Eigen::Vector2d nlp = space.mesh->outward_normal(K, lp);
        double ndot = nl.dot(nlp);
        if (ndot != 0.0)
          MK.block(l * nf, lp * nf, nf, nf) +=
              ndot * (space.trace[K][l] * space.trace[K][lp].transpose());
      }
    }
    Eigen::VectorXd gK = blk.R.transpose() * sys.a_llt[K].solve(sys.b_local[K]);

    std::array<int, 3> fid = mesh.cell_faces[K];
    for (int l = 0; l < 3; ++l)
      gfull.segment(fid[l] * nf, nf) += gK.segment(l * nf, nf);

    // Scatter M_K: reduced pairs become triplets (one per unordered pair),
    // reduced-fixed pairs move to the right-hand side.
    for (int l = 0; l < 3; ++l) {
      for (int m = 0; m < nf; ++m) {
        int gi = face_dof(space, fid[l], m);
        int li = l * nf + m;
        for (int lp = 0; lp < 3; ++lp) {
          for (int mp = 0; mp < nf; ++mp) {
            int gj = face_dof(space, fid[lp], mp);
            int lj = lp * nf + mp;
            double v = MK(li, lj);
            if (v == 0.0) continue;
            int ri = sys.reduced_of_dof[gi];
            int rj = sys.reduced_of_dof[gj];
            if (ri >= 0 && rj >= 0) {
              if (gi <= gj) trips.emplace_back(ri, rj, v);
            } else if (ri >= 0 && rj < 0) {
              rhs[ri] -= v * sys.uhat_fixed[gj];
            }
            // Fixed rows are dropped; the symmetric partner handles the
            // fixed-column contribution.
          }
        }
      }
    }
  }

  for (int d = 0; d < space.n_face_dofs(); ++d)
    if (sys.reduced_of_dof[d] >= 0) rhs[sys.reduced_of_dof[d]] += gfull[d];
  sys.rhs = rhs;
  sys.M = SparseSymmetric::from_triplets(n_red, trips);
  return sys;
}

Solution solve(const CondensedSystem& sys, Gauge gauge) {
  if (sys.space == nullptr)
    throw std::invalid_argument("solve: empty condensed system");
  const FeSpace& space = *sys.space;
  const Mesh& mesh = *space.mesh;
  int nd = space.nd, nf = space.nf;
  int n_red = static_cast<int>(sys.rhs.size());

  Eigen::VectorXd uhat_red = Eigen::VectorXd::Zero(n_red);
  double rel = 0.0, min_pivot = 0.0, gauge_integral = 0.0;

  if (sys.pure_neumann) {
    if (gauge != Gauge::SkeletonMeanZero)
      throw std::invalid_argument(
          "solve: pure Neumann skeleton system is singular up to constants; "
          "select Gauge::SkeletonMeanZero to fix int_{dOmega} uhat = 0");
    // Gauge vector: q^T uhat = int_{dOmega} uhat.
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n_red);
    std::vector<int> bnd;
    for (int f = 0; f < mesh.n_faces(); ++f)
      if (mesh.faces[f].tag != BoundaryTag::Interior) bnd.push_back(f);
    for (int f : bnd) {
      int r0 = sys.reduced_of_dof[face_dof(space, f, 0)];
      q[r0] = std::sqrt(mesh.face_geom[f].length);
    }
    // M + q q^T is SPD: the kernel of M is the constant trace, which q does
    // not annihilate.
    std::vector<Eigen::Triplet<double>> trips;
    const Eigen::SparseMatrix<double>& L = sys.M.lower();
    trips.reserve(static_cast<size_t>(L.nonZeros()) + bnd.size() * bnd.size());
    for (int c = 0; c < L.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(L, c); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()),
                           static_cast<int>(it.col()), it.value());
    for (int fa : bnd) {
      int ra = sys.reduced_of_dof[face_dof(space, fa, 0)];
      for (int fb : bnd) {
        int rb = sys.reduced_of_dof[face_dof(space, fb, 0)];
        if (ra >= rb) trips.emplace_back(ra, rb, q[ra] * q[rb]);
      }
    }
    SparseSymmetric M2 = SparseSymmetric::from_triplets(n_red, trips);
    SkeletonFactor F;
    factor_spd(M2, F, "solve");
    min_pivot = F.min_pivot;
    double rel_g = 0.0, rel_q = 0.0;
    Eigen::VectorXd yg = refined_solve(F, M2, sys.rhs, rel_g);
    Eigen::VectorXd yq = refined_solve(F, M2, q, rel_q);
    double denom = q.dot(yq);
    if (denom <= 0.0)
      throw std::runtime_error("solve: gauge constraint is degenerate");
    double lambda = q.dot(yg) / denom;
    uhat_red = yg - lambda * yq;
    gauge_integral = q.dot(uhat_red);
    double rhs_norm = std::max(sys.rhs.norm(), 1e-300);
    rel = (sys.M.apply(uhat_red) + lambda * q - sys.rhs).norm() / rhs_norm;
    if (sys.rhs.norm() == 0.0) rel = 0.0;
  } else {
    if (gauge != Gauge::None)
      throw std::invalid_argument(
          "solve: a gauge only applies to pure Neumann systems");
    if (n_red > 0) {
      SkeletonFactor F;
      factor_spd(sys.M, F, "solve");
      min_pivot = F.min_pivot;
      uhat_red = refined_solve(F, sys.M, sys.rhs, rel);
    }
  }
  if (rel > 1e-10)
    throw std::runtime_error("solve: skeleton residual contract violated");

  Solution sol;
  sol.uhat = zero_skeleton_field(space);
  sol.uhat.coeff = sys.uhat_fixed;
  for (int d = 0; d < space.n_face_dofs(); ++d)
    if (sys.reduced_of_dof[d] >= 0)
      sol.uhat.coeff[d] = uhat_red[sys.reduced_of_dof[d]];

  // Local recovery u = A^{-1}(b + R uhat), then the flux map.
  // Residuals are scaled by the largest per-entity magnitude so that
  // entities where both sides nearly cancel do not inflate the check.
  sol.u = zero_cell_field(space);
  double local_abs = 0.0, local_scale = 1e-300;
  for (int K = 0; K < mesh.n_cells(); ++K) {
    Eigen::VectorXd uhK = gather_faces(space, K, sol.uhat.coeff);
    Eigen::VectorXd rhsK = sys.b_local[K] + sys.r_local[K] * uhK;
    Eigen::VectorXd uK = sys.a_llt[K].solve(rhsK);
    sol.u.coeff.segment(K * nd, nd) = uK;
    // Residual of the recovered cell equation against every test function.
    Eigen::MatrixXd Lf = sys.a_llt[K].matrixL();
    Eigen::VectorXd Au = Lf * (Lf.transpose() * uK);
    local_scale = std::max(local_scale, rhsK.norm() + Au.norm());
    local_abs = std::max(local_abs, (Au - rhsK).norm());
  }
  double local_res = local_abs / local_scale;
  sol.p = flux_from_primal(space, sol.u, sol.uhat);

  // Flux equation residual against every test vector field (recomputed).
  double flux_abs = 0.0, flux_scale = 1e-300;
  for (int K = 0; K < mesh.n_cells(); ++K) {
    Eigen::VectorXd uK = sol.u.coeff.segment(K * nd, nd);
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd want = space.deriv[K][c].transpose() * uK;
      for (int l = 0; l < 3; ++l) {
        int f = mesh.cell_faces[K][l];
        want -= mesh.outward_normal(K, l)[c] *
                (space.trace[K][l].transpose() *
                 sol.uhat.coeff.segment(f * nf, nf));
      }
      Eigen::VectorXd pc = sol.p.comp[c].segment(K * nd, nd);
      flux_scale = std::max(flux_scale, want.norm() + pc.norm());
      flux_abs = std::max(flux_abs, (pc - want).norm());
    }
  }
  double flux_res = flux_abs / flux_scale;

  sol.diag.condensed_residual = rel;
  sol.diag.min_pivot = min_pivot;
  sol.diag.local_residual = local_res;
  sol.diag.flux_residual = flux_res;
  sol.diag.transmission_residual =
      transmission_residual_check(space, sys.tau, sol);
  sol.diag.gradient_identity =
      gradient_identity_check(space, sol.u, sol.uhat, sol.p);
  sol.diag.gauge_integral = gauge_integral;
  sol.diag.quad_residual = sys.quad_residual;
  sol.diag.n_unknowns = n_red;
  sol.diag.n_dirichlet_dofs = space.n_face_dofs() - n_red;
  return sol;
}

Solution solve_bvp(const FeSpace& space, const BVPData& data, Gauge gauge) {
  return solve(assemble_condensed(space, data), gauge);
}

double local_residual_check(const FeSpace& space, const BVPData& data,
                            const Solution& sol) {
  const Mesh& mesh = *space.mesh;
  int nd = space.nd, nf = space.nf;
  int qe = effective_exactness(data, space.k);
  CellField f_proj = resolve_source(space, data, qe);
  // Both equation families are scaled by the largest per-entity magnitude.
  double cell_abs = 0.0, cell_scale = 1e-300;
  double flux_abs = 0.0, flux_scale = 1e-300;
  for (int K = 0; K < mesh.n_cells(); ++K) {
    LocalBlocks blk = local_blocks(space, K, data.tau);
    Eigen::VectorXd uK = sol.u.coeff.segment(K * nd, nd);
    Eigen::VectorXd uhK = gather_faces(space, K, sol.uhat.coeff);
    Eigen::VectorXd bK = f_proj.coeff.segment(K * nd, nd);
    Eigen::VectorXd r = blk.A * uK - blk.R * uhK - bK;
    cell_scale = std::max(
        cell_scale, (blk.A * uK).norm() + (blk.R * uhK).norm() + bK.norm());
    cell_abs = std::max(cell_abs, r.norm());
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd want = space.deriv[K][c].transpose() * uK;
      for (int l = 0; l < 3; ++l)
        want -= mesh.outward_normal(K, l)[c] *
                (space.trace[K][l].transpose() * uhK.segment(l * nf, nf));
      Eigen::VectorXd pc = sol.p.comp[c].segment(K * nd, nd);
      flux_scale = std::max(flux_scale, want.norm() + pc.norm());
      flux_abs = std::max(flux_abs, (pc - want).norm());
    }
  }
  return std::max(cell_abs / cell_scale, flux_abs / flux_scale);
}

double transmission_residual_check(const FeSpace& space, double tau,
                                   const Solution& sol) {
  const Mesh& mesh = *space.mesh;
  auto inc = face_incidence(mesh);
  // Scaled by the largest one-sided flux over all interior faces, so faces
  // where both one-sided fluxes nearly vanish do not inflate the check.
  double abs_res = 0.0, scale = 1e-300;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    if (inc[f].size() != 2) continue;
    Eigen::VectorXd gm =
        numerical_flux(space, tau, sol, inc[f][0].first, inc[f][0].second);
    Eigen::VectorXd gp =
        numerical_flux(space, tau, sol, inc[f][1].first, inc[f][1].second);
    scale = std::max(scale, gm.norm() + gp.norm());
    abs_res = std::max(abs_res, (gm + gp).norm());
  }
  return abs_res / scale;
}

EnergyReport energy_check(const FeSpace& space, const BVPData& data,
                          const Solution& sol) {
  const Mesh& mesh = *space.mesh;
  int nf = space.nf;
  int qe = effective_exactness(data, space.k);
  CellField f_proj = resolve_source(space, data, qe);
  std::vector<int> neu = mesh.faces_with_tag(BoundaryTag::Neumann);
  std::vector<int> dir = mesh.faces_with_tag(BoundaryTag::Dirichlet);
  Eigen::VectorXd un = resolve_boundary_datum(
      space, data.neumann, data.neumann_field, neu, qe, "Neumann");

  EnergyReport rep;
  double mismatch = diff_norm_skeleton(space, sol.u, sol.uhat);
  rep.lhs = norm_L2_cells(space, sol.p) * norm_L2_cells(space, sol.p) +
            data.tau * mismatch * mismatch;
  // Orthonormal bases make both data pairings exact coefficient products.
  rep.rhs = f_proj.coeff.dot(sol.u.coeff);
  for (int f : neu)
    rep.rhs += un.segment(f * nf, nf).dot(sol.uhat.coeff.segment(f * nf, nf));
  rep.generalized_rhs = rep.rhs;
  auto inc = face_incidence(mesh);
  for (int f : dir) {
    Eigen::VectorXd g =
        numerical_flux(space, data.tau, sol, inc[f][0].first, inc[f][0].second);
    rep.generalized_rhs -= g.dot(sol.uhat.coeff.segment(f * nf, nf));
  }
  return rep;
}

DirichletEstimate dirichlet_estimate_check(const FeSpace& space,
                                           const BVPData& data,
                                           const Solution& sol) {
  const Mesh& mesh = *space.mesh;
  int nf = space.nf;
  int qe = effective_exactness(data, space.k);
  std::vector<int> dir = mesh.faces_with_tag(BoundaryTag::Dirichlet);
  DirichletEstimate est;
  for (int f : dir)
    est.uhat_norm2 += sol.uhat.coeff.segment(f * nf, nf).squaredNorm();
  if (dir.empty()) return est;
  if (data.dirichlet_field) {
    for (int f : dir)
      est.datum_norm2 +=
          data.dirichlet_field->coeff.segment(f * nf, nf).squaredNorm();
  } else {
    if (!data.dirichlet)
      throw std::invalid_argument(
          "dirichlet_estimate_check: missing Dirichlet datum");
    est.datum_norm2 = datum_norm2_on_faces(space, data.dirichlet, dir,
                                           std::max(2 * qe, 20));
  }
  return est;
}

double stability_energy(const FeSpace& space, double tau,
                        const Solution& sol) {
  const Mesh& mesh = *space.mesh;
  int nf = space.nf;
  double mismatch = diff_norm_skeleton(space, sol.u, sol.uhat);
  double e = norm_L2_cells(space, sol.p) * norm_L2_cells(space, sol.p) +
             tau * mismatch * mismatch;
  for (int f : mesh.faces_with_tag(BoundaryTag::Dirichlet))
    e += sol.uhat.coeff.segment(f * nf, nf).squaredNorm();
  return e;
}

}  // namespace hfem
