// Assembly of the audited quadratic forms.  All local terms land in the
// sparse symmetric part; squared integrals stay as explicit rank-one vectors.
// Coefficient identities used throughout (orthonormal bases): the constant 1
// on K has coefficient sqrt|K| on basis function 0, int_e of a skeleton
// function is sqrt|e| times its 0th face coefficient, and the trace matrix T
// expands traces of cell functions in the face basis.

#include "hfem/forms.hpp"

#include <cmath>
#include <stdexcept>

#include "hfem/lifting.hpp"

namespace hfem {

namespace {

using Trip = Eigen::Triplet<double>;

// Lower triangle of a symmetric block M over the (distinct) global indices
// idx; from_triplets accumulates duplicates, so each unordered pair is
// emitted once.
void add_sym_diag_block(std::vector<Trip>& trips, const std::vector<int>& idx,
                        const Eigen::MatrixXd& M) {
  int m = static_cast<int>(idx.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j)
      if (M(i, j) != 0.0) trips.emplace_back(idx[i], idx[j], M(i, j));
}

// Off-diagonal block M over disjoint row/column index sets.
void add_rect_block(std::vector<Trip>& trips, const std::vector<int>& rows,
                    const std::vector<int>& cols, const Eigen::MatrixXd& M) {
  for (int i = 0; i < static_cast<int>(rows.size()); ++i)
    for (int j = 0; j < static_cast<int>(cols.size()); ++j)
      if (M(i, j) != 0.0) trips.emplace_back(rows[i], cols[j], M(i, j));
}

SparseSymmetric sparse_from_dense(const Eigen::MatrixXd& M) {
  std::vector<Trip> trips;
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j <= i; ++j)
      if (M(i, j) != 0.0) trips.emplace_back(i, j, M(i, j));
  return SparseSymmetric::from_triplets(static_cast<int>(M.rows()), trips);
}

std::vector<int> cell_indices(const DofLayout& lay, int K) {
  std::vector<int> idx(lay.nd);
  for (int i = 0; i < lay.nd; ++i) idx[i] = lay.u_index(K, i);
  return idx;
}

std::vector<int> face_indices(const DofLayout& lay, int f) {
  std::vector<int> idx(lay.nf);
  for (int m = 0; m < lay.nf; ++m) idx[m] = lay.uhat_index(f, m);
  return idx;
}

void require_boundary_faces(const Mesh& mesh, const std::vector<int>& gamma,
                            const char* who) {
  if (gamma.empty())
    throw std::invalid_argument(std::string(who) +
                                ": empty boundary face set");
  for (int f : gamma)
    if (f < 0 || f >= mesh.n_faces() || !mesh.faces[f].is_boundary())
      throw std::invalid_argument(std::string(who) +
                                  ": face set contains a non-boundary face");
}

// Local edge index of face f within cell K.
int local_edge(const Mesh& mesh, int K, int f) {
  for (int l = 0; l < 3; ++l)
    if (mesh.cell_faces[K][l] == f) return l;
  throw std::logic_error("local_edge: face not on cell");
}

Eigen::MatrixXd gradgrad_of(const FeSpace& space, int K) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(space.nd, space.nd);
  for (int c = 0; c < 2; ++c)
    G += space.deriv[K][c].transpose() * space.deriv[K][c];
  return G;
}

// h ||u - uhat||^2 accumulated over the given (cell, local edge) incidences.
void add_mismatch(std::vector<Trip>& trips, const FeSpace& space,
                  const DofLayout& lay, int K, int l, double coeff) {
  const Mesh& mesh = *space.mesh;
  int f = mesh.cell_faces[K][l];
  const Eigen::MatrixXd& T = space.trace[K][l];
  std::vector<int> ui = cell_indices(lay, K);
  std::vector<int> fi = face_indices(lay, f);
  add_sym_diag_block(trips, ui, coeff * (T.transpose() * T));
  add_sym_diag_block(
      trips, fi,
      coeff * Eigen::MatrixXd::Identity(space.nf, space.nf));
  add_rect_block(trips, ui, fi, -coeff * T.transpose());
}

// |lift(uhat averages)|_H1^2 restricted to cell K, over the 0th coefficients
// of its three faces: the lift gradient is (1/|K|) sum_l sqrt|e_l| uhat_{l,0}
// n_l, so the block is sum_c v_c v_c^T / |K| with v_c[l] = sqrt|e_l| n_c.
void add_lift_energy(std::vector<Trip>& trips, const FeSpace& space,
                     const DofLayout& lay, int K, double coeff) {
  const Mesh& mesh = *space.mesh;
  std::vector<int> idx(3);
  Eigen::Matrix<double, 3, 2> V;
  for (int l = 0; l < 3; ++l) {
    int f = mesh.cell_faces[K][l];
    idx[l] = lay.uhat_index(f, 0);
    V.row(l) = std::sqrt(mesh.face_geom[f].length) *
               mesh.outward_normal(K, l).transpose();
  }
  Eigen::MatrixXd block = (coeff / mesh.cell_geom[K].area) * (V * V.transpose());
  add_sym_diag_block(trips, idx, block);
}

// ||p||^2 restricted to cell K where p_c = D_c^T u - sum_l n_c^l T_l^T uhat_l.
void add_flux_energy(std::vector<Trip>& trips, const FeSpace& space,
                     const DofLayout& lay, int K, double coeff) {
  const Mesh& mesh = *space.mesh;
  int nd = space.nd, nf = space.nf;
  int loc_n = nd + 3 * nf;
  std::vector<int> idx(loc_n);
  for (int i = 0; i < nd; ++i) idx[i] = lay.u_index(K, i);
  for (int l = 0; l < 3; ++l) {
    int f = mesh.cell_faces[K][l];
    for (int m = 0; m < nf; ++m) idx[nd + l * nf + m] = lay.uhat_index(f, m);
  }
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(loc_n, loc_n);
  Eigen::MatrixXd P(nd, loc_n);
  for (int c = 0; c < 2; ++c) {
    P.leftCols(nd) = space.deriv[K][c].transpose();
    for (int l = 0; l < 3; ++l) {
      double nc = mesh.outward_normal(K, l)[c];
      P.middleCols(nd + l * nf, nf) = -nc * space.trace[K][l].transpose();
    }
    M += P.transpose() * P;
  }
  add_sym_diag_block(trips, idx, coeff * M);
}

// Squared-integral vectors.
Eigen::VectorXd domain_integral_of_u(const FeSpace& space,
                                     const DofLayout& lay) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(lay.n);
  for (int K = 0; K < space.mesh->n_cells(); ++K)
    g[lay.u_index(K, 0)] = std::sqrt(space.mesh->cell_geom[K].area);
  return g;
}

Eigen::VectorXd domain_integral_of_lift(const FeSpace& space,
                                        const DofLayout& lay) {
  const Mesh& mesh = *space.mesh;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(lay.n);
  // int_K lift = (|K|/3) sum_l mu_l with mu_l = uhat_{l,0} / sqrt|e_l|.
  for (int K = 0; K < mesh.n_cells(); ++K)
    for (int l = 0; l < 3; ++l) {
      int f = mesh.cell_faces[K][l];
      g[lay.uhat_index(f, 0)] +=
          mesh.cell_geom[K].area / (3.0 * std::sqrt(mesh.face_geom[f].length));
    }
  return g;
}

Eigen::VectorXd gamma_integral_of_uhat(const FeSpace& space,
                                       const DofLayout& lay,
                                       const std::vector<int>& gamma) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(lay.n);
  for (int f : gamma)
    g[lay.uhat_index(f, 0)] = std::sqrt(space.mesh->face_geom[f].length);
  return g;
}

QuadraticForm make_form(const DofLayout& lay, std::vector<Trip>&& trips,
                        std::vector<Eigen::VectorXd>&& rank_one = {}) {
  QuadraticForm q;
  q.layout = lay;
  q.S = SparseSymmetric::from_triplets(lay.n, trips);
  q.rank_one = std::move(rank_one);
  return q;
}

// Shared implementation of the hybrid Poincare right-hand side; the negative
// control differs only by omitting the mismatch term.
FormPair hybrid_poincare_impl(const FeSpace& space,
                              HybridPoincareVariant variant,
                              const std::vector<int>& gamma,
                              bool with_mismatch) {
  const Mesh& mesh = *space.mesh;
  DofLayout lay = layout_hybrid(space);
  double h = mesh.h_max;

  std::vector<Trip> a_trips;
  for (int i = 0; i < lay.cell_dofs_total; ++i) a_trips.emplace_back(i, i, 1.0);

  std::vector<Trip> b_trips;
  for (int K = 0; K < mesh.n_cells(); ++K) {
    add_sym_diag_block(b_trips, cell_indices(lay, K),
                       h * h * gradgrad_of(space, K));
    if (with_mismatch)
      for (int l = 0; l < 3; ++l) add_mismatch(b_trips, space, lay, K, l, h);
    add_lift_energy(b_trips, space, lay, K, 1.0);
  }

  Eigen::VectorXd g;
  switch (variant) {
    case HybridPoincareVariant::MeanCr:
      g = domain_integral_of_lift(space, lay);
      break;
    case HybridPoincareVariant::Boundary:
      require_boundary_faces(mesh, gamma, "form_hybrid_poincare");
      g = gamma_integral_of_uhat(space, lay, gamma);
      break;
    case HybridPoincareVariant::MeanU:
      g = domain_integral_of_u(space, lay);
      break;
  }

  FormPair pair;
  pair.A = make_form(lay, std::move(a_trips));
  pair.B = make_form(lay, std::move(b_trips), {g});
  return pair;
}

}  // namespace

//------------------------------------------------------------------------------
// Layouts and container
//------------------------------------------------------------------------------

DofLayout layout_single_cell(int k) {
  DofLayout lay;
  lay.kind = LayoutKind::SingleCell;
  lay.k = k;
  lay.nd = triangle_space_dim(k);
  lay.n = lay.nd;
  lay.cell_dofs_total = lay.nd;
  return lay;
}

DofLayout layout_cells(const FeSpace& space) {
  DofLayout lay;
  lay.kind = LayoutKind::CellOnly;
  lay.mesh = space.mesh;
  lay.k = space.k;
  lay.nd = space.nd;
  lay.n = space.n_cell_dofs();
  lay.cell_dofs_total = lay.n;
  return lay;
}

DofLayout layout_cr(const Mesh& mesh) {
  DofLayout lay;
  lay.kind = LayoutKind::CR;
  lay.mesh = &mesh;
  lay.k = 1;
  lay.n = mesh.n_faces();
  return lay;
}

DofLayout layout_hybrid(const FeSpace& space) {
  DofLayout lay;
  lay.kind = LayoutKind::Hybrid;
  lay.mesh = space.mesh;
  lay.k = space.k;
  lay.nd = space.nd;
  lay.nf = space.nf;
  lay.cell_dofs_total = space.n_cell_dofs();
  lay.n = space.n_cell_dofs() + space.n_face_dofs();
  return lay;
}

Eigen::VectorXd join_hybrid(const FeSpace& space, const CellField& u,
                            const SkeletonField& uhat) {
  Eigen::VectorXd x(space.n_cell_dofs() + space.n_face_dofs());
  x.head(space.n_cell_dofs()) = u.coeff;
  x.tail(space.n_face_dofs()) = uhat.coeff;
  return x;
}

std::pair<CellField, SkeletonField> split_hybrid(const FeSpace& space,
                                                 const Eigen::VectorXd& x) {
  if (x.size() != space.n_cell_dofs() + space.n_face_dofs())
    throw std::invalid_argument("split_hybrid: size mismatch");
  CellField u;
  u.k = space.k;
  u.coeff = x.head(space.n_cell_dofs());
  SkeletonField uhat;
  uhat.k = space.k;
  uhat.coeff = x.tail(space.n_face_dofs());
  return {std::move(u), std::move(uhat)};
}

double QuadraticForm::energy(const Eigen::VectorXd& x) const {
  double e = x.dot(S.apply(x));
  for (const auto& g : rank_one) {
    double gx = g.dot(x);
    e += gx * gx;
  }
  return e;
}

Eigen::VectorXd QuadraticForm::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = S.apply(x);
  for (const auto& g : rank_one) y += g * g.dot(x);
  return y;
}

Eigen::MatrixXd QuadraticForm::full() const {
  Eigen::SparseMatrix<double> sym =
      S.lower().selfadjointView<Eigen::Lower>();
  Eigen::MatrixXd M(sym);
  for (const auto& g : rank_one) M += g * g.transpose();
  return M;
}

//------------------------------------------------------------------------------
// Single-cell forms
//------------------------------------------------------------------------------

FormPair form_simplex_trace(const CellGeometry& K, const FaceGeometry& e,
                            int k) {
  ReferenceBasis cb = build_orthonormal_basis(k, RefElement::Triangle);
  ReferenceBasis fb = build_orthonormal_basis(k, RefElement::Segment);
  Eigen::MatrixXd T = cell_trace_on_face(cb, fb, K, e);
  DofLayout lay = layout_single_cell(k);
  FormPair pair;
  pair.A.layout = lay;
  pair.A.S = sparse_from_dense(T.transpose() * T);
  pair.B.layout = lay;
  pair.B.S = sparse_from_dense(Eigen::MatrixXd::Identity(lay.n, lay.n));
  return pair;
}

FormPair form_simplex_poincare(const CellGeometry& K, int k,
                               SimplexPoincareMode mode,
                               const FaceGeometry* e) {
  ReferenceBasis cb = build_orthonormal_basis(k, RefElement::Triangle);
  DofLayout lay = layout_single_cell(k);
  int nd = lay.nd;

  FormPair pair;
  pair.B.layout = lay;
  pair.B.S = sparse_from_dense(cell_gradgrad(cb, K));
  pair.A.layout = lay;

  if (mode == SimplexPoincareMode::Mean) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(nd, nd);
    P(0, 0) = 0.0;  // removing the mean zeroes the constant coefficient
    pair.A.S = sparse_from_dense(P);
    return pair;
  }

  if (e == nullptr)
    throw std::invalid_argument("form_simplex_poincare: face required");
  ReferenceBasis fb = build_orthonormal_basis(k, RefElement::Segment);
  Eigen::MatrixXd T = cell_trace_on_face(cb, fb, K, *e);
  double s = std::sqrt(K.area / e->length);
  // sqrt|K| * (face mean of f) = s * (T f)_0.
  Eigen::VectorXd t0 = T.row(0).transpose();

  if (mode == SimplexPoincareMode::FaceMean) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(nd, nd);
    P.row(0) -= s * t0.transpose();
    pair.A.S = sparse_from_dense(P.transpose() * P);
    return pair;
  }

  // MeanDiff: |K| (mean_K f - mean_e f)^2 as one rank-one term.
  Eigen::VectorXd g = -s * t0;
  g[0] += 1.0;
  pair.A.S = SparseSymmetric::from_triplets(nd, {});
  pair.A.rank_one = {g};
  return pair;
}

//------------------------------------------------------------------------------
// Mesh-level forms
//------------------------------------------------------------------------------

FormPair form_brenner(const FeSpace& space, BrennerVariant variant,
                      const std::vector<int>& gamma) {
  const Mesh& mesh = *space.mesh;
  DofLayout lay = layout_cells(space);

  std::vector<Trip> a_trips;
  for (int i = 0; i < lay.n; ++i) a_trips.emplace_back(i, i, 1.0);

  std::vector<Trip> b_trips;
  for (int K = 0; K < mesh.n_cells(); ++K)
    add_sym_diag_block(b_trips, cell_indices(lay, K), gradgrad_of(space, K));

  // Interior jump penalties |e|^{-2} |int_e jump|^2; with int_e(trace) =
  // sqrt|e| (T f)_0 per side this is |e|^{-1} (t0_lo . f_lo - t0_hi . f_hi)^2.
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Face& face = mesh.faces[f];
    if (face.is_boundary()) continue;
    int Klo = face.cell_lo, Khi = face.cell_hi;
    int llo = local_edge(mesh, Klo, f), lhi = local_edge(mesh, Khi, f);
    std::vector<int> idx = cell_indices(lay, Klo);
    for (int i : cell_indices(lay, Khi)) idx.push_back(i);
    Eigen::VectorXd w(2 * space.nd);
    w.head(space.nd) = space.trace[Klo][llo].row(0).transpose();
    w.tail(space.nd) = -space.trace[Khi][lhi].row(0).transpose();
    add_sym_diag_block(b_trips, idx,
                       (1.0 / mesh.face_geom[f].length) * (w * w.transpose()));
  }

  Eigen::VectorXd g;
  if (variant == BrennerVariant::Mean) {
    g = domain_integral_of_u(space, lay);
  } else {
    require_boundary_faces(mesh, gamma, "form_brenner");
    g = Eigen::VectorXd::Zero(lay.n);
    for (int f : gamma) {
      int K = mesh.faces[f].cell_lo;
      int l = local_edge(mesh, K, f);
      double root_len = std::sqrt(mesh.face_geom[f].length);
      for (int i = 0; i < space.nd; ++i)
        g[lay.u_index(K, i)] += root_len * space.trace[K][l](0, i);
    }
  }

  FormPair pair;
  pair.A = make_form(lay, std::move(a_trips));
  pair.B = make_form(lay, std::move(b_trips), {g});
  return pair;
}

FormPair form_hybrid_poincare(const FeSpace& space,
                              HybridPoincareVariant variant,
                              const std::vector<int>& gamma) {
  return hybrid_poincare_impl(space, variant, gamma, true);
}

FormPair form_hybrid_poincare_dropped_mismatch(const FeSpace& space,
                                               HybridPoincareVariant variant,
                                               const std::vector<int>& gamma) {
  return hybrid_poincare_impl(space, variant, gamma, false);
}

FormPair form_hybrid_trace(const FeSpace& space, HybridTraceWhich which,
                           const std::vector<int>& gamma) {
  const Mesh& mesh = *space.mesh;
  require_boundary_faces(mesh, gamma, "form_hybrid_trace");
  DofLayout lay = layout_hybrid(space);
  double h = mesh.h_max;

  std::vector<Trip> a_trips;
  std::vector<Trip> b_trips;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    if (!mesh.faces[f].is_boundary()) continue;
    int K = mesh.faces[f].cell_lo;
    int l = local_edge(mesh, K, f);
    if (which == HybridTraceWhich::U) {
      const Eigen::MatrixXd& T = space.trace[K][l];
      add_sym_diag_block(a_trips, cell_indices(lay, K), T.transpose() * T);
    } else {
      add_sym_diag_block(
          a_trips, face_indices(lay, f),
          Eigen::MatrixXd::Identity(space.nf, space.nf));
    }
    add_mismatch(b_trips, space, lay, K, l, 1.0);
  }
  for (int K = 0; K < mesh.n_cells(); ++K) {
    add_sym_diag_block(b_trips, cell_indices(lay, K),
                       h * gradgrad_of(space, K));
    add_lift_energy(b_trips, space, lay, K, 1.0 + h);
  }

  FormPair pair;
  pair.A = make_form(lay, std::move(a_trips));
  pair.B = make_form(lay, std::move(b_trips),
                     {gamma_integral_of_uhat(space, lay, gamma)});
  return pair;
}

FormPair form_cr_trace(const Mesh& mesh, CrTraceVariant variant,
                       const std::vector<int>& gamma) {
  DofLayout lay = layout_cr(mesh);
  double h = mesh.h_max;

  std::vector<Trip> a_trips;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    if (!mesh.faces[f].is_boundary()) continue;
    int K = mesh.faces[f].cell_lo;
    int l = local_edge(mesh, K, f);
    // Trace along edge l is affine with endpoint values L * mu(local faces);
    // the edge mass of an affine segment gives the quoted quadratic.
    Eigen::Matrix<double, 2, 3> L;
    L.setOnes();
    L(0, (l + 1) % 3) -= 2.0;
    L(1, (l + 2) % 3) -= 2.0;
    Eigen::Matrix2d E;
    E << 1.0, 0.5, 0.5, 1.0;
    std::vector<int> idx(mesh.cell_faces[K].begin(), mesh.cell_faces[K].end());
    add_sym_diag_block(
        a_trips, idx,
        (mesh.face_geom[f].length / 3.0) * (L.transpose() * E * L));
  }

  double grad_coeff =
      variant == CrTraceVariant::Mean ? 1.0 + h * h : 1.0 + h;
  std::vector<Trip> b_trips;
  for (int K = 0; K < mesh.n_cells(); ++K) {
    // |w|_H1^2 on K: gradient (1/|K|) sum_l mu_l |e_l| n_l.
    Eigen::Matrix<double, 3, 2> V;
    std::vector<int> idx(mesh.cell_faces[K].begin(), mesh.cell_faces[K].end());
    for (int l = 0; l < 3; ++l)
      V.row(l) = mesh.face_geom[mesh.cell_faces[K][l]].length *
                 mesh.outward_normal(K, l).transpose();
    add_sym_diag_block(
        b_trips, idx,
        (grad_coeff / mesh.cell_geom[K].area) * (V * V.transpose()));
  }

  Eigen::VectorXd g = Eigen::VectorXd::Zero(lay.n);
  if (variant == CrTraceVariant::Mean) {
    for (int K = 0; K < mesh.n_cells(); ++K)
      for (int l = 0; l < 3; ++l)
        g[mesh.cell_faces[K][l]] += mesh.cell_geom[K].area / 3.0;
  } else {
    require_boundary_faces(mesh, gamma, "form_cr_trace");
    for (int f : gamma) g[f] = mesh.face_geom[f].length;
  }

  FormPair pair;
  pair.A = make_form(lay, std::move(a_trips));
  pair.B = make_form(lay, std::move(b_trips), {g});
  return pair;
}

FormPair form_ph_poincare(const FeSpace& space, HybridPoincareVariant variant,
                          const std::vector<int>& gamma) {
  const Mesh& mesh = *space.mesh;
  DofLayout lay = layout_hybrid(space);
  double h = mesh.h_max;

  std::vector<Trip> a_trips;
  for (int i = 0; i < lay.cell_dofs_total; ++i) a_trips.emplace_back(i, i, 1.0);

  std::vector<Trip> b_trips;
  for (int K = 0; K < mesh.n_cells(); ++K) {
    add_flux_energy(b_trips, space, lay, K, 1.0 + h * h);
    for (int l = 0; l < 3; ++l) add_mismatch(b_trips, space, lay, K, l, h);
  }

  Eigen::VectorXd g;
  switch (variant) {
    case HybridPoincareVariant::MeanCr:
      g = domain_integral_of_lift(space, lay);
      break;
    case HybridPoincareVariant::Boundary:
      require_boundary_faces(mesh, gamma, "form_ph_poincare");
      g = gamma_integral_of_uhat(space, lay, gamma);
      break;
    case HybridPoincareVariant::MeanU:
      g = domain_integral_of_u(space, lay);
      break;
  }

  FormPair pair;
  pair.A = make_form(lay, std::move(a_trips));
  pair.B = make_form(lay, std::move(b_trips), {g});
  return pair;
}

FormPair form_ph_trace(const FeSpace& space, HybridTraceWhich which,
                       const std::vector<int>& gamma) {
  const Mesh& mesh = *space.mesh;
  require_boundary_faces(mesh, gamma, "form_ph_trace");
  DofLayout lay = layout_hybrid(space);
  double h = mesh.h_max;

  std::vector<Trip> a_trips;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    if (!mesh.faces[f].is_boundary()) continue;
    int K = mesh.faces[f].cell_lo;
    int l = local_edge(mesh, K, f);
    if (which == HybridTraceWhich::U) {
      const Eigen::MatrixXd& T = space.trace[K][l];
      add_sym_diag_block(a_trips, cell_indices(lay, K), T.transpose() * T);
    } else {
      add_sym_diag_block(
          a_trips, face_indices(lay, f),
          Eigen::MatrixXd::Identity(space.nf, space.nf));
    }
  }

  std::vector<Trip> b_trips;
  for (int K = 0; K < mesh.n_cells(); ++K) {
    add_flux_energy(b_trips, space, lay, K, 1.0 + h);
    for (int l = 0; l < 3; ++l) add_mismatch(b_trips, space, lay, K, l, 1.0);
  }

  FormPair pair;
  pair.A = make_form(lay, std::move(a_trips));
  pair.B = make_form(lay, std::move(b_trips),
                     {gamma_integral_of_uhat(space, lay, gamma)});
  return pair;
}

//------------------------------------------------------------------------------
// Pointwise companion check
//------------------------------------------------------------------------------

double lift_flux_gap(const FeSpace& space, const CellField& u,
                     const SkeletonField& uhat) {
  const Mesh& mesh = *space.mesh;
  CRField lift = cr_lift(mesh, face_average(space, uhat));
  double gap = -1e300;
  for (int K = 0; K < mesh.n_cells(); ++K) {
    double p2 = 0.0;
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd pc =
          space.deriv[K][c].transpose() * cell_block(space, u, K);
      for (int l = 0; l < 3; ++l) {
        int f = mesh.cell_faces[K][l];
        pc -= mesh.outward_normal(K, l)[c] *
              (space.trace[K][l].transpose() * face_block(space, uhat, f));
      }
      p2 += pc.squaredNorm();
    }
    double lift_norm = std::sqrt(mesh.cell_geom[K].area) *
                       cr_gradient(mesh, lift, K).norm();
    gap = std::max(gap, lift_norm - std::sqrt(p2));
  }
  return gap;
}

}  // namespace hfem
