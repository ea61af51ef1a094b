// Midpoint-dof affine lift and per-cell boundary lift.

#include "hfem/lifting.hpp"

#include <cmath>
#include <stdexcept>

namespace hfem {

namespace {

// Barycentric coordinates at reference point (x, y): vertex 0 -> 1-x-y,
// vertex 1 -> x, vertex 2 -> y.
inline Eigen::Vector3d barycentric(const Eigen::Vector2d& xhat) {
  return {1.0 - xhat[0] - xhat[1], xhat[0], xhat[1]};
}

// Value of w at the local vertex j of cell K: sum_l mu_l - 2 mu_{(j+1)%3}
// (the edge opposite vertex j is local edge (j+1)%3).
double vertex_value(const Mesh& mesh, const CRField& w, int K, int j) {
  double sum = 0.0;
  for (int l = 0; l < 3; ++l) sum += w.face_value[mesh.cell_faces[K][l]];
  return sum - 2.0 * w.face_value[mesh.cell_faces[K][(j + 1) % 3]];
}

}  // namespace

CRField cr_lift(const Mesh& mesh, const SkeletonField& mu0) {
  if (mu0.k != 0)
    throw std::invalid_argument("cr_lift: skeleton field must have degree 0");
  if (mu0.coeff.size() != mesh.n_faces())
    throw std::invalid_argument("cr_lift: field/mesh size mismatch");
  CRField w;
  w.face_value.resize(mesh.n_faces());
  for (int f = 0; f < mesh.n_faces(); ++f)
    w.face_value[f] = face_value0(mesh, mu0, f);
  return w;
}

double cr_eval(const Mesh& mesh, const CRField& w, int K,
               const Eigen::Vector2d& xhat) {
  Eigen::Vector3d lambda = barycentric(xhat);
  double v = 0.0;
  for (int l = 0; l < 3; ++l)
    v += w.face_value[mesh.cell_faces[K][l]] * (1.0 - 2.0 * lambda[(l + 2) % 3]);
  return v;
}

Eigen::Vector2d cr_gradient(const Mesh& mesh, const CRField& w, int K) {
  // grad lambda_j = -|e_j| n_{K,e_j} / (2|K|) for the edge opposite vertex j,
  // so the -2 lambda terms sum to (1/|K|) sum_l mu_l |e_l| n_{K,e_l}.
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (int l = 0; l < 3; ++l) {
    int f = mesh.cell_faces[K][l];
    g += w.face_value[f] * mesh.face_geom[f].length * mesh.outward_normal(K, l);
  }
  return g / mesh.cell_geom[K].area;
}

CellField cr_to_cell_field(const FeSpace& space, const CRField& w) {
  if (space.k < 1)
    throw std::invalid_argument("cr_to_cell_field: need degree >= 1");
  const Mesh& mesh = *space.mesh;
  QuadratureRule quad = quad_triangle(space.k + 1);
  Eigen::MatrixXd V = space.cell_basis.values_at(quad);
  int npts = static_cast<int>(quad.points.rows());
  Eigen::VectorXd wx(npts);
  CellField out = zero_cell_field(space);
  for (int K = 0; K < mesh.n_cells(); ++K) {
    for (int q = 0; q < npts; ++q)
      wx[q] = quad.weights[q] *
              cr_eval(mesh, w, K,
                      Eigen::Vector2d(quad.points(q, 0), quad.points(q, 1)));
    out.coeff.segment(K * space.nd, space.nd) =
        std::sqrt(2.0 * mesh.cell_geom[K].area) * (V.transpose() * wx);
  }
  return out;
}

double cr_seminorm_H1(const Mesh& mesh, const CRField& w) {
  double s2 = 0.0;
  for (int K = 0; K < mesh.n_cells(); ++K)
    s2 += mesh.cell_geom[K].area * cr_gradient(mesh, w, K).squaredNorm();
  return std::sqrt(s2);
}

double cr_integral_domain(const Mesh& mesh, const CRField& w) {
  double s = 0.0;
  for (int K = 0; K < mesh.n_cells(); ++K) {
    double mu_sum = 0.0;
    for (int l = 0; l < 3; ++l) mu_sum += w.face_value[mesh.cell_faces[K][l]];
    s += mesh.cell_geom[K].area / 3.0 * mu_sum;
  }
  return s;
}

namespace {

// int_e w^2 for the affine restriction of w to an edge with endpoint values
// wa, wb: |e| (wa^2 + wa wb + wb^2) / 3.
double edge_norm2(double len, double wa, double wb) {
  return len * (wa * wa + wa * wb + wb * wb) / 3.0;
}

// Endpoint values of w along local edge l of cell K (vertices l, l+1).
std::pair<double, double> edge_values(const Mesh& mesh, const CRField& w,
                                      int K, int l) {
  return {vertex_value(mesh, w, K, l), vertex_value(mesh, w, K, (l + 1) % 3)};
}

}  // namespace

double cr_norm_boundary(const Mesh& mesh, const CRField& w,
                        const std::vector<int>& faces) {
  double s2 = 0.0;
  for (int f : faces) {
    const Face& face = mesh.faces[f];
    if (!face.is_boundary())
      throw std::invalid_argument("cr_norm_boundary: interior face");
    int K = face.cell_lo;
    int l = 0;
    while (mesh.cell_faces[K][l] != f) ++l;
    auto [wa, wb] = edge_values(mesh, w, K, l);
    s2 += edge_norm2(mesh.face_geom[f].length, wa, wb);
  }
  return std::sqrt(s2);
}

std::pair<double, double> restriction_estimate_check(const Mesh& mesh,
                                                     const SkeletonField& mu0,
                                                     int K) {
  CRField w = cr_lift(mesh, mu0);
  double lhs = 0.0, rhs = 0.0;
  for (int l = 0; l < 3; ++l) {
    int f = mesh.cell_faces[K][l];
    double len = mesh.face_geom[f].length;
    lhs += len * w.face_value[f] * w.face_value[f];
    auto [wa, wb] = edge_values(mesh, w, K, l);
    rhs += edge_norm2(len, wa, wb);
  }
  return {lhs, rhs};
}

std::array<Eigen::VectorXd, 2> boundary_lift(const FeSpace& space,
                                             const SkeletonField& mu, int K) {
  std::array<Eigen::VectorXd, 2> G = {Eigen::VectorXd::Zero(space.nd),
                                      Eigen::VectorXd::Zero(space.nd)};
  for (int l = 0; l < 3; ++l) {
    int f = space.mesh->cell_faces[K][l];
    Eigen::Vector2d n = space.mesh->outward_normal(K, l);
    Eigen::VectorXd t =
        space.trace[K][l].transpose() * mu.coeff.segment(f * space.nf, space.nf);
    G[0] += n[0] * t;
    G[1] += n[1] * t;
  }
  return G;
}

double gradient_identity_check(const FeSpace& space, const CellField& u,
                               const SkeletonField& uhat,
                               const VectorCellField& p) {
  if (u.k != space.k || uhat.k != space.k || p.k != space.k)
    throw std::invalid_argument("gradient_identity_check: degree mismatch");
  double worst = 0.0;
  for (int K = 0; K < space.mesh->n_cells(); ++K) {
    auto uK = u.coeff.segment(K * space.nd, space.nd);
    // G(u - uhat) with mu_l = trace_l(u) - uhat_l, assembled directly.
    std::array<Eigen::VectorXd, 2> G = {Eigen::VectorXd::Zero(space.nd),
                                        Eigen::VectorXd::Zero(space.nd)};
    for (int l = 0; l < 3; ++l) {
      int f = space.mesh->cell_faces[K][l];
      Eigen::Vector2d n = space.mesh->outward_normal(K, l);
      Eigen::VectorXd diff =
          space.trace[K][l] * uK - uhat.coeff.segment(f * space.nf, space.nf);
      Eigen::VectorXd t = space.trace[K][l].transpose() * diff;
      G[0] += n[0] * t;
      G[1] += n[1] * t;
    }
    double r2 = 0.0;
    for (int c = 0; c < 2; ++c)
      r2 += (space.deriv[K][c] * uK +
             p.comp[c].segment(K * space.nd, space.nd) - G[c])
                .squaredNorm();
    worst = std::max(worst, std::sqrt(r2));
  }
  return worst;
}

}  // namespace hfem
