// Field containers and the norm/integral toolbox.

#include "hfem/fields.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace hfem {

FeSpace make_space(const Mesh& mesh, int k) {
  if (k < 0 || k > 10)
    throw std::invalid_argument("make_space: degree out of range");
  FeSpace s;
  s.mesh = &mesh;
  s.k = k;
  s.cell_basis = build_orthonormal_basis(k, RefElement::Triangle);
  s.face_basis = build_orthonormal_basis(k, RefElement::Segment);
  s.nd = s.cell_basis.dim;
  s.nf = s.face_basis.dim;
  s.deriv.reserve(mesh.n_cells());
  s.trace.reserve(mesh.n_cells());
  for (int K = 0; K < mesh.n_cells(); ++K) {
    s.deriv.push_back(cell_div_coupling(s.cell_basis, mesh.cell_geom[K]));
    std::array<Eigen::MatrixXd, 3> t;
    for (int l = 0; l < 3; ++l)
      t[l] = cell_trace_on_face(s.cell_basis, s.face_basis, mesh.cell_geom[K],
                                mesh.face_geom[mesh.cell_faces[K][l]]);
    s.trace.push_back(std::move(t));
  }
  return s;
}

CellField zero_cell_field(const FeSpace& space) {
  return {space.k, Eigen::VectorXd::Zero(space.n_cell_dofs())};
}
SkeletonField zero_skeleton_field(const FeSpace& space) {
  return {space.k, Eigen::VectorXd::Zero(space.n_face_dofs())};
}
VectorCellField zero_vector_field(const FeSpace& space) {
  return {space.k,
          {Eigen::VectorXd::Zero(space.n_cell_dofs()),
           Eigen::VectorXd::Zero(space.n_cell_dofs())}};
}

double norm_L2_cells(const FeSpace& space, const CellField& u) {
  (void)space;
  return u.coeff.norm();
}

double norm_L2_cells(const FeSpace& space, const VectorCellField& p) {
  (void)space;
  return std::sqrt(p.comp[0].squaredNorm() + p.comp[1].squaredNorm());
}

double seminorm_H1_broken(const FeSpace& space, const CellField& u) {
  double s2 = 0.0;
  for (int K = 0; K < space.mesh->n_cells(); ++K) {
    auto uK = u.coeff.segment(K * space.nd, space.nd);
    // Coefficients of d_c u on cell K are deriv[K][c] * uK.
    s2 += (space.deriv[K][0] * uK).squaredNorm() +
          (space.deriv[K][1] * uK).squaredNorm();
  }
  return std::sqrt(s2);
}

double trace_norm_skeleton(const FeSpace& space, const CellField& u) {
  double s2 = 0.0;
  for (int K = 0; K < space.mesh->n_cells(); ++K) {
    auto uK = u.coeff.segment(K * space.nd, space.nd);
    for (int l = 0; l < 3; ++l) s2 += (space.trace[K][l] * uK).squaredNorm();
  }
  return std::sqrt(s2);
}

double norm_skeleton(const FeSpace& space, const SkeletonField& v,
                     SkeletonCounting counting) {
  if (counting == SkeletonCounting::Once) return v.coeff.norm();
  double s2 = 0.0;
  for (int f = 0; f < space.mesh->n_faces(); ++f) {
    double mult = space.mesh->faces[f].is_boundary() ? 1.0 : 2.0;
    s2 += mult * v.coeff.segment(f * space.nf, space.nf).squaredNorm();
  }
  return std::sqrt(s2);
}

double diff_norm_skeleton(const FeSpace& space, const CellField& u,
                          const SkeletonField& uhat) {
  double s2 = 0.0;
  for (int K = 0; K < space.mesh->n_cells(); ++K) {
    auto uK = u.coeff.segment(K * space.nd, space.nd);
    for (int l = 0; l < 3; ++l) {
      int f = space.mesh->cell_faces[K][l];
      s2 += (space.trace[K][l] * uK -
             uhat.coeff.segment(f * space.nf, space.nf))
                .squaredNorm();
    }
  }
  return std::sqrt(s2);
}

double diff_norm_on_faces(const FeSpace& space, const CellField& u,
                          const SkeletonField& uhat,
                          const std::vector<int>& faces) {
  std::vector<char> in_set(space.mesh->n_faces(), 0);
  for (int f : faces) in_set[f] = 1;
  double s2 = 0.0;
  for (int K = 0; K < space.mesh->n_cells(); ++K) {
    auto uK = u.coeff.segment(K * space.nd, space.nd);
    for (int l = 0; l < 3; ++l) {
      int f = space.mesh->cell_faces[K][l];
      if (!in_set[f]) continue;
      s2 += (space.trace[K][l] * uK -
             uhat.coeff.segment(f * space.nf, space.nf))
                .squaredNorm();
    }
  }
  return std::sqrt(s2);
}

Eigen::Vector2d jump_integral(const FeSpace& space, const CellField& u,
                              int face) {
  const Face& f = space.mesh->faces[face];
  if (f.is_boundary())
    throw std::invalid_argument("jump_integral: boundary face");
  double root_len = std::sqrt(space.mesh->face_geom[face].length);
  Eigen::Vector2d jump = Eigen::Vector2d::Zero();
  for (int K : {f.cell_lo, f.cell_hi}) {
    int l = 0;
    while (space.mesh->cell_faces[K][l] != face) ++l;
    auto uK = u.coeff.segment(K * space.nd, space.nd);
    // int_e trace = sqrt(|e|) * (0th face coefficient of the trace).
    double integral = root_len * (space.trace[K][l] * uK)(0);
    jump += integral * space.mesh->outward_normal(K, l);
  }
  return jump;
}

SkeletonField face_average(const FeSpace& space, const SkeletonField& v) {
  // In the |e|^{-1/2}-scaled face bases the degree-0 coefficient of a face
  // block IS the coefficient of the averaged field.
  int nfaces = space.mesh->n_faces();
  SkeletonField out{0, Eigen::VectorXd(nfaces)};
  for (int f = 0; f < nfaces; ++f) out.coeff[f] = v.coeff[f * space.nf];
  return out;
}

double face_value0(const Mesh& mesh, const SkeletonField& v0, int face) {
  return v0.coeff[face] / std::sqrt(mesh.face_geom[face].length);
}

double integral_domain(const FeSpace& space, const CellField& u) {
  double s = 0.0;
  for (int K = 0; K < space.mesh->n_cells(); ++K)
    s += std::sqrt(space.mesh->cell_geom[K].area) * u.coeff[K * space.nd];
  return s;
}

double integral_boundary_subset(const FeSpace& space, const SkeletonField& v,
                                const std::vector<int>& faces) {
  if (faces.empty())
    throw std::invalid_argument(
        "integral_boundary_subset: empty face set (positive measure required)");
  double s = 0.0;
  for (int f : faces)
    s += std::sqrt(space.mesh->face_geom[f].length) * v.coeff[f * space.nf];
  return s;
}

double integral_boundary_subset(const FeSpace& space, const CellField& u,
                                const std::vector<int>& faces) {
  if (faces.empty())
    throw std::invalid_argument(
        "integral_boundary_subset: empty face set (positive measure required)");
  double s = 0.0;
  for (int f : faces) {
    const Face& face = space.mesh->faces[f];
    if (!face.is_boundary())
      throw std::invalid_argument(
          "integral_boundary_subset: interior face in boundary subset");
    int K = face.cell_lo;
    int l = 0;
    while (space.mesh->cell_faces[K][l] != f) ++l;
    auto uK = u.coeff.segment(K * space.nd, space.nd);
    s += std::sqrt(space.mesh->face_geom[f].length) *
         (space.trace[K][l] * uK)(0);
  }
  return s;
}

CellField project_to_cells(const FeSpace& space, const ScalarFn& f,
                           int quad_degree) {
  QuadratureRule quad = quad_triangle(quad_degree);
  Eigen::MatrixXd V = space.cell_basis.values_at(quad);  // (npts, nd)
  CellField out = zero_cell_field(space);
  int npts = static_cast<int>(quad.points.rows());
  Eigen::VectorXd fx(npts);
  for (int K = 0; K < space.mesh->n_cells(); ++K) {
    const CellGeometry& g = space.mesh->cell_geom[K];
    for (int q = 0; q < npts; ++q)
      fx[q] = quad.weights[q] *
              f(g.to_physical(Eigen::Vector2d(quad.points(q, 0),
                                              quad.points(q, 1))));
    // c_i = int_K f phi_i = sqrt(2|K|) sum_q w_q f(x_q) phihat_i(xhat_q).
    out.coeff.segment(K * space.nd, space.nd) =
        std::sqrt(2.0 * g.area) * (V.transpose() * fx);
  }
  return out;
}

SkeletonField project_to_skeleton(const FeSpace& space, const ScalarFn& g,
                                  int quad_degree) {
  QuadratureRule quad = quad_segment(quad_degree);
  Eigen::MatrixXd V = space.face_basis.values_at(quad);  // (npts, nf)
  SkeletonField out = zero_skeleton_field(space);
  int npts = static_cast<int>(quad.points.rows());
  Eigen::VectorXd gx(npts);
  for (int f = 0; f < space.mesh->n_faces(); ++f) {
    const FaceGeometry& e = space.mesh->face_geom[f];
    for (int q = 0; q < npts; ++q) {
      double t = quad.points(q, 0);
      gx[q] = quad.weights[q] * g(e.a + t * (e.b - e.a));
    }
    out.coeff.segment(f * space.nf, space.nf) =
        std::sqrt(e.length) * (V.transpose() * gx);
  }
  return out;
}

double eval_cell(const FeSpace& space, const CellField& u, int K,
                 const Eigen::Vector2d& xhat) {
  double v = 0.0;
  for (int i = 0; i < space.nd; ++i)
    v += u.coeff[K * space.nd + i] *
         space.cell_basis.eval(i, xhat[0], xhat[1]);
  return v / std::sqrt(2.0 * space.mesh->cell_geom[K].area);
}

Eigen::VectorXd trace_on_face(const FeSpace& space, const CellField& u, int K,
                              int local_face) {
  return space.trace[K][local_face] * u.coeff.segment(K * space.nd, space.nd);
}

namespace {

void write_blocks(std::ostream& out, const std::string& kind, int k,
                  const Eigen::VectorXd& coeff, int block_size) {
  char buf[40];
  int n_blocks = static_cast<int>(coeff.size()) / block_size;
  for (int b = 0; b < n_blocks; ++b) {
    out << kind << "," << k << "," << b;
    for (int c = 0; c < block_size; ++c) {
      std::snprintf(buf, sizeof buf, ",%.17g", coeff[b * block_size + c]);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace

void write_csv(std::ostream& out, const FeSpace& space, const CellField& u,
               const std::string& kind) {
  write_blocks(out, kind, u.k, u.coeff, space.nd);
}

void write_csv(std::ostream& out, const FeSpace& space, const SkeletonField& v,
               const std::string& kind) {
  int block = (v.k == 0) ? 1 : space.nf;
  write_blocks(out, kind, v.k, v.coeff, block);
}

void write_csv(std::ostream& out, const FeSpace& space,
               const VectorCellField& p) {
  write_blocks(out, "cell_x", p.k, p.comp[0], space.nd);
  write_blocks(out, "cell_y", p.k, p.comp[1], space.nd);
}

}  // namespace hfem
