// Coefficient containers for cell, skeleton and vector fields together with
// the norms, seminorms, jumps, averages and integrals used by the inequality
// audits and the solver.
//
// All fields store coefficients in the orthonormal physical bases, so L2
// norms are Euclidean norms of coefficient blocks (Parseval); this is relied
// on everywhere and cross-checked against quadrature in the tests.

#ifndef HFEM_FIELDS_HPP
#define HFEM_FIELDS_HPP

#include <functional>
#include <iosfwd>
#include <string>

#include "hfem/mesh.hpp"

namespace hfem {

// Precomputed bases and local kernels for one (mesh, degree) pair: derivative
// pairings per cell and trace pairings per cell face.  Everything downstream
// (norms, lifts, quadratic forms, the solver) works off these matrices.
struct FeSpace {
  const Mesh* mesh = nullptr;
  int k = 0;
  ReferenceBasis cell_basis;
  ReferenceBasis face_basis;
  int nd = 0;  // coefficients per cell block
  int nf = 0;  // coefficients per face block

  // deriv[K][c](i,j) = int_K phi_i d_c phi_j.
  std::vector<std::array<Eigen::MatrixXd, 2>> deriv;
  // trace[K][l](m,i) = int_e psi_m phi_i over local face l of cell K.
  std::vector<std::array<Eigen::MatrixXd, 3>> trace;

  int n_cell_dofs() const { return mesh->n_cells() * nd; }
  int n_face_dofs() const { return mesh->n_faces() * nf; }
};

FeSpace make_space(const Mesh& mesh, int k);

// Piecewise polynomial of degree <= k on cells; coeff is cell-major with
// blocks of size nd.
struct CellField {
  int k = 0;
  Eigen::VectorXd coeff;
};

// Single-valued piecewise polynomial on the mesh skeleton; face-major blocks
// of size nf.
struct SkeletonField {
  int k = 0;
  Eigen::VectorXd coeff;
};

// Vector-valued cell field, one CellField-shaped block per component.
struct VectorCellField {
  int k = 0;
  std::array<Eigen::VectorXd, 2> comp;
};

CellField zero_cell_field(const FeSpace& space);
SkeletonField zero_skeleton_field(const FeSpace& space);
VectorCellField zero_vector_field(const FeSpace& space);

inline Eigen::VectorBlock<Eigen::VectorXd> cell_block(const FeSpace& space,
                                                      CellField& u, int K) {
  return u.coeff.segment(K * space.nd, space.nd);
}
inline Eigen::VectorXd cell_block(const FeSpace& space, const CellField& u,
                                  int K) {
  return u.coeff.segment(K * space.nd, space.nd);
}
inline Eigen::VectorBlock<Eigen::VectorXd> face_block(const FeSpace& space,
                                                      SkeletonField& v,
                                                      int f) {
  return v.coeff.segment(f * space.nf, space.nf);
}
inline Eigen::VectorXd face_block(const FeSpace& space, const SkeletonField& v,
                                  int f) {
  return v.coeff.segment(f * space.nf, space.nf);
}

//------------------------------------------------------------------------------
// Norms, integrals, jumps
//------------------------------------------------------------------------------

// sqrt(sum_K ||u||^2_{L2(K)}).
double norm_L2_cells(const FeSpace& space, const CellField& u);
double norm_L2_cells(const FeSpace& space, const VectorCellField& p);

// Broken H1 seminorm sqrt(sum_K ||grad u||^2_{L2(K)}).
double seminorm_H1_broken(const FeSpace& space, const CellField& u);

// Trace norm over the skeleton where interior faces collect the traces from
// both sides (the per-cell-boundary counting sum_K ||u||^2_{L2(dK)}).
double trace_norm_skeleton(const FeSpace& space, const CellField& u);

enum class SkeletonCounting { Once, Hdg };  // Hdg doubles interior faces

double norm_skeleton(const FeSpace& space, const SkeletonField& v,
                     SkeletonCounting counting);

// ||u - uhat|| over cell boundaries with hdg counting: every (cell, face)
// incidence contributes ||trace_K(u) - uhat||^2_{L2(e)}.
double diff_norm_skeleton(const FeSpace& space, const CellField& u,
                          const SkeletonField& uhat);

// Same counting restricted to the (cell, face) incidences of the given faces.
double diff_norm_on_faces(const FeSpace& space, const CellField& u,
                          const SkeletonField& uhat,
                          const std::vector<int>& faces);

// int_e (u+ n+ + u- n-) ds on an interior face.
Eigen::Vector2d jump_integral(const FeSpace& space, const CellField& u,
                              int face);

// Per-face averages (1/|e|) int_e v ds, returned as a degree-0 skeleton field.
SkeletonField face_average(const FeSpace& space, const SkeletonField& v);

// Value of a degree-0 skeleton field on a face.
double face_value0(const Mesh& mesh, const SkeletonField& v0, int face);

// int_Omega u.
double integral_domain(const FeSpace& space, const CellField& u);

// int over a nonempty set of boundary faces, of a skeleton field or of the
// trace of a cell field; throws std::invalid_argument on an empty set.
double integral_boundary_subset(const FeSpace& space, const SkeletonField& v,
                                const std::vector<int>& faces);
double integral_boundary_subset(const FeSpace& space, const CellField& u,
                                const std::vector<int>& faces);

//------------------------------------------------------------------------------
// Projection and evaluation
//------------------------------------------------------------------------------

using ScalarFn = std::function<double(const Eigen::Vector2d&)>;

// L2 projections using quadrature of the given exactness degree.
CellField project_to_cells(const FeSpace& space, const ScalarFn& f,
                           int quad_degree);
SkeletonField project_to_skeleton(const FeSpace& space, const ScalarFn& g,
                                  int quad_degree);

// Point evaluation from reference coordinates within cell K.
double eval_cell(const FeSpace& space, const CellField& u, int K,
                 const Eigen::Vector2d& xhat);

// Traces of u on the faces of cell K as face-basis coefficient blocks
// (exact: cell polynomials restrict to face polynomials of the same degree).
Eigen::VectorXd trace_on_face(const FeSpace& space, const CellField& u, int K,
                              int local_face);

//------------------------------------------------------------------------------
// Debug serialization: rows "kind,k,block_id,c0,c1,..."
//------------------------------------------------------------------------------

void write_csv(std::ostream& out, const FeSpace& space, const CellField& u,
               const std::string& kind = "cell");
void write_csv(std::ostream& out, const FeSpace& space, const SkeletonField& v,
               const std::string& kind = "skeleton");
void write_csv(std::ostream& out, const FeSpace& space,
               const VectorCellField& p);

}  // namespace hfem

#endif  // HFEM_FIELDS_HPP
