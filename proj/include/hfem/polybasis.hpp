// Quadrature rules, orthonormal polynomial bases on reference elements, and the
// local finite-element kernels built from them.
//
// Conventions used throughout the library:
//  * The reference triangle is {(x,y) : x >= 0, y >= 0, x + y <= 1}; the
//    reference segment is [0,1].
//  * Physical cell bases are L2-orthonormal: phi_i^K = (2|K|)^{-1/2} phihat_i o F_K^{-1},
//    so every cell mass matrix is the identity and coefficient vectors carry
//    L2 norms directly (Parseval).  Face bases are |e|^{-1/2}-scaled likewise.
//  * Faces are parametrized by arc length from their canonical first vertex;
//    all cells sharing a face therefore see the same face basis (single-valued
//    skeleton functions come for free).

#ifndef HFEM_POLYBASIS_HPP
#define HFEM_POLYBASIS_HPP

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace hfem {

enum class RefElement { Triangle, Segment };

// Number of bivariate polynomials of total degree <= k.
constexpr int triangle_space_dim(int k) { return (k + 1) * (k + 2) / 2; }

// Exact value of int_T x^a y^b over the reference triangle: a! b! / (a+b+2)!.
double monomial_integral_triangle(int a, int b);

//------------------------------------------------------------------------------
// Quadrature
//------------------------------------------------------------------------------

struct QuadratureRule {
  // points(q,0), points(q,1) are coordinates (column 1 unused for segments);
  // weights sum to the reference measure (1/2 for the triangle, 1 for [0,1]).
  Eigen::Matrix<double, Eigen::Dynamic, 2> points;
  Eigen::VectorXd weights;
  int exactness = 0;
};

// Gauss-Legendre rule on [0,1], exact for polynomials of degree <= degree.
// Throws std::invalid_argument for negative or unsupported degrees.
QuadratureRule quad_segment(int degree);

// Collapsed (Duffy) Gauss rule on the reference triangle, exact for total
// degree <= degree.  Supported at least through degree 20; throws
// std::invalid_argument beyond the supported range.
QuadratureRule quad_triangle(int degree);

//------------------------------------------------------------------------------
// Orthonormal bases on reference elements
//------------------------------------------------------------------------------

struct ReferenceBasis {
  RefElement element = RefElement::Triangle;
  int degree = 0;   // polynomial degree k
  int dim = 0;      // number of basis functions

  // coeff(i,m) is the coefficient of monomial m in basis function i.
  // Triangle monomials are graded lexicographic:
  //   (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
  // Segment monomials are 1, t, t^2, ...
  Eigen::MatrixXd coeff;
  // Exponents of monomial m (second entry is 0 for segments).
  std::vector<std::array<int, 2>> exponents;

  double eval(int i, double x, double y = 0.0) const;
  // Gradient of basis function i (triangle bases only; y-entry is 0 for
  // segments).
  Eigen::Vector2d grad(int i, double x, double y = 0.0) const;

  // values(q,i) = value of basis function i at quadrature point q.
  Eigen::MatrixXd values_at(const QuadratureRule& quad) const;
  // Component c of the gradients: derivs(q,i) = d_c(basis i) at point q.
  Eigen::MatrixXd derivs_at(const QuadratureRule& quad, int c) const;

  // Dhat_c(i,j) = int_ref phihat_i d_c phihat_j (exact).
  Eigen::MatrixXd deriv_coupling(int c) const;
};

// L2-orthonormal basis of degree <= k, built by modified Gram-Schmidt (applied
// twice) on the monomials, with inner products taken from the exact monomial
// Gram matrix.  Orthonormality holds to 1e-12 in the max norm; this is checked
// and enforced at construction.
ReferenceBasis build_orthonormal_basis(int k, RefElement element);

//------------------------------------------------------------------------------
// Physical element geometry
//------------------------------------------------------------------------------

struct CellGeometry {
  // Vertex coordinates as rows, counterclockwise.
  Eigen::Matrix<double, 3, 2> vertices;
  // Affine map F(xhat) = v0 + J xhat with J = [v1-v0 | v2-v0].
  Eigen::Matrix2d jac;
  Eigen::Matrix2d jac_inv;
  double area = 0.0;
  double diam = 0.0;

  static CellGeometry from_vertices(const Eigen::Matrix<double, 3, 2>& v);
  Eigen::Vector2d to_reference(const Eigen::Vector2d& x) const;
  Eigen::Vector2d to_physical(const Eigen::Vector2d& xhat) const;
};

struct FaceGeometry {
  // Endpoints in canonical order; the face parametrization is
  // x(t) = a + t (b - a), t in [0,1].
  Eigen::Vector2d a;
  Eigen::Vector2d b;
  double length = 0.0;
  // Unit normal fixing the canonical side of the face (mesh chooses it to
  // point from the lower- to the higher-indexed cell, outward on the
  // boundary).
  Eigen::Vector2d normal;

  static FaceGeometry from_endpoints(const Eigen::Vector2d& a,
                                     const Eigen::Vector2d& b);
};

//------------------------------------------------------------------------------
// Local kernels in the orthonormal physical bases
//------------------------------------------------------------------------------

// Mass matrix of the orthonormal cell basis; identity by construction, exposed
// for validation.
Eigen::MatrixXd cell_mass(const ReferenceBasis& basis, const CellGeometry& K);

// Mass matrix of the orthonormal face basis; identity by construction.
Eigen::MatrixXd face_mass(const ReferenceBasis& basis, const FaceGeometry& e);

// Derivative pairing D_c(i,j) = int_K phi_i d_c phi_j for c in {0,1}.
// Columns of D_c expand derivatives: d_c phi_j = sum_i D_c(i,j) phi_i.
std::array<Eigen::MatrixXd, 2> cell_div_coupling(const ReferenceBasis& basis,
                                                 const CellGeometry& K);

// Stiffness matrix int_K grad phi_i . grad phi_j = sum_c D_c^T D_c.
Eigen::MatrixXd cell_gradgrad(const ReferenceBasis& basis,
                              const CellGeometry& K);

// Trace pairing T(m,i) = int_e psi_m phi_i ds between the face basis psi and
// the cell basis phi, with the face parametrized canonically (independent of
// the cell).  Rows of T expand the L2(e)-projection of a cell function.
Eigen::MatrixXd cell_trace_on_face(const ReferenceBasis& cell_basis,
                                   const ReferenceBasis& face_basis,
                                   const CellGeometry& K,
                                   const FaceGeometry& e);

// Normal-weighted coupling N_c(i,m) = int_e phi_i psi_m n_c ds where n is the
// outward unit normal of K on e (passed explicitly since the canonical face
// normal may point either way relative to K).
std::array<Eigen::MatrixXd, 2> face_normal_coupling(
    const ReferenceBasis& cell_basis, const ReferenceBasis& face_basis,
    const CellGeometry& K, const FaceGeometry& e,
    const Eigen::Vector2d& outward_normal);

}  // namespace hfem

#endif  // HFEM_POLYBASIS_HPP
