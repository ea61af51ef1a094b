// Implementation of quadrature rules, orthonormal reference bases and local
// kernels.  Gauss-Legendre nodes are computed by Newton iteration on the
// Legendre recurrence; the triangle rule is the collapsed (Duffy) product
// rule.  Bases are orthonormalized by modified Gram-Schmidt applied twice
// against the exact monomial Gram matrix.

#include "hfem/polybasis.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hfem {

namespace {

constexpr int kMaxSegmentDegree = 60;
constexpr int kMaxTriangleDegree = 60;

// Legendre polynomial P_n and derivative at x (on [-1,1]) via the three-term
// recurrence.
std::pair<double, double> legendre_with_deriv(int n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int j = 2; j <= n; ++j) {
    double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
    p0 = p1;
    p1 = p2;
  }
  double dp = n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

// n-point Gauss-Legendre rule on [-1,1].
void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev-based initial guess for root i (descending order).
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      auto [p, dp] = legendre_with_deriv(n, x);
      double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    auto [p, dp] = legendre_with_deriv(n, x);
    (void)p;
    nodes[i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

// Monomial list of total degree <= k on the triangle, graded lexicographic.
std::vector<std::array<int, 2>> triangle_monomials(int k) {
  std::vector<std::array<int, 2>> out;
  for (int d = 0; d <= k; ++d)
    for (int b = 0; b <= d; ++b) out.push_back({d - b, b});
  return out;
}

std::vector<std::array<int, 2>> segment_monomials(int k) {
  std::vector<std::array<int, 2>> out;
  for (int a = 0; a <= k; ++a) out.push_back({a, 0});
  return out;
}

// Exact triangle monomial integral in extended precision, used while
// orthonormalizing (the monomial Gram matrix is badly conditioned already at
// moderate degrees).
long double monomial_integral_triangle_ld(int a, int b) {
  long double value = 1.0L;
  for (int j = 1; j <= b; ++j) value *= static_cast<long double>(j) / (a + j);
  value /= static_cast<long double>(a + b + 1) * (a + b + 2);
  return value;
}

using MatrixXld =
    Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Exact Gram matrix of the monomial list on the reference element.
MatrixXld monomial_gram(const std::vector<std::array<int, 2>>& mono,
                        RefElement element) {
  int n = static_cast<int>(mono.size());
  MatrixXld G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      int a = mono[i][0] + mono[j][0];
      int b = mono[i][1] + mono[j][1];
      G(i, j) = (element == RefElement::Triangle)
                    ? monomial_integral_triangle_ld(a, b)
                    : 1.0L / (a + 1);
    }
  return G;
}

}  // namespace

double monomial_integral_triangle(int a, int b) {
  // a! b! / (a+b+2)! evaluated as a product of ratios to stay in range.
  if (a < 0 || b < 0) throw std::invalid_argument("negative monomial exponent");
  double value = 1.0;
  // 1 / ((a+1)(a+2)...(a+b+2)) * b!  ==  prod_{j=1..b} j/(a+j) * 1/((a+b+1)(a+b+2))
  for (int j = 1; j <= b; ++j) value *= static_cast<double>(j) / (a + j);
  value /= static_cast<double>(a + b + 1) * static_cast<double>(a + b + 2);
  return value;
}

QuadratureRule quad_segment(int degree) {
  if (degree < 0 || degree > kMaxSegmentDegree) {
    std::ostringstream msg;
    msg << "quad_segment: unsupported degree " << degree << " (supported: 0.."
        << kMaxSegmentDegree << ")";
    throw std::invalid_argument(msg.str());
  }
  int n = (degree + 2) / 2;  // ceil((degree+1)/2)
  Eigen::VectorXd x, w;
  gauss_legendre(n, x, w);
  QuadratureRule rule;
  rule.points.resize(n, 2);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.points(i, 0) = 0.5 * (x[i] + 1.0);  // map [-1,1] -> [0,1]
    rule.points(i, 1) = 0.0;
    rule.weights[i] = 0.5 * w[i];
  }
  rule.exactness = degree;
  return rule;
}

QuadratureRule quad_triangle(int degree) {
  if (degree < 0 || degree > kMaxTriangleDegree) {
    std::ostringstream msg;
    msg << "quad_triangle: unsupported degree " << degree << " (supported: 0.."
        << kMaxTriangleDegree << ")";
    throw std::invalid_argument(msg.str());
  }
  // Duffy substitution x = xi, y = eta (1 - xi) maps the unit square to the
  // triangle with Jacobian (1 - xi).  A monomial x^a y^b becomes
  // xi^a (1-xi)^{b+1} eta^b, so exactness requires the xi-rule to handle
  // degree+1 and the eta-rule degree.
  int n_xi = (degree + 3) / 2;   // ceil((degree+2)/2)
  int n_eta = (degree + 2) / 2;  // ceil((degree+1)/2)
  Eigen::VectorXd x_xi, w_xi, x_eta, w_eta;
  gauss_legendre(n_xi, x_xi, w_xi);
  gauss_legendre(n_eta, x_eta, w_eta);
  QuadratureRule rule;
  int npts = n_xi * n_eta;
  rule.points.resize(npts, 2);
  rule.weights.resize(npts);
  int q = 0;
  for (int i = 0; i < n_xi; ++i) {
    double xi = 0.5 * (x_xi[i] + 1.0);
    double wxi = 0.5 * w_xi[i];
    for (int j = 0; j < n_eta; ++j, ++q) {
      double eta = 0.5 * (x_eta[j] + 1.0);
      double weta = 0.5 * w_eta[j];
      rule.points(q, 0) = xi;
      rule.points(q, 1) = eta * (1.0 - xi);
      rule.weights[q] = wxi * weta * (1.0 - xi);
    }
  }
  rule.exactness = degree;
  return rule;
}

double ReferenceBasis::eval(int i, double x, double y) const {
  double v = 0.0;
  for (int m = 0; m < coeff.cols(); ++m) {
    double c = coeff(i, m);
    if (c == 0.0) continue;
    v += c * std::pow(x, exponents[m][0]) * std::pow(y, exponents[m][1]);
  }
  return v;
}

Eigen::Vector2d ReferenceBasis::grad(int i, double x, double y) const {
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (int m = 0; m < coeff.cols(); ++m) {
    double c = coeff(i, m);
    if (c == 0.0) continue;
    int a = exponents[m][0], b = exponents[m][1];
    if (a > 0) g[0] += c * a * std::pow(x, a - 1) * std::pow(y, b);
    if (b > 0) g[1] += c * b * std::pow(x, a) * std::pow(y, b - 1);
  }
  return g;
}

Eigen::MatrixXd ReferenceBasis::values_at(const QuadratureRule& quad) const {
  int npts = static_cast<int>(quad.points.rows());
  Eigen::MatrixXd V(npts, dim);
  for (int q = 0; q < npts; ++q)
    for (int i = 0; i < dim; ++i)
      V(q, i) = eval(i, quad.points(q, 0), quad.points(q, 1));
  return V;
}

Eigen::MatrixXd ReferenceBasis::derivs_at(const QuadratureRule& quad,
                                          int c) const {
  int npts = static_cast<int>(quad.points.rows());
  Eigen::MatrixXd G(npts, dim);
  for (int q = 0; q < npts; ++q)
    for (int i = 0; i < dim; ++i)
      G(q, i) = grad(i, quad.points(q, 0), quad.points(q, 1))[c];
  return G;
}

Eigen::MatrixXd ReferenceBasis::deriv_coupling(int c) const {
  QuadratureRule quad = (element == RefElement::Triangle)
                            ? quad_triangle(2 * degree)
                            : quad_segment(2 * degree);
  Eigen::MatrixXd V = values_at(quad);
  Eigen::MatrixXd G = derivs_at(quad, c);
  return V.transpose() * quad.weights.asDiagonal() * G;
}

ReferenceBasis build_orthonormal_basis(int k, RefElement element) {
  if (k < 0 || k > 20)
    throw std::invalid_argument("build_orthonormal_basis: degree out of range");
  ReferenceBasis basis;
  basis.element = element;
  basis.degree = k;
  basis.exponents = (element == RefElement::Triangle) ? triangle_monomials(k)
                                                      : segment_monomials(k);
  int n = static_cast<int>(basis.exponents.size());
  basis.dim = n;
  MatrixXld G = monomial_gram(basis.exponents, element);

  // Modified Gram-Schmidt in coefficient space, applied twice; inner products
  // come from the exact Gram matrix, so <f,g> = f^T G g.  The whole sweep runs
  // in extended precision because the monomial Gram matrix is severely
  // ill-conditioned even at moderate degrees.
  MatrixXld C = MatrixXld::Identity(n, n);
  for (int pass = 0; pass < 2; ++pass) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < i; ++j) {
        long double r = C.row(i) * G * C.row(j).transpose();
        C.row(i) -= r * C.row(j);
      }
      long double norm = std::sqrt(
          static_cast<long double>(C.row(i) * G * C.row(i).transpose()));
      if (!(norm > 0.0L))
        throw std::runtime_error("build_orthonormal_basis: degenerate Gram");
      C.row(i) /= norm;
    }
  }
  basis.coeff = C.cast<double>();

  // Mandatory invariant: Gram of the result is the identity to 1e-12
  // (evaluated in extended precision so the check measures the basis, not the
  // verification arithmetic).
  MatrixXld gram = C * G * C.transpose();
  long double err =
      (gram - MatrixXld::Identity(n, n)).cwiseAbs().maxCoeff();
  if (err > 1e-12L)
    throw std::runtime_error(
        "build_orthonormal_basis: orthonormality tolerance exceeded");
  return basis;
}

CellGeometry CellGeometry::from_vertices(const Eigen::Matrix<double, 3, 2>& v) {
  CellGeometry K;
  K.vertices = v;
  K.jac.col(0) = (v.row(1) - v.row(0)).transpose();
  K.jac.col(1) = (v.row(2) - v.row(0)).transpose();
  double det = K.jac.determinant();
  if (!(det > 0.0))
    throw std::invalid_argument(
        "CellGeometry: vertices must be counterclockwise and non-degenerate");
  K.area = 0.5 * det;
  K.jac_inv = K.jac.inverse();
  double d01 = (v.row(1) - v.row(0)).norm();
  double d12 = (v.row(2) - v.row(1)).norm();
  double d20 = (v.row(0) - v.row(2)).norm();
  K.diam = std::max({d01, d12, d20});
  return K;
}

Eigen::Vector2d CellGeometry::to_reference(const Eigen::Vector2d& x) const {
  return jac_inv * (x - vertices.row(0).transpose());
}

Eigen::Vector2d CellGeometry::to_physical(const Eigen::Vector2d& xhat) const {
  return vertices.row(0).transpose() + jac * xhat;
}

FaceGeometry FaceGeometry::from_endpoints(const Eigen::Vector2d& a,
                                          const Eigen::Vector2d& b) {
  FaceGeometry e;
  e.a = a;
  e.b = b;
  e.length = (b - a).norm();
  if (!(e.length > 0.0))
    throw std::invalid_argument("FaceGeometry: degenerate face");
  Eigen::Vector2d t = (b - a) / e.length;
  e.normal = Eigen::Vector2d(t[1], -t[0]);  // right-hand normal of a -> b
  return e;
}

Eigen::MatrixXd cell_mass(const ReferenceBasis& basis, const CellGeometry& K) {
  // phi_i^K = (2|K|)^{-1/2} phihat_i o F^{-1}: the area factor of the affine
  // change of variables cancels the scaling exactly, so the physical mass
  // matrix equals the reference Gram matrix (identity).  Recomputed by
  // quadrature so callers can validate the construction.
  (void)K;
  QuadratureRule quad = quad_triangle(2 * basis.degree);
  Eigen::MatrixXd V = basis.values_at(quad);
  return V.transpose() * quad.weights.asDiagonal() * V;
}

Eigen::MatrixXd face_mass(const ReferenceBasis& basis, const FaceGeometry& e) {
  (void)e;
  QuadratureRule quad = quad_segment(2 * basis.degree);
  Eigen::MatrixXd V = basis.values_at(quad);
  return V.transpose() * quad.weights.asDiagonal() * V;
}

std::array<Eigen::MatrixXd, 2> cell_div_coupling(const ReferenceBasis& basis,
                                                 const CellGeometry& K) {
  // With orthonormal scaling the area factors cancel:
  //   D_c = sum_d jac_inv(d,c) Dhat_d.
  std::array<Eigen::MatrixXd, 2> Dhat = {basis.deriv_coupling(0),
                                         basis.deriv_coupling(1)};
  std::array<Eigen::MatrixXd, 2> D;
  for (int c = 0; c < 2; ++c)
    D[c] = K.jac_inv(0, c) * Dhat[0] + K.jac_inv(1, c) * Dhat[1];
  return D;
}

Eigen::MatrixXd cell_gradgrad(const ReferenceBasis& basis,
                              const CellGeometry& K) {
  auto D = cell_div_coupling(basis, K);
  return D[0].transpose() * D[0] + D[1].transpose() * D[1];
}

Eigen::MatrixXd cell_trace_on_face(const ReferenceBasis& cell_basis,
                                   const ReferenceBasis& face_basis,
                                   const CellGeometry& K,
                                   const FaceGeometry& e) {
  // T(m,i) = int_e psi_m phi_i ds
  //        = sqrt(|e| / (2|K|)) * sum_q w_q psihat_m(t_q) phihat_i(xhat(t_q))
  // where xhat(t) follows the canonical face parametrization pulled back to
  // the reference cell (affine, hence exact).
  int deg = cell_basis.degree + face_basis.degree;
  QuadratureRule quad = quad_segment(deg);
  Eigen::Vector2d ahat = K.to_reference(e.a);
  Eigen::Vector2d bhat = K.to_reference(e.b);
  Eigen::MatrixXd T(face_basis.dim, cell_basis.dim);
  T.setZero();
  double scale = std::sqrt(e.length / (2.0 * K.area));
  for (int q = 0; q < quad.points.rows(); ++q) {
    double t = quad.points(q, 0);
    Eigen::Vector2d xhat = ahat + t * (bhat - ahat);
    for (int m = 0; m < face_basis.dim; ++m) {
      double psi = face_basis.eval(m, t);
      for (int i = 0; i < cell_basis.dim; ++i)
        T(m, i) += quad.weights[q] * psi * cell_basis.eval(i, xhat[0], xhat[1]);
    }
  }
  return scale * T;
}

std::array<Eigen::MatrixXd, 2> face_normal_coupling(
    const ReferenceBasis& cell_basis, const ReferenceBasis& face_basis,
    const CellGeometry& K, const FaceGeometry& e,
    const Eigen::Vector2d& outward_normal) {
  Eigen::MatrixXd T = cell_trace_on_face(cell_basis, face_basis, K, e);
  return {outward_normal[0] * T.transpose(), outward_normal[1] * T.transpose()};
}

}  // namespace hfem
