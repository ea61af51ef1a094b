// Oracle tests for quadrature, orthonormal bases and local kernels.  The
// oracles are independent closed forms: exact factorial-ratio monomial
// integrals (exact __int128 arithmetic), shifted Legendre values on the
// segment, and brute-force quadrature on mapped physical elements.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "hfem/polybasis.hpp"

using namespace hfem;

namespace {

// Exact oracle for int_T x^a y^b = a! b! / (a+b+2)! using 128-bit integers
// (exact through a+b+2 = 33).
double factorial_ratio_oracle(int a, int b) {
  __int128 num = 1, den = 1;
  for (int j = 2; j <= a; ++j) num *= j;
  for (int j = 2; j <= b; ++j) num *= j;
  for (int j = 2; j <= a + b + 2; ++j) den *= j;
  return static_cast<double>(static_cast<long double>(num) /
                             static_cast<long double>(den));
}

double quad_monomial(const QuadratureRule& rule, int a, int b) {
  double s = 0.0;
  for (int q = 0; q < rule.points.rows(); ++q)
    s += rule.weights[q] * std::pow(rule.points(q, 0), a) *
         std::pow(rule.points(q, 1), b);
  return s;
}

// Shifted Legendre polynomial sqrt(2m+1) P_m(2t-1), the orthonormal basis of
// L2(0,1) in increasing degree.
double shifted_legendre(int m, double t) {
  double x = 2.0 * t - 1.0;
  double p0 = 1.0, p1 = x;
  if (m == 0) return 1.0;
  for (int j = 2; j <= m; ++j) {
    double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
    p0 = p1;
    p1 = p2;
  }
  return std::sqrt(2.0 * m + 1.0) * p1;
}

Eigen::Matrix<double, 3, 2> random_triangle(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (;;) {
    Eigen::Matrix<double, 3, 2> v;
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < 2; ++c) v(i, c) = unif(rng);
    double det = (v(1, 0) - v(0, 0)) * (v(2, 1) - v(0, 1)) -
                 (v(1, 1) - v(0, 1)) * (v(2, 0) - v(0, 0));
    if (det > 0.3) return v;  // counterclockwise, well-shaped
  }
}

// Physical value of cell basis function i at physical point x.
double phys_eval(const ReferenceBasis& basis, const CellGeometry& K, int i,
                 const Eigen::Vector2d& x) {
  Eigen::Vector2d xhat = K.to_reference(x);
  return basis.eval(i, xhat[0], xhat[1]) / std::sqrt(2.0 * K.area);
}

Eigen::Vector2d phys_grad(const ReferenceBasis& basis, const CellGeometry& K,
                          int i, const Eigen::Vector2d& x) {
  Eigen::Vector2d xhat = K.to_reference(x);
  Eigen::Vector2d ghat = basis.grad(i, xhat[0], xhat[1]);
  return K.jac_inv.transpose() * ghat / std::sqrt(2.0 * K.area);
}

}  // namespace

TEST_CASE("triangle quadrature matches exact monomial integrals") {
  for (int deg = 0; deg <= 20; ++deg) {
    QuadratureRule rule = quad_triangle(deg);
    CHECK(rule.weights.sum() == doctest::Approx(0.5).epsilon(1e-14));
    for (int a = 0; a + 0 <= deg; ++a)
      for (int b = 0; a + b <= deg; ++b) {
        double err = std::abs(quad_monomial(rule, a, b) -
                              factorial_ratio_oracle(a, b));
        CHECK(err <= 1e-13);
      }
  }
}

TEST_CASE("segment quadrature matches 1/(a+1)") {
  for (int deg = 0; deg <= 20; ++deg) {
    QuadratureRule rule = quad_segment(deg);
    CHECK(rule.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(rule.points.rows() == (deg + 2) / 2);
    for (int a = 0; a <= deg; ++a) {
      double s = 0.0;
      for (int q = 0; q < rule.points.rows(); ++q)
        s += rule.weights[q] * std::pow(rule.points(q, 0), a);
      CHECK(std::abs(s - 1.0 / (a + 1)) <= 1e-14);
    }
  }
}

TEST_CASE("unsupported quadrature degrees are rejected") {
  CHECK_THROWS_AS(quad_triangle(-1), std::invalid_argument);
  CHECK_THROWS_AS(quad_triangle(1000), std::invalid_argument);
  CHECK_THROWS_AS(quad_segment(-2), std::invalid_argument);
  CHECK_THROWS_AS(quad_segment(1000), std::invalid_argument);
}

TEST_CASE("reference bases are orthonormal to 1e-12") {
  for (int k = 0; k <= 4; ++k) {
    for (RefElement el : {RefElement::Triangle, RefElement::Segment}) {
      ReferenceBasis basis = build_orthonormal_basis(k, el);
      int expected =
          (el == RefElement::Triangle) ? triangle_space_dim(k) : k + 1;
      CHECK(basis.dim == expected);
      // Gram via a quadrature of higher exactness than the construction used.
      QuadratureRule quad = (el == RefElement::Triangle)
                                ? quad_triangle(2 * k + 3)
                                : quad_segment(2 * k + 3);
      Eigen::MatrixXd V = basis.values_at(quad);
      Eigen::MatrixXd gram = V.transpose() * quad.weights.asDiagonal() * V;
      double err =
          (gram - Eigen::MatrixXd::Identity(basis.dim, basis.dim))
              .cwiseAbs()
              .maxCoeff();
      CHECK(err <= 1e-12);
    }
  }
}

TEST_CASE("constant basis functions have the exact normalizing value") {
  ReferenceBasis tri = build_orthonormal_basis(0, RefElement::Triangle);
  CHECK(std::abs(std::abs(tri.eval(0, 0.2, 0.3)) - std::sqrt(2.0)) <= 1e-14);
  ReferenceBasis seg = build_orthonormal_basis(0, RefElement::Segment);
  CHECK(std::abs(std::abs(seg.eval(0, 0.7)) - 1.0) <= 1e-14);
}

TEST_CASE("segment basis equals shifted Legendre polynomials up to sign") {
  ReferenceBasis basis = build_orthonormal_basis(4, RefElement::Segment);
  for (int m = 0; m <= 4; ++m) {
    // Fix the sign by comparing at t = 1 where P_m(1) = 1 > 0.
    double sign = (basis.eval(m, 1.0) > 0) ? 1.0 : -1.0;
    for (double t : {0.0, 0.15, 0.4, 0.62, 0.9, 1.0}) {
      CHECK(std::abs(sign * basis.eval(m, t) - shifted_legendre(m, t)) <=
            1e-12);
    }
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  ReferenceBasis basis = build_orthonormal_basis(3, RefElement::Triangle);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.05, 0.4);
  double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    double x = unif(rng), y = unif(rng);
    for (int i = 0; i < basis.dim; ++i) {
      Eigen::Vector2d g = basis.grad(i, x, y);
      double fdx = (basis.eval(i, x + h, y) - basis.eval(i, x - h, y)) / (2 * h);
      double fdy = (basis.eval(i, x, y + h) - basis.eval(i, x, y - h)) / (2 * h);
      CHECK(std::abs(g[0] - fdx) <= 1e-6 * (1.0 + std::abs(g[0])));
      CHECK(std::abs(g[1] - fdy) <= 1e-6 * (1.0 + std::abs(g[1])));
    }
  }
}

TEST_CASE("physical mass matrices are the identity") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    CellGeometry K = CellGeometry::from_vertices(random_triangle(rng));
    for (int k = 0; k <= 3; ++k) {
      ReferenceBasis basis = build_orthonormal_basis(k, RefElement::Triangle);
      Eigen::MatrixXd M = cell_mass(basis, K);
      CHECK((M - Eigen::MatrixXd::Identity(basis.dim, basis.dim))
                .cwiseAbs()
                .maxCoeff() <= 1e-12);
    }
  }
  FaceGeometry e = FaceGeometry::from_endpoints(Eigen::Vector2d(0.3, -0.2),
                                                Eigen::Vector2d(1.1, 0.7));
  for (int k = 0; k <= 3; ++k) {
    ReferenceBasis basis = build_orthonormal_basis(k, RefElement::Segment);
    Eigen::MatrixXd M = face_mass(basis, e);
    CHECK((M - Eigen::MatrixXd::Identity(basis.dim, basis.dim))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
  }
}

TEST_CASE("derivative pairing matches brute-force physical quadrature") {
  std::mt19937_64 rng(13);
  CellGeometry K = CellGeometry::from_vertices(random_triangle(rng));
  for (int k = 1; k <= 3; ++k) {
    ReferenceBasis basis = build_orthonormal_basis(k, RefElement::Triangle);
    auto D = cell_div_coupling(basis, K);
    QuadratureRule quad = quad_triangle(2 * k);
    for (int c = 0; c < 2; ++c) {
      Eigen::MatrixXd brute(basis.dim, basis.dim);
      for (int i = 0; i < basis.dim; ++i)
        for (int j = 0; j < basis.dim; ++j) {
          double s = 0.0;
          for (int q = 0; q < quad.points.rows(); ++q) {
            Eigen::Vector2d xhat(quad.points(q, 0), quad.points(q, 1));
            Eigen::Vector2d x = K.to_physical(xhat);
            s += 2.0 * K.area * quad.weights[q] * phys_eval(basis, K, i, x) *
                 phys_grad(basis, K, j, x)[c];
          }
          brute(i, j) = s;
        }
      CHECK((D[c] - brute).cwiseAbs().maxCoeff() <= 1e-11);
    }
    // Stiffness follows from the same pairing.
    Eigen::MatrixXd S = cell_gradgrad(basis, K);
    Eigen::MatrixXd S_ref =
        D[0].transpose() * D[0] + D[1].transpose() * D[1];
    CHECK((S - S_ref).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("trace pairing matches brute-force face quadrature") {
  std::mt19937_64 rng(17);
  CellGeometry K = CellGeometry::from_vertices(random_triangle(rng));
  int k = 2;
  ReferenceBasis cellb = build_orthonormal_basis(k, RefElement::Triangle);
  ReferenceBasis faceb = build_orthonormal_basis(k, RefElement::Segment);
  for (int le = 0; le < 3; ++le) {
    Eigen::Vector2d a = K.vertices.row(le).transpose();
    Eigen::Vector2d b = K.vertices.row((le + 1) % 3).transpose();
    FaceGeometry e = FaceGeometry::from_endpoints(a, b);
    Eigen::MatrixXd T = cell_trace_on_face(cellb, faceb, K, e);
    QuadratureRule quad = quad_segment(2 * k + 2);
    Eigen::MatrixXd brute(faceb.dim, cellb.dim);
    for (int m = 0; m < faceb.dim; ++m)
      for (int i = 0; i < cellb.dim; ++i) {
        double s = 0.0;
        for (int q = 0; q < quad.points.rows(); ++q) {
          double t = quad.points(q, 0);
          Eigen::Vector2d x = a + t * (b - a);
          double psi = faceb.eval(m, t) / std::sqrt(e.length);
          s += e.length * quad.weights[q] * psi * phys_eval(cellb, K, i, x);
        }
        brute(m, i) = s;
      }
    CHECK((T - brute).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("integration by parts closes over the cell boundary") {
  // D_c + D_c^T = sum_e n_c^e T_e^T T_e for each component c; this couples the
  // derivative pairing, the trace pairing and the outward normals.
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 4; ++trial) {
    CellGeometry K = CellGeometry::from_vertices(random_triangle(rng));
    for (int k = 0; k <= 3; ++k) {
      ReferenceBasis cellb = build_orthonormal_basis(k, RefElement::Triangle);
      ReferenceBasis faceb = build_orthonormal_basis(k, RefElement::Segment);
      auto D = cell_div_coupling(cellb, K);
      Eigen::MatrixXd lhs0 = D[0] + D[0].transpose();
      Eigen::MatrixXd lhs1 = D[1] + D[1].transpose();
      Eigen::MatrixXd rhs0 = Eigen::MatrixXd::Zero(cellb.dim, cellb.dim);
      Eigen::MatrixXd rhs1 = rhs0;
      Eigen::Vector2d length_weighted_normal_sum = Eigen::Vector2d::Zero();
      for (int le = 0; le < 3; ++le) {
        Eigen::Vector2d a = K.vertices.row(le).transpose();
        Eigen::Vector2d b = K.vertices.row((le + 1) % 3).transpose();
        // Counterclockwise traversal puts the right-hand normal outward.
        FaceGeometry e = FaceGeometry::from_endpoints(a, b);
        Eigen::MatrixXd T = cell_trace_on_face(cellb, faceb, K, e);
        rhs0 += e.normal[0] * T.transpose() * T;
        rhs1 += e.normal[1] * T.transpose() * T;
        length_weighted_normal_sum += e.length * e.normal;
      }
      CHECK(length_weighted_normal_sum.norm() <= 1e-14);  // closed polygon
      CHECK((lhs0 - rhs0).cwiseAbs().maxCoeff() <= 1e-11);
      CHECK((lhs1 - rhs1).cwiseAbs().maxCoeff() <= 1e-11);
    }
  }
}

TEST_CASE("normal coupling is the trace pairing times the outward normal") {
  std::mt19937_64 rng(23);
  CellGeometry K = CellGeometry::from_vertices(random_triangle(rng));
  ReferenceBasis cellb = build_orthonormal_basis(2, RefElement::Triangle);
  ReferenceBasis faceb = build_orthonormal_basis(2, RefElement::Segment);
  Eigen::Vector2d a = K.vertices.row(0).transpose();
  Eigen::Vector2d b = K.vertices.row(1).transpose();
  FaceGeometry e = FaceGeometry::from_endpoints(a, b);
  Eigen::MatrixXd T = cell_trace_on_face(cellb, faceb, K, e);
  auto N = face_normal_coupling(cellb, faceb, K, e, e.normal);
  CHECK((N[0] - e.normal[0] * T.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((N[1] - e.normal[1] * T.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("coefficient vectors carry L2 norms and means (Parseval)") {
  std::mt19937_64 rng(29);
  CellGeometry K = CellGeometry::from_vertices(random_triangle(rng));
  int k = 3;
  ReferenceBasis basis = build_orthonormal_basis(k, RefElement::Triangle);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd c(basis.dim);
  for (int i = 0; i < basis.dim; ++i) c[i] = gauss(rng);
  // Brute-force L2 norm and mean of u = sum_i c_i phi_i^K.
  QuadratureRule quad = quad_triangle(2 * k);
  double norm2 = 0.0, integral = 0.0;
  for (int q = 0; q < quad.points.rows(); ++q) {
    Eigen::Vector2d x = K.to_physical(
        Eigen::Vector2d(quad.points(q, 0), quad.points(q, 1)));
    double u = 0.0;
    for (int i = 0; i < basis.dim; ++i) u += c[i] * phys_eval(basis, K, i, x);
    norm2 += 2.0 * K.area * quad.weights[q] * u * u;
    integral += 2.0 * K.area * quad.weights[q] * u;
  }
  CHECK(std::abs(norm2 - c.squaredNorm()) <= 1e-12 * norm2);
  CHECK(std::abs(integral - std::sqrt(K.area) * c[0]) <=
        1e-12 * (1.0 + std::abs(integral)));
}

TEST_CASE("basis degrees outside the supported range are rejected") {
  CHECK_THROWS_AS(build_orthonormal_basis(-1, RefElement::Triangle),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_orthonormal_basis(21, RefElement::Segment),
                  std::invalid_argument);
}
