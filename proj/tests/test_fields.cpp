// Oracle tests for field norms, jumps, averages, integrals and projections.
// Hand-derived values on the n=1 structured mesh: boundary edges have length
// 1, the diagonal has length sqrt(2); with u == 1 the per-cell-boundary trace
// norm squared is 4 + 2 sqrt(2) (diagonal counted from both sides).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "hfem/fields.hpp"

using namespace hfem;

namespace {

CellField random_cell_field(const FeSpace& space, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CellField u = zero_cell_field(space);
  for (int i = 0; i < u.coeff.size(); ++i) u.coeff[i] = gauss(rng);
  return u;
}

SkeletonField random_skeleton_field(const FeSpace& space, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SkeletonField v = zero_skeleton_field(space);
  for (int i = 0; i < v.coeff.size(); ++i) v.coeff[i] = gauss(rng);
  return v;
}

// Brute-force quadrature of the squared L2 norm via point evaluation.
double brute_norm2_cells(const FeSpace& space, const CellField& u) {
  QuadratureRule quad = quad_triangle(2 * space.k);
  double s = 0.0;
  for (int K = 0; K < space.mesh->n_cells(); ++K) {
    double area2 = 2.0 * space.mesh->cell_geom[K].area;
    for (int q = 0; q < quad.points.rows(); ++q) {
      double v = eval_cell(space, u, K,
                           Eigen::Vector2d(quad.points(q, 0), quad.points(q, 1)));
      s += area2 * quad.weights[q] * v * v;
    }
  }
  return s;
}

// Value of the skeleton field at parameter t on face f.
double eval_face(const FeSpace& space, const SkeletonField& v, int f,
                 double t) {
  double s = 0.0;
  for (int m = 0; m < space.nf; ++m)
    s += v.coeff[f * space.nf + m] * space.face_basis.eval(m, t);
  return s / std::sqrt(space.mesh->face_geom[f].length);
}

}  // namespace

TEST_CASE("cell L2 norms: constants, x, and Parseval cross-check") {
  Mesh mesh = build_structured(3);
  for (int k = 0; k <= 2; ++k) {
    FeSpace space = make_space(mesh, k);
    CellField one =
        project_to_cells(space, [](const Eigen::Vector2d&) { return 1.0; }, 2);
    CHECK(norm_L2_cells(space, one) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(norm_L2_cells(space, zero_cell_field(space)) == 0.0);
    if (k >= 1) {
      CellField x = project_to_cells(
          space, [](const Eigen::Vector2d& p) { return p[0]; }, k + 1);
      CHECK(norm_L2_cells(space, x) ==
            doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-13));
    }
  }
  FeSpace space = make_space(mesh, 2);
  CellField u = random_cell_field(space, 31);
  double direct = std::sqrt(brute_norm2_cells(space, u));
  CHECK(std::abs(norm_L2_cells(space, u) - direct) <= 1e-12 * direct);
}

TEST_CASE("broken H1 seminorm") {
  Mesh mesh = build_structured(2);
  FeSpace space = make_space(mesh, 2);
  // Piecewise constant: zero.
  CellField pwc =
      project_to_cells(space, [](const Eigen::Vector2d&) { return 4.2; }, 2);
  CHECK(seminorm_H1_broken(space, pwc) <= 1e-13);
  // Global x: |u|_{H1} = 1.
  CellField x = project_to_cells(
      space, [](const Eigen::Vector2d& p) { return p[0]; }, 3);
  CHECK(seminorm_H1_broken(space, x) == doctest::Approx(1.0).epsilon(1e-13));
  // Random field vs brute-force quadrature of the mapped reference gradient.
  CellField u = random_cell_field(space, 37);
  QuadratureRule quad = quad_triangle(2 * space.k);
  double s2 = 0.0;
  for (int K = 0; K < mesh.n_cells(); ++K) {
    const CellGeometry& g = mesh.cell_geom[K];
    for (int q = 0; q < quad.points.rows(); ++q) {
      Eigen::Vector2d xhat(quad.points(q, 0), quad.points(q, 1));
      Eigen::Vector2d grad = Eigen::Vector2d::Zero();
      for (int i = 0; i < space.nd; ++i)
        grad += u.coeff[K * space.nd + i] *
                (g.jac_inv.transpose() * space.cell_basis.grad(i, xhat[0],
                                                               xhat[1]));
      grad /= std::sqrt(2.0 * g.area);
      s2 += 2.0 * g.area * quad.weights[q] * grad.squaredNorm();
    }
  }
  CHECK(seminorm_H1_broken(space, u) ==
        doctest::Approx(std::sqrt(s2)).epsilon(1e-12));
}

TEST_CASE("trace norm over cell boundaries counts interior faces twice") {
  Mesh mesh = build_structured(1);
  FeSpace space = make_space(mesh, 1);
  CellField one =
      project_to_cells(space, [](const Eigen::Vector2d&) { return 1.0; }, 2);
  double expected = std::sqrt(4.0 + 2.0 * std::sqrt(2.0));
  CHECK(trace_norm_skeleton(space, one) ==
        doctest::Approx(expected).epsilon(1e-13));
  CHECK(trace_norm_skeleton(space, zero_cell_field(space)) == 0.0);

  // Globally continuous u: both traces agree, so the norm decomposes into
  // 2 x interior + 1 x boundary single-face norms.
  Mesh mesh3 = build_structured(3);
  FeSpace space3 = make_space(mesh3, 2);
  CellField u = project_to_cells(
      space3, [](const Eigen::Vector2d& p) { return p[0] * p[1] + 0.5 * p[1]; },
      4);
  double s2 = 0.0;
  for (int f = 0; f < mesh3.n_faces(); ++f) {
    const Face& face = mesh3.faces[f];
    int K = face.cell_lo;
    int l = 0;
    while (mesh3.cell_faces[K][l] != f) ++l;
    double mult = face.is_boundary() ? 1.0 : 2.0;
    s2 += mult * trace_on_face(space3, u, K, l).squaredNorm();
  }
  CHECK(trace_norm_skeleton(space3, u) ==
        doctest::Approx(std::sqrt(s2)).epsilon(1e-12));
}

TEST_CASE("skeleton norms with once and hdg counting") {
  Mesh mesh = build_structured(1);
  FeSpace space = make_space(mesh, 1);
  SkeletonField one = project_to_skeleton(
      space, [](const Eigen::Vector2d&) { return 1.0; }, 2);
  CHECK(norm_skeleton(space, one, SkeletonCounting::Once) ==
        doctest::Approx(std::sqrt(4.0 + std::sqrt(2.0))).epsilon(1e-13));
  CHECK(norm_skeleton(space, one, SkeletonCounting::Hdg) ==
        doctest::Approx(std::sqrt(4.0 + 2.0 * std::sqrt(2.0))).epsilon(1e-13));
  CHECK(norm_skeleton(space, zero_skeleton_field(space),
                      SkeletonCounting::Hdg) == 0.0);
}

TEST_CASE("jump integrals") {
  Mesh mesh = build_structured(1);
  FeSpace space = make_space(mesh, 1);
  int interior = -1;
  for (int f = 0; f < mesh.n_faces(); ++f)
    if (!mesh.faces[f].is_boundary()) interior = f;
  REQUIRE(interior >= 0);

  // Globally continuous field: zero jump.
  CellField cont = project_to_cells(
      space, [](const Eigen::Vector2d& p) { return 1.0 + 2 * p[0] - p[1]; }, 2);
  CHECK(jump_integral(space, cont, interior).norm() <= 1e-13);

  // Indicator of the higher-indexed cell: jump = |e| * n_hi.
  int hi = mesh.faces[interior].cell_hi;
  CellField ind = zero_cell_field(space);
  ind.coeff[hi * space.nd] = std::sqrt(mesh.cell_geom[hi].area);
  int l = 0;
  while (mesh.cell_faces[hi][l] != interior) ++l;
  Eigen::Vector2d expected =
      mesh.face_geom[interior].length * mesh.outward_normal(hi, l);
  CHECK((jump_integral(space, ind, interior) - expected).norm() <= 1e-13);

  // Boundary faces are rejected.
  int boundary = mesh.faces_with_tag(BoundaryTag::Dirichlet)[0];
  CHECK_THROWS_AS(jump_integral(space, cont, boundary), std::invalid_argument);
}

TEST_CASE("face averages") {
  Mesh mesh = build_structured(2);
  FeSpace space = make_space(mesh, 2);
  SkeletonField c = project_to_skeleton(
      space, [](const Eigen::Vector2d&) { return -1.75; }, 2);
  SkeletonField avg = face_average(space, c);
  CHECK(avg.k == 0);
  for (int f = 0; f < mesh.n_faces(); ++f)
    CHECK(face_value0(mesh, avg, f) == doctest::Approx(-1.75).epsilon(1e-13));

  // Linear skeleton field: the average is the midpoint value.
  FeSpace space1 = make_space(mesh, 1);
  auto lin = [](const Eigen::Vector2d& p) { return 3 * p[0] - 2 * p[1] + 1; };
  SkeletonField v = project_to_skeleton(space1, lin, 3);
  SkeletonField vavg = face_average(space1, v);
  for (int f = 0; f < mesh.n_faces(); ++f)
    CHECK(face_value0(mesh, vavg, f) ==
          doctest::Approx(lin(mesh.face_midpoint[f])).epsilon(1e-13));

  // Random quadratic field vs 3-point Gauss average.
  SkeletonField w = random_skeleton_field(space, 41);
  SkeletonField wavg = face_average(space, w);
  QuadratureRule quad = quad_segment(4);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    double mean = 0.0;
    for (int q = 0; q < quad.points.rows(); ++q)
      mean += quad.weights[q] * eval_face(space, w, f, quad.points(q, 0));
    CHECK(face_value0(mesh, wavg, f) == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("domain and boundary integrals") {
  Mesh mesh = build_structured(2, "left-dirichlet");
  FeSpace space = make_space(mesh, 1);
  CellField one =
      project_to_cells(space, [](const Eigen::Vector2d&) { return 1.0; }, 2);
  CHECK(integral_domain(space, one) == doctest::Approx(1.0).epsilon(1e-13));
  CellField x = project_to_cells(
      space, [](const Eigen::Vector2d& p) { return p[0]; }, 2);
  CHECK(integral_domain(space, x) == doctest::Approx(0.5).epsilon(1e-13));

  std::vector<int> left = mesh.faces_with_tag(BoundaryTag::Dirichlet);
  REQUIRE(left.size() == 2);
  SkeletonField three = project_to_skeleton(
      space, [](const Eigen::Vector2d&) { return 3.0; }, 2);
  CHECK(integral_boundary_subset(space, three, left) ==
        doctest::Approx(3.0).epsilon(1e-13));

  // Trace form agrees with the skeleton form for a function in P1.
  auto g1 = [](const Eigen::Vector2d& p) { return 2 * p[1] - 0.25; };
  CellField g1c = project_to_cells(space, g1, 3);
  SkeletonField g1s = project_to_skeleton(space, g1, 3);
  CHECK(integral_boundary_subset(space, g1c, left) ==
        doctest::Approx(integral_boundary_subset(space, g1s, left))
            .epsilon(1e-12));

  CHECK_THROWS_AS(integral_boundary_subset(space, three, {}),
                  std::invalid_argument);
}

TEST_CASE("skeleton difference norm") {
  Mesh mesh = build_structured(2);
  FeSpace space = make_space(mesh, 2);
  auto fn = [](const Eigen::Vector2d& p) {
    return p[0] * p[0] - p[1] + 0.3 * p[0] * p[1];
  };
  CellField u = project_to_cells(space, fn, 4);
  SkeletonField uhat = project_to_skeleton(space, fn, 4);
  CHECK(diff_norm_skeleton(space, u, uhat) <= 1e-12);

  // Random data vs brute quadrature with hdg counting.
  CellField ur = random_cell_field(space, 43);
  SkeletonField vr = random_skeleton_field(space, 47);
  QuadratureRule quad = quad_segment(2 * space.k + 2);
  double s2 = 0.0;
  for (int K = 0; K < mesh.n_cells(); ++K)
    for (int l = 0; l < 3; ++l) {
      int f = mesh.cell_faces[K][l];
      const FaceGeometry& e = mesh.face_geom[f];
      for (int q = 0; q < quad.points.rows(); ++q) {
        double t = quad.points(q, 0);
        Eigen::Vector2d x = e.a + t * (e.b - e.a);
        double uval =
            eval_cell(space, ur, K, mesh.cell_geom[K].to_reference(x));
        double vval = eval_face(space, vr, f, t);
        s2 += e.length * quad.weights[q] * (uval - vval) * (uval - vval);
      }
    }
  CHECK(diff_norm_skeleton(space, ur, vr) ==
        doctest::Approx(std::sqrt(s2)).epsilon(1e-12));

  // Restriction to the boundary faces only.
  std::vector<int> bnd;
  for (int f = 0; f < mesh.n_faces(); ++f)
    if (mesh.faces[f].is_boundary()) bnd.push_back(f);
  double b2 = 0.0;
  for (int f : bnd) {
    int K = mesh.faces[f].cell_lo;
    int l = 0;
    while (mesh.cell_faces[K][l] != f) ++l;
    b2 += (trace_on_face(space, ur, K, l) -
           vr.coeff.segment(f * space.nf, space.nf))
              .squaredNorm();
  }
  CHECK(diff_norm_on_faces(space, ur, vr, bnd) ==
        doctest::Approx(std::sqrt(b2)).epsilon(1e-12));
}

TEST_CASE("debug CSV is deterministic and well-formed") {
  Mesh mesh = build_structured(1);
  FeSpace space = make_space(mesh, 1);
  CellField u = random_cell_field(space, 53);
  std::ostringstream a, b;
  write_csv(a, space, u);
  write_csv(b, space, u);
  CHECK(a.str() == b.str());
  // One row per cell, each with kind, k, block id and nd coefficients.
  std::istringstream in(a.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(line.rfind("cell,1,", 0) == 0);
    CHECK(std::count(line.begin(), line.end(), ',') == 2 + space.nd);
  }
  CHECK(rows == mesh.n_cells());
}
