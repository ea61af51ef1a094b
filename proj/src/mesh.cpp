// Mesh assembly from vertex/cell lists, structured construction on the unit
// square, midpoint refinement, regularity reporting, and the text format.

#include "hfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace hfem {

namespace {

// Shared assembly path: derives faces, orientation signs and the geometry
// cache from vertices and (CCW-normalized) cells.  tag_of is consulted for
// every boundary face, identified by its sorted vertex pair.
Mesh assemble_mesh(
    std::vector<Eigen::Vector2d> vertices,
    std::vector<std::array<int, 3>> cells,
    const std::function<BoundaryTag(const std::array<int, 2>&)>& tag_of) {
  Mesh m;
  m.vertices = std::move(vertices);
  m.cells = std::move(cells);
  int nv = m.n_vertices();

  // Normalize cell orientation to counterclockwise.
  for (auto& cell : m.cells) {
    for (int v : cell)
      if (v < 0 || v >= nv)
        throw std::runtime_error("mesh: dangling vertex index");
    Eigen::Vector2d d1 = m.vertices[cell[1]] - m.vertices[cell[0]];
    Eigen::Vector2d d2 = m.vertices[cell[2]] - m.vertices[cell[0]];
    double det = d1[0] * d2[1] - d1[1] * d2[0];
    if (det == 0.0) throw std::runtime_error("mesh: degenerate cell");
    if (det < 0.0) std::swap(cell[1], cell[2]);
  }

  // Faces keyed by sorted vertex pair, first-seen order (deterministic).
  std::map<std::array<int, 2>, int> face_id;
  int nc = m.n_cells();
  m.cell_faces.resize(nc);
  m.cell_face_signs.resize(nc);
  for (int K = 0; K < nc; ++K) {
    for (int l = 0; l < 3; ++l) {
      int a = m.cells[K][l], b = m.cells[K][(l + 1) % 3];
      std::array<int, 2> key = {std::min(a, b), std::max(a, b)};
      auto [it, inserted] = face_id.emplace(key, m.n_faces());
      if (inserted) {
        Face f;
        f.v = key;
        f.cell_lo = K;
        m.faces.push_back(f);
      } else {
        Face& f = m.faces[it->second];
        if (f.cell_hi >= 0)
          throw std::runtime_error("mesh: face adjacent to more than 2 cells");
        f.cell_hi = K;  // cells visited in ascending order, so lo < hi
      }
      m.cell_faces[K][l] = it->second;
    }
  }

  // Geometry cache.
  m.cell_geom.reserve(nc);
  m.cell_centroid.reserve(nc);
  m.h_max = 0.0;
  for (int K = 0; K < nc; ++K) {
    Eigen::Matrix<double, 3, 2> v;
    for (int l = 0; l < 3; ++l) v.row(l) = m.vertices[m.cells[K][l]];
    m.cell_geom.push_back(CellGeometry::from_vertices(v));
    m.cell_centroid.push_back((v.row(0) + v.row(1) + v.row(2)).transpose() /
                              3.0);
    m.h_max = std::max(m.h_max, m.cell_geom.back().diam);
  }
  m.face_geom.reserve(m.n_faces());
  m.face_midpoint.reserve(m.n_faces());
  for (Face& f : m.faces) {
    FaceGeometry g =
        FaceGeometry::from_endpoints(m.vertices[f.v[0]], m.vertices[f.v[1]]);
    // Canonical normal: from the lower-indexed cell toward the other side.
    Eigen::Vector2d mid = 0.5 * (g.a + g.b);
    if (g.normal.dot(mid - m.cell_centroid[f.cell_lo]) < 0.0)
      g.normal = -g.normal;
    m.face_geom.push_back(g);
    m.face_midpoint.push_back(mid);
    f.tag = f.is_boundary() ? tag_of(f.v) : BoundaryTag::Interior;
    if (f.is_boundary() && f.tag == BoundaryTag::Interior)
      throw std::runtime_error("mesh: untagged boundary face");
  }

  // Orientation signs: the canonical normal points away from cell_lo, so it
  // is outward exactly for that cell.
  for (int K = 0; K < nc; ++K)
    for (int l = 0; l < 3; ++l)
      m.cell_face_signs[K][l] =
          (m.faces[m.cell_faces[K][l]].cell_lo == K) ? 1 : -1;
  return m;
}

double vertex_angle(const Eigen::Vector2d& at, const Eigen::Vector2d& p,
                    const Eigen::Vector2d& q) {
  Eigen::Vector2d u = p - at, v = q - at;
  return std::atan2(std::abs(u[0] * v[1] - u[1] * v[0]), u.dot(v));
}

struct LineReader {
  std::istream& in;
  int line_no = 0;
  bool next(std::string& out) {
    while (std::getline(in, out)) {
      ++line_no;
      if (!out.empty() && out.back() == '\r') out.pop_back();
      // Skip blank lines.
      if (out.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream msg;
    msg << "load_mesh: line " << line_no << ": " << what;
    throw std::runtime_error(msg.str());
  }
};

}  // namespace

std::vector<int> Mesh::faces_with_tag(BoundaryTag tag) const {
  std::vector<int> out;
  for (int f = 0; f < n_faces(); ++f)
    if (faces[f].tag == tag) out.push_back(f);
  return out;
}

bool Mesh::has_tag(BoundaryTag tag) const {
  for (const Face& f : faces)
    if (f.tag == tag) return true;
  return false;
}

Mesh build_structured(int n, const std::string& tag_rule) {
  if (n < 1) throw std::invalid_argument("build_structured: n must be >= 1");
  std::function<BoundaryTag(const std::array<int, 2>&)> tag_of;
  std::vector<Eigen::Vector2d> vertices;
  vertices.reserve((n + 1) * (n + 1));
  for (int iy = 0; iy <= n; ++iy)
    for (int ix = 0; ix <= n; ++ix)
      vertices.emplace_back(static_cast<double>(ix) / n,
                            static_cast<double>(iy) / n);
  auto vid = [n](int ix, int iy) { return iy * (n + 1) + ix; };
  std::vector<std::array<int, 3>> cells;
  cells.reserve(2 * n * n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      int a = vid(ix, iy), b = vid(ix + 1, iy), c = vid(ix + 1, iy + 1),
          d = vid(ix, iy + 1);
      cells.push_back({a, b, c});  // lower-right triangle (SW-NE diagonal)
      cells.push_back({a, c, d});  // upper-left triangle
    }

  if (tag_rule == "all-dirichlet") {
    tag_of = [](const std::array<int, 2>&) { return BoundaryTag::Dirichlet; };
  } else if (tag_rule == "all-neumann") {
    tag_of = [](const std::array<int, 2>&) { return BoundaryTag::Neumann; };
  } else if (tag_rule == "left-dirichlet") {
    // Captured by value: the vertex vector itself is moved into assemble_mesh.
    std::vector<char> on_left(vertices.size());
    for (size_t v = 0; v < vertices.size(); ++v)
      on_left[v] = vertices[v][0] == 0.0 ? 1 : 0;
    tag_of = [on_left = std::move(on_left)](const std::array<int, 2>& v) {
      return (on_left[v[0]] && on_left[v[1]]) ? BoundaryTag::Dirichlet
                                              : BoundaryTag::Neumann;
    };
  } else {
    throw std::invalid_argument("build_structured: unknown tag rule '" +
                                tag_rule + "'");
  }
  return assemble_mesh(std::move(vertices), std::move(cells), tag_of);
}

Mesh refine_uniform(const Mesh& m) {
  int nv = m.n_vertices();
  std::vector<Eigen::Vector2d> vertices = m.vertices;
  vertices.reserve(nv + m.n_faces());
  // Midpoint of face f becomes vertex nv + f.
  for (const Face& f : m.faces)
    vertices.push_back(0.5 * (m.vertices[f.v[0]] + m.vertices[f.v[1]]));

  std::vector<std::array<int, 3>> cells;
  cells.reserve(4 * m.n_cells());
  for (int K = 0; K < m.n_cells(); ++K) {
    std::array<int, 3> v = m.cells[K];
    // mid[l] is the midpoint of local edge l = (v_l, v_{l+1}).
    std::array<int, 3> mid;
    for (int l = 0; l < 3; ++l) mid[l] = nv + m.cell_faces[K][l];
    cells.push_back({v[0], mid[0], mid[2]});
    cells.push_back({mid[0], v[1], mid[1]});
    cells.push_back({mid[2], mid[1], v[2]});
    cells.push_back({mid[0], mid[1], mid[2]});
  }

  // A child boundary face joins an original vertex with the midpoint of its
  // parent face; the midpoint id encodes the parent.
  auto tag_of = [&m, nv](const std::array<int, 2>& v) {
    int midpoint = std::max(v[0], v[1]);
    if (midpoint < nv)
      throw std::runtime_error("refine_uniform: unexpected boundary face");
    return m.faces[midpoint - nv].tag;
  };
  return assemble_mesh(std::move(vertices), std::move(cells), tag_of);
}

RegularityReport check_regularity(const Mesh& m) {
  RegularityReport report;
  report.kappa = std::numeric_limits<double>::infinity();
  report.theta = 0.0;
  report.min_angle = std::numeric_limits<double>::infinity();
  for (int K = 0; K < m.n_cells(); ++K) {
    const CellGeometry& g = m.cell_geom[K];
    double perimeter = 0.0;
    for (int l = 0; l < 3; ++l)
      perimeter += m.face_geom[m.cell_faces[K][l]].length;
    // Inscribed circle: radius 2|K| / perimeter, hence diameter 4|K| / perim.
    double inscribed_diam = 4.0 * g.area / perimeter;
    report.kappa = std::min(report.kappa, g.area / (g.diam * g.diam));
    report.theta = std::max(report.theta, g.diam / inscribed_diam);
    for (int l = 0; l < 3; ++l) {
      double ang = vertex_angle(g.vertices.row(l).transpose(),
                                g.vertices.row((l + 1) % 3).transpose(),
                                g.vertices.row((l + 2) % 3).transpose());
      report.min_angle = std::min(report.min_angle, ang);
    }
  }

  // Hanging nodes: a vertex lying strictly inside some face.  Candidate
  // vertices are collected from a uniform spatial hash so the scan stays
  // near-linear.
  report.hanging_node_free = true;
  double cell_size = std::max(m.h_max, 1e-12);
  auto bucket_key = [cell_size](double x, double y) {
    auto bx = static_cast<long long>(std::floor(x / cell_size));
    auto by = static_cast<long long>(std::floor(y / cell_size));
    return bx * 1000003LL + by;
  };
  std::unordered_map<long long, std::vector<int>> buckets;
  for (int v = 0; v < m.n_vertices(); ++v)
    buckets[bucket_key(m.vertices[v][0], m.vertices[v][1])].push_back(v);
  for (const Face& f : m.faces) {
    const Eigen::Vector2d& a = m.vertices[f.v[0]];
    const Eigen::Vector2d& b = m.vertices[f.v[1]];
    double len = (b - a).norm();
    double tol = 1e-12 * len;
    Eigen::Vector2d lo = a.cwiseMin(b), hi = a.cwiseMax(b);
    auto bx0 = static_cast<long long>(std::floor(lo[0] / cell_size));
    auto bx1 = static_cast<long long>(std::floor(hi[0] / cell_size));
    auto by0 = static_cast<long long>(std::floor(lo[1] / cell_size));
    auto by1 = static_cast<long long>(std::floor(hi[1] / cell_size));
    for (long long bx = bx0; bx <= bx1 && report.hanging_node_free; ++bx)
      for (long long by = by0; by <= by1 && report.hanging_node_free; ++by) {
        auto it = buckets.find(bx * 1000003LL + by);
        if (it == buckets.end()) continue;
        for (int v : it->second) {
          if (v == f.v[0] || v == f.v[1]) continue;
          Eigen::Vector2d p = m.vertices[v];
          double cross = (b - a)[0] * (p - a)[1] - (b - a)[1] * (p - a)[0];
          double t = (p - a).dot(b - a) / (len * len);
          if (std::abs(cross) <= tol * len && t > tol && t < 1.0 - tol) {
            report.hanging_node_free = false;
            break;
          }
        }
      }
    if (!report.hanging_node_free) break;
  }
  return report;
}

void save_mesh(const Mesh& m, std::ostream& out) {
  out << "hmesh 1 dim 2\n";
  out << "vertices " << m.n_vertices() << "\n";
  char buf[80];
  for (const Eigen::Vector2d& v : m.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v[0], v[1]);
    out << buf;
  }
  out << "cells " << m.n_cells() << "\n";
  for (const auto& c : m.cells)
    out << c[0] << " " << c[1] << " " << c[2] << "\n";
  std::vector<int> boundary;
  for (int f = 0; f < m.n_faces(); ++f)
    if (m.faces[f].is_boundary()) boundary.push_back(f);
  out << "boundary " << boundary.size() << "\n";
  for (int f : boundary) {
    const Face& face = m.faces[f];
    out << face.v[0] << " " << face.v[1] << " "
        << (face.tag == BoundaryTag::Dirichlet ? "D" : "N") << "\n";
  }
}

void save_mesh_file(const Mesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mesh: cannot open '" + path + "'");
  save_mesh(m, out);
}

Mesh load_mesh(std::istream& in) {
  LineReader reader{in};
  std::string line;
  if (!reader.next(line)) reader.fail("missing header");
  if (line != "hmesh 1 dim 2") reader.fail("bad header (want 'hmesh 1 dim 2')");

  auto expect_section = [&](const char* name) -> int {
    if (!reader.next(line)) reader.fail(std::string("missing section '") +
                                        name + "'");
    std::istringstream ss(line);
    std::string word;
    long count = -1;
    if (!(ss >> word >> count) || word != name || count < 0 ||
        (ss >> word))
      reader.fail(std::string("expected '") + name + " N'");
    return static_cast<int>(count);
  };

  int nv = expect_section("vertices");
  std::vector<Eigen::Vector2d> vertices(nv);
  for (int i = 0; i < nv; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of vertex list");
    std::istringstream ss(line);
    double x, y;
    std::string extra;
    if (!(ss >> x >> y) || (ss >> extra)) reader.fail("malformed vertex line");
    vertices[i] = Eigen::Vector2d(x, y);
  }

  int nc = expect_section("cells");
  std::vector<std::array<int, 3>> cells(nc);
  std::map<std::array<int, 3>, int> seen_cells;
  for (int i = 0; i < nc; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of cell list");
    std::istringstream ss(line);
    std::array<int, 3> c;
    std::string extra;
    if (!(ss >> c[0] >> c[1] >> c[2]) || (ss >> extra))
      reader.fail("malformed cell line");
    for (int v : c)
      if (v < 0 || v >= nv) reader.fail("dangling vertex index");
    if (c[0] == c[1] || c[1] == c[2] || c[0] == c[2])
      reader.fail("degenerate cell");
    std::array<int, 3> key = c;
    std::sort(key.begin(), key.end());
    if (!seen_cells.emplace(key, i).second) reader.fail("duplicated cell");
    cells[i] = c;
  }

  int nb = expect_section("boundary");
  int boundary_section_line = reader.line_no;
  std::map<std::array<int, 2>, BoundaryTag> tags;
  for (int i = 0; i < nb; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of boundary list");
    std::istringstream ss(line);
    int a, b;
    std::string tag, extra;
    if (!(ss >> a >> b >> tag) || (ss >> extra))
      reader.fail("malformed boundary line");
    if (a < 0 || a >= nv || b < 0 || b >= nv)
      reader.fail("dangling vertex index");
    BoundaryTag t;
    if (tag == "D")
      t = BoundaryTag::Dirichlet;
    else if (tag == "N")
      t = BoundaryTag::Neumann;
    else
      reader.fail("unknown boundary tag '" + tag + "' (want D or N)");
    std::array<int, 2> key = {std::min(a, b), std::max(a, b)};
    if (!tags.emplace(key, t).second)
      reader.fail("boundary face tagged twice");
  }
  if (reader.next(line)) reader.fail("trailing content after boundary list");

  auto tag_of = [&tags, boundary_section_line](const std::array<int, 2>& v) {
    auto it = tags.find(v);
    if (it == tags.end()) {
      std::ostringstream msg;
      msg << "load_mesh: line " << boundary_section_line
          << ": untagged boundary face (" << v[0] << ", " << v[1] << ")";
      throw std::runtime_error(msg.str());
    }
    return it->second;
  };
  Mesh m = assemble_mesh(std::move(vertices), std::move(cells), tag_of);
  // Every tag entry must name an actual boundary face.
  for (const auto& [key, tag] : tags) {
    (void)tag;
    bool found = false;
    for (const Face& f : m.faces)
      if (f.v == key && f.is_boundary()) {
        found = true;
        break;
      }
    if (!found) {
      std::ostringstream msg;
      msg << "load_mesh: boundary entry (" << key[0] << ", " << key[1]
          << ") does not match a boundary face";
      throw std::runtime_error(msg.str());
    }
  }
  return m;
}

Mesh load_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mesh: cannot open '" + path + "'");
  return load_mesh(in);
}

}  // namespace hfem
