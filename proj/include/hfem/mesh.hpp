// Conforming triangular meshes of the unit square: construction, uniform
// refinement, shape-regularity reporting, and a line-oriented text format.
//
// Orientation conventions:
//  * Cells store counterclockwise vertex triples; local edge l of a cell joins
//    its vertices l and (l+1) mod 3, so traversing local edges runs
//    counterclockwise and right-hand normals point outward.
//  * Faces are keyed by their sorted vertex pair and parametrized from the
//    lower to the higher vertex index; this parametrization is shared by both
//    adjacent cells, which is what makes skeleton functions single-valued.
//  * The canonical face normal points from the lower-indexed adjacent cell to
//    the higher-indexed one (outward on the boundary); per-cell outward
//    normals are +-canonical, recorded in cell_face_signs.

#ifndef HFEM_MESH_HPP
#define HFEM_MESH_HPP

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "hfem/polybasis.hpp"

namespace hfem {

enum class BoundaryTag { Interior, Dirichlet, Neumann };

struct Face {
  std::array<int, 2> v = {-1, -1};  // vertex indices, sorted ascending
  int cell_lo = -1;                 // lower-indexed adjacent cell
  int cell_hi = -1;                 // higher-indexed adjacent cell, -1 on boundary
  BoundaryTag tag = BoundaryTag::Interior;
  bool is_boundary() const { return cell_hi < 0; }
};

struct Mesh {
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> cells;  // counterclockwise vertex triples
  std::vector<Face> faces;
  // cell_faces[K][l] is the global id of local edge l; cell_face_signs[K][l]
  // is +1 when the canonical face normal is outward for K, else -1.
  std::vector<std::array<int, 3>> cell_faces;
  std::vector<std::array<int, 3>> cell_face_signs;

  // Geometry cache.
  std::vector<CellGeometry> cell_geom;
  std::vector<FaceGeometry> face_geom;  // a/b in canonical (sorted) order
  std::vector<Eigen::Vector2d> cell_centroid;
  std::vector<Eigen::Vector2d> face_midpoint;
  double h_max = 0.0;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_faces() const { return static_cast<int>(faces.size()); }

  Eigen::Vector2d outward_normal(int cell, int local_face) const {
    return cell_face_signs[cell][local_face] *
           face_geom[cell_faces[cell][local_face]].normal;
  }
  // Face ids carrying the given tag, ascending.
  std::vector<int> faces_with_tag(BoundaryTag tag) const;
  bool has_tag(BoundaryTag tag) const;
};

struct RegularityReport {
  double kappa = 0.0;      // min over cells of |K| / h_K^2
  double theta = 0.0;      // max over cells of h_K / inscribed-circle diameter
  double min_angle = 0.0;  // radians
  bool hanging_node_free = false;
};

// Structured mesh of [0,1]^2: n x n squares, each split along its southwest-
// northeast diagonal.  tag_rule is one of "all-dirichlet" (default),
// "left-dirichlet" (faces on {x=0} Dirichlet, rest Neumann), "all-neumann".
Mesh build_structured(int n, const std::string& tag_rule = "all-dirichlet");

// Splits every triangle into 4 congruent children via edge midpoints; child
// boundary faces inherit the parent face tag.
Mesh refine_uniform(const Mesh& m);

RegularityReport check_regularity(const Mesh& m);

// Text format: header "hmesh 1 dim 2"; "vertices N" + N lines "x y";
// "cells M" + M lines "i j k" (0-based); "boundary B" + B lines "i j TAG",
// TAG in {D, N}.  load validates the format and mesh invariants and reports
// offending line numbers; every boundary face must be tagged exactly once.
Mesh load_mesh(std::istream& in);
Mesh load_mesh_file(const std::string& path);
void save_mesh(const Mesh& m, std::ostream& out);
void save_mesh_file(const Mesh& m, const std::string& path);

}  // namespace hfem

#endif  // HFEM_MESH_HPP
