#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace lodgpe {

/// Axis-aligned rectangle [xmin, xmax] x [ymin, ymax].
struct Rect {
  double xmin = 0.0;
  double xmax = 1.0;
  double ymin = 0.0;
  double ymax = 1.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  void validate() const;

  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

using Triangle = std::array<int, 3>;

/// Conforming triangulation of a Rect obtained from a uniform criss mesh,
/// possibly red-refined. Triangles are counterclockwise.
struct TriMesh {
  Rect domain;
  int cells_per_side = 0;  // squares per side of the equivalent uniform mesh
  int level = 0;           // red refinements applied since uniform_mesh
  double mesh_size = 0.0;  // longest edge over all triangles
  std::vector<Point> nodes;
  std::vector<Triangle> triangles;
  std::vector<std::uint8_t> boundary;  // 1 if the node lies on the domain boundary
  std::vector<int> ancestor;           // level-0 triangle containing each triangle

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_triangles() const { return triangles.size(); }

  /// Side length of the squares along x; this is the "H" (or "h") used in
  /// rate tables.
  double cell_side() const { return domain.width() / cells_per_side; }
  double signed_area(std::size_t t) const;
};

TriMesh uniform_mesh(const Rect& domain, int cells_per_side);
TriMesh refine(const TriMesh& mesh, int times);

/// Location of a fine node inside the coarse mesh.
struct ChildLocation {
  int triangle = -1;
  std::array<double, 3> bary{};
};

struct MeshHierarchy {
  TriMesh coarse;
  TriMesh fine;
  int refinements = 0;
  std::vector<ChildLocation> child_map;  // one entry per fine node
};

MeshHierarchy build_hierarchy(const Rect& domain, int coarse_cells, int refinements);

/// Degenerate two-level hierarchy with coarse == fine. The fine-scale space
/// is trivial, so the LOD space coincides with the P1 space. Only used for
/// consistency checks.
MeshHierarchy identity_hierarchy(const Rect& domain, int cells);

/// Numbering of the non-boundary nodes, the unknowns of the Dirichlet problem.
struct DofMap {
  std::vector<int> node_to_dof;  // -1 for eliminated nodes
  std::vector<int> dof_to_node;

  std::size_t size() const { return dof_to_node.size(); }
  static DofMap interior(const TriMesh& mesh);
  static DofMap all_nodes(const TriMesh& mesh);
};

/// For two meshes of the same domain whose node sets coincide (as produced
/// by refine and uniform_mesh), returns perm with
/// a.nodes[i] == b.nodes[perm[i]].
std::vector<int> match_nodes(const TriMesh& a, const TriMesh& b);

/// Plain-text dump: "x y boundary_flag" per node, then "i j k" per triangle.
/// Both blocks are preceded by a "# nodes N" / "# triangles T" line.
void write_mesh(std::ostream& out, const TriMesh& mesh);

}  // namespace lodgpe
