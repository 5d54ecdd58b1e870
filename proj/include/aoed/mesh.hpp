#pragma once

#include "aoed/common.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace aoed {

enum class BoundaryTag { outer, building };

struct BoundaryEdge {
  int a = 0;
  int b = 0;
  BoundaryTag tag = BoundaryTag::outer;
};

// Triangulation of the unit square with rectangular holes removed.
struct Mesh {
  std::vector<Point2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<Rect> hole_rects;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  double signed_area(int tri) const;
  double total_area() const;
};

/// Structured right-triangle mesh of [0,1]^2 with `resolution` cells per
/// side. Cells overlapping a hole are removed and the nodes left on the
/// removed block's boundary are snapped onto the hole rectangle, so the
/// discrete holes coincide with the requested rectangles.
///
/// Throws GeometryError when a hole is not strictly inside the square, when
/// two holes overlap, or when the resolution is too coarse to keep at least
/// one cell between a hole and the outer boundary (or between two holes).
Mesh build_structured_mesh(int resolution, const std::vector<Rect>& holes);

/// Recomputes the boundary edge list and tags. Edges on the unit-square
/// boundary are `outer`, every other boundary edge is `building`.
void tag_boundary(Mesh& mesh);

/// Checks positive orientation, hole exclusion and conformity; throws
/// GeometryError describing the first violation.
void validate_mesh(const Mesh& mesh);

// Plain-text mesh format: "n_nodes n_triangles", then "x y" per node, then
// "i j k" (0-based) per triangle. Clockwise triangles are reoriented on read.
Mesh read_mesh(std::istream& in);
Mesh read_mesh_file(const std::filesystem::path& path);
void write_mesh(std::ostream& out, const Mesh& mesh);
void write_mesh_file(const std::filesystem::path& path, const Mesh& mesh);

struct PointLocation {
  int triangle = -1;
  std::array<double, 3> barycentric{};
};

/// Finds the triangle containing `x`. Throws LocationError for points in a
/// hole or outside the mesh.
PointLocation point_locate(const Mesh& mesh, const Point2& x);

}  // namespace aoed
