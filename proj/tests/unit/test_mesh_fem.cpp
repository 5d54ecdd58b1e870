#include "aoed/fem.hpp"
#include "aoed/mesh.hpp"
#include "tiny.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace aoed;

TEST(Mesh, StructuredCounts) {
  const Mesh m2 = build_structured_mesh(2, {});
  EXPECT_EQ(m2.num_nodes(), 9);
  EXPECT_EQ(m2.num_triangles(), 8);
  const Mesh m4 = build_structured_mesh(4, {});
  EXPECT_EQ(m4.num_nodes(), 25);
  EXPECT_EQ(m4.num_triangles(), 32);
}

TEST(Mesh, DefaultSizeNearTarget) {
  const Mesh m = build_structured_mesh(32, tiny::default_holes());
  EXPECT_NEAR(m.num_nodes(), 1012, 0.2 * 1012);
  const double holes = 0.25 * 0.25 + 0.25 * 0.25;
  EXPECT_NEAR(m.total_area(), 1.0 - holes, 1e-12);
  EXPECT_NO_THROW(validate_mesh(m));
}

TEST(Mesh, RejectsBadGeometry) {
  EXPECT_THROW(build_structured_mesh(1, {}), GeometryError);
  EXPECT_THROW(build_structured_mesh(16, {{-0.1, 0.2, 0.3, 0.4}}), GeometryError);
  EXPECT_THROW(build_structured_mesh(16, {{0.2, 0.2, 0.5, 0.5}, {0.4, 0.4, 0.7, 0.7}}), GeometryError);
  EXPECT_THROW(build_structured_mesh(4, tiny::default_holes()), GeometryError);
}

TEST(Mesh, BoundaryTags) {
  const Mesh m = build_structured_mesh(16, tiny::default_holes());
  int outer = 0;
  int building = 0;
  for (const auto& e : m.boundary_edges) (e.tag == BoundaryTag::outer ? outer : building)++;
  EXPECT_EQ(outer, 4 * 16);
  EXPECT_GT(building, 0);
}

TEST(Mesh, FileRoundTrip) {
  const Mesh m = build_structured_mesh(12, tiny::default_holes());
  std::stringstream ss;
  write_mesh(ss, m);
  Mesh r = read_mesh(ss);
  ASSERT_EQ(r.num_nodes(), m.num_nodes());
  ASSERT_EQ(r.num_triangles(), m.num_triangles());
  for (int i = 0; i < m.num_nodes(); ++i) {
    EXPECT_DOUBLE_EQ(r.nodes[i].x, m.nodes[i].x);
    EXPECT_DOUBLE_EQ(r.nodes[i].y, m.nodes[i].y);
  }
  r.hole_rects = m.hole_rects;
  tag_boundary(r);
  EXPECT_EQ(r.boundary_edges.size(), m.boundary_edges.size());
}

TEST(Mesh, ReadReorientsClockwise) {
  std::istringstream in("3 1\n0 0\n1 0\n0 1\n0 2 1\n");
  const Mesh m = read_mesh(in);
  EXPECT_GT(m.signed_area(0), 0.0);
}

TEST(Mesh, PointLocate) {
  const Mesh m = build_structured_mesh(12, tiny::default_holes());
  const auto& t = m.triangles[5];
  const Point2 v = m.nodes[static_cast<std::size_t>(t[1])];
  const PointLocation at_vertex = point_locate(m, v);
  const auto& bv = at_vertex.barycentric;
  EXPECT_NEAR(*std::max_element(bv.begin(), bv.end()), 1.0, 1e-12);

  const auto& a = m.nodes[static_cast<std::size_t>(t[0])];
  const auto& b = m.nodes[static_cast<std::size_t>(t[1])];
  const auto& c = m.nodes[static_cast<std::size_t>(t[2])];
  const Point2 centroid{(a.x + b.x + c.x) / 3, (a.y + b.y + c.y) / 3};
  const PointLocation at_centroid = point_locate(m, centroid);
  EXPECT_EQ(at_centroid.triangle, 5);
  for (double l : at_centroid.barycentric) EXPECT_NEAR(l, 1.0 / 3.0, 1e-12);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  while (checked < 50) {
    const Point2 x{u(rng), u(rng)};
    bool in_hole = false;
    for (const auto& h : m.hole_rects) in_hole |= x.x >= h.x0 && x.x <= h.x1 && x.y >= h.y0 && x.y <= h.y1;
    if (in_hole) {
      EXPECT_THROW(point_locate(m, x), LocationError);
      continue;
    }
    const PointLocation loc = point_locate(m, x);
    const auto& tri = m.triangles[static_cast<std::size_t>(loc.triangle)];
    double rx = 0.0;
    double ry = 0.0;
    for (int k = 0; k < 3; ++k) {
      rx += loc.barycentric[k] * m.nodes[static_cast<std::size_t>(tri[k])].x;
      ry += loc.barycentric[k] * m.nodes[static_cast<std::size_t>(tri[k])].y;
    }
    EXPECT_NEAR(rx, x.x, 1e-12);
    EXPECT_NEAR(ry, x.y, 1e-12);
    ++checked;
  }
  EXPECT_THROW(point_locate(m, {1.5, 0.5}), LocationError);
}

TEST(Fem, ReferenceTriangleMass) {
  // right triangle scaled to unit area
  Mesh m;
  const double s = std::sqrt(2.0);
  m.nodes = {{0, 0}, {s, 0}, {0, s}};
  m.triangles = {{0, 1, 2}};
  const FemOperators f = assemble(m);
  const Matrix expect = (Matrix(3, 3) << 2, 1, 1, 1, 2, 1, 1, 1, 2).finished() / 12.0;
  EXPECT_LT((Matrix(f.mass) - expect).norm(), 1e-14);
}

TEST(Fem, PartitionOfUnityAndConstants) {
  const Mesh m = build_structured_mesh(12, tiny::default_holes());
  const FemOperators f = assemble(m);
  const Vector one = Vector::Ones(f.n);
  EXPECT_NEAR(one.dot(f.mass * one), m.total_area(), 1e-12);
  EXPECT_LT((f.stiffness * one).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(f.lumped_mass.sum(), m.total_area(), 1e-12);
  // linear functions are integrated exactly
  Vector x(f.n);
  for (Index i = 0; i < f.n; ++i) x[i] = m.nodes[static_cast<std::size_t>(i)].x;
  EXPECT_NEAR(x.dot(f.stiffness * x), m.total_area(), 1e-12);
  EXPECT_LT((Matrix(f.mass) - Matrix(f.mass).transpose()).norm(), 1e-15);
}

TEST(Fem, DegenerateTriangle) {
  Mesh m;
  m.nodes = {{0, 0}, {1, 0}, {2, 0}};
  m.triangles = {{0, 1, 2}};
  EXPECT_THROW(assemble(m), AssemblyError);
}
