#include "aoed/fem.hpp"

#include <cmath>
#include <vector>

namespace aoed {

ElementGeometry element_geometry(const Mesh& mesh, int tri) {
  const auto& t = mesh.triangles[static_cast<std::size_t>(tri)];
  const Point2& a = mesh.nodes[static_cast<std::size_t>(t[0])];
  const Point2& b = mesh.nodes[static_cast<std::size_t>(t[1])];
  const Point2& c = mesh.nodes[static_cast<std::size_t>(t[2])];
  const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  const double scale = std::max({std::abs(b.x - a.x), std::abs(b.y - a.y), std::abs(c.x - a.x),
                                 std::abs(c.y - a.y)});
  if (!(det > 1e-12 * scale * scale)) {
    throw AssemblyError("degenerate or inverted triangle " + std::to_string(tri));
  }
  ElementGeometry g;
  g.area = 0.5 * det;
  g.grad[0] = {(b.y - c.y) / det, (c.x - b.x) / det};
  g.grad[1] = {(c.y - a.y) / det, (a.x - c.x) / det};
  g.grad[2] = {(a.y - b.y) / det, (b.x - a.x) / det};
  return g;
}

FemOperators assemble(const Mesh& mesh) {
  const Index n = mesh.num_nodes();
  std::vector<Eigen::Triplet<double>> m_trip, k_trip;
  m_trip.reserve(static_cast<std::size_t>(9 * mesh.num_triangles()));
  k_trip.reserve(static_cast<std::size_t>(9 * mesh.num_triangles()));

  for (int tri = 0; tri < mesh.num_triangles(); ++tri) {
    const ElementGeometry g = element_geometry(mesh, tri);
    const auto& t = mesh.triangles[static_cast<std::size_t>(tri)];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double m = g.area / 12.0 * (i == j ? 2.0 : 1.0);
        const double k = g.area * (g.grad[static_cast<std::size_t>(i)][0] * g.grad[static_cast<std::size_t>(j)][0] +
                                   g.grad[static_cast<std::size_t>(i)][1] * g.grad[static_cast<std::size_t>(j)][1]);
        m_trip.emplace_back(t[static_cast<std::size_t>(i)], t[static_cast<std::size_t>(j)], m);
        k_trip.emplace_back(t[static_cast<std::size_t>(i)], t[static_cast<std::size_t>(j)], k);
      }
    }
  }

  FemOperators ops;
  ops.n = n;
  ops.mass.resize(n, n);
  ops.stiffness.resize(n, n);
  ops.mass.setFromTriplets(m_trip.begin(), m_trip.end());
  ops.stiffness.setFromTriplets(k_trip.begin(), k_trip.end());
  ops.lumped_mass = ops.mass * Vector::Ones(n);
  for (Index i = 0; i < n; ++i) {
    if (!(ops.lumped_mass[i] > 0.0)) {
      throw AssemblyError("node " + std::to_string(i) + " is not attached to any triangle");
    }
  }
  return ops;
}

}  // namespace aoed
