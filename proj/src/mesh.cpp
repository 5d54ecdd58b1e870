#include "aoed/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

namespace aoed {

namespace {

constexpr double kSnapTol = 1e-9;

struct CellBlock {
  int i0, i1, j0, j1;  // removed cells are [i0,i1) x [j0,j1)
};

bool on_unit_boundary(const Point2& p) {
  constexpr double tol = 1e-12;
  return std::abs(p.x) < tol || std::abs(p.y) < tol || std::abs(p.x - 1.0) < tol ||
         std::abs(p.y - 1.0) < tol;
}

double tri_area(const Point2& a, const Point2& b, const Point2& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

}  // namespace

double Mesh::signed_area(int tri) const {
  const auto& t = triangles[static_cast<std::size_t>(tri)];
  return tri_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
}

double Mesh::total_area() const {
  double sum = 0.0;
  for (int t = 0; t < num_triangles(); ++t) sum += signed_area(t);
  return sum;
}

Mesh build_structured_mesh(int resolution, const std::vector<Rect>& holes) {
  if (resolution < 2) {
    throw GeometryError("mesh resolution must be at least 2, got " + std::to_string(resolution));
  }
  const int N = resolution;
  const double h = 1.0 / N;

  for (std::size_t k = 0; k < holes.size(); ++k) {
    const Rect& r = holes[k];
    if (!(r.x0 > 0.0 && r.y0 > 0.0 && r.x1 < 1.0 && r.y1 < 1.0 && r.x0 < r.x1 && r.y0 < r.y1)) {
      throw GeometryError("hole " + std::to_string(k) +
                          " must be a non-empty rectangle strictly inside (0,1)^2");
    }
    for (std::size_t l = 0; l < k; ++l) {
      const Rect& s = holes[l];
      if (r.x0 <= s.x1 && s.x0 <= r.x1 && r.y0 <= s.y1 && s.y0 <= r.y1) {
        throw GeometryError("holes " + std::to_string(l) + " and " + std::to_string(k) +
                            " overlap or touch");
      }
    }
  }

  std::vector<CellBlock> blocks;
  for (std::size_t k = 0; k < holes.size(); ++k) {
    const Rect& r = holes[k];
    CellBlock b{static_cast<int>(std::floor(r.x0 * N + kSnapTol)),
                static_cast<int>(std::ceil(r.x1 * N - kSnapTol)),
                static_cast<int>(std::floor(r.y0 * N + kSnapTol)),
                static_cast<int>(std::ceil(r.y1 * N - kSnapTol))};
    if (b.i0 < 1 || b.j0 < 1 || b.i1 > N - 1 || b.j1 > N - 1) {
      throw GeometryError("hole " + std::to_string(k) + " touches the outer boundary at resolution " +
                          std::to_string(N));
    }
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      const CellBlock& c = blocks[l];
      if (b.i0 <= c.i1 && c.i0 <= b.i1 && b.j0 <= c.j1 && c.j0 <= b.j1) {
        throw GeometryError("holes " + std::to_string(l) + " and " + std::to_string(k) +
                            " are not separated by a cell at resolution " + std::to_string(N));
      }
    }
    blocks.push_back(b);
  }

  auto cell_removed = [&](int i, int j) {
    for (const auto& b : blocks) {
      if (i >= b.i0 && i < b.i1 && j >= b.j0 && j < b.j1) return true;
    }
    return false;
  };

  // Grid node positions with hole snapping.
  auto grid_point = [&](int i, int j) {
    Point2 p{i * h, j * h};
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const auto& b = blocks[k];
      if (i >= b.i0 && i <= b.i1 && j >= b.j0 && j <= b.j1) {
        if (i == b.i0) p.x = holes[k].x0;
        if (i == b.i1) p.x = holes[k].x1;
        if (j == b.j0) p.y = holes[k].y0;
        if (j == b.j1) p.y = holes[k].y1;
      }
    }
    return p;
  };

  const int stride = N + 1;
  std::vector<int> node_id(static_cast<std::size_t>(stride * stride), -1);
  Mesh mesh;
  mesh.hole_rects = holes;

  auto id_of = [&](int i, int j) {
    int& id = node_id[static_cast<std::size_t>(j * stride + i)];
    if (id < 0) {
      id = static_cast<int>(mesh.nodes.size());
      mesh.nodes.push_back(grid_point(i, j));
    }
    return id;
  };

  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) {
      if (cell_removed(i, j)) continue;
      const Point2 p00 = grid_point(i, j), p10 = grid_point(i + 1, j);
      const Point2 p11 = grid_point(i + 1, j + 1), p01 = grid_point(i, j + 1);
      // Pick the diagonal whose smaller triangle is larger; ties favour "/".
      const double slash = std::min(tri_area(p00, p10, p11), tri_area(p00, p11, p01));
      const double backslash = std::min(tri_area(p00, p10, p01), tri_area(p10, p11, p01));
      const int n00 = id_of(i, j), n10 = id_of(i + 1, j);
      const int n11 = id_of(i + 1, j + 1), n01 = id_of(i, j + 1);
      if (slash >= backslash - 1e-15) {
        mesh.triangles.push_back({n00, n10, n11});
        mesh.triangles.push_back({n00, n11, n01});
      } else {
        mesh.triangles.push_back({n00, n10, n01});
        mesh.triangles.push_back({n10, n11, n01});
      }
    }
  }

  tag_boundary(mesh);
  return mesh;
}

void tag_boundary(Mesh& mesh) {
  std::map<std::pair<int, int>, int> edge_count;
  std::map<std::pair<int, int>, std::pair<int, int>> oriented;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const int a = t[static_cast<std::size_t>(e)];
      const int b = t[static_cast<std::size_t>((e + 1) % 3)];
      const auto key = std::minmax(a, b);
      ++edge_count[key];
      oriented[key] = {a, b};
    }
  }
  mesh.boundary_edges.clear();
  for (const auto& [key, count] : edge_count) {
    if (count != 1) continue;
    const auto [a, b] = oriented[key];
    const bool outer = on_unit_boundary(mesh.nodes[static_cast<std::size_t>(a)]) &&
                       on_unit_boundary(mesh.nodes[static_cast<std::size_t>(b)]);
    mesh.boundary_edges.push_back({a, b, outer ? BoundaryTag::outer : BoundaryTag::building});
  }
}

void validate_mesh(const Mesh& mesh) {
  const int n = mesh.num_nodes();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (int v : mesh.triangles[static_cast<std::size_t>(t)]) {
      if (v < 0 || v >= n) {
        throw GeometryError("triangle " + std::to_string(t) + " references invalid node " +
                            std::to_string(v));
      }
    }
    if (!(mesh.signed_area(t) > 0.0)) {
      throw GeometryError("triangle " + std::to_string(t) + " has non-positive signed area");
    }
  }
  for (int v = 0; v < n; ++v) {
    for (const auto& r : mesh.hole_rects) {
      if (r.contains_strictly(mesh.nodes[static_cast<std::size_t>(v)])) {
        throw GeometryError("node " + std::to_string(v) + " lies inside a hole");
      }
    }
  }
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      ++edge_count[std::minmax(t[static_cast<std::size_t>(e)], t[static_cast<std::size_t>((e + 1) % 3)])];
    }
  }
  for (const auto& [key, count] : edge_count) {
    if (count > 2) {
      throw GeometryError("edge (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                          ") is shared by " + std::to_string(count) + " triangles");
    }
  }
}

Mesh read_mesh(std::istream& in) {
  long long n_nodes = 0, n_tris = 0;
  if (!(in >> n_nodes >> n_tris) || n_nodes <= 0 || n_tris <= 0) {
    throw GeometryError("mesh file: bad header, expected 'n_nodes n_triangles'");
  }
  Mesh mesh;
  mesh.nodes.resize(static_cast<std::size_t>(n_nodes));
  for (auto& p : mesh.nodes) {
    if (!(in >> p.x >> p.y)) throw GeometryError("mesh file: truncated node list");
  }
  mesh.triangles.resize(static_cast<std::size_t>(n_tris));
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    auto& tri = mesh.triangles[t];
    if (!(in >> tri[0] >> tri[1] >> tri[2])) throw GeometryError("mesh file: truncated triangle list");
    for (int v : tri) {
      if (v < 0 || v >= n_nodes) {
        throw GeometryError("mesh file: triangle " + std::to_string(t) + " references node " +
                            std::to_string(v));
      }
    }
    if (mesh.signed_area(static_cast<int>(t)) < 0.0) std::swap(tri[1], tri[2]);
  }
  tag_boundary(mesh);
  return mesh;
}

Mesh read_mesh_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError("cannot open mesh file " + path.string());
  return read_mesh(in);
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  out << mesh.num_nodes() << ' ' << mesh.num_triangles() << '\n';
  out << std::setprecision(17);
  for (const auto& p : mesh.nodes) out << p.x << ' ' << p.y << '\n';
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void write_mesh_file(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw GeometryError("cannot write mesh file " + path.string());
  write_mesh(out, mesh);
}

PointLocation point_locate(const Mesh& mesh, const Point2& x) {
  for (const auto& r : mesh.hole_rects) {
    if (r.contains_strictly(x)) {
      std::ostringstream msg;
      msg << "point (" << x.x << ", " << x.y << ") lies inside a hole";
      throw LocationError(msg.str());
    }
  }
  // Brute-force search; keeps the most interior candidate so points on
  // shared edges resolve deterministically.
  PointLocation best;
  double best_min = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const Point2& a = mesh.nodes[static_cast<std::size_t>(tri[0])];
    const Point2& b = mesh.nodes[static_cast<std::size_t>(tri[1])];
    const Point2& c = mesh.nodes[static_cast<std::size_t>(tri[2])];
    const double area = tri_area(a, b, c);
    if (area <= 0.0) continue;
    const double l0 = tri_area(x, b, c) / area;
    const double l1 = tri_area(a, x, c) / area;
    const double l2 = 1.0 - l0 - l1;
    const double lo = std::min({l0, l1, l2});
    if (lo > best_min) {
      best_min = lo;
      best.triangle = t;
      best.barycentric = {l0, l1, l2};
      if (lo > 0.0) break;
    }
  }
  if (best.triangle < 0 || best_min < -1e-10) {
    std::ostringstream msg;
    msg << "point (" << x.x << ", " << x.y << ") lies outside the mesh";
    throw LocationError(msg.str());
  }
  double sum = 0.0;
  for (double& l : best.barycentric) {
    l = std::clamp(l, 0.0, 1.0);
    sum += l;
  }
  for (double& l : best.barycentric) l /= sum;
  return best;
}

}  // namespace aoed
