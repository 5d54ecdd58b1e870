#include "aoed/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>

namespace aoed {

namespace {

struct Cutoff {
  double value;
  double dx;
  double dy;
};

// Smoothstep of the distance to each hole, multiplied over holes.
Cutoff hole_cutoff(const Point2& p, const std::vector<Rect>& holes, double width) {
  Cutoff c{1.0, 0.0, 0.0};
  for (const Rect& r : holes) {
    const double ex = p.x < r.x0 ? r.x0 - p.x : (p.x > r.x1 ? p.x - r.x1 : 0.0);
    const double ey = p.y < r.y0 ? r.y0 - p.y : (p.y > r.y1 ? p.y - r.y1 : 0.0);
    const double d = std::hypot(ex, ey);
    const double t = d / width;
    double s = 1.0, ds = 0.0;
    if (t < 1.0) {
      s = t * t * (3.0 - 2.0 * t);
      ds = 6.0 * t * (1.0 - t) / width;
    }
    double gx = 0.0, gy = 0.0;
    if (d > 0.0 && ds != 0.0) {
      gx = ds * (p.x < r.x0 ? -ex : ex) / d;
      gy = ds * (p.y < r.y0 ? -ey : ey) / d;
    }
    // product rule: (c * s)' = c' s + c s'
    c.dx = c.dx * s + c.value * gx;
    c.dy = c.dy * s + c.value * gy;
    c.value *= s;
  }
  return c;
}

}  // namespace

double VelocityField::max_speed() const {
  double m = 0.0;
  for (const auto& v : values) m = std::max(m, std::hypot(v[0], v[1]));
  return m;
}

VelocityField zero_velocity(const Mesh& mesh) {
  VelocityField v;
  v.kind = VelocityField::Kind::analytic;
  v.values.assign(static_cast<std::size_t>(mesh.num_nodes()), {0.0, 0.0});
  return v;
}

std::array<double, 2> double_gyre_eval(const Point2& p, const std::vector<Rect>& holes,
                                       double cutoff_width) {
  constexpr double pi = std::numbers::pi;
  const double sx = std::sin(pi * p.x), cx = std::cos(pi * p.x);
  const double sy = std::sin(pi * p.y), cy = std::cos(pi * p.y);
  // psi0 = -(1/pi) sin(pi x) sin(pi y)
  const double psi0 = -sx * sy / pi;
  const double psi0_x = -cx * sy;
  const double psi0_y = -sx * cy;
  const Cutoff chi = hole_cutoff(p, holes, cutoff_width);
  const double psi_x = psi0_x * chi.value + psi0 * chi.dx;
  const double psi_y = psi0_y * chi.value + psi0 * chi.dy;
  return {psi_y, -psi_x};
}

VelocityField double_gyre_velocity(const Mesh& mesh, double cutoff_width, double max_speed) {
  if (!(cutoff_width > 0.0) || !(max_speed >= 0.0)) {
    throw DomainError("velocity: cutoff width must be positive and max speed non-negative");
  }
  VelocityField v;
  v.kind = VelocityField::Kind::analytic;
  v.values.reserve(mesh.nodes.size());
  for (const auto& p : mesh.nodes) v.values.push_back(double_gyre_eval(p, mesh.hole_rects, cutoff_width));
  const double peak = v.max_speed();
  if (peak > 0.0) {
    for (auto& x : v.values) {
      x[0] *= max_speed / peak;
      x[1] *= max_speed / peak;
    }
  }
  return v;
}

VelocityField read_velocity(std::istream& in, const Mesh& mesh) {
  VelocityField v;
  v.kind = VelocityField::Kind::file;
  v.values.resize(static_cast<std::size_t>(mesh.num_nodes()));
  for (auto& x : v.values) {
    if (!(in >> x[0] >> x[1])) {
      throw DomainError("velocity file: expected one 'vx vy' line per mesh node (" +
                        std::to_string(mesh.num_nodes()) + ")");
    }
    if (!std::isfinite(x[0]) || !std::isfinite(x[1])) {
      throw DomainError("velocity file: non-finite value");
    }
  }
  return v;
}

VelocityField read_velocity_file(const std::filesystem::path& path, const Mesh& mesh) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open velocity file " + path.string());
  return read_velocity(in, mesh);
}

void write_velocity(std::ostream& out, const VelocityField& v) {
  out << std::setprecision(17);
  for (const auto& x : v.values) out << x[0] << ' ' << x[1] << '\n';
}

}  // namespace aoed
