#pragma once

#include "aoed/common.hpp"
#include "aoed/mesh.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace aoed {

/// Nodal transport velocity. Analytic fields are sampled at construction so
/// every consumer sees the same per-node values as a file-based field.
struct VelocityField {
  enum class Kind { analytic, file };

  Kind kind = Kind::analytic;
  std::vector<std::array<double, 2>> values;

  double max_speed() const;
};

VelocityField zero_velocity(const Mesh& mesh);

/// Stream-function field psi = -(c/pi) sin(pi x) sin(pi y) chi(x, y), where
/// chi is a C^1 cutoff that vanishes on every hole boundary and equals one
/// at distance >= `cutoff_width` from all holes. The velocity
/// (d psi/dy, -d psi/dx) is divergence-free in closed form; without holes it
/// is c (-sin(pi x) cos(pi y), cos(pi x) sin(pi y)). c normalizes the
/// maximum nodal speed to `max_speed`.
VelocityField double_gyre_velocity(const Mesh& mesh, double cutoff_width = 0.1,
                                   double max_speed = 1.0);

// Closed-form evaluation of the unnormalized (c = 1) field.
std::array<double, 2> double_gyre_eval(const Point2& p, const std::vector<Rect>& holes,
                                       double cutoff_width);

// One "vx vy" line per node.
VelocityField read_velocity(std::istream& in, const Mesh& mesh);
VelocityField read_velocity_file(const std::filesystem::path& path, const Mesh& mesh);
void write_velocity(std::ostream& out, const VelocityField& v);

}  // namespace aoed
