#include "aoed/observation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace aoed {

Vector ObservationSetup::expand_weights(const Vector& w) const {
  if (w.size() != num_sensors()) throw DomainError("weights: expected one entry per sensor");
  Vector out(obs_dim());
  for (int l = 0; l < num_times(); ++l) out.segment(flat_index(0, l), num_sensors()) = w;
  return out;
}

TimeWeights time_weights_for(double tau, double final_time, int num_steps) {
  if (!(tau >= 0.0) || tau > final_time * (1.0 + 1e-12)) {
    throw DomainError("observation time outside [0, T]");
  }
  const double dt = final_time / num_steps;
  const double s = tau / dt;
  int k = static_cast<int>(std::floor(s));
  double theta = s - k;
  // snap round-off so times on the grid use a single level
  if (theta > 1.0 - 1e-12) {
    ++k;
    theta = 0.0;
  } else if (theta < 1e-12) {
    theta = 0.0;
  }
  if (k >= num_steps) return {num_steps, 1.0, 0.0};
  return {k, 1.0 - theta, theta};
}

std::vector<double> equispaced_times(double t0, double t1, int count) {
  if (count < 1) throw DomainError("need at least one observation time");
  std::vector<double> t(static_cast<std::size_t>(count));
  if (count == 1) {
    t[0] = t0;
    return t;
  }
  for (int i = 0; i < count; ++i) t[static_cast<std::size_t>(i)] = t0 + (t1 - t0) * i / (count - 1);
  return t;
}

ObservationSetup make_observation_setup(const Mesh& mesh, std::vector<Point2> sensors,
                                        std::vector<double> obs_times, double final_time,
                                        int num_steps, Vector noise_sigma) {
  if (sensors.empty()) throw DomainError("observation setup: no sensors");
  if (obs_times.empty()) throw DomainError("observation setup: no observation times");
  for (std::size_t i = 1; i < obs_times.size(); ++i) {
    if (!(obs_times[i] > obs_times[i - 1])) {
      throw DomainError("observation times must be strictly increasing");
    }
  }
  ObservationSetup s;
  s.interp.reserve(sensors.size());
  for (std::size_t j = 0; j < sensors.size(); ++j) {
    try {
      s.interp.push_back(point_locate(mesh, sensors[j]));
      s.interp_nodes.push_back(mesh.triangles[static_cast<std::size_t>(s.interp.back().triangle)]);
    } catch (const LocationError& e) {
      std::ostringstream msg;
      msg << "sensor " << j << " at (" << sensors[j].x << ", " << sensors[j].y << "): " << e.what();
      throw LocationError(msg.str());
    }
  }
  for (double tau : obs_times) s.time_weights.push_back(time_weights_for(tau, final_time, num_steps));
  if (noise_sigma.size() == 0) {
    noise_sigma = Vector::Ones(static_cast<Index>(sensors.size()));
  } else if (noise_sigma.size() != static_cast<Index>(sensors.size())) {
    throw DomainError("observation setup: noise_sigma needs one entry per sensor");
  }
  if ((noise_sigma.array() <= 0.0).any() || !noise_sigma.allFinite()) {
    throw DomainError("observation setup: noise standard deviations must be positive");
  }
  s.sensor_points = std::move(sensors);
  s.obs_times = std::move(obs_times);
  s.noise_sigma = std::move(noise_sigma);
  return s;
}

std::vector<Point2> default_sensor_grid(const std::vector<Rect>& holes, double spacing,
                                        double clearance) {
  if (!(spacing > 0.0) || !(clearance >= 0.0) || 2.0 * clearance >= 1.0) {
    throw DomainError("sensor grid: need spacing > 0 and 0 <= clearance < 1/2");
  }
  const int m = static_cast<int>(std::floor((1.0 - 2.0 * clearance) / spacing + 1e-9)) + 1;
  const double start = 0.5 * (1.0 - (m - 1) * spacing);
  std::vector<Point2> pts;
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      const Point2 p{start + i * spacing, start + j * spacing};
      bool keep = true;
      for (const Rect& r : holes) {
        const double ex = std::max({r.x0 - p.x, 0.0, p.x - r.x1});
        const double ey = std::max({r.y0 - p.y, 0.0, p.y - r.y1});
        if (std::hypot(ex, ey) < clearance) {
          keep = false;
          break;
        }
      }
      if (keep) pts.push_back(p);
    }
  }
  return pts;
}

std::vector<Point2> read_sensors(std::istream& in) {
  std::vector<Point2> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Point2 p;
    if (!(ls >> p.x >> p.y) || !std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw DomainError("sensor file line " + std::to_string(lineno) + ": expected 'x y'");
    }
    pts.push_back(p);
  }
  return pts;
}

std::vector<Point2> read_sensors_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open sensor file " + path.string());
  return read_sensors(in);
}

void write_sensors(std::ostream& out, const std::vector<Point2>& sensors) {
  out << std::setprecision(17);
  for (const auto& p : sensors) out << p.x << ' ' << p.y << '\n';
}

ForwardMap::ForwardMap(TransportSolver transport, ObservationSetup setup, PriorOperator prior)
    : transport_(std::move(transport)), setup_(std::move(setup)), prior_(std::move(prior)) {
  if (prior_.size() != transport_.size()) throw DomainError("forward map: prior/transport size mismatch");
  for (const auto& tw : setup_.time_weights) {
    if (tw.step < 0 || tw.step > transport_.num_steps() || (tw.w1 != 0.0 && tw.step >= transport_.num_steps())) {
      throw DomainError("forward map: observation setup does not match the time grid");
    }
  }
  if (setup_.interp_nodes.size() != setup_.sensor_points.size()) {
    throw DomainError("forward map: observation setup has no interpolation cache");
  }
  for (const auto& tri : setup_.interp_nodes) {
    for (int v : tri) {
      if (v < 0 || v >= transport_.size()) throw DomainError("forward map: sensor cache does not match the mesh");
    }
  }
}

Vector ForwardMap::observe(const std::vector<Vector>& traj) const {
  const int ns = setup_.num_sensors();
  Vector d(setup_.obs_dim());
  for (int l = 0; l < setup_.num_times(); ++l) {
    const TimeWeights& tw = setup_.time_weights[static_cast<std::size_t>(l)];
    const Vector& u0 = traj[static_cast<std::size_t>(tw.step)];
    const Vector* u1 = tw.w1 != 0.0 ? &traj[static_cast<std::size_t>(tw.step + 1)] : nullptr;
    for (int j = 0; j < ns; ++j) {
      const PointLocation& loc = setup_.interp[static_cast<std::size_t>(j)];
      const auto& tri = setup_.interp_nodes[static_cast<std::size_t>(j)];
      double v = 0.0;
      for (std::size_t a = 0; a < 3; ++a) {
        double nodal = tw.w0 * u0[tri[a]];
        if (u1) nodal += tw.w1 * (*u1)[tri[a]];
        v += loc.barycentric[a] * nodal;
      }
      d[setup_.flat_index(j, l)] = v;
    }
  }
  return d;
}

Vector ForwardMap::apply_F(const Vector& m) const {
  if (m.size() != param_dim()) throw DomainError("apply_F: parameter has wrong length");
  return observe(transport_.forward_solve(m));
}

Vector ForwardMap::apply_Fstar(const Vector& d) const {
  if (d.size() != obs_dim()) throw DomainError("apply_Fstar: observation vector has wrong length");
  const int ns = setup_.num_sensors();
  const Index n = param_dim();
  std::vector<Vector> loads(static_cast<std::size_t>(transport_.num_steps() + 1));
  auto scatter = [&](int step, double weight, int l) {
    Vector& g = loads[static_cast<std::size_t>(step)];
    if (g.size() == 0) g = Vector::Zero(n);
    for (int j = 0; j < ns; ++j) {
      const double v = weight * d[setup_.flat_index(j, l)];
      const PointLocation& loc = setup_.interp[static_cast<std::size_t>(j)];
      const auto& tri = setup_.interp_nodes[static_cast<std::size_t>(j)];
      for (std::size_t a = 0; a < 3; ++a) g[tri[a]] += loc.barycentric[a] * v;
    }
  };
  for (int l = 0; l < setup_.num_times(); ++l) {
    const TimeWeights& tw = setup_.time_weights[static_cast<std::size_t>(l)];
    scatter(tw.step, tw.w0, l);
    if (tw.w1 != 0.0) scatter(tw.step + 1, tw.w1, l);
  }
  return transport_.adjoint_solve(loads);
}

Vector ForwardMap::apply_Ftilde(const Vector& v) const { return apply_F(prior_.apply_cov_sqrt(v)); }

Vector ForwardMap::apply_Ftilde_star(const Vector& d) const {
  return prior_.apply_cov_sqrt(apply_Fstar(d));
}

PreconditionedForwardMap::PreconditionedForwardMap(ForwardMap fmap)
    : fmap_(std::move(fmap)),
      inv_sigma_(fmap_.setup().expand_weights(fmap_.setup().noise_sigma.cwiseInverse())) {}

Vector PreconditionedForwardMap::apply(const Vector& v) const {
  return inv_sigma_.cwiseProduct(fmap_.apply_Ftilde(v));
}

Vector PreconditionedForwardMap::apply_adjoint(const Vector& d) const {
  if (d.size() != rows()) throw DomainError("preconditioned map: observation vector has wrong length");
  return fmap_.apply_Ftilde_star(Vector(inv_sigma_.cwiseProduct(d)));
}

}  // namespace aoed
