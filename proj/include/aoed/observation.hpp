#pragma once

#include "aoed/common.hpp"
#include "aoed/linear_map.hpp"
#include "aoed/mesh.hpp"
#include "aoed/prior.hpp"
#include "aoed/transport.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace aoed {

// Linear interpolation of one observation time onto the time-step grid:
// u(tau) = w0 u^step + w1 u^{step+1}.
struct TimeWeights {
  int step = 0;
  double w0 = 1.0;
  double w1 = 0.0;
};

/// Sensors, observation times and the cached space/time interpolation.
/// Observation vectors are time-major: entry l*Ns + j is sensor j at time l.
struct ObservationSetup {
  std::vector<Point2> sensor_points;
  std::vector<double> obs_times;
  std::vector<PointLocation> interp;
  std::vector<std::array<int, 3>> interp_nodes;  // vertices of each sensor's triangle
  std::vector<TimeWeights> time_weights;
  Vector noise_sigma;  // per sensor

  int num_sensors() const { return static_cast<int>(sensor_points.size()); }
  int num_times() const { return static_cast<int>(obs_times.size()); }
  Index obs_dim() const { return static_cast<Index>(num_sensors()) * num_times(); }

  Index flat_index(int sensor, int time) const {
    return static_cast<Index>(time) * num_sensors() + sensor;
  }
  // (sensor, time) of a flat index
  std::pair<int, int> split_index(Index flat) const {
    const auto ns = static_cast<Index>(num_sensors());
    return {static_cast<int>(flat % ns), static_cast<int>(flat / ns)};
  }

  /// Per-sensor weights repeated over all observation times.
  Vector expand_weights(const Vector& w) const;
};

/// Locates every sensor and precomputes time weights. `noise_sigma` may be
/// empty (sigma = 1 everywhere) or hold one positive value per sensor.
ObservationSetup make_observation_setup(const Mesh& mesh, std::vector<Point2> sensors,
                                        std::vector<double> obs_times, double final_time,
                                        int num_steps, Vector noise_sigma = Vector());

TimeWeights time_weights_for(double tau, double final_time, int num_steps);

std::vector<double> equispaced_times(double t0, double t1, int count);

/// Regular grid of spacing `spacing`, centred in the unit square, keeping
/// points at least `clearance` away from the outer boundary and from every
/// hole.
std::vector<Point2> default_sensor_grid(const std::vector<Rect>& holes, double spacing = 0.075,
                                        double clearance = 0.04);

// One "x y" line per sensor.
std::vector<Point2> read_sensors(std::istream& in);
std::vector<Point2> read_sensors_file(const std::filesystem::path& path);
void write_sensors(std::ostream& out, const std::vector<Point2>& sensors);

/// Parameter-to-observable map F = B S (S the trajectory map, B the
/// space-time observation), its mass-weighted adjoint and the
/// prior-preconditioned versions. Copies share the underlying solver.
class ForwardMap {
 public:
  ForwardMap(TransportSolver transport, ObservationSetup setup, PriorOperator prior);

  Vector apply_F(const Vector& m) const;
  // <F m, d> = <m, F* d>_M
  Vector apply_Fstar(const Vector& d) const;
  // F Gamma^{1/2}
  Vector apply_Ftilde(const Vector& v) const;
  Vector apply_Ftilde_star(const Vector& d) const;

  /// Space-time observation of an already computed trajectory.
  Vector observe(const std::vector<Vector>& trajectory) const;

  Index obs_dim() const { return setup_.obs_dim(); }
  Index param_dim() const { return transport_.size(); }
  const ObservationSetup& setup() const { return setup_; }
  const TransportSolver& transport() const { return transport_; }
  const PriorOperator& prior() const { return prior_; }

 private:
  TransportSolver transport_;
  ObservationSetup setup_;
  PriorOperator prior_;
};

/// Sigma^{-1/2} F Gamma^{1/2} as a LinearMap, the operator the surrogate
/// approximates.
class PreconditionedForwardMap final : public LinearMap {
 public:
  explicit PreconditionedForwardMap(ForwardMap fmap);

  Index rows() const override { return fmap_.obs_dim(); }
  Index cols() const override { return fmap_.param_dim(); }
  Vector apply(const Vector& v) const override;
  Vector apply_adjoint(const Vector& d) const override;

  const ForwardMap& forward_map() const { return fmap_; }

 private:
  ForwardMap fmap_;
  Vector inv_sigma_;  // length q
};

}  // namespace aoed
