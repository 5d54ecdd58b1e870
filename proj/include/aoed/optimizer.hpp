#pragma once

#include "aoed/common.hpp"
#include "aoed/objective.hpp"
#include "aoed/penalty.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace aoed {

using SmoothObjective = std::function<ObjectiveValue(const Vector&)>;

struct OptimizerOptions {
  int max_iter = 150;
  double grad_reduction = 1e4;  // stop once ||projected gradient|| falls by this factor
  int memory = 10;
  int max_line_search = 40;
  double armijo = 1e-4;
  double active_threshold = 1e-3;  // weights above this count as active sensors
  // Log-barrier variant: minimizes J(w) - mu sum log(w (1 - w)) for a
  // decreasing sequence of mu instead of projecting onto the box.
  bool log_barrier = false;
  double barrier_mu0 = 1e-2;
  double barrier_decrease = 0.1;
  int barrier_stages = 6;
};

enum class OptimizerStatus { converged, max_iterations, line_search_failure };
std::string to_string(OptimizerStatus s);

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double penalty = 0.0;
  double projected_grad_norm = 0.0;
  int n_active = 0;
};

struct DesignWeights {
  Vector w;
  PenaltySpec penalty;
  double active_threshold = 1e-3;

  int n_active() const { return static_cast<int>((w.array() > active_threshold).count()); }
};

struct OptimizationResult {
  DesignWeights design;
  OptimizerStatus status = OptimizerStatus::max_iterations;
  int iterations = 0;
  int evaluations = 0;
  double objective = 0.0;  // Theta(w)
  double penalty = 0.0;    // Phi(w), unscaled
  double initial_pg = 0.0;
  double final_pg = 0.0;
  std::vector<IterationRecord> history;

  double total() const { return objective + design.penalty.gamma * penalty; }
};

/// Minimizes Theta(w) + gamma Phi(w) over [0,1]^Ns by projected L-BFGS:
/// two-loop recursion on the free variables, steepest descent on the
/// binding ones, projected Armijo backtracking.
OptimizationResult optimize(const SmoothObjective& theta, const Vector& w0, const PenaltySpec& penalty,
                            const OptimizerOptions& options = {});

/// max_i ||w - proj_[0,1](w - g)|| style stationarity measure.
double projected_gradient_norm(const Vector& w, const Vector& g);

struct ContinuationStage {
  PenaltySpec penalty;
  OptimizationResult result;
};

struct ContinuationResult {
  DesignWeights design;
  bool binary = false;
  std::vector<int> non_binary;  // indices farther than binary_tol from {0,1}
  std::vector<ContinuationStage> stages;

  Vector rounded() const { return (design.w.array() > 0.5).cast<double>(); }
  int total_iterations() const;
};

/// (2/3)^i, i = 1..count by default.
std::vector<double> geometric_schedule(double ratio = 2.0 / 3.0, int count = 10);

/// Stage 0 with the l1 penalty from w0, then phi_eps stages for each eps,
/// each warm-started from the previous stage; gamma is fixed throughout.
ContinuationResult continuation_solve(const SmoothObjective& theta, const Vector& w0, double gamma,
                                      const std::vector<double>& eps_schedule,
                                      const OptimizerOptions& options = {}, double binary_tol = 1e-3);

/// 1 where w_i / sum(w) > threshold, else 0.
Vector threshold_l1_design(const Vector& w, double threshold = 4e-3);

/// Bisection on log(gamma) for an l1 design whose thresholded sensor count
/// equals `target` (best effort; returns the closest gamma found).
struct GammaSearchResult {
  double gamma = 0.0;
  int count = 0;
  OptimizationResult result;
};
GammaSearchResult gamma_for_sensor_count(const SmoothObjective& theta, const Vector& w0, int target,
                                         double gamma_lo, double gamma_hi, int max_steps = 20,
                                         const OptimizerOptions& options = {},
                                         double threshold = 4e-3);

// CSV: iter,objective,penalty,projected_grad_norm,n_active_sensors
void write_optimizer_log(std::ostream& out, const std::vector<IterationRecord>& history,
                         bool header = true);

}  // namespace aoed
