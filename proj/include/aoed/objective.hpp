#pragma once

#include "aoed/common.hpp"
#include "aoed/linear_map.hpp"
#include "aoed/prior.hpp"
#include "aoed/surrogate.hpp"
#include "aoed/whitening.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <vector>

namespace aoed {

/// Whitened Gaussian probes z = L y, y ~ N(0, I), so E[<z, A z>_M] = tr(A)
/// for M-symmetric A. Fixed for a whole optimization run.
struct TraceEstimatorSet {
  std::vector<Vector> z;
  std::uint64_t seed = 0;
  int count() const { return static_cast<int>(z.size()); }
};

TraceEstimatorSet make_trace_estimator(const WhiteningOperator& whitening, int count,
                                       std::uint64_t seed);

struct ObjectiveValue {
  double value = 0.0;
  Vector gradient;
};

/// Randomized A-optimal objective
///   Theta(w) = (1/N) sum_i <z_i, H(w)^{-1} z_i>_M
/// and its gradient, both from the low-rank surrogate (no PDE solves).
///
/// `evaluate_reference` follows the per-probe recipe literally and serially:
/// factor, q_hat/q by SMW, d = F~_r q_hat, squared sums per sensor.
/// `evaluate_parallel` caches Gamma^{1/2} z_i in surrogate coordinates and
/// the per-sensor Gram atoms, then runs probes over OpenMP threads; reductions
/// are done in fixed probe order so results do not depend on thread count.
class OedObjective {
 public:
  OedObjective(std::shared_ptr<const LowRankSurrogate> surrogate, PriorOperator prior,
               TraceEstimatorSet estimator, Execution execution = Execution::parallel);

  ObjectiveValue evaluate(const Vector& w) const;
  ObjectiveValue evaluate_reference(const Vector& w) const;
  ObjectiveValue evaluate_parallel(const Vector& w) const;

  double objective(const Vector& w) const { return evaluate(w).value; }
  Vector gradient(const Vector& w) const { return evaluate(w).gradient; }

  int num_sensors() const { return surrogate_->num_sensors; }
  long evaluations() const { return evaluations_->load(); }
  const LowRankSurrogate& surrogate() const { return *surrogate_; }
  const TraceEstimatorSet& estimator() const { return estimator_; }
  const PriorOperator& prior() const { return prior_; }

 private:
  void check_weights(const Vector& w) const;

  std::shared_ptr<const LowRankSurrogate> surrogate_;
  PriorOperator prior_;
  TraceEstimatorSet estimator_;
  Execution execution_;
  int num_times_ = 0;
  // reduced-coordinate caches
  Vector outside_norm2_;            // M-norm^2 of the part of Gamma^{1/2} z_i outside range(V)
  Matrix coeff_;                    // r x N, V* Gamma^{1/2} z_i
  std::vector<Matrix> atoms_;       // per sensor: S U_j^T U_j S  (r x r)
  Matrix us_;                       // U S
  std::shared_ptr<std::atomic<long>> evaluations_;
};

}  // namespace aoed
