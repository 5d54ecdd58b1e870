#pragma once

#include "aoed/common.hpp"
#include "aoed/linear_map.hpp"
#include "aoed/mesh.hpp"
#include "aoed/observation.hpp"
#include "aoed/prior.hpp"
#include "aoed/surrogate.hpp"
#include "aoed/whitening.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

namespace aoed {

enum class PosteriorMode { dense, surrogate };

/// Explicit q x n matrix of F, one forward solve per column.
Matrix assemble_dense_F(const ForwardMap& fmap, Execution exec = Execution::parallel);

struct BayesRiskResult {
  double trace = 0.0;              // tr(Gamma_post)
  double identity_residual = 0.0;  // |tr(G^2 Hmis) + tr(G^2 Gprior^{-1}) - tr(G)| / tr(G)
  double mc_estimate = 0.0;        // prior-averaged MSE of the posterior mean, M-norm
  double standard_error = 0.0;
  double z_score = 0.0;
};

/// Gaussian posterior for a weighted design. In dense mode the Hessian
///   H(w) = F^T Sigma^{-1} W F + L M^{-1} L     (Euclidean form)
/// is assembled and factorized; Gamma_post = H^{-1} M. In surrogate mode all
/// quantities come from the low-rank factors and the prior.
class PosteriorModel {
 public:
  static constexpr Index kDenseLimit = 2000;

  /// `noise_sigma` holds one value per sensor; the rows of F are time-major
  /// blocks of that length.
  static PosteriorModel dense(Matrix F, Vector noise_sigma, PriorOperator prior,
                              WhiteningOperator whitening);
  static PosteriorModel dense(const ForwardMap& fmap, const WhiteningOperator& whitening,
                              Execution exec = Execution::parallel);
  /// `fmap` is only needed for posterior_mean.
  static PosteriorModel surrogate(std::shared_ptr<const LowRankSurrogate> s, PriorOperator prior,
                                  WhiteningOperator whitening,
                                  std::optional<ForwardMap> fmap = std::nullopt);

  PosteriorMode mode() const { return mode_; }
  Index size() const { return prior_.size(); }
  int num_sensors() const { return static_cast<int>(noise_sigma_.size()); }

  double exact_trace(const Vector& w) const;
  /// diag(Gamma_post M^{-1})
  Vector pointwise_variance(const Vector& w) const;
  /// m_post for data d (length q): H^{-1}(F* Sigma^{-1} W d + Gamma^{-1} m0).
  Vector posterior_mean(const Vector& w, const Vector& d) const;
  /// Samples m_post + Q L y; the mean uses `data` if given, else d = 0.
  /// Sample i draws from its own RNG stream, so results do not depend on the
  /// number of threads.
  std::vector<Vector> sample_posterior(const Vector& w, int count, std::uint64_t seed,
                                       const Vector* data = nullptr) const;
  /// Posterior covariance square-root factor Q applied to x (Q Q* = Gamma_post).
  Vector apply_sqrt_factor(const Vector& w, const Vector& x) const;

  /// Dense mode only: algebraic identity residual and a nested Monte Carlo
  /// estimate of the Bayes risk. Noise for sensor j is drawn with variance
  /// sigma_j^2 / w_j (sensors with w_j = 0 are unobserved), the model under
  /// which the weighted posterior is the exact one.
  BayesRiskResult bayes_risk_check(const Vector& w, int n_outer, int n_inner,
                                   std::uint64_t seed) const;

  /// Dense mode only: the Euclidean Hessian H(w).
  Matrix dense_hessian(const Vector& w) const;
  /// Dense mode only: the assembled q x n forward matrix (noise not applied).
  const Matrix& dense_F() const;
  const Vector& noise_sigma() const { return noise_sigma_; }

 private:
  PosteriorModel(PosteriorMode mode, PriorOperator prior, WhiteningOperator whitening);
  Vector expand(const Vector& w) const;
  void require_dense(const char* what) const;

  PosteriorMode mode_;
  PriorOperator prior_;
  WhiteningOperator whitening_;
  Vector noise_sigma_;
  // dense mode
  std::shared_ptr<const Matrix> F_;
  std::shared_ptr<const Matrix> prior_precision_;  // L M^{-1} L
  // surrogate mode
  std::shared_ptr<const LowRankSurrogate> surrogate_;
  std::shared_ptr<const Matrix> sqrt_v_;   // Gamma^{1/2} V
  std::shared_ptr<const Matrix> sqrt_v_gram_;  // (Gamma^{1/2} V)^T M (Gamma^{1/2} V)
  std::optional<ForwardMap> fmap_;
};

// CSV: node_index,x,y,variance
void write_variance_csv(std::ostream& out, const Mesh& mesh, const Vector& variance);

}  // namespace aoed
