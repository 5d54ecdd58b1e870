#pragma once

#include "aoed/common.hpp"
#include "aoed/fem.hpp"

#include <cstdint>
#include <memory>

namespace aoed {

class WhiteningOperator;

/// Gaussian prior N(m0, A^{-2}) with A = M^{-1} L and L = alpha K + beta M
/// (natural boundary conditions). The square root A^{-1} = L^{-1} M is
/// M-symmetric; L and M are factorized once and shared by copies.
class PriorOperator {
 public:
  PriorOperator(const FemOperators& fem, double alpha, double beta, Vector mean = Vector());

  // Gamma^{1/2} v = L^{-1} M v
  Vector apply_cov_sqrt(const Vector& v) const;
  Matrix apply_cov_sqrt(const Matrix& v) const;
  // Gamma^{-1/2} v = M^{-1} L v
  Vector apply_cov_inv_sqrt(const Vector& v) const;
  Vector apply_cov(const Vector& v) const;
  Vector apply_precision(const Vector& v) const;

  Vector solve_elliptic(const Vector& rhs) const;  // L^{-1} rhs
  Vector solve_mass(const Vector& rhs) const;      // M^{-1} rhs

  /// m0 + A^{-1} L_iso y with y ~ N(0, I) drawn from `seed`.
  Vector sample(const WhiteningOperator& whitening, std::uint64_t seed) const;
  Vector sample_from_normal(const WhiteningOperator& whitening, const Vector& y) const;

  /// tr(Gamma_prior); computed on first use with 2n elliptic solves, cached.
  double trace() const;
  /// diag(Gamma_prior M^{-1}) = diag(L^{-1} M L^{-1}); cached.
  const Vector& pointwise_variance() const;

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  Index size() const { return n_; }
  const Vector& mean() const { return mean_; }
  const SparseMatrix& mass() const;
  const SparseMatrix& elliptic() const;

 private:
  struct State;
  void compute_diagnostics() const;

  double alpha_ = 0.0;
  double beta_ = 0.0;
  Index n_ = 0;
  Vector mean_;
  std::shared_ptr<State> state_;
};

}  // namespace aoed
