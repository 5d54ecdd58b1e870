#pragma once

#include "aoed/common.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace aoed {

enum class WhiteningMode { automatic, dense, iterative };

struct WhiteningOptions {
  WhiteningMode mode = WhiteningMode::automatic;
  int iterations = 10;          // applications of the scaled mass matrix (iterative mode)
  double lambda_min = 0.25;     // spectral interval of Ml^{-1/2} M Ml^{-1/2};
  double lambda_max = 1.0;      // [1/4, 1] holds for linear triangles
  Index dense_limit = 2000;     // automatic mode picks dense at or below this size
};

/// Isomorphism L = Ml^{-1/2} Mt^{-1/2} between Euclidean R^n and R^n with
/// the mass inner product, where Mt = Ml^{-1/2} M Ml^{-1/2}. Satisfies
/// <Lx, Ly>_M = <x, y>.
///
/// Dense mode forms Mt^{-1/2} from a symmetric eigendecomposition. Iterative
/// mode evaluates a Chebyshev interpolant of t^{-1/2} on the spectral interval
/// by Clenshaw recurrence, using exactly `iterations` products with Mt.
class WhiteningOperator {
 public:
  WhiteningOperator(const SparseMatrix& mass, const Vector& lumped_mass,
                    WhiteningOptions options = {});

  Vector apply(const Vector& y) const;
  Matrix apply(const Matrix& y) const;

  // Mt^{-1/2} y alone.
  Vector apply_scaled_inv_sqrt(const Vector& y) const;

  /// `count` vectors L y with y ~ N(0, I), deterministic in `seed`.
  std::vector<Vector> whitened_gaussian(std::uint64_t seed, int count) const;

  WhiteningMode mode() const { return mode_; }
  Index size() const { return n_; }
  int iterations() const { return options_.iterations; }
  const std::vector<double>& chebyshev_coefficients() const { return cheb_; }

 private:
  Vector apply_scaled(const Vector& x) const;

  Index n_ = 0;
  WhiteningMode mode_ = WhiteningMode::dense;
  WhiteningOptions options_;
  SparseMatrix mass_;
  Vector lumped_inv_sqrt_;
  std::shared_ptr<const Matrix> dense_inv_sqrt_;
  std::vector<double> cheb_;
};

}  // namespace aoed
