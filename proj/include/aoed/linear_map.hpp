#pragma once

#include "aoed/common.hpp"

#include <Eigen/SparseCholesky>

#include <memory>

namespace aoed {

enum class Execution { serial, parallel };

/// Linear map from R^n with the mass inner product to Euclidean R^q.
/// `apply_adjoint` is the adjoint with respect to those inner products,
/// i.e. M^{-1} G^T for a matrix representation G.
class LinearMap {
 public:
  virtual ~LinearMap() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual Vector apply(const Vector& x) const = 0;
  virtual Vector apply_adjoint(const Vector& y) const = 0;
};

/// Explicit matrix G with a sparse mass matrix on its domain.
class DenseLinearMap final : public LinearMap {
 public:
  DenseLinearMap(Matrix g, SparseMatrix mass);

  Index rows() const override { return g_.rows(); }
  Index cols() const override { return g_.cols(); }
  Vector apply(const Vector& x) const override { return g_ * x; }
  Vector apply_adjoint(const Vector& y) const override;

  const Matrix& matrix() const { return g_; }

 private:
  Matrix g_;
  std::shared_ptr<Eigen::SimplicialLLT<SparseMatrix>> mass_llt_;
};

namespace kernels {

/// Applies the map (or its adjoint) to every column of `x`. The parallel
/// variant distributes columns over OpenMP threads; both return identical
/// results because each column is computed independently.
Matrix apply_columns(const LinearMap& map, const Matrix& x, Execution exec);
Matrix apply_adjoint_columns(const LinearMap& map, const Matrix& y, Execution exec);

}  // namespace kernels

}  // namespace aoed
