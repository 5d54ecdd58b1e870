#include "aoed/whitening.hpp"

#include "aoed/random.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <sstream>

namespace aoed {

namespace {

// Chebyshev interpolation coefficients of t^{-1/2} mapped to [a, b].
std::vector<double> chebyshev_inv_sqrt(int degree, double a, double b) {
  const int m = degree + 1;
  std::vector<double> f(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const double x = std::cos(std::numbers::pi * (j + 0.5) / m);
    f[static_cast<std::size_t>(j)] = 1.0 / std::sqrt(0.5 * (b - a) * x + 0.5 * (b + a));
  }
  std::vector<double> c(static_cast<std::size_t>(m), 0.0);
  for (int k = 0; k < m; ++k) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
      s += f[static_cast<std::size_t>(j)] * std::cos(std::numbers::pi * k * (j + 0.5) / m);
    }
    c[static_cast<std::size_t>(k)] = 2.0 * s / m;
  }
  c[0] *= 0.5;
  return c;
}

}  // namespace

WhiteningOperator::WhiteningOperator(const SparseMatrix& mass, const Vector& lumped_mass,
                                     WhiteningOptions options)
    : n_(mass.rows()), options_(options), mass_(mass) {
  if (lumped_mass.size() != n_ || (lumped_mass.array() <= 0.0).any()) {
    throw DomainError("whitening: lumped mass must be positive with one entry per node");
  }
  lumped_inv_sqrt_ = lumped_mass.array().rsqrt();
  mode_ = options.mode;
  if (mode_ == WhiteningMode::automatic) {
    mode_ = n_ <= options.dense_limit ? WhiteningMode::dense : WhiteningMode::iterative;
  }

  if (mode_ == WhiteningMode::dense) {
    const Matrix scaled = lumped_inv_sqrt_.asDiagonal() * Matrix(mass_) * lumped_inv_sqrt_.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(scaled);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
      throw SolverError("whitening: scaled mass matrix is not positive definite");
    }
    dense_inv_sqrt_ = std::make_shared<const Matrix>(eig.operatorInverseSqrt());
    return;
  }

  if (options.iterations < 1 || !(options.lambda_min > 0.0) ||
      !(options.lambda_max > options.lambda_min)) {
    throw DomainError("whitening: need iterations >= 1 and 0 < lambda_min < lambda_max");
  }
  cheb_ = chebyshev_inv_sqrt(options.iterations, options.lambda_min, options.lambda_max);

  // Setup check on a fixed probe: Mt^{-1/2} Mt Mt^{-1/2} y should reproduce y.
  Rng rng = make_rng(0x5eed);
  const Vector y = standard_normal(rng, n_);
  const Vector z = apply_scaled_inv_sqrt(y);
  const Vector back = apply_scaled_inv_sqrt(apply_scaled(z));
  const double residual = (back - y).norm() / y.norm();
  if (!(residual < 1e-3)) {
    std::ostringstream msg;
    msg << "whitening: inverse square root iteration did not converge (identity residual "
        << residual << " with " << options.iterations << " applications)";
    throw SolverError(msg.str());
  }
}

Vector WhiteningOperator::apply_scaled(const Vector& x) const {
  return lumped_inv_sqrt_.cwiseProduct(mass_ * lumped_inv_sqrt_.cwiseProduct(x));
}

Vector WhiteningOperator::apply_scaled_inv_sqrt(const Vector& y) const {
  if (y.size() != n_) throw DomainError("whitening: vector length mismatch");
  if (mode_ == WhiteningMode::dense) return (*dense_inv_sqrt_) * y;

  // Clenshaw on T = (2 Mt - (a+b) I) / (b - a).
  const double a = options_.lambda_min, b = options_.lambda_max;
  auto apply_t = [&](const Vector& v) -> Vector {
    return (2.0 * apply_scaled(v) - (a + b) * v) / (b - a);
  };
  const int k = static_cast<int>(cheb_.size()) - 1;
  Vector b1 = Vector::Zero(n_), b2 = Vector::Zero(n_);
  for (int j = k; j >= 1; --j) {
    Vector bj = cheb_[static_cast<std::size_t>(j)] * y - b2;
    if (j < k) bj += 2.0 * apply_t(b1);
    b2 = std::move(b1);
    b1 = std::move(bj);
  }
  return cheb_[0] * y + (k >= 1 ? Vector(apply_t(b1) - b2) : Vector(-b2));
}

Vector WhiteningOperator::apply(const Vector& y) const {
  return lumped_inv_sqrt_.cwiseProduct(apply_scaled_inv_sqrt(y));
}

Matrix WhiteningOperator::apply(const Matrix& y) const {
  Matrix out(y.rows(), y.cols());
  for (Index j = 0; j < y.cols(); ++j) out.col(j) = apply(Vector(y.col(j)));
  return out;
}

std::vector<Vector> WhiteningOperator::whitened_gaussian(std::uint64_t seed, int count) const {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  Rng rng = make_rng(seed);
  for (int i = 0; i < count; ++i) out.push_back(apply(standard_normal(rng, n_)));
  return out;
}

}  // namespace aoed
