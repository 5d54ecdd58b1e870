#include "aoed/linear_map.hpp"

#include <exception>

namespace aoed {

DenseLinearMap::DenseLinearMap(Matrix g, SparseMatrix mass)
    : g_(std::move(g)), mass_llt_(std::make_shared<Eigen::SimplicialLLT<SparseMatrix>>(mass)) {
  if (mass.rows() != g_.cols() || mass.cols() != g_.cols()) {
    throw DomainError("dense map: mass matrix does not match the domain dimension");
  }
  if (mass_llt_->info() != Eigen::Success) throw SolverError("dense map: mass factorization failed");
}

Vector DenseLinearMap::apply_adjoint(const Vector& y) const {
  return mass_llt_->solve(Vector(g_.transpose() * y));
}

namespace kernels {

namespace {

template <class Fn>
Matrix map_columns(const Matrix& x, Index out_rows, Execution exec, Fn&& fn) {
  Matrix out(out_rows, x.cols());
  const Index cols = x.cols();
  if (exec == Execution::serial) {
    for (Index j = 0; j < cols; ++j) out.col(j) = fn(Vector(x.col(j)));
    return out;
  }
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (Index j = 0; j < cols; ++j) {
    try {
      out.col(j) = fn(Vector(x.col(j)));
    } catch (...) {
#pragma omp critical(aoed_apply_columns)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace

Matrix apply_columns(const LinearMap& map, const Matrix& x, Execution exec) {
  if (x.rows() != map.cols()) throw DomainError("apply_columns: dimension mismatch");
  return map_columns(x, map.rows(), exec, [&](const Vector& v) { return map.apply(v); });
}

Matrix apply_adjoint_columns(const LinearMap& map, const Matrix& y, Execution exec) {
  if (y.rows() != map.rows()) throw DomainError("apply_adjoint_columns: dimension mismatch");
  return map_columns(y, map.cols(), exec, [&](const Vector& v) { return map.apply_adjoint(v); });
}

}  // namespace kernels

}  // namespace aoed
