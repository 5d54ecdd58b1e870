#include "aoed/objective.hpp"

#include <Eigen/Eigenvalues>

#include <exception>

namespace aoed {

TraceEstimatorSet make_trace_estimator(const WhiteningOperator& whitening, int count,
                                       std::uint64_t seed) {
  if (count < 1) throw DomainError("trace estimator: need at least one probe vector");
  TraceEstimatorSet set;
  set.seed = seed;
  set.z = whitening.whitened_gaussian(seed, count);
  return set;
}

OedObjective::OedObjective(std::shared_ptr<const LowRankSurrogate> surrogate, PriorOperator prior,
                           TraceEstimatorSet estimator, Execution execution)
    : surrogate_(std::move(surrogate)),
      prior_(std::move(prior)),
      estimator_(std::move(estimator)),
      execution_(execution),
      evaluations_(std::make_shared<std::atomic<long>>(0)) {
  if (!surrogate_) throw DomainError("objective: no surrogate");
  const LowRankSurrogate& s = *surrogate_;
  if (s.param_dim() != prior_.size()) throw DomainError("objective: surrogate/prior size mismatch");
  if (estimator_.count() < 1) throw DomainError("objective: empty trace estimator set");
  const int ns = s.num_sensors;
  num_times_ = static_cast<int>(s.obs_dim() / ns);
  const int r = s.rank();
  const int n_tr = estimator_.count();

  outside_norm2_.resize(n_tr);
  coeff_.resize(r, n_tr);
  const SparseMatrix& mass = prior_.mass();
  for (int i = 0; i < n_tr; ++i) {
    const Vector& z = estimator_.z[static_cast<std::size_t>(i)];
    if (z.size() != prior_.size()) throw DomainError("objective: probe vector has wrong length");
    const Vector sz = prior_.apply_cov_sqrt(z);
    coeff_.col(i) = s.mass_v.transpose() * sz;
    // part of S z outside range(V); w-independent, kept apart so the design-dependent
    // part of theta is not swamped by cancellation against the large prior trace
    const Vector outside = sz - s.V * coeff_.col(i);
    outside_norm2_[i] = mass_inner(mass, outside, outside);
  }

  us_ = s.U * s.S.asDiagonal();
  atoms_.assign(static_cast<std::size_t>(ns), Matrix());
  for (int j = 0; j < ns; ++j) {
    Matrix rows(num_times_, r);
    for (int l = 0; l < num_times_; ++l) rows.row(l) = us_.row(static_cast<Index>(l) * ns + j);
    atoms_[static_cast<std::size_t>(j)] = rows.transpose() * rows;
  }
}

void OedObjective::check_weights(const Vector& w) const {
  if (w.size() != num_sensors()) throw DomainError("objective: weights need one entry per sensor");
  if ((w.array() < 0.0).any() || (w.array() > 1.0).any() || !w.allFinite()) {
    throw DomainError("objective: weights must lie in [0, 1]");
  }
}

ObjectiveValue OedObjective::evaluate(const Vector& w) const {
  return execution_ == Execution::serial ? evaluate_reference(w) : evaluate_parallel(w);
}

ObjectiveValue OedObjective::evaluate_reference(const Vector& w) const {
  check_weights(w);
  evaluations_->fetch_add(1, std::memory_order_relaxed);
  const LowRankSurrogate& s = *surrogate_;
  const int ns = num_sensors();
  const int n_tr = estimator_.count();
  const HessianFactors f = hessian_factors(s, w, false);
  ObjectiveValue out;
  out.gradient = Vector::Zero(ns);
  for (int i = 0; i < n_tr; ++i) {
    const Vector& z = estimator_.z[static_cast<std::size_t>(i)];
    const auto [q_hat, q] = apply_H_inv(s, f, prior_, z);
    out.value += mass_inner(prior_.mass(), z, q);
    const Vector d = apply_Fq(s, q_hat);
    for (int l = 0; l < num_times_; ++l) {
      out.gradient -= d.segment(static_cast<Index>(l) * ns, ns).cwiseAbs2();
    }
  }
  out.value /= n_tr;
  out.gradient /= n_tr;
  return out;
}

ObjectiveValue OedObjective::evaluate_parallel(const Vector& w) const {
  check_weights(w);
  evaluations_->fetch_add(1, std::memory_order_relaxed);
  const int ns = num_sensors();
  const int n_tr = estimator_.count();
  const Index r = coeff_.rows();

  Matrix g = Matrix::Zero(r, r);
  for (int j = 0; j < ns; ++j) {
    if (w[j] != 0.0) g.noalias() += w[j] * atoms_[static_cast<std::size_t>(j)];
  }
  g = 0.5 * (g + g.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  const Matrix& e = eig.eigenvectors();
  const Vector lambda = eig.eigenvalues().cwiseMax(0.0);
  const Vector dvec = lambda.array() / (1.0 + lambda.array());
  const Vector keep = (1.0 + lambda.array()).inverse();

  // a_i = E^T c_i ; reduced q_hat coefficients c_i - E D a_i
  const Matrix a = e.transpose() * coeff_;
  const Matrix c_hat = coeff_ - e * (dvec.asDiagonal() * a);

  Vector theta(n_tr);
  Matrix contrib(ns, n_tr);
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n_tr; ++i) {
    try {
      theta[i] = keep.dot(a.col(i).cwiseAbs2());
      const Vector d = us_ * c_hat.col(i);
      Vector acc = Vector::Zero(ns);
      for (int l = 0; l < num_times_; ++l) acc += d.segment(static_cast<Index>(l) * ns, ns).cwiseAbs2();
      contrib.col(i) = acc;
    } catch (...) {
#pragma omp critical(aoed_objective)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  ObjectiveValue out;
  out.gradient = Vector::Zero(ns);
  double variable = 0.0;
  for (int i = 0; i < n_tr; ++i) {
    out.value += outside_norm2_[i];
    variable += theta[i];
    out.gradient -= contrib.col(i);
  }
  out.value = (out.value + variable) / n_tr;
  out.gradient /= n_tr;
  return out;
}

}  // namespace aoed
