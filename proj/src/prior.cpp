#include "aoed/prior.hpp"

#include "aoed/random.hpp"
#include "aoed/whitening.hpp"

#include <Eigen/SparseCholesky>

#include <mutex>

namespace aoed {

struct PriorOperator::State {
  SparseMatrix mass;
  SparseMatrix elliptic;
  Eigen::SimplicialLLT<SparseMatrix> elliptic_factor;
  Eigen::SimplicialLLT<SparseMatrix> mass_factor;

  std::once_flag diagnostics_once;
  double trace = 0.0;
  Vector pointwise_variance;
};

namespace {

Vector checked(const Vector& x) {
  if (!x.allFinite()) throw SolverError("prior: non-finite solve result");
  return x;
}

}  // namespace

PriorOperator::PriorOperator(const FemOperators& fem, double alpha, double beta, Vector mean)
    : alpha_(alpha), beta_(beta), n_(fem.n), state_(std::make_shared<State>()) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw DomainError("prior: alpha and beta must be positive");
  }
  mean_ = mean.size() == 0 ? Vector::Zero(n_) : std::move(mean);
  if (mean_.size() != n_) throw DomainError("prior: mean has wrong length");

  state_->mass = fem.mass;
  state_->elliptic = alpha * fem.stiffness + beta * fem.mass;
  state_->elliptic_factor.compute(state_->elliptic);
  if (state_->elliptic_factor.info() != Eigen::Success) {
    throw SolverError("prior: alpha K + beta M is not symmetric positive definite");
  }
  state_->mass_factor.compute(state_->mass);
  if (state_->mass_factor.info() != Eigen::Success) {
    throw SolverError("prior: mass matrix is not symmetric positive definite");
  }
}

const SparseMatrix& PriorOperator::mass() const { return state_->mass; }
const SparseMatrix& PriorOperator::elliptic() const { return state_->elliptic; }

Vector PriorOperator::solve_elliptic(const Vector& rhs) const {
  return checked(state_->elliptic_factor.solve(rhs));
}

Vector PriorOperator::solve_mass(const Vector& rhs) const {
  return checked(state_->mass_factor.solve(rhs));
}

Vector PriorOperator::apply_cov_sqrt(const Vector& v) const {
  if (v.size() != n_) throw DomainError("prior: vector length mismatch");
  return solve_elliptic(state_->mass * v);
}

Matrix PriorOperator::apply_cov_sqrt(const Matrix& v) const {
  if (v.rows() != n_) throw DomainError("prior: matrix row count mismatch");
  Matrix rhs = state_->mass * v;
  Matrix out = state_->elliptic_factor.solve(rhs);
  if (!out.allFinite()) throw SolverError("prior: non-finite solve result");
  return out;
}

Vector PriorOperator::apply_cov_inv_sqrt(const Vector& v) const {
  if (v.size() != n_) throw DomainError("prior: vector length mismatch");
  return solve_mass(state_->elliptic * v);
}

Vector PriorOperator::apply_cov(const Vector& v) const { return apply_cov_sqrt(apply_cov_sqrt(v)); }

Vector PriorOperator::apply_precision(const Vector& v) const {
  return apply_cov_inv_sqrt(apply_cov_inv_sqrt(v));
}

Vector PriorOperator::sample_from_normal(const WhiteningOperator& whitening, const Vector& y) const {
  return mean_ + apply_cov_sqrt(whitening.apply(y));
}

Vector PriorOperator::sample(const WhiteningOperator& whitening, std::uint64_t seed) const {
  Rng rng = make_rng(seed);
  return sample_from_normal(whitening, standard_normal(rng, n_));
}

void PriorOperator::compute_diagnostics() const {
  std::call_once(state_->diagnostics_once, [this] {
    const SparseMatrix& mass = state_->mass;
    Vector variance(n_);
    double trace = 0.0;
#pragma omp parallel for reduction(+ : trace) schedule(static)
    for (Index j = 0; j < n_; ++j) {
      Vector e = Vector::Zero(n_);
      e[j] = 1.0;
      const Vector x = state_->elliptic_factor.solve(e);           // L^{-1} e_j
      const Vector y = state_->elliptic_factor.solve(Vector(mass.col(j)));  // L^{-1} M e_j
      const Vector mx = mass * x;
      variance[j] = x.dot(mx);
      trace += mx.dot(y);
    }
    state_->pointwise_variance = std::move(variance);
    state_->trace = trace;
  });
}

double PriorOperator::trace() const {
  compute_diagnostics();
  return state_->trace;
}

const Vector& PriorOperator::pointwise_variance() const {
  compute_diagnostics();
  return state_->pointwise_variance;
}

}  // namespace aoed
