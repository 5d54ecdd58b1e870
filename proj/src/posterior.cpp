#include "aoed/posterior.hpp"

#include "aoed/random.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <exception>
#include <iomanip>
#include <ostream>

namespace aoed {

Matrix assemble_dense_F(const ForwardMap& fmap, Execution exec) {
  const Index n = fmap.param_dim();
  if (n > PosteriorModel::kDenseLimit) throw DomainError("dense F: problem size above the dense cap");
  Matrix f(fmap.obs_dim(), n);
  std::exception_ptr failure;
  auto column = [&](Index j) {
    Vector e = Vector::Zero(n);
    e[j] = 1.0;
    f.col(j) = fmap.apply_F(e);
  };
  if (exec == Execution::serial) {
    for (Index j = 0; j < n; ++j) column(j);
    return f;
  }
#pragma omp parallel for schedule(dynamic, 4)
  for (Index j = 0; j < n; ++j) {
    try {
      column(j);
    } catch (...) {
#pragma omp critical(aoed_dense_f)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return f;
}

PosteriorModel::PosteriorModel(PosteriorMode mode, PriorOperator prior, WhiteningOperator whitening)
    : mode_(mode), prior_(std::move(prior)), whitening_(std::move(whitening)) {}

PosteriorModel PosteriorModel::dense(Matrix F, Vector noise_sigma, PriorOperator prior,
                                     WhiteningOperator whitening) {
  const Index n = prior.size();
  if (n > kDenseLimit) throw DomainError("posterior: dense mode is limited to n <= 2000");
  if (F.cols() != n || noise_sigma.size() == 0 || F.rows() % noise_sigma.size() != 0) {
    throw DomainError("posterior: F does not match the prior or the sensor layout");
  }
  PosteriorModel pm(PosteriorMode::dense, std::move(prior), std::move(whitening));
  pm.noise_sigma_ = std::move(noise_sigma);
  pm.F_ = std::make_shared<const Matrix>(std::move(F));
  Eigen::SimplicialLLT<SparseMatrix> mass_llt(pm.prior_.mass());
  const Matrix l = Matrix(pm.prior_.elliptic());
  Matrix pp = l * Matrix(mass_llt.solve(l));
  pp = 0.5 * (pp + pp.transpose()).eval();
  pm.prior_precision_ = std::make_shared<const Matrix>(std::move(pp));
  return pm;
}

PosteriorModel PosteriorModel::dense(const ForwardMap& fmap, const WhiteningOperator& whitening,
                                     Execution exec) {
  return dense(assemble_dense_F(fmap, exec), fmap.setup().noise_sigma, fmap.prior(), whitening);
}

PosteriorModel PosteriorModel::surrogate(std::shared_ptr<const LowRankSurrogate> s, PriorOperator prior,
                                         WhiteningOperator whitening, std::optional<ForwardMap> fmap) {
  if (!s || s->param_dim() != prior.size()) throw DomainError("posterior: surrogate/prior mismatch");
  PosteriorModel pm(PosteriorMode::surrogate, std::move(prior), std::move(whitening));
  pm.noise_sigma_ = fmap ? fmap->setup().noise_sigma : Vector::Ones(s->num_sensors);
  if (pm.noise_sigma_.size() != s->num_sensors) throw DomainError("posterior: sensor count mismatch");
  Matrix p = pm.prior_.apply_cov_sqrt(s->V);
  Matrix gram = p.transpose() * (pm.prior_.mass() * p);
  pm.sqrt_v_ = std::make_shared<const Matrix>(std::move(p));
  pm.sqrt_v_gram_ = std::make_shared<const Matrix>(std::move(gram));
  pm.surrogate_ = std::move(s);
  pm.fmap_ = std::move(fmap);
  return pm;
}

Vector PosteriorModel::expand(const Vector& w) const {
  const Index ns = noise_sigma_.size();
  if (w.size() != ns) throw DomainError("posterior: weights need one entry per sensor");
  if ((w.array() < 0.0).any() || !w.allFinite()) throw DomainError("posterior: weights must be non-negative");
  const Index q = mode_ == PosteriorMode::dense ? F_->rows() : surrogate_->obs_dim();
  Vector out(q);
  for (Index b = 0; b < q / ns; ++b) out.segment(b * ns, ns) = w.cwiseQuotient(noise_sigma_.cwiseAbs2());
  return out;
}

void PosteriorModel::require_dense(const char* what) const {
  if (mode_ != PosteriorMode::dense) throw DomainError(std::string(what) + " needs dense mode");
}

Matrix PosteriorModel::dense_hessian(const Vector& w) const {
  require_dense("dense_hessian");
  const Vector wq = expand(w);
  Matrix h = F_->transpose() * wq.asDiagonal() * (*F_) + *prior_precision_;
  return 0.5 * (h + h.transpose());
}

const Matrix& PosteriorModel::dense_F() const {
  require_dense("dense_F");
  return *F_;
}

double PosteriorModel::exact_trace(const Vector& w) const {
  if (mode_ == PosteriorMode::dense) {
    Eigen::LLT<Matrix> llt(dense_hessian(w));
    if (llt.info() != Eigen::Success) throw SolverError("posterior: Hessian is not positive definite");
    return llt.solve(Matrix(prior_.mass())).trace();
  }
  (void)expand(w);
  const HessianFactors f = hessian_factors(*surrogate_, w, false);
  const Matrix ge = *sqrt_v_gram_ * f.E;
  double correction = 0.0;
  for (Index k = 0; k < f.D.size(); ++k) correction += f.D[k] * f.E.col(k).dot(ge.col(k));
  return prior_.trace() - correction;
}

Vector PosteriorModel::pointwise_variance(const Vector& w) const {
  if (mode_ == PosteriorMode::dense) {
    Eigen::LLT<Matrix> llt(dense_hessian(w));
    if (llt.info() != Eigen::Success) throw SolverError("posterior: Hessian is not positive definite");
    return llt.solve(Matrix::Identity(size(), size())).diagonal();
  }
  (void)expand(w);
  const HessianFactors f = hessian_factors(*surrogate_, w, false);
  const Matrix pe = *sqrt_v_ * f.E;
  return prior_.pointwise_variance() - pe.cwiseAbs2() * f.D;
}

Vector PosteriorModel::posterior_mean(const Vector& w, const Vector& d) const {
  const Vector wq = expand(w);
  if (d.size() != wq.size()) throw DomainError("posterior_mean: data has wrong length");
  const bool has_mean = prior_.mean().size() == size();
  if (mode_ == PosteriorMode::dense) {
    Vector rhs = F_->transpose() * wq.cwiseProduct(d);
    if (has_mean) rhs += *prior_precision_ * prior_.mean();
    Eigen::LLT<Matrix> llt(dense_hessian(w));
    return llt.solve(rhs);
  }
  if (!fmap_) throw DomainError("posterior_mean: surrogate mode needs the forward map");
  Vector z = fmap_->apply_Fstar(Vector(wq.cwiseProduct(d)));
  if (has_mean) z += prior_.apply_precision(prior_.mean());
  const HessianFactors f = hessian_factors(*surrogate_, w, false);
  return apply_H_inv(*surrogate_, f, prior_, z).second;
}

Vector PosteriorModel::apply_sqrt_factor(const Vector& w, const Vector& x) const {
  if (mode_ == PosteriorMode::dense) {
    // Q = H^{-1/2}-type factor: Q Q* = H^{-1} M with Q = R^{-T} R_M where
    // H = R R^T (LLT) and M = R_M^T R_M.
    Eigen::LLT<Matrix> llt(dense_hessian(w));
    const Matrix m = Matrix(prior_.mass());
    Eigen::LLT<Matrix> mllt(m);
    return llt.matrixU().solve(Vector(mllt.matrixU() * x));
  }
  (void)expand(w);
  const HessianFactors f = hessian_factors(*surrogate_, w, false);
  const Vector shrink = 1.0 - (1.0 + f.lambda.array()).rsqrt();
  const Vector c = surrogate_->mass_v.transpose() * x;
  return prior_.apply_cov_sqrt(Vector(x - surrogate_->V * (f.E * shrink.cwiseProduct(f.E.transpose() * c))));
}

std::vector<Vector> PosteriorModel::sample_posterior(const Vector& w, int count, std::uint64_t seed,
                                                     const Vector* data) const {
  if (count < 0) throw DomainError("sample_posterior: negative count");
  const Index n = size();
  const Vector wq = expand(w);
  Vector mean;
  if (data) {
    mean = posterior_mean(w, *data);
  } else if (prior_.mean().size() == n) {
    mean = posterior_mean(w, Vector::Zero(wq.size()));
  } else {
    mean = Vector::Zero(n);
  }
  std::vector<Vector> out(static_cast<std::size_t>(count));
  if (mode_ == PosteriorMode::dense) {
    Eigen::LLT<Matrix> llt(dense_hessian(w));
    if (llt.info() != Eigen::Success) throw SolverError("posterior: Hessian is not positive definite");
#pragma omp parallel for schedule(static)
    for (int i = 0; i < count; ++i) {
      Rng rng = make_rng(seed, static_cast<std::uint64_t>(i));
      // covariance of H^{-1/2}-draws is H^{-1} = Gamma_post M^{-1}
      out[static_cast<std::size_t>(i)] = mean + llt.matrixU().solve(standard_normal(rng, n));
    }
    return out;
  }
  const HessianFactors f = hessian_factors(*surrogate_, w, false);
  const Vector shrink = 1.0 - (1.0 + f.lambda.array()).rsqrt();
  const Matrix ve = surrogate_->V * f.E;
  const Matrix mve = surrogate_->mass_v * f.E;
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < count; ++i) {
    try {
      Rng rng = make_rng(seed, static_cast<std::uint64_t>(i));
      const Vector x = whitening_.apply(standard_normal(rng, n));
      const Vector inner = x - ve * shrink.cwiseProduct(mve.transpose() * x);
      out[static_cast<std::size_t>(i)] = mean + prior_.apply_cov_sqrt(inner);
    } catch (...) {
#pragma omp critical(aoed_sample)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

BayesRiskResult PosteriorModel::bayes_risk_check(const Vector& w, int n_outer, int n_inner,
                                                 std::uint64_t seed) const {
  require_dense("bayes_risk_check");
  if (n_outer < 2 || n_inner < 1) throw DomainError("bayes_risk_check: need n_outer >= 2, n_inner >= 1");
  const Index n = size();
  const Vector wq = expand(w);
  const Matrix m = Matrix(prior_.mass());
  const Matrix minv = Eigen::LLT<Matrix>(m).solve(Matrix::Identity(n, n));
  const Matrix h = dense_hessian(w);
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) throw SolverError("posterior: Hessian is not positive definite");

  BayesRiskResult res;
  const Matrix gpost = llt.solve(m);
  const Matrix hmis = minv * (F_->transpose() * wq.asDiagonal() * (*F_));
  const Matrix gprior_inv = minv * (*prior_precision_);
  res.trace = gpost.trace();
  const Matrix g2 = gpost * gpost;
  res.identity_residual = std::abs((g2 * hmis).trace() + (g2 * gprior_inv).trace() - res.trace) / res.trace;

  // noise std per observation: sigma_j / sqrt(w_j); unobserved rows get zero
  // weight in the likelihood so their value is irrelevant
  const int ns = num_sensors();
  Vector noise_sd(wq.size());
  for (Index k = 0; k < wq.size(); ++k) {
    const double wk = w[k % ns];
    noise_sd[k] = wk > 0.0 ? noise_sigma_[k % ns] / std::sqrt(wk) : 0.0;
  }
  const bool has_mean = prior_.mean().size() == n;
  const Vector m0 = has_mean ? prior_.mean() : Vector::Zero(n);
  const Vector prior_term = *prior_precision_ * m0;
  const Matrix ft_w = F_->transpose() * wq.asDiagonal();

  Vector outer(n_outer);
#pragma omp parallel for schedule(static)
  for (int o = 0; o < n_outer; ++o) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(o));
    const Vector truth = prior_.sample_from_normal(whitening_, standard_normal(rng, n));
    const Vector clean = *F_ * truth;
    double acc = 0.0;
    for (int i = 0; i < n_inner; ++i) {
      const Vector d = clean + noise_sd.cwiseProduct(standard_normal(rng, wq.size()));
      const Vector err = llt.solve(Vector(ft_w * d + prior_term)) - truth;
      acc += err.dot(m * err);
    }
    outer[o] = acc / n_inner;
  }
  res.mc_estimate = outer.mean();
  const double var = (outer.array() - res.mc_estimate).square().sum() / (n_outer - 1);
  res.standard_error = std::sqrt(var / n_outer);
  res.z_score = res.standard_error > 0.0 ? (res.mc_estimate - res.trace) / res.standard_error : 0.0;
  return res;
}

void write_variance_csv(std::ostream& out, const Mesh& mesh, const Vector& variance) {
  if (variance.size() != mesh.num_nodes()) throw DomainError("variance export: size mismatch");
  out << "node_index,x,y,variance\n" << std::setprecision(17);
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const Point2& p = mesh.nodes[static_cast<std::size_t>(i)];
    out << i << ',' << p.x << ',' << p.y << ',' << variance[i] << '\n';
  }
}

}  // namespace aoed
