#pragma once

#include "aoed/common.hpp"
#include "aoed/linear_map.hpp"
#include "aoed/prior.hpp"
#include "aoed/whitening.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace aoed {

struct SurrogateOptions {
  int rank = 60;
  int oversampling = 10;
  int power_iterations = 1;
  std::uint64_t seed = 1;
  double residual_tolerance = 1e-3;
  int residual_probes = 2;  // fresh probes for the a-posteriori residual check
  Execution execution = Execution::parallel;
};

/// Truncated SVD  F~ ~= U diag(S) V*  with Euclidean-orthonormal U (q x r)
/// and M-orthonormal V (n x r). `mass_v` caches M V so that V* x = (M V)^T x.
struct LowRankSurrogate {
  Matrix U;
  Vector S;
  Matrix V;
  Matrix mass_v;
  int num_sensors = 0;  // observation rows are time-major blocks of this size
  int requested_rank = 0;
  int oversampling = 0;
  int power_iterations = 0;
  std::uint64_t seed = 0;
  double probe_residual = 0.0;  // max relative residual over fresh probes
  std::vector<std::string> warnings;

  int rank() const { return static_cast<int>(S.size()); }
  Index obs_dim() const { return U.rows(); }
  Index param_dim() const { return V.rows(); }

  Vector apply(const Vector& v) const { return U * S.cwiseProduct(mass_v.transpose() * v); }
  Vector apply_adjoint(const Vector& d) const { return V * S.cwiseProduct(U.transpose() * d); }
};

/// Randomized range finder on `op` with rank + oversampling whitened Gaussian
/// probes (covariance M^{-1}) and `power_iterations` passes of op op*, then a
/// small SVD. The parameter side is orthonormalized in the mass inner product
/// through the Cholesky factor of M. Singular values below 1e-12 sigma_1 are
/// dropped and reported in `warnings`.
LowRankSurrogate build_surrogate(const LinearMap& op, const SparseMatrix& mass,
                                 const WhiteningOperator& whitening, int num_sensors,
                                 const SurrogateOptions& options = {});

/// Eigenpairs of the rank-r misfit Hessian F~_r* W F~_r for one design.
struct HessianFactors {
  Matrix E;  // r x r eigenvectors in the surrogate's right singular basis
  Matrix V;  // n x r M-orthonormal eigenvectors, V = surrogate.V E
  Vector lambda;
  Vector D;  // lambda / (1 + lambda)
};

HessianFactors hessian_factors(const LowRankSurrogate& s, const Vector& w, bool with_vectors = true);

/// q_hat = (I - V D V*) Gamma^{1/2} z and q = Gamma^{1/2} q_hat ~= H(w)^{-1} z.
std::pair<Vector, Vector> apply_H_inv(const LowRankSurrogate& s, const HessianFactors& f,
                                      const PriorOperator& prior, const Vector& z);

/// F~_r q_hat, no PDE solves.
Vector apply_Fq(const LowRankSurrogate& s, const Vector& q_hat);

// Versioned JSON dump. Loading recomputes M V from the given mass matrix.
void save_surrogate(const std::filesystem::path& path, const LowRankSurrogate& s);
LowRankSurrogate load_surrogate(const std::filesystem::path& path, const SparseMatrix& mass);

}  // namespace aoed
