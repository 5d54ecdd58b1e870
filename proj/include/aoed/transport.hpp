#pragma once

#include "aoed/common.hpp"
#include "aoed/fem.hpp"
#include "aoed/mesh.hpp"
#include "aoed/velocity.hpp"

#include <atomic>
#include <memory>
#include <vector>

namespace aoed {

struct TransportOptions {
  double kappa = 0.001;
  double final_time = 4.0;
  int num_steps = 64;
  // Galerkin advection is unstabilized; diffusion below this is rejected
  // unless explicitly allowed.
  double min_kappa = 1e-4;
  bool allow_small_kappa = false;
};

/// Forward/adjoint solve counts, shared by all copies of a solver.
struct SolveCounters {
  std::atomic<long> forward{0};
  std::atomic<long> adjoint{0};
};

/// Galerkin advection matrix C_ij = integral of (v . grad phi_j) phi_i with
/// the nodal velocity interpolated linearly (exact quadrature).
SparseMatrix assemble_advection(const Mesh& mesh, const VelocityField& velocity);

/// Implicit-Euler solver for u_t - kappa Lap u + v . grad u = 0 with
/// homogeneous Neumann conditions. The step matrix M + dt (kappa K + C) and
/// its transpose are factorized once and shared by every forward and
/// adjoint solve; solves are const and may run concurrently.
class TransportSolver {
 public:
  TransportSolver(const Mesh& mesh, const FemOperators& fem, const VelocityField& velocity,
                  TransportOptions options = {});

  /// Trajectory u^0 = m, ..., u^{Nt}.
  std::vector<Vector> forward_solve(const Vector& m) const;

  /// Mass-weighted adjoint of the trajectory map: given per-step loads
  /// g_0..g_{Nt} (empty vectors mean zero), returns p with
  /// sum_k <u^k, g_k> = <m, p>_M for every initial condition m.
  Vector adjoint_solve(const std::vector<Vector>& loads) const;

  int num_steps() const { return options_.num_steps; }
  double dt() const { return options_.final_time / options_.num_steps; }
  double final_time() const { return options_.final_time; }
  double kappa() const { return options_.kappa; }
  Index size() const { return n_; }
  const TransportOptions& options() const { return options_; }

  const SolveCounters& counters() const { return *counters_; }
  long forward_count() const { return counters_->forward.load(); }
  long adjoint_count() const { return counters_->adjoint.load(); }

  const SparseMatrix& mass() const;
  const SparseMatrix& step_matrix() const;

 private:
  struct Factors;

  Index n_ = 0;
  TransportOptions options_;
  std::shared_ptr<const Factors> factors_;
  std::shared_ptr<SolveCounters> counters_;
};

}  // namespace aoed
