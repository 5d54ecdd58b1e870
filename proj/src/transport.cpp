#include "aoed/transport.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <sstream>
#include <string>

namespace aoed {

struct TransportSolver::Factors {
  SparseMatrix mass;
  SparseMatrix step;
  Eigen::SparseLU<SparseMatrix> step_lu;
  Eigen::SparseLU<SparseMatrix> step_t_lu;
  Eigen::SimplicialLLT<SparseMatrix> mass_llt;
};

SparseMatrix assemble_advection(const Mesh& mesh, const VelocityField& velocity) {
  if (static_cast<int>(velocity.values.size()) != mesh.num_nodes()) {
    throw DomainError("advection: velocity field size does not match the mesh");
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(9 * mesh.num_triangles()));
  for (int tri = 0; tri < mesh.num_triangles(); ++tri) {
    const ElementGeometry g = element_geometry(mesh, tri);
    const auto& t = mesh.triangles[static_cast<std::size_t>(tri)];
    for (std::size_t i = 0; i < 3; ++i) {
      // integral of v phi_i = sum_k v_k (area/12)(1 + delta_ik)
      double wx = 0.0, wy = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        const double m = g.area / 12.0 * (i == k ? 2.0 : 1.0);
        const auto& v = velocity.values[static_cast<std::size_t>(t[k])];
        wx += m * v[0];
        wy += m * v[1];
      }
      for (std::size_t j = 0; j < 3; ++j) {
        trip.emplace_back(t[i], t[j], wx * g.grad[j][0] + wy * g.grad[j][1]);
      }
    }
  }
  SparseMatrix c(mesh.num_nodes(), mesh.num_nodes());
  c.setFromTriplets(trip.begin(), trip.end());
  return c;
}

TransportSolver::TransportSolver(const Mesh& mesh, const FemOperators& fem,
                                 const VelocityField& velocity, TransportOptions options)
    : n_(fem.n), options_(options), counters_(std::make_shared<SolveCounters>()) {
  if (!(options.kappa > 0.0) || !(options.final_time > 0.0) || options.num_steps < 1) {
    throw DomainError("transport: need kappa > 0, T > 0 and at least one time step");
  }
  if (options.kappa < options.min_kappa && !options.allow_small_kappa) {
    std::ostringstream msg;
    msg << "transport: kappa = " << options.kappa << " is below " << options.min_kappa
        << "; unstabilized Galerkin advection needs an explicit override";
    throw DomainError(msg.str());
  }
  for (const auto& v : velocity.values) {
    if (!std::isfinite(v[0]) || !std::isfinite(v[1])) throw DomainError("transport: non-finite velocity");
  }

  auto f = std::make_shared<Factors>();
  f->mass = fem.mass;
  const SparseMatrix c = assemble_advection(mesh, velocity);
  f->step = fem.mass + dt() * (options.kappa * fem.stiffness + c);
  f->step.makeCompressed();
  f->step_lu.compute(f->step);
  if (f->step_lu.info() != Eigen::Success) {
    throw SolverError("transport: factorization of the time-step matrix failed");
  }
  SparseMatrix step_t = f->step.transpose();
  step_t.makeCompressed();
  f->step_t_lu.compute(step_t);
  if (f->step_t_lu.info() != Eigen::Success) {
    throw SolverError("transport: factorization of the transposed time-step matrix failed");
  }
  f->mass_llt.compute(f->mass);
  if (f->mass_llt.info() != Eigen::Success) throw SolverError("transport: mass factorization failed");
  factors_ = std::move(f);
}

const SparseMatrix& TransportSolver::mass() const { return factors_->mass; }
const SparseMatrix& TransportSolver::step_matrix() const { return factors_->step; }

std::vector<Vector> TransportSolver::forward_solve(const Vector& m) const {
  if (m.size() != n_) throw DomainError("transport: initial condition has wrong length");
  counters_->forward.fetch_add(1, std::memory_order_relaxed);
  const int nt = options_.num_steps;
  std::vector<Vector> traj;
  traj.reserve(static_cast<std::size_t>(nt + 1));
  traj.push_back(m);
  for (int k = 0; k < nt; ++k) {
    Vector rhs = factors_->mass * traj.back();
    Vector next = factors_->step_lu.solve(rhs);
    if (!next.allFinite()) {
      throw SolverError("transport: non-finite state at step " + std::to_string(k + 1));
    }
    traj.push_back(std::move(next));
  }
  return traj;
}

Vector TransportSolver::adjoint_solve(const std::vector<Vector>& loads) const {
  const int nt = options_.num_steps;
  if (static_cast<int>(loads.size()) != nt + 1) {
    throw DomainError("transport: adjoint needs one load slot per time level");
  }
  counters_->adjoint.fetch_add(1, std::memory_order_relaxed);
  auto load = [&](int k) -> const Vector* {
    const Vector& g = loads[static_cast<std::size_t>(k)];
    if (g.size() == 0) return nullptr;
    if (g.size() != n_) throw DomainError("transport: adjoint load has wrong length");
    return &g;
  };
  // Euclidean transpose of u^{k+1} = A^{-1} M u^k, run backwards.
  Vector p = Vector::Zero(n_);
  if (const Vector* g = load(nt)) p = *g;
  for (int k = nt - 1; k >= 0; --k) {
    Vector next = factors_->mass * Vector(factors_->step_t_lu.solve(p));
    if (const Vector* g = load(k)) next += *g;
    if (!next.allFinite()) throw SolverError("transport: non-finite adjoint at step " + std::to_string(k));
    p = std::move(next);
  }
  Vector out = factors_->mass_llt.solve(p);
  if (!out.allFinite()) throw SolverError("transport: non-finite adjoint mass solve");
  return out;
}

}  // namespace aoed
