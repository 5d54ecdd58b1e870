#include "aoed/observation.hpp"
#include "aoed/random.hpp"
#include "aoed/transport.hpp"
#include "tiny.hpp"

#include <gtest/gtest.h>

#include <Eigen/SVD>

#include <sstream>

using namespace aoed;

TEST(Transport, ZeroAndConstantStates) {
  const tiny::Problem p({.velocity = false});
  const auto zero = p.transport.forward_solve(Vector::Zero(p.n()));
  ASSERT_EQ(static_cast<int>(zero.size()), p.transport.num_steps() + 1);
  for (const auto& u : zero) EXPECT_EQ(u.norm(), 0.0);
  for (const auto& u : p.transport.forward_solve(Vector::Ones(p.n()))) {
    EXPECT_LT((u - Vector::Ones(p.n())).cwiseAbs().maxCoeff(), 1e-12);
  }
  std::vector<Vector> loads(static_cast<std::size_t>(p.transport.num_steps() + 1));
  EXPECT_EQ(p.transport.adjoint_solve(loads).norm(), 0.0);
}

TEST(Transport, MatchesDenseRecursion) {
  const tiny::Problem p({.velocity = false});
  const Matrix m = Matrix(p.fem.mass);
  const Matrix a = m + p.transport.dt() * p.transport.kappa() * Matrix(p.fem.stiffness);
  Rng rng = make_rng(2);
  Vector u = standard_normal(rng, p.n());
  const auto traj = p.transport.forward_solve(u);
  const auto lu = a.partialPivLu();
  for (std::size_t k = 1; k < traj.size(); ++k) {
    u = lu.solve(m * u);
    EXPECT_LT((traj[k] - u).norm() / u.norm(), 1e-10);
  }
}

TEST(Transport, DiscreteMaximumPrinciple) {
  const tiny::Problem p({.velocity = false});
  Rng rng = make_rng(3);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Vector m0(p.n());
  for (Index i = 0; i < p.n(); ++i) m0[i] = u01(rng);
  for (const auto& u : p.transport.forward_solve(m0)) {
    EXPECT_GE(u.minCoeff(), m0.minCoeff() - 1e-8);
    EXPECT_LE(u.maxCoeff(), m0.maxCoeff() + 1e-8);
  }
}

TEST(Transport, AdjointIdentity) {
  const tiny::Problem p;
  const Matrix m = Matrix(p.fem.mass);
  Rng rng = make_rng(4);
  for (int t = 0; t < 5; ++t) {
    const Vector m0 = standard_normal(rng, p.n());
    std::vector<Vector> loads;
    for (int k = 0; k <= p.transport.num_steps(); ++k) {
      loads.push_back(k % 3 == 1 ? Vector() : standard_normal(rng, p.n()));
    }
    const auto traj = p.transport.forward_solve(m0);
    double lhs = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      if (loads[k].size()) lhs += traj[k].dot(loads[k]);
    }
    const double rhs = m0.dot(m * p.transport.adjoint_solve(loads));
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs));
  }
}

TEST(Transport, RejectsTinyDiffusion) {
  const tiny::Problem p;
  EXPECT_THROW(TransportSolver(p.mesh, p.fem, p.velocity, {1e-5}), DomainError);
  EXPECT_NO_THROW(TransportSolver(p.mesh, p.fem, p.velocity, {1e-5, 4.0, 16, 1e-4, true}));
  EXPECT_THROW(TransportSolver(p.mesh, p.fem, p.velocity, {1e-3, -1.0}), DomainError);
}

TEST(Transport, CountersShared) {
  const tiny::Problem p;
  const TransportSolver copy = p.transport;
  const long before = p.transport.forward_count();
  copy.forward_solve(Vector::Zero(p.n()));
  EXPECT_EQ(p.transport.forward_count(), before + 1);
}

TEST(Observation, TimeWeights) {
  const TimeWeights a = time_weights_for(1.0, 4.0, 16);  // dt = 0.25, exact step
  EXPECT_EQ(a.step, 4);
  EXPECT_NEAR(a.w0, 1.0, 1e-15);
  const TimeWeights b = time_weights_for(1.1, 4.0, 16);
  EXPECT_EQ(b.step, 4);
  EXPECT_NEAR(b.w1, 0.4, 1e-12);
  EXPECT_NEAR(b.w0 + b.w1, 1.0, 1e-15);
  const TimeWeights c = time_weights_for(4.0, 4.0, 16);
  EXPECT_EQ(c.step, 16);
  EXPECT_EQ(c.w1, 0.0);
}

TEST(Observation, FlatIndexIsTimeMajor) {
  const tiny::Problem p;
  EXPECT_EQ(p.setup.flat_index(2, 3), 3 * p.ns() + 2);
  const auto [j, l] = p.setup.split_index(p.setup.flat_index(2, 3));
  EXPECT_EQ(j, 2);
  EXPECT_EQ(l, 3);
  const Vector w = Vector::LinSpaced(p.ns(), 0, 1);
  const Vector e = p.setup.expand_weights(w);
  EXPECT_EQ(e.size(), p.q());
  EXPECT_EQ(e[p.setup.flat_index(1, 2)], w[1]);
}

TEST(Observation, SetupValidation) {
  const tiny::Problem p;
  EXPECT_THROW(make_observation_setup(p.mesh, {{0.3, 0.3}}, {1.0}, 4.0, 16), LocationError);
  EXPECT_THROW(make_observation_setup(p.mesh, {{0.1, 0.1}}, {5.0}, 4.0, 16), DomainError);
  EXPECT_THROW(make_observation_setup(p.mesh, {{0.1, 0.1}}, {1.0}, 4.0, 16, Vector::Constant(1, -1.0)),
               DomainError);
}

TEST(Observation, SensorGrid) {
  const auto holes = tiny::default_holes();
  const auto g = default_sensor_grid(holes);
  EXPECT_NEAR(static_cast<double>(g.size()), 122.0, 6.0);
  for (const auto& s : g) {
    for (const auto& h : holes) EXPECT_FALSE(h.contains_strictly(s));
    EXPECT_GT(s.x, 0.0);
    EXPECT_LT(s.x, 1.0);
  }
  const auto fine = default_sensor_grid(holes, 0.0375);
  const double ratio = static_cast<double>(fine.size()) / static_cast<double>(g.size());
  EXPECT_GT(ratio, 3.0);
  EXPECT_LT(ratio, 5.0);
  std::stringstream ss;
  write_sensors(ss, g);
  EXPECT_EQ(read_sensors(ss).size(), g.size());
}

TEST(ForwardMap, ConstantStateObservations) {
  const tiny::Problem p({.velocity = false});
  EXPECT_EQ(p.fmap.apply_F(Vector::Zero(p.n())).norm(), 0.0);
  EXPECT_EQ(p.fmap.apply_Fstar(Vector::Zero(p.q())).norm(), 0.0);
  EXPECT_LT((p.fmap.apply_F(Vector::Ones(p.n())) - Vector::Ones(p.q())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ForwardMap, DenseOracles) {
  const tiny::Problem p({.sigma = 0.5});
  const Matrix F = tiny::dense_F(p.fmap);
  const Matrix m = Matrix(p.fem.mass);
  const Matrix sqrt_prior = tiny::prior_sqrt(p);
  Rng rng = make_rng(6);
  for (int t = 0; t < 5; ++t) {
    const Vector x = standard_normal(rng, p.n());
    const Vector d = standard_normal(rng, p.q());
    EXPECT_LT((p.fmap.apply_F(x) - F * x).norm() / (F * x).norm(), 1e-10);
    const Vector fstar = m.llt().solve(F.transpose() * d);
    EXPECT_LT((p.fmap.apply_Fstar(d) - fstar).norm() / fstar.norm(), 1e-10);
    const Vector ft = F * sqrt_prior * x;
    EXPECT_LT((p.fmap.apply_Ftilde(x) - ft).norm() / ft.norm(), 1e-10);
    const Vector ftstar = m.llt().solve((F * sqrt_prior).transpose() * d);
    EXPECT_LT((p.fmap.apply_Ftilde_star(d) - ftstar).norm() / ftstar.norm(), 1e-10);

    const double a = p.fmap.apply_F(x).dot(d);
    EXPECT_NEAR(a, x.dot(m * p.fmap.apply_Fstar(d)), 1e-10 * x.norm() * d.norm() * F.norm());
    const double b = p.fmap.apply_Ftilde(x).dot(d);
    EXPECT_NEAR(b, x.dot(m * p.fmap.apply_Ftilde_star(d)), 1e-10 * std::abs(b) + 1e-14);
  }
  // noise scaling lives in the preconditioned map
  const PreconditionedForwardMap op(p.fmap);
  const Vector x = standard_normal(rng, p.n());
  EXPECT_LT((op.apply(x) - 2.0 * p.fmap.apply_Ftilde(x)).norm(), 1e-12 * op.apply(x).norm());
}

TEST(ForwardMap, PreconditionedSpectrumDecaysFaster) {
  const tiny::Problem p;
  const Matrix F = tiny::dense_F(p.fmap);
  Eigen::LLT<Matrix> mllt(Matrix(p.fem.mass));
  const Matrix rinv = mllt.matrixU().solve(Matrix::Identity(p.n(), p.n()));  // R^{-1}, M = R^T R
  const Vector sf = Eigen::JacobiSVD<Matrix>(F * rinv).singularValues();
  const Vector st = Eigen::JacobiSVD<Matrix>(F * tiny::prior_sqrt(p) * rinv).singularValues();
  const auto rank = [](const Vector& s) { return (s.array() > 1e-4 * s[0]).count(); };
  EXPECT_LE(rank(st), rank(sf));
}
