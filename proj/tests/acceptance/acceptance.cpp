// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Pass criterion numbers as arguments to run a
// subset.

#include "aoed/experiments.hpp"

#include <Eigen/Cholesky>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace aoed;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

OEDConfig defaults(std::vector<std::string> overrides = {}) { return config_from_yaml_text("", overrides); }

const Problem& default_problem() {
  static const Problem p(defaults());
  return p;
}

Vector random_weights(Rng& rng, int n, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector w(n);
  for (auto& x : w) x = u(rng);
  return w;
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / b.norm(); }

// ---------------------------------------------------------------------------

Outcome adjoint_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  const Problem p(defaults({"mesh.resolution=16"}));
  Rng rng = make_rng(101);
  double worst = 0.0;
  const SparseMatrix& m = p.fem.mass;
  for (int t = 0; t < 20; ++t) {
    const Vector x = standard_normal(rng, p.prior.size());
    const Vector d = standard_normal(rng, p.setup.obs_dim());
    const Vector fx = p.fmap.apply_F(x);
    const double lhs = fx.dot(d);
    const double rhs = x.dot(m * p.fmap.apply_Fstar(d));
    worst = std::max(worst, std::abs(lhs - rhs) / (fx.norm() * d.norm()));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs <= 10.0 && p.prior.size() <= 500,
          fmt("n=%ld, max relative defect %.2e over 20 pairs, %.1f s", static_cast<long>(p.prior.size()), worst, secs)};
}

Outcome dense_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const Problem p(defaults({"mesh.resolution=16"}));
  const Index n = p.prior.size();
  const auto s = p.build_surrogate(static_cast<int>(n) - p.config().surrogate.oversampling);
  const PosteriorModel& dense = p.exact_posterior();
  const PosteriorModel surr = PosteriorModel::surrogate(s, p.prior, p.whitening, p.fmap);
  const Matrix m = Matrix(p.fem.mass);
  Rng rng = make_rng(202);
  double e_trace = 0.0;
  double e_var = 0.0;
  double e_hinv = 0.0;
  double e_mean = 0.0;
  for (int t = 0; t < 3; ++t) {
    const Vector w = random_weights(rng, p.num_sensors());
    e_trace = std::max(e_trace, std::abs(surr.exact_trace(w) - dense.exact_trace(w)) / dense.exact_trace(w));
    e_var = std::max(e_var, rel(surr.pointwise_variance(w), dense.pointwise_variance(w)));
    const Vector z = standard_normal(rng, n);
    const Vector ref = dense.dense_hessian(w).llt().solve(m * z);
    const auto [qh, q] = apply_H_inv(*s, hessian_factors(*s, w), p.prior, z);
    e_hinv = std::max(e_hinv, rel(q, ref));
    const Vector d = standard_normal(rng, p.setup.obs_dim());
    e_mean = std::max(e_mean, rel(surr.posterior_mean(w, d), dense.posterior_mean(w, d)));
  }
  const double worst = std::max({e_trace, e_var, e_hinv, e_mean});
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs <= 60.0 && n <= 500,
          fmt("n=%ld rank %d: trace %.1e, variance %.1e, H^-1 %.1e, mean %.1e, %.1f s", static_cast<long>(n),
              s->rank(), e_trace, e_var, e_hinv, e_mean, secs)};
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const Problem p(defaults({"mesh.resolution=16"}));
  const OedObjective obj = p.objective(p.surrogate());
  Rng rng = make_rng(303);
  const double h = 1e-5;
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const Vector w = random_weights(rng, p.num_sensors(), 0.05, 0.95);
    const Vector g = obj.gradient(w);
    for (Index j = 0; j < w.size(); ++j) {
      Vector wp = w;
      Vector wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd = (obj.objective(wp) - obj.objective(wm)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - g[j]) / std::abs(g[j]));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-5 && secs <= 30.0,
          fmt("Ns=%d, max relative error %.2e over 10 designs, %.1f s", p.num_sensors(), worst, secs)};
}

Outcome estimator_unbiased() {
  const Mesh mesh = build_structured_mesh(12, defaults().mesh.holes);
  const FemOperators fem = assemble(mesh);
  const Index n = fem.n;
  const Matrix m = Matrix(fem.mass);
  Rng rng = make_rng(404);
  const Matrix b = standard_normal(rng, n, n) / std::sqrt(static_cast<double>(n));
  // A = B B^T M is M-symmetric PSD; <z, A z>_M = z^T (M B B^T M) z
  const Matrix mb = m * b;
  const Matrix ma = mb * mb.transpose();
  const double trace = (b * b.transpose() * m).trace();
  const WhiteningOperator white(fem.mass, fem.lumped_mass);
  const int count = 100000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int i = 0; i < count; ++i) {
    const Vector z = white.apply(standard_normal(rng, n));
    const double v = z.dot(ma * z);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / count;
  const double se = std::sqrt((sum2 / count - mean * mean) / (count - 1));
  const double zs = (mean - trace) / se;
  return {n <= 200 && std::abs(zs) <= 3.0,
          fmt("n=%ld, mean %.6g vs tr(A) %.6g, %.2f standard errors", static_cast<long>(n), mean, trace, zs)};
}

Outcome bayes_risk_identity() {
  const Problem p(defaults({"mesh.resolution=16"}));
  const PosteriorModel& post = p.exact_posterior();
  Rng rng = make_rng(505);
  double worst_res = 0.0;
  double worst_z = 0.0;
  for (int t = 0; t < 5; ++t) {
    const Vector w = random_weights(rng, p.num_sensors());
    const BayesRiskResult r = post.bayes_risk_check(w, 2000, 1, 5050 + static_cast<std::uint64_t>(t));
    worst_res = std::max(worst_res, r.identity_residual);
    worst_z = std::max(worst_z, std::abs(r.z_score));
  }
  return {worst_res <= 1e-8 && worst_z <= 3.0,
          fmt("5 designs: max identity residual %.2e, max |z| of Monte Carlo risk %.2f", worst_res, worst_z)};
}

Outcome preconditioning_payoff() {
  const SpectrumResult s = compute_spectrum(default_problem());
  return {s.rank_Ftilde < s.rank_F,
          fmt("numerical rank (1e-4 sigma_1): F %d, Ftilde %d (%s SVD)", s.rank_F, s.rank_Ftilde,
              s.dense ? "dense" : "randomized")};
}

Vector top_eigenvalues(const Problem& p, int k) {
  SurrogateOptions o = p.surrogate_options(60);
  const LowRankSurrogate s = build_surrogate(PreconditionedForwardMap(p.fmap), p.fem.mass, p.whitening,
                                             p.num_sensors(), o);
  return s.S.head(k).cwiseAbs2();
}

Outcome mesh_insensitive_spectrum() {
  // the default mesh under-resolves the transport (cell Peclet ~30), so the
  // pair is taken one and two refinements above it; the default pair is reported
  auto worst = [](const Vector& a, const Vector& b) { return ((a - b).cwiseQuotient(b)).cwiseAbs().maxCoeff(); };
  const Vector e32 = top_eigenvalues(default_problem(), 20);
  const Problem p64(defaults({"mesh.resolution=64"}));
  const Vector e64 = top_eigenvalues(p64, 20);
  const Problem p128(defaults({"mesh.resolution=128"}));
  const Vector e128 = top_eigenvalues(p128, 20);
  const double w = worst(e64, e128);
  return {w <= 0.05, fmt("n=%ld vs n=%ld: top-20 eigenvalues of Ftilde* Ftilde differ by at most %.2f%% "
                         "(default n=%ld vs n=%ld: %.2f%%)",
                         static_cast<long>(p64.prior.size()), static_cast<long>(p128.prior.size()), 100.0 * w,
                         static_cast<long>(default_problem().prior.size()), static_cast<long>(p64.prior.size()),
                         100.0 * worst(e32, e64))};
}

Outcome sensor_grid_saturation() {
  const Problem& base = default_problem();
  const Problem dense_grid(defaults({"observation.spacing=" + std::to_string(0.075 / std::sqrt(2.0))}));
  const auto build = [](const Problem& p, long& solves) {
    const long before = p.pde_solves();
    auto s = p.build_surrogate(p.config().surrogate.rank);
    solves = p.pde_solves() - before;
    return s;
  };
  long solves_a = 0;
  long solves_b = 0;
  const auto sa = build(base, solves_a);
  const auto sb = build(dense_grid, solves_b);
  const int r = std::min(sa->rank(), sb->rank());
  const Vector na = sa->S.head(r) / sa->S[0];
  const Vector nb = sb->S.head(r) / sb->S[0];
  const double worst = ((na - nb).cwiseQuotient(nb)).cwiseAbs().maxCoeff();
  return {worst <= 0.10 && solves_a == solves_b,
          fmt("Ns %d -> %d: normalized sigma_k(Ftilde), k<=%d, change at most %.2f%%; PDE solves %ld vs %ld",
              base.num_sensors(), dense_grid.num_sensors(), r, 100.0 * worst, solves_a, solves_b)};
}

Outcome rank_plateau() {
  const Problem p(defaults({"study.ranks=[40, 80]"}));
  const auto rows = run_rank_study(p);
  const double d = std::abs(rows[1].theta - rows[0].theta) / rows[1].theta;
  return {d <= 0.01, fmt("Theta(w_opt): r=40 %.6g, r=80 %.6g, relative difference %.3f%%", rows[0].theta,
                         rows[1].theta, 100.0 * d)};
}

Outcome trace_estimator_accuracy() {
  const Problem& p = default_problem();
  const TraceStudyResult r = run_trace_study(p, Vector::Ones(p.num_sensors()));
  bool monotone = true;
  std::ostringstream os;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    if (i > 0 && !(r.rows[i].mean_rel_error < r.rows[i - 1].mean_rel_error)) monotone = false;
    os << (i ? ", " : "") << r.rows[i].count << ":" << fmt("%.1f%%", 100.0 * r.rows[i].mean_rel_error);
  }
  const double last = r.rows.back().mean_rel_error;
  return {monotone && r.rows.back().count == 100 && last <= 0.03,
          "mean relative error over " + std::to_string(p.config().study.trace_repetitions) +
              " repetitions: " + os.str()};
}

struct DesignRuns {
  DesignResult phi;
  DesignResult l1;
};

const DesignRuns& design_runs() {
  static const DesignRuns runs = [] {
    const Problem& p = default_problem();
    p.surrogate();  // construction is not part of the optimization
    return DesignRuns{run_design(p), run_design(p, "l1", p.config().study.rank_gamma)};
  }();
  return runs;
}

Outcome binary_convergence() {
  const DesignResult& d = design_runs().phi;
  double dist = 0.0;
  for (double w : d.weights) dist = std::max(dist, std::min(w, 1.0 - w));
  return {d.binary_converged && dist <= 1e-3,
          fmt("gamma %.3g: %zu sensors, max distance from {0,1} %.1e, %d iterations over %zu stages", d.gamma,
              d.active.size(), dist, d.total_iterations(), d.stages.size())};
}

Outcome design_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  const CompareResult c = run_compare(default_problem());
  const double secs = seconds_since(t0);
  // rows come in groups per compare gamma: phi_eps, l1, random..., uniform
  std::vector<std::map<std::string, std::vector<double>>> groups;
  std::vector<int> ks;
  for (const auto& r : c.rows) {
    if (r.kind == "phi_eps") {
      groups.emplace_back();
      ks.push_back(r.n_sensors);
    }
    groups.back()[r.kind].push_back(r.trace);
  }
  bool ok = !groups.empty();
  std::ostringstream os;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& m = groups[g];
    const double phi = m["phi_eps"][0];
    const double l1 = m["l1"][0];
    const double rmin = *std::min_element(m["random"].begin(), m["random"].end());
    double rmean = 0.0;
    for (double v : m["random"]) rmean += v;
    rmean /= static_cast<double>(m["random"].size());
    const double uni = m["uniform"][0];
    const bool row = phi <= l1 && l1 <= rmin && phi < rmean && l1 < rmean && uni > phi;
    ok = ok && row;
    os << (g ? "; " : "") << fmt("k=%d phi %.4g l1 %.4g rand min %.4g mean %.4g unif %.4g%s", ks[g], phi, l1, rmin,
                                 rmean, uni, row ? "" : " (violated)");
  }
  ok = ok && secs <= 900.0;
  return {ok, os.str() + fmt("; %.0f s", secs)};
}

Outcome zero_pde_optimization() {
  const DesignRuns& r = design_runs();
  return {r.phi.pde_solves_during_optimization == 0 && r.l1.pde_solves_during_optimization == 0,
          fmt("PDE solves during optimization: continuation %ld, l1 %ld", r.phi.pde_solves_during_optimization,
              r.l1.pde_solves_during_optimization)};
}

Outcome scale_insensitivity() {
  // gamma giving a design of about 20 sensors on the default grid; weaker
  // penalties leave a near-flat l1 problem whose tail conditioning grows with Ns
  const double gamma = 300.0;
  std::vector<std::pair<std::string, int>> runs;
  auto run = [&](const std::string& label, const std::vector<std::string>& ov) {
    const Problem p(defaults(ov));
    const OedObjective obj = p.objective(p.surrogate());
    const SmoothObjective theta = [&obj](const Vector& w) { return obj.evaluate(w); };
    const OptimizationResult res = optimize(
        theta, Vector::Constant(p.num_sensors(), p.config().optimizer.initial_weight), PenaltySpec::l1(gamma),
        p.optimizer_options());
    runs.emplace_back(label + " Ns=" + std::to_string(p.num_sensors()) + " n=" + std::to_string(p.prior.size()),
                      res.iterations);
  };
  for (double spacing : {0.15, 0.105, 0.075, 0.053}) run("", {"observation.spacing=" + std::to_string(spacing)});
  run("", {"mesh.resolution=64"});
  run("", {"mesh.resolution=128"});
  int lo = runs.front().second;
  int hi = lo;
  std::ostringstream os;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    lo = std::min(lo, runs[i].second);
    hi = std::max(hi, runs[i].second);
    os << (i ? ", " : "") << runs[i].first << ":" << runs[i].second;
  }
  return {lo > 0 && hi <= 2 * lo, "l1 iterations " + os.str() + fmt(" (max/min %.2f)", double(hi) / lo)};
}

Outcome whitening_isomorphism() {
  const Problem& p = default_problem();
  const WhiteningOperator dense(p.fem.mass, p.fem.lumped_mass, {WhiteningMode::dense});
  const WhiteningOperator iter(p.fem.mass, p.fem.lumped_mass, {WhiteningMode::iterative, 10});
  Rng rng = make_rng(1515);
  double e_dense = 0.0;
  double e_iter = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Vector x = standard_normal(rng, p.prior.size());
    const Vector y = standard_normal(rng, p.prior.size());
    const double ref = x.dot(y);
    const double scale = x.norm() * y.norm();
    e_dense = std::max(e_dense, std::abs(dense.apply(x).dot(p.fem.mass * dense.apply(y)) - ref) / scale);
    e_iter = std::max(e_iter, std::abs(iter.apply(x).dot(p.fem.mass * iter.apply(y)) - ref) / scale);
  }
  return {e_dense <= 1e-10 && e_iter <= 1e-5,
          fmt("max defect dense %.2e, iterative (10 products) %.2e", e_dense, e_iter)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"adjoint consistency", adjoint_consistency},
      {"dense-oracle equivalence", dense_oracle_equivalence},
      {"gradient correctness", gradient_correctness},
      {"trace estimator unbiasedness", estimator_unbiased},
      {"Bayes risk identity", bayes_risk_identity},
      {"prior-preconditioning payoff", preconditioning_payoff},
      {"mesh-insensitive spectrum", mesh_insensitive_spectrum},
      {"sensor-grid saturation", sensor_grid_saturation},
      {"rank-study plateau", rank_plateau},
      {"trace-estimator accuracy", trace_estimator_accuracy},
      {"binary convergence of continuation", binary_convergence},
      {"design-quality ordering", design_ordering},
      {"zero-PDE-solve optimization", zero_pde_optimization},
      {"optimization-scale insensitivity", scale_insensitivity},
      {"whitening isomorphism", whitening_isomorphism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << o.detail
              << fmt("  [%.1f s]", seconds_since(t0)) << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
