#include "aoed/experiments.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

namespace aoed {

namespace {

VelocityField make_velocity(const TransportConfig& cfg, const Mesh& mesh) {
  if (cfg.velocity == "double_gyre") return double_gyre_velocity(mesh, cfg.cutoff_width, cfg.max_speed);
  if (cfg.velocity == "zero") return zero_velocity(mesh);
  return read_velocity_file(cfg.velocity, mesh);
}

WhiteningOptions whitening_options(const WhiteningConfig& cfg) {
  WhiteningOptions o;
  o.mode = cfg.mode == "dense" ? WhiteningMode::dense
           : cfg.mode == "iterative" ? WhiteningMode::iterative
                                     : WhiteningMode::automatic;
  o.iterations = cfg.iterations;
  return o;
}

TransportOptions transport_options(const TransportConfig& cfg) {
  TransportOptions o;
  o.kappa = cfg.kappa;
  o.final_time = cfg.final_time;
  o.num_steps = cfg.num_steps;
  o.allow_small_kappa = cfg.allow_small_kappa;
  return o;
}

ObservationSetup make_setup(const OEDConfig& cfg, const Mesh& mesh) {
  std::vector<Point2> sensors = build_sensors(cfg, mesh);
  const Vector sigma = Vector::Constant(static_cast<Index>(sensors.size()), cfg.observation.noise_sigma);
  return make_observation_setup(
      mesh, std::move(sensors),
      equispaced_times(cfg.observation.t_start, cfg.observation.t_end, cfg.observation.num_times),
      cfg.transport.final_time, cfg.transport.num_steps, sigma);
}

// Sigma^{-1/2} F without the prior factor, for the spectrum comparison.
class NoiseScaledForwardMap final : public LinearMap {
 public:
  explicit NoiseScaledForwardMap(const ForwardMap& f)
      : f_(f), inv_sigma_(f.setup().expand_weights(f.setup().noise_sigma.cwiseInverse())) {}
  Index rows() const override { return f_.obs_dim(); }
  Index cols() const override { return f_.param_dim(); }
  Vector apply(const Vector& v) const override { return inv_sigma_.cwiseProduct(f_.apply_F(v)); }
  Vector apply_adjoint(const Vector& d) const override {
    return f_.apply_Fstar(Vector(inv_sigma_.cwiseProduct(d)));
  }

 private:
  const ForwardMap& f_;
  Vector inv_sigma_;
};

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

std::vector<int> active_indices(const Vector& binary) {
  std::vector<int> idx;
  for (Index i = 0; i < binary.size(); ++i) {
    if (binary[i] > 0.5) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

}  // namespace

Mesh build_mesh(const MeshConfig& cfg) {
  if (cfg.file.empty()) return build_structured_mesh(cfg.resolution, cfg.holes);
  Mesh m = read_mesh_file(cfg.file);
  m.hole_rects = cfg.holes;
  tag_boundary(m);
  validate_mesh(m);
  return m;
}

std::vector<Point2> build_sensors(const OEDConfig& cfg, const Mesh& mesh) {
  if (!cfg.observation.sensor_file.empty()) return read_sensors_file(cfg.observation.sensor_file);
  return default_sensor_grid(mesh.hole_rects, cfg.observation.spacing, cfg.observation.clearance);
}

Problem::Problem(OEDConfig cfg)
    : mesh(build_mesh(cfg.mesh)),
      fem(assemble(mesh)),
      velocity(make_velocity(cfg.transport, mesh)),
      prior(fem, cfg.prior.alpha, cfg.prior.beta),
      whitening(fem.mass, fem.lumped_mass, whitening_options(cfg.whitening)),
      transport(mesh, fem, velocity, transport_options(cfg.transport)),
      setup(make_setup(cfg, mesh)),
      fmap(transport, setup, prior),
      config_(std::move(cfg)) {}

SurrogateOptions Problem::surrogate_options(int rank) const {
  SurrogateOptions o;
  o.rank = rank > 0 ? rank : config_.surrogate.rank;
  o.oversampling = config_.surrogate.oversampling;
  o.power_iterations = config_.surrogate.power_iterations;
  o.seed = config_.surrogate_seed();
  o.residual_tolerance = config_.surrogate.residual_tolerance;
  o.residual_probes = config_.surrogate.residual_probes;
  return o;
}

std::shared_ptr<const LowRankSurrogate> Problem::build_surrogate(int rank) const {
  const PreconditionedForwardMap op(fmap);
  return std::make_shared<const LowRankSurrogate>(
      aoed::build_surrogate(op, fem.mass, whitening, num_sensors(), surrogate_options(rank)));
}

std::shared_ptr<const LowRankSurrogate> Problem::surrogate() const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  if (!surrogate_) surrogate_ = build_surrogate(config_.surrogate.rank);
  return surrogate_;
}

OedObjective Problem::objective(std::shared_ptr<const LowRankSurrogate> s, int count,
                                std::uint64_t seed) const {
  const int n = count > 0 ? count : config_.estimator.count;
  const std::uint64_t sd = seed ? seed : config_.estimator_seed();
  return OedObjective(std::move(s), prior, make_trace_estimator(whitening, n, sd));
}

OptimizerOptions Problem::optimizer_options() const {
  OptimizerOptions o;
  o.max_iter = config_.optimizer.max_iter;
  o.grad_reduction = config_.optimizer.grad_reduction;
  o.memory = config_.optimizer.memory;
  o.log_barrier = config_.optimizer.log_barrier;
  o.active_threshold = config_.penalty.binary_tol;
  return o;
}

const PosteriorModel& Problem::exact_posterior() const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  if (!posterior_) {
    if (prior.size() <= PosteriorModel::kDenseLimit) {
      posterior_ = std::make_shared<const PosteriorModel>(PosteriorModel::dense(fmap, whitening));
    } else {
      if (!surrogate_) surrogate_ = build_surrogate(config_.surrogate.rank);
      posterior_ = std::make_shared<const PosteriorModel>(
          PosteriorModel::surrogate(surrogate_, prior, whitening, fmap));
    }
  }
  return *posterior_;
}

// ---- spectrum -------------------------------------------------------------

int numerical_rank(const Vector& sigma, double rel_tol) {
  if (sigma.size() == 0 || !(sigma[0] > 0.0)) return 0;
  return static_cast<int>((sigma.array() > rel_tol * sigma[0]).count());
}

SpectrumResult compute_spectrum(const Problem& p) {
  SpectrumResult r;
  const Index n = p.prior.size();
  if (n <= PosteriorModel::kDenseLimit) {
    const PosteriorModel& post = p.exact_posterior();
    const Vector inv_sigma = p.setup.expand_weights(p.setup.noise_sigma.cwiseInverse());
    const Matrix ft = post.dense_F().transpose() * inv_sigma.asDiagonal();  // n x q
    // M = R^T R; singular values of G R^{-1} equal those of R^{-T} G^T.
    Eigen::LLT<Matrix> mllt{Matrix(p.fem.mass)};
    const Matrix g = mllt.matrixL().solve(ft);
    r.sigma_F = Eigen::BDCSVD<Matrix>(g).singularValues();
    // F Gamma^{1/2} R^{-1} = F L^{-1} R^T, transposed: R L^{-1} F^T
    Matrix lf(n, ft.cols());
    for (Index j = 0; j < ft.cols(); ++j) lf.col(j) = p.prior.solve_elliptic(ft.col(j));
    const Matrix gt = mllt.matrixU() * lf;
    r.sigma_Ftilde = Eigen::BDCSVD<Matrix>(gt).singularValues();
    r.dense = true;
  } else {
    const int k = std::min<int>(p.config().study.spectrum_values,
                                static_cast<int>(std::min<Index>(n, p.setup.obs_dim())) - 10);
    SurrogateOptions o = p.surrogate_options(k);
    o.residual_probes = 0;
    const NoiseScaledForwardMap fop(p.fmap);
    r.sigma_F = build_surrogate(fop, p.fem.mass, p.whitening, p.num_sensors(), o).S;
    const PreconditionedForwardMap top(p.fmap);
    r.sigma_Ftilde = build_surrogate(top, p.fem.mass, p.whitening, p.num_sensors(), o).S;
    r.dense = false;
  }
  r.rank_F = numerical_rank(r.sigma_F);
  r.rank_Ftilde = numerical_rank(r.sigma_Ftilde);
  return r;
}

// ---- design ---------------------------------------------------------------

int DesignResult::total_iterations() const {
  int n = 0;
  for (const auto& s : stages) n += s.result.iterations;
  return n;
}

std::vector<IterationRecord> DesignResult::log() const {
  std::vector<IterationRecord> out;
  int offset = 0;
  for (const auto& s : stages) {
    for (IterationRecord h : s.result.history) {
      h.iter += offset;
      out.push_back(h);
    }
    offset += s.result.iterations + 1;
  }
  return out;
}

DesignResult run_design(const Problem& p, const std::string& kind, double gamma) {
  const OEDConfig& cfg = p.config();
  const auto s = p.surrogate();
  const OedObjective obj = p.objective(s);
  const SmoothObjective theta = [&obj](const Vector& w) { return obj.evaluate(w); };
  const Vector w0 = Vector::Constant(p.num_sensors(), cfg.optimizer.initial_weight);
  const OptimizerOptions opts = p.optimizer_options();

  DesignResult r;
  r.kind = kind;
  r.gamma = gamma;
  const long before = p.pde_solves();
  if (penalty_kind_from_string(kind) == PenaltyKind::l1) {
    const PenaltySpec spec = PenaltySpec::l1(gamma);
    OptimizationResult res = optimize(theta, w0, spec, opts);
    r.weights = res.design.w;
    r.binary = threshold_l1_design(r.weights, cfg.penalty.l1_threshold);
    r.theta = res.objective;
    r.stages.push_back({spec, std::move(res)});
    r.binary_converged = false;
  } else {
    ContinuationResult cr = continuation_solve(theta, w0, gamma,
                                               geometric_schedule(cfg.penalty.eps_ratio, cfg.penalty.eps_count),
                                               opts, cfg.penalty.binary_tol);
    r.weights = cr.design.w;
    r.binary = cr.rounded();
    r.theta = cr.stages.back().result.objective;
    r.binary_converged = cr.binary;
    r.non_binary = cr.non_binary;
    r.stages = std::move(cr.stages);
  }
  r.pde_solves_during_optimization = p.pde_solves() - before;
  r.active = active_indices(r.binary);
  r.exact_trace = p.exact_posterior().exact_trace(r.binary);
  return r;
}

DesignResult run_design(const Problem& p) {
  return run_design(p, p.config().penalty.kind, p.config().penalty.gamma);
}

// ---- compare --------------------------------------------------------------

Vector uniform_design(const std::vector<Point2>& sensors, int k) {
  const int ns = static_cast<int>(sensors.size());
  if (k < 0 || k > ns) throw DomainError("uniform design: bad sensor count");
  Vector w = Vector::Zero(ns);
  if (k == 0) return w;
  auto dist2 = [&](int i, const Point2& q) {
    const double dx = sensors[static_cast<std::size_t>(i)].x - q.x;
    const double dy = sensors[static_cast<std::size_t>(i)].y - q.y;
    return dx * dx + dy * dy;
  };
  int first = 0;
  for (int i = 1; i < ns; ++i) {
    if (dist2(i, {0.5, 0.5}) < dist2(first, {0.5, 0.5})) first = i;
  }
  std::vector<double> nearest(static_cast<std::size_t>(ns), std::numeric_limits<double>::infinity());
  int next = first;
  for (int c = 0; c < k; ++c) {
    w[next] = 1.0;
    const Point2 pick = sensors[static_cast<std::size_t>(next)];
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < ns; ++i) {
      auto& d = nearest[static_cast<std::size_t>(i)];
      d = std::min(d, dist2(i, pick));
      if (w[i] == 0.0 && d > best_d + 1e-14) {
        best_d = d;
        best = i;
      }
    }
    next = best;
  }
  return w;
}

Vector random_design(int num_sensors, int k, Rng& rng) {
  if (k < 0 || k > num_sensors) throw DomainError("random design: bad sensor count");
  std::vector<int> idx(static_cast<std::size_t>(num_sensors));
  std::iota(idx.begin(), idx.end(), 0);
  // partial Fisher-Yates
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, num_sensors - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  Vector w = Vector::Zero(num_sensors);
  for (int i = 0; i < k; ++i) w[idx[static_cast<std::size_t>(i)]] = 1.0;
  return w;
}

Vector top_k_design(const Vector& w, int k) {
  if (k < 0 || k > w.size()) throw DomainError("top-k design: bad sensor count");
  std::vector<int> idx(static_cast<std::size_t>(w.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return w[a] > w[b]; });
  Vector out = Vector::Zero(w.size());
  for (int i = 0; i < k; ++i) out[idx[static_cast<std::size_t>(i)]] = 1.0;
  return out;
}

CompareResult run_compare(const Problem& p) {
  const OEDConfig& cfg = p.config();
  const PosteriorModel& post = p.exact_posterior();
  const auto s = p.surrogate();
  const OedObjective obj = p.objective(s);
  const SmoothObjective theta = [&obj](const Vector& w) { return obj.evaluate(w); };
  const Vector w0 = Vector::Constant(p.num_sensors(), cfg.optimizer.initial_weight);
  const OptimizerOptions opts = p.optimizer_options();

  CompareResult out;
  for (std::size_t g = 0; g < cfg.study.compare_gammas.size(); ++g) {
    const double gamma = cfg.study.compare_gammas[g];
    const DesignResult phi = run_design(p, "phi_eps", gamma);
    const int k = static_cast<int>(phi.active.size());
    if (k == 0) continue;
    out.rows.push_back({"phi_eps", gamma, k, phi.exact_trace, 0});

    // l1 design with the same number of thresholded sensors
    const GammaSearchResult gs =
        gamma_for_sensor_count(theta, w0, k, 1e-4, 1e6, 40, opts, cfg.penalty.l1_threshold);
    const Vector l1 = gs.count == k ? threshold_l1_design(gs.result.design.w, cfg.penalty.l1_threshold)
                                    : top_k_design(gs.result.design.w, k);
    out.rows.push_back({"l1", gs.gamma, k, post.exact_trace(l1), 0});

    Rng rng = make_rng(cfg.compare_seed(), g);
    for (int i = 0; i < cfg.study.n_random; ++i) {
      out.rows.push_back({"random", gamma, k, post.exact_trace(random_design(p.num_sensors(), k, rng)), i});
    }
    out.rows.push_back({"uniform", gamma, k, post.exact_trace(uniform_design(p.setup.sensor_points, k)), 0});
  }
  return out;
}

// ---- trace study ----------------------------------------------------------

TraceStudyResult run_trace_study(const Problem& p, const Vector& w) {
  const OEDConfig& cfg = p.config();
  TraceStudyResult out;
  const auto s = p.surrogate();
  // Reference is the exact trace of the posterior the estimator samples, so
  // the error isolates the estimator from surrogate truncation.
  out.exact_trace = PosteriorModel::surrogate(s, p.prior, p.whitening).exact_trace(w);
  out.dense_trace = p.prior.size() <= PosteriorModel::kDenseLimit ? p.exact_posterior().exact_trace(w) : 0.0;
  for (int count : cfg.study.trace_counts) {
    std::vector<double> err;
    for (int rep = 0; rep < cfg.study.trace_repetitions; ++rep) {
      const std::uint64_t seed = cfg.estimator_seed() + 1000003ULL * static_cast<std::uint64_t>(count) +
                                 7919ULL * static_cast<std::uint64_t>(rep + 1);
      const OedObjective obj = p.objective(s, count, seed);
      err.push_back(std::abs(obj.evaluate(w).value - out.exact_trace) / out.exact_trace);
    }
    const double mean = std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(err.size());
    double var = 0.0;
    for (double e : err) var += (e - mean) * (e - mean);
    var = err.size() > 1 ? var / static_cast<double>(err.size() - 1) : 0.0;
    out.rows.push_back({count, mean, std::sqrt(var)});
  }
  return out;
}

// ---- rank study -----------------------------------------------------------

std::vector<RankStudyRow> run_rank_study(const Problem& p) {
  const OEDConfig& cfg = p.config();
  const Vector w0 = Vector::Constant(p.num_sensors(), cfg.optimizer.initial_weight);
  const OptimizerOptions opts = p.optimizer_options();
  std::vector<RankStudyRow> rows;
  for (int rank : cfg.study.ranks) {
    const auto s = p.build_surrogate(rank);
    const OedObjective obj = p.objective(s);
    const SmoothObjective theta = [&obj](const Vector& w) { return obj.evaluate(w); };
    const OptimizationResult res = optimize(theta, w0, PenaltySpec::l1(cfg.study.rank_gamma), opts);
    rows.push_back({rank, res.objective, res.total(), res.iterations, res.design.n_active()});
  }
  return rows;
}

// ---- output ---------------------------------------------------------------

void write_spectrum_csv(const std::filesystem::path& path, const SpectrumResult& r) {
  std::ofstream out = open_csv(path);
  out << "k,sigma_F,sigma_Ftilde,sigma_F_normalized,sigma_Ftilde_normalized\n";
  const Index m = std::max(r.sigma_F.size(), r.sigma_Ftilde.size());
  for (Index k = 0; k < m; ++k) {
    out << k + 1 << ',';
    if (k < r.sigma_F.size()) out << r.sigma_F[k];
    out << ',';
    if (k < r.sigma_Ftilde.size()) out << r.sigma_Ftilde[k];
    out << ',';
    if (k < r.sigma_F.size()) out << r.sigma_F[k] / r.sigma_F[0];
    out << ',';
    if (k < r.sigma_Ftilde.size()) out << r.sigma_Ftilde[k] / r.sigma_Ftilde[0];
    out << '\n';
  }
}

void write_design_outputs(const std::filesystem::path& dir, const Problem& p, const DesignResult& r) {
  std::filesystem::create_directories(dir);
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& st : r.stages) {
    stages.push_back({{"penalty", to_string(st.penalty.kind)},
                      {"gamma", st.penalty.gamma},
                      {"eps", st.penalty.eps},
                      {"status", to_string(st.result.status)},
                      {"iterations", st.result.iterations},
                      {"objective", st.result.objective},
                      {"penalty_value", st.result.penalty},
                      {"n_active", st.result.design.n_active()},
                      {"weights", std::vector<double>(st.result.design.w.data(),
                                                      st.result.design.w.data() + st.result.design.w.size())}});
  }
  nlohmann::json sensors = nlohmann::json::array();
  for (const auto& pt : p.setup.sensor_points) sensors.push_back({pt.x, pt.y});
  const nlohmann::json j = {
      {"kind", r.kind},
      {"gamma", r.gamma},
      {"active_threshold", p.config().penalty.binary_tol},
      {"weights", std::vector<double>(r.weights.data(), r.weights.data() + r.weights.size())},
      {"binary", std::vector<double>(r.binary.data(), r.binary.data() + r.binary.size())},
      {"active_sensors", r.active},
      {"n_active", r.active.size()},
      {"theta", r.theta},
      {"exact_trace", r.exact_trace},
      {"binary_converged", r.binary_converged},
      {"non_binary", r.non_binary},
      {"total_iterations", r.total_iterations()},
      {"pde_solves_during_optimization", r.pde_solves_during_optimization},
      {"sensor_points", sensors},
      {"stages", stages},
  };
  std::ofstream out(dir / "weights.json");
  if (!out) throw ConfigError("cannot write " + (dir / "weights.json").string());
  out << j.dump(2) << '\n';
  std::ofstream log = open_csv(dir / "optimizer_log.csv");
  write_optimizer_log(log, r.log());
}

void write_compare_csv(const std::filesystem::path& path, const CompareResult& r) {
  std::ofstream out = open_csv(path);
  out << "design_kind,n_sensors,exact_trace,gamma,replicate\n";
  for (const auto& row : r.rows) {
    out << row.kind << ',' << row.n_sensors << ',' << row.trace << ',' << row.gamma << ',' << row.replicate
        << '\n';
  }
}

void write_trace_study_csv(const std::filesystem::path& path, const TraceStudyResult& r) {
  std::ofstream out = open_csv(path);
  out << "n_tr,mean_relative_error,std_relative_error,exact_trace,dense_trace\n";
  for (const auto& row : r.rows) {
    out << row.count << ',' << row.mean_rel_error << ',' << row.std_rel_error << ',' << r.exact_trace << ','
        << r.dense_trace << '\n';
  }
}

void write_rank_study_csv(const std::filesystem::path& path, const std::vector<RankStudyRow>& rows) {
  std::ofstream out = open_csv(path);
  out << "rank,theta_opt,objective_total,iterations,n_active\n";
  for (const auto& row : rows) {
    out << row.rank << ',' << row.theta << ',' << row.total << ',' << row.iterations << ',' << row.n_active
        << '\n';
  }
}

void write_manifest(const std::filesystem::path& dir, const std::string& command, const OEDConfig& cfg,
                    const std::vector<std::string>& outputs) {
  std::filesystem::create_directories(dir);
  const nlohmann::json j = {
      {"command", command},
      {"config", config_to_json(cfg)},
      {"seeds",
       {{"master", cfg.seed},
        {"surrogate", cfg.surrogate_seed()},
        {"estimator", cfg.estimator_seed()},
        {"compare", cfg.compare_seed()}}},
      {"outputs", outputs},
  };
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ConfigError("cannot write " + (dir / "manifest.json").string());
  out << j.dump(2) << '\n';
}

}  // namespace aoed
