#pragma once

#include "aoed/config.hpp"
#include "aoed/fem.hpp"
#include "aoed/mesh.hpp"
#include "aoed/objective.hpp"
#include "aoed/observation.hpp"
#include "aoed/optimizer.hpp"
#include "aoed/posterior.hpp"
#include "aoed/prior.hpp"
#include "aoed/random.hpp"
#include "aoed/surrogate.hpp"
#include "aoed/transport.hpp"
#include "aoed/velocity.hpp"
#include "aoed/whitening.hpp"

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace aoed {

/// Everything derived from a config up to the forward map. Heavy products
/// (dense posterior, default surrogate) are built on first use and cached.
class Problem {
 public:
  explicit Problem(OEDConfig cfg);

  const OEDConfig& config() const { return config_; }

  Mesh mesh;
  FemOperators fem;
  VelocityField velocity;
  PriorOperator prior;
  WhiteningOperator whitening;
  TransportSolver transport;
  ObservationSetup setup;
  ForwardMap fmap;

  int num_sensors() const { return setup.num_sensors(); }
  long pde_solves() const { return transport.forward_count() + transport.adjoint_count(); }

  SurrogateOptions surrogate_options(int rank = 0) const;
  /// Surrogate at the configured rank (cached) or at an explicit rank.
  std::shared_ptr<const LowRankSurrogate> surrogate() const;
  std::shared_ptr<const LowRankSurrogate> build_surrogate(int rank) const;

  OedObjective objective(std::shared_ptr<const LowRankSurrogate> s, int count = 0,
                         std::uint64_t seed = 0) const;
  OptimizerOptions optimizer_options() const;

  /// Dense posterior when n <= 2000 (exact traces), else surrogate mode.
  const PosteriorModel& exact_posterior() const;

 private:
  OEDConfig config_;
  mutable std::mutex cache_mutex_;
  mutable std::shared_ptr<const LowRankSurrogate> surrogate_;
  mutable std::shared_ptr<const PosteriorModel> posterior_;
};

Mesh build_mesh(const MeshConfig& cfg);
std::vector<Point2> build_sensors(const OEDConfig& cfg, const Mesh& mesh);

// ---- spectrum -------------------------------------------------------------

struct SpectrumResult {
  Vector sigma_F;
  Vector sigma_Ftilde;
  int rank_F = 0;       // count above 1e-4 sigma_1
  int rank_Ftilde = 0;
  bool dense = true;
};

/// Singular values of Sigma^{-1/2} F and Sigma^{-1/2} F Gamma^{1/2} as maps
/// from R^n with the mass inner product. Dense SVD when n <= 2000, otherwise
/// randomized with `study.spectrum_values` retained values.
SpectrumResult compute_spectrum(const Problem& p);
int numerical_rank(const Vector& sigma, double rel_tol = 1e-4);

// ---- design ---------------------------------------------------------------

struct DesignResult {
  std::string kind;  // l1 | phi_eps
  double gamma = 0.0;
  Vector weights;
  Vector binary;  // thresholded (l1) or rounded (phi_eps)
  std::vector<int> active;
  double theta = 0.0;
  double exact_trace = 0.0;  // trace of the binary design
  bool binary_converged = false;
  std::vector<int> non_binary;
  std::vector<ContinuationStage> stages;
  long pde_solves_during_optimization = 0;

  int total_iterations() const;
  std::vector<IterationRecord> log() const;  // stages concatenated, cumulative iter
};

DesignResult run_design(const Problem& p, const std::string& kind, double gamma);
DesignResult run_design(const Problem& p);  // penalty section of the config

// ---- compare --------------------------------------------------------------

struct CompareRow {
  std::string kind;  // phi_eps | l1 | random | uniform
  double gamma = 0.0;
  int n_sensors = 0;
  double trace = 0.0;
  int replicate = 0;
};

struct CompareResult {
  std::vector<CompareRow> rows;
};

CompareResult run_compare(const Problem& p);

/// Spatially even subset of `k` sensors: farthest-point selection starting
/// from the candidate nearest the domain centre.
Vector uniform_design(const std::vector<Point2>& sensors, int k);
Vector random_design(int num_sensors, int k, Rng& rng);
Vector top_k_design(const Vector& w, int k);

// ---- trace study ----------------------------------------------------------

struct TraceStudyRow {
  int count = 0;
  double mean_rel_error = 0.0;
  double std_rel_error = 0.0;
};

struct TraceStudyResult {
  double exact_trace = 0.0;  // surrogate posterior, the estimator's target
  double dense_trace = 0.0;  // full posterior when n <= 2000, else 0
  std::vector<TraceStudyRow> rows;
};

TraceStudyResult run_trace_study(const Problem& p, const Vector& w);

// ---- rank study -----------------------------------------------------------

struct RankStudyRow {
  int rank = 0;
  double theta = 0.0;
  double total = 0.0;
  int iterations = 0;
  int n_active = 0;
};

std::vector<RankStudyRow> run_rank_study(const Problem& p);

// ---- output ---------------------------------------------------------------

void write_spectrum_csv(const std::filesystem::path& path, const SpectrumResult& r);
void write_design_outputs(const std::filesystem::path& dir, const Problem& p, const DesignResult& r);
void write_compare_csv(const std::filesystem::path& path, const CompareResult& r);
void write_trace_study_csv(const std::filesystem::path& path, const TraceStudyResult& r);
void write_rank_study_csv(const std::filesystem::path& path, const std::vector<RankStudyRow>& rows);
void write_manifest(const std::filesystem::path& dir, const std::string& command, const OEDConfig& cfg,
                    const std::vector<std::string>& outputs);

}  // namespace aoed
