#pragma once

#include "aoed/common.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace aoed {

struct MeshConfig {
  int resolution = 32;
  std::vector<Rect> holes{{0.25, 0.15, 0.5, 0.4}, {0.6, 0.6, 0.85, 0.85}};
  std::string file;  // overrides resolution/holes when set
};

struct PriorConfig {
  double alpha = 8e-3;
  double beta = 1e-2;
};

struct TransportConfig {
  double kappa = 1e-3;
  double final_time = 4.0;
  int num_steps = 64;
  std::string velocity = "double_gyre";  // double_gyre | zero | path to a nodal file
  double cutoff_width = 0.1;
  double max_speed = 1.0;
  bool allow_small_kappa = false;
};

struct ObservationConfig {
  double spacing = 0.075;
  double clearance = 0.04;
  std::string sensor_file;
  int num_times = 19;
  double t_start = 1.0;
  double t_end = 4.0;
  double noise_sigma = 1.0;
};

struct WhiteningConfig {
  std::string mode = "auto";  // auto | dense | iterative
  int iterations = 10;
};

struct SurrogateConfig {
  int rank = 60;
  int oversampling = 10;
  int power_iterations = 1;
  std::uint64_t seed = 0;  // 0: derived from the master seed
  double residual_tolerance = 1e-3;
  int residual_probes = 2;
};

struct EstimatorConfig {
  int count = 100;
  std::uint64_t seed = 0;  // 0: derived from the master seed
};

struct PenaltyConfig {
  std::string kind = "phi_eps";  // l1 | phi_eps
  double gamma = 0.05;
  double eps_ratio = 2.0 / 3.0;
  int eps_count = 10;
  double binary_tol = 1e-3;
  double l1_threshold = 4e-3;
};

struct OptimizerConfig {
  int max_iter = 150;
  double grad_reduction = 1e4;
  int memory = 10;
  bool log_barrier = false;
  double initial_weight = 0.5;
};

struct StudyConfig {
  // compare
  int n_random = 20;
  std::vector<double> compare_gammas{0.02, 0.05, 0.12, 0.2};
  std::uint64_t compare_seed = 0;
  // trace-study
  std::vector<int> trace_counts{1, 5, 10, 20, 100};
  int trace_repetitions = 30;
  // rank-study
  std::vector<int> ranks{20, 40, 60, 80, 100};
  double rank_gamma = 5.0;
  // spectrum
  int spectrum_values = 200;
};

struct OEDConfig {
  std::uint64_t seed = 20240601;
  std::string output_dir = "aoed_out";
  MeshConfig mesh;
  PriorConfig prior;
  TransportConfig transport;
  ObservationConfig observation;
  WhiteningConfig whitening;
  SurrogateConfig surrogate;
  EstimatorConfig estimator;
  PenaltyConfig penalty;
  OptimizerConfig optimizer;
  StudyConfig study;

  std::uint64_t surrogate_seed() const { return surrogate.seed ? surrogate.seed : seed + 1; }
  std::uint64_t estimator_seed() const { return estimator.seed ? estimator.seed : seed + 2; }
  std::uint64_t compare_seed() const { return study.compare_seed ? study.compare_seed : seed + 3; }

  /// Throws ConfigError on non-positive physical parameters, an observation
  /// window outside [0, T], and similar inconsistencies.
  void validate() const;
};

/// Reads a YAML file (empty path: defaults only), applies `key.path=value`
/// overrides (values parsed as YAML), then validates. Unknown keys are errors.
OEDConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
OEDConfig config_from_yaml_text(const std::string& text, const std::vector<std::string>& overrides = {});

/// Fully resolved config, including derived seeds.
nlohmann::json config_to_json(const OEDConfig& cfg);

}  // namespace aoed
