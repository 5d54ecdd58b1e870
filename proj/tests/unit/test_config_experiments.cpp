#include "aoed/config.hpp"
#include "aoed/experiments.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace aoed;
namespace fs = std::filesystem;

TEST(Config, DefaultsAndDerivedSeeds) {
  const OEDConfig c = config_from_yaml_text("");
  EXPECT_EQ(c.mesh.resolution, 32);
  EXPECT_EQ(c.mesh.holes.size(), 2u);
  EXPECT_DOUBLE_EQ(c.prior.alpha, 8e-3);
  EXPECT_DOUBLE_EQ(c.transport.kappa, 1e-3);
  EXPECT_EQ(c.transport.num_steps, 64);
  EXPECT_EQ(c.surrogate.rank, 60);
  EXPECT_EQ(c.estimator.count, 100);
  EXPECT_EQ(c.penalty.kind, "phi_eps");
  EXPECT_EQ(c.surrogate_seed(), c.seed + 1);
  EXPECT_EQ(c.estimator_seed(), c.seed + 2);
  EXPECT_EQ(c.compare_seed(), c.seed + 3);
}

TEST(Config, YamlAndOverrides) {
  const OEDConfig c = config_from_yaml_text(
      "seed: 7\nmesh:\n  resolution: 16\n  holes: [[0.2, 0.2, 0.4, 0.4]]\nestimator:\n  seed: 99\n",
      {"prior.alpha=0.02", "study.ranks=[10, 20]", "penalty.kind=l1"});
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.mesh.resolution, 16);
  ASSERT_EQ(c.mesh.holes.size(), 1u);
  EXPECT_DOUBLE_EQ(c.mesh.holes[0].x1, 0.4);
  EXPECT_DOUBLE_EQ(c.prior.alpha, 0.02);
  EXPECT_EQ(c.study.ranks, (std::vector<int>{10, 20}));
  EXPECT_EQ(c.penalty.kind, "l1");
  EXPECT_EQ(c.estimator_seed(), 99u);
  EXPECT_EQ(c.surrogate_seed(), 8u);
}

TEST(Config, Rejections) {
  EXPECT_THROW(config_from_yaml_text("prior:\n  alpah: 1\n"), ConfigError);
  EXPECT_THROW(config_from_yaml_text("bogus: 1\n"), ConfigError);
  EXPECT_THROW(config_from_yaml_text("", {"prior.alpha=-1"}), ConfigError);
  EXPECT_THROW(config_from_yaml_text("", {"observation.t_end=5"}), ConfigError);
  EXPECT_THROW(config_from_yaml_text("", {"penalty.kind=l0"}), ConfigError);
  EXPECT_THROW(config_from_yaml_text("", {"noequals"}), ConfigError);
  EXPECT_THROW(config_from_yaml_text("prior: [1, 2]\n"), ConfigError);
  EXPECT_THROW(config_from_yaml_text("", {"prior.alpha=abc"}), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.yaml"), ConfigError);
}

TEST(Config, JsonRoundTripsThroughYaml) {
  const OEDConfig c = config_from_yaml_text("", {"seed=5", "study.compare_gammas=[1.5]"});
  const nlohmann::json j = config_to_json(c);
  EXPECT_EQ(j["seed"], 5);
  EXPECT_EQ(j["surrogate"]["seed"], 6);
  // the resolved config reloads to the same values (JSON is valid YAML)
  const OEDConfig r = config_from_yaml_text(j.dump());
  EXPECT_EQ(config_to_json(r), j);
}

TEST(Config, ShippedFileMatchesDefaults) {
  const OEDConfig c = load_config(std::string(AOED_CONFIG_DIR) + "/default.yaml");
  EXPECT_EQ(config_to_json(c), config_to_json(config_from_yaml_text("")));
}

namespace {

OEDConfig small_config(const std::string& out = "") {
  return config_from_yaml_text("", {"mesh.resolution=12", "observation.spacing=0.2", "observation.clearance=0.05",
                                    "observation.num_times=5", "transport.num_steps=16", "surrogate.rank=30",
                                    "estimator.count=10", "penalty.gamma=0.05", "study.n_random=3",
                                    "study.compare_gammas=[0.05]", "study.trace_counts=[1, 50]",
                                    "study.trace_repetitions=5", "study.ranks=[10, 30]", "study.rank_gamma=0.05",
                                    "output_dir=" + (out.empty() ? std::string("aoed_out") : out)});
}

}  // namespace

TEST(Designs, Helpers) {
  std::vector<Point2> pts;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) pts.push_back({0.1 + 0.2 * i, 0.1 + 0.2 * j});
  const Vector u = uniform_design(pts, 5);
  EXPECT_EQ(u.sum(), 5.0);
  EXPECT_EQ(u[12], 1.0);  // centre first
  // farthest-point picks spread out: the four corners follow the centre
  for (int corner : {0, 4, 20, 24}) EXPECT_EQ(u[corner], 1.0);
  Rng rng = make_rng(1);
  const Vector r = random_design(25, 7, rng);
  EXPECT_EQ(r.sum(), 7.0);
  EXPECT_TRUE(((r.array() == 0.0) || (r.array() == 1.0)).all());
  Vector w(4);
  w << 0.1, 0.9, 0.5, 0.7;
  Vector e(4);
  e << 0, 1, 0, 1;
  EXPECT_EQ(top_k_design(w, 2), e);
  EXPECT_THROW(random_design(3, 4, rng), DomainError);
}

TEST(Designs, RandomDesignIsUniformOverSubsets) {
  Rng rng = make_rng(2);
  Vector counts = Vector::Zero(6);
  for (int t = 0; t < 6000; ++t) counts += random_design(6, 2, rng);
  for (double c : counts) EXPECT_NEAR(c / 6000.0, 2.0 / 6.0, 0.03);
}

TEST(Experiments, DesignIsDeterministicAndPdeFree) {
  const Problem p(small_config());
  const DesignResult a = run_design(p);
  EXPECT_EQ(a.pde_solves_during_optimization, 0);
  EXPECT_TRUE(a.binary_converged);
  EXPECT_EQ(static_cast<int>(a.active.size()), static_cast<int>(a.binary.sum()));
  EXPECT_NEAR(a.exact_trace, p.exact_posterior().exact_trace(a.binary), 1e-12);
  const Problem q(small_config());
  const DesignResult b = run_design(q);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.active, b.active);

  const DesignResult all = run_design(p, "l1", 0.0);
  EXPECT_EQ(all.binary, Vector::Ones(p.num_sensors()));
}

TEST(Experiments, StudiesAndOutputs) {
  const fs::path dir = fs::temp_directory_path() / "aoed_experiments_test";
  fs::remove_all(dir);
  const Problem p(small_config(dir.string()));

  const SpectrumResult sp = compute_spectrum(p);
  EXPECT_TRUE(sp.dense);
  for (Index k = 1; k < sp.sigma_F.size(); ++k) EXPECT_LE(sp.sigma_F[k], sp.sigma_F[k - 1]);
  for (Index k = 1; k < sp.sigma_Ftilde.size(); ++k) EXPECT_LE(sp.sigma_Ftilde[k], sp.sigma_Ftilde[k - 1]);
  EXPECT_LE(sp.rank_Ftilde, sp.rank_F);
  write_spectrum_csv(dir / "spectrum.csv", sp);

  const CompareResult cmp = run_compare(p);
  std::set<std::string> kinds;
  for (const auto& r : cmp.rows) kinds.insert(r.kind);
  EXPECT_EQ(kinds, (std::set<std::string>{"l1", "phi_eps", "random", "uniform"}));
  write_compare_csv(dir / "compare.csv", cmp);

  const TraceStudyResult ts = run_trace_study(p, Vector::Ones(p.num_sensors()));
  ASSERT_EQ(ts.rows.size(), 2u);
  EXPECT_GT(ts.rows[0].mean_rel_error, ts.rows[1].mean_rel_error);
  write_trace_study_csv(dir / "trace.csv", ts);

  const auto rs = run_rank_study(p);
  const auto rs2 = run_rank_study(p);
  ASSERT_EQ(rs.size(), 2u);
  EXPECT_EQ(rs[0].theta, rs2[0].theta);
  write_rank_study_csv(dir / "rank.csv", rs);

  const DesignResult d = run_design(p);
  write_design_outputs(dir / "design", p, d);
  write_manifest(dir, "test", p.config(), {"spectrum.csv"});

  std::ifstream in(dir / "compare.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "design_kind,n_sensors,exact_trace,gamma,replicate");
  const auto j = nlohmann::json::parse(std::ifstream(dir / "design" / "weights.json"));
  EXPECT_EQ(j["active_sensors"].size(), d.active.size());
  EXPECT_EQ(j["weights"].size(), static_cast<std::size_t>(p.num_sensors()));
  const auto m = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
  EXPECT_EQ(m["seeds"]["estimator"], p.config().estimator_seed());
  EXPECT_EQ(m["config"]["mesh"]["resolution"], 12);
  EXPECT_TRUE(fs::exists(dir / "design" / "optimizer_log.csv"));
  fs::remove_all(dir);
}

TEST(Experiments, DefaultProblemL1DesignIsSparse) {
  const Problem p(config_from_yaml_text(""));
  const DesignResult d = run_design(p, "l1", 60.0);
  EXPECT_GT(d.active.size(), 0u);
  EXPECT_LT(static_cast<int>(d.active.size()), p.num_sensors());
}
