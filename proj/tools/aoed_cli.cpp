#include "aoed/config.hpp"
#include "aoed/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Args {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> overrides;
};

aoed::OEDConfig resolve(const Args& a) {
  std::vector<std::string> ov = a.overrides;
  if (a.seed) ov.push_back("seed=" + std::to_string(a.seed));
  if (!a.out.empty()) ov.push_back("output_dir=" + a.out);
  if (a.config.empty()) return aoed::config_from_yaml_text("{}", ov);
  return aoed::load_config(a.config, ov);
}

void add_common(CLI::App* sub, Args& a) {
  sub->add_option("--config", a.config, "YAML config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", a.seed, "master seed (derived seeds follow)");
  sub->add_option("--out", a.out, "output directory");
  sub->add_option("--override", a.overrides, "section.key=value, may repeat")->take_all();
}

void describe(const aoed::Problem& p) {
  std::cerr << "mesh nodes " << p.prior.size() << ", sensors " << p.num_sensors() << ", observations "
            << p.setup.obs_dim() << '\n';
}

int cmd_spectrum(const aoed::OEDConfig& cfg) {
  const aoed::Problem p(cfg);
  describe(p);
  const auto r = aoed::compute_spectrum(p);
  const fs::path dir = cfg.output_dir;
  aoed::write_spectrum_csv(dir / "spectrum.csv", r);
  aoed::write_manifest(dir, "spectrum", cfg, {"spectrum.csv"});
  std::cout << "numerical rank F " << r.rank_F << ", Ftilde " << r.rank_Ftilde << '\n';
  return 0;
}

int cmd_design(const aoed::OEDConfig& cfg) {
  const aoed::Problem p(cfg);
  describe(p);
  const auto r = aoed::run_design(p);
  const fs::path dir = cfg.output_dir;
  aoed::write_design_outputs(dir, p, r);
  aoed::write_manifest(dir, "design", cfg, {"weights.json", "optimizer_log.csv"});
  std::cout << r.kind << " gamma " << r.gamma << ": " << r.active.size() << " sensors, trace "
            << r.exact_trace << ", iterations " << r.total_iterations() << '\n';
  if (r.kind == "phi_eps" && !r.binary_converged) {
    std::cout << "warning: " << r.non_binary.size() << " weights not binary\n";
  }
  return 0;
}

int cmd_compare(const aoed::OEDConfig& cfg) {
  const aoed::Problem p(cfg);
  describe(p);
  const auto r = aoed::run_compare(p);
  const fs::path dir = cfg.output_dir;
  aoed::write_compare_csv(dir / "compare.csv", r);
  aoed::write_manifest(dir, "compare", cfg, {"compare.csv"});
  return 0;
}

int cmd_trace_study(const aoed::OEDConfig& cfg) {
  const aoed::Problem p(cfg);
  describe(p);
  const auto r = aoed::run_trace_study(p, aoed::Vector::Ones(p.num_sensors()));
  const fs::path dir = cfg.output_dir;
  aoed::write_trace_study_csv(dir / "trace_study.csv", r);
  aoed::write_manifest(dir, "trace-study", cfg, {"trace_study.csv"});
  for (const auto& row : r.rows) std::cout << row.count << ": " << row.mean_rel_error << '\n';
  return 0;
}

int cmd_rank_study(const aoed::OEDConfig& cfg) {
  const aoed::Problem p(cfg);
  describe(p);
  const auto rows = aoed::run_rank_study(p);
  const fs::path dir = cfg.output_dir;
  aoed::write_rank_study_csv(dir / "rank_study.csv", rows);
  aoed::write_manifest(dir, "rank-study", cfg, {"rank_study.csv"});
  for (const auto& row : rows) std::cout << row.rank << ": " << row.theta << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"A-optimal sensor placement for advection-diffusion inverse problems"};
  app.require_subcommand(1);

  Args args;
  struct Cmd {
    const char* name;
    const char* help;
    int (*run)(const aoed::OEDConfig&);
  };
  const Cmd cmds[] = {
      {"spectrum", "singular values of F and the prior-preconditioned F", cmd_spectrum},
      {"design", "optimal design with the configured penalty", cmd_design},
      {"compare", "optimal vs random vs uniform designs", cmd_compare},
      {"trace-study", "trace estimator error vs number of probes", cmd_trace_study},
      {"rank-study", "optimal objective vs surrogate rank", cmd_rank_study},
  };
  std::vector<std::pair<CLI::App*, const Cmd*>> subs;
  for (const auto& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, args);
    subs.emplace_back(sub, &c);
  }

  CLI11_PARSE(app, argc, argv);
  try {
    const aoed::OEDConfig cfg = resolve(args);
    for (const auto& [sub, c] : subs) {
      if (sub->parsed()) return c->run(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
