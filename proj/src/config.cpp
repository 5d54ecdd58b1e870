#include "aoed/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace aoed {

namespace {

// Decodes one section, rejecting keys it does not know.
class Section {
 public:
  Section(const YAML::Node& node, std::string name) : node_(node), name_(std::move(name)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError("config: '" + name_ + "' must be a mapping");
  }
  ~Section() = default;

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return;
    const YAML::Node& cn = node_;
    const YAML::Node v = cn[key];
    if (!v || v.IsNull()) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception& e) {
      throw ConfigError("config: bad value for " + name_ + "." + key + ": " + e.what());
    }
  }

  YAML::Node child(const char* key) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return YAML::Node();
    const YAML::Node& cn = node_;
    return cn[key];
  }

  void finish() const {
    if (!node_ || node_.IsNull()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError("config: unknown key '" + (name_.empty() ? key : name_ + "." + key) + "'");
    }
  }

 private:
  YAML::Node node_;
  std::string name_;
  std::set<std::string> seen_;
};

std::vector<Rect> read_holes(const YAML::Node& node) {
  std::vector<Rect> holes;
  if (!node.IsSequence()) throw ConfigError("config: mesh.holes must be a list of [x0, y0, x1, y1]");
  for (const auto& h : node) {
    const auto v = h.as<std::vector<double>>();
    if (v.size() != 4) throw ConfigError("config: each hole needs [x0, y0, x1, y1]");
    holes.push_back({v[0], v[1], v[2], v[3]});
  }
  return holes;
}

void apply_override(YAML::Node& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw ConfigError("override '" + assignment + "': " + e.what());
  }
  std::vector<std::string> keys;
  std::stringstream ss(path);
  for (std::string k; std::getline(ss, k, '.');) {
    if (k.empty()) throw ConfigError("override '" + assignment + "': empty key component");
    keys.push_back(k);
  }
  // yaml-cpp nodes are handles: assignment writes through, reset() rebinds
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    YAML::Node next = chain.back()[keys[i]];
    if (!next || next.IsNull()) {
      chain.back()[keys[i]] = YAML::Node(YAML::NodeType::Map);
      next.reset(chain.back()[keys[i]]);
    }
    if (!next.IsMap()) throw ConfigError("override '" + assignment + "': '" + keys[i] + "' is not a section");
    chain.push_back(next);
  }
  chain.back()[keys.back()] = value;
}

OEDConfig decode(const YAML::Node& root) {
  if (root && !root.IsNull() && !root.IsMap()) throw ConfigError("config: top level must be a mapping");
  OEDConfig c;
  Section top(root, "");
  top.read("seed", c.seed);
  top.read("output_dir", c.output_dir);
  {
    YAML::Node n = top.child("mesh");
    Section s(n, "mesh");
    s.read("resolution", c.mesh.resolution);
    s.read("file", c.mesh.file);
    YAML::Node holes = s.child("holes");
    if (holes && !holes.IsNull()) c.mesh.holes = read_holes(holes);
    s.finish();
  }
  {
    Section s(top.child("prior"), "prior");
    s.read("alpha", c.prior.alpha);
    s.read("beta", c.prior.beta);
    s.finish();
  }
  {
    Section s(top.child("transport"), "transport");
    s.read("kappa", c.transport.kappa);
    s.read("final_time", c.transport.final_time);
    s.read("num_steps", c.transport.num_steps);
    s.read("velocity", c.transport.velocity);
    s.read("cutoff_width", c.transport.cutoff_width);
    s.read("max_speed", c.transport.max_speed);
    s.read("allow_small_kappa", c.transport.allow_small_kappa);
    s.finish();
  }
  {
    Section s(top.child("observation"), "observation");
    s.read("spacing", c.observation.spacing);
    s.read("clearance", c.observation.clearance);
    s.read("sensor_file", c.observation.sensor_file);
    s.read("num_times", c.observation.num_times);
    s.read("t_start", c.observation.t_start);
    s.read("t_end", c.observation.t_end);
    s.read("noise_sigma", c.observation.noise_sigma);
    s.finish();
  }
  {
    Section s(top.child("whitening"), "whitening");
    s.read("mode", c.whitening.mode);
    s.read("iterations", c.whitening.iterations);
    s.finish();
  }
  {
    Section s(top.child("surrogate"), "surrogate");
    s.read("rank", c.surrogate.rank);
    s.read("oversampling", c.surrogate.oversampling);
    s.read("power_iterations", c.surrogate.power_iterations);
    s.read("seed", c.surrogate.seed);
    s.read("residual_tolerance", c.surrogate.residual_tolerance);
    s.read("residual_probes", c.surrogate.residual_probes);
    s.finish();
  }
  {
    Section s(top.child("estimator"), "estimator");
    s.read("count", c.estimator.count);
    s.read("seed", c.estimator.seed);
    s.finish();
  }
  {
    Section s(top.child("penalty"), "penalty");
    s.read("kind", c.penalty.kind);
    s.read("gamma", c.penalty.gamma);
    s.read("eps_ratio", c.penalty.eps_ratio);
    s.read("eps_count", c.penalty.eps_count);
    s.read("binary_tol", c.penalty.binary_tol);
    s.read("l1_threshold", c.penalty.l1_threshold);
    s.finish();
  }
  {
    Section s(top.child("optimizer"), "optimizer");
    s.read("max_iter", c.optimizer.max_iter);
    s.read("grad_reduction", c.optimizer.grad_reduction);
    s.read("memory", c.optimizer.memory);
    s.read("log_barrier", c.optimizer.log_barrier);
    s.read("initial_weight", c.optimizer.initial_weight);
    s.finish();
  }
  {
    Section s(top.child("study"), "study");
    s.read("n_random", c.study.n_random);
    s.read("compare_gammas", c.study.compare_gammas);
    s.read("compare_seed", c.study.compare_seed);
    s.read("trace_counts", c.study.trace_counts);
    s.read("trace_repetitions", c.study.trace_repetitions);
    s.read("ranks", c.study.ranks);
    s.read("rank_gamma", c.study.rank_gamma);
    s.read("spectrum_values", c.study.spectrum_values);
    s.finish();
  }
  top.finish();
  return c;
}

OEDConfig finish_config(YAML::Node root, const std::vector<std::string>& overrides) {
  if (!root || root.IsNull()) root.reset(YAML::Node(YAML::NodeType::Map));
  for (const auto& o : overrides) apply_override(root, o);
  OEDConfig c = decode(root);
  c.validate();
  return c;
}

}  // namespace

void OEDConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  require(mesh.file.empty() ? mesh.resolution >= 2 : true, "mesh.resolution must be >= 2");
  require(prior.alpha > 0.0 && prior.beta > 0.0, "prior.alpha and prior.beta must be positive");
  require(transport.kappa > 0.0, "transport.kappa must be positive");
  require(transport.final_time > 0.0, "transport.final_time must be positive");
  require(transport.num_steps >= 1, "transport.num_steps must be >= 1");
  require(transport.cutoff_width > 0.0 && transport.max_speed >= 0.0, "bad velocity parameters");
  require(observation.spacing > 0.0 && observation.clearance >= 0.0, "bad sensor grid parameters");
  require(observation.num_times >= 1, "observation.num_times must be >= 1");
  require(observation.t_start >= 0.0 && observation.t_end <= transport.final_time &&
              observation.t_start <= observation.t_end,
          "observation window must lie inside [0, final_time]");
  require(observation.num_times == 1 || observation.t_start < observation.t_end,
          "observation window is empty");
  require(observation.noise_sigma > 0.0, "observation.noise_sigma must be positive");
  require(whitening.mode == "auto" || whitening.mode == "dense" || whitening.mode == "iterative",
          "whitening.mode must be auto, dense or iterative");
  require(whitening.iterations >= 1, "whitening.iterations must be >= 1");
  require(surrogate.rank >= 1 && surrogate.oversampling >= 0 && surrogate.power_iterations >= 0,
          "bad surrogate parameters");
  require(surrogate.residual_tolerance > 0.0, "surrogate.residual_tolerance must be positive");
  require(estimator.count >= 1, "estimator.count must be >= 1");
  require(penalty.kind == "l1" || penalty.kind == "phi_eps", "penalty.kind must be l1 or phi_eps");
  require(penalty.gamma >= 0.0, "penalty.gamma must be non-negative");
  require(penalty.eps_ratio > 0.0 && penalty.eps_ratio < 1.0, "penalty.eps_ratio must be in (0, 1)");
  require(penalty.eps_count >= 1, "penalty.eps_count must be >= 1");
  require(penalty.binary_tol > 0.0 && penalty.l1_threshold > 0.0, "bad penalty tolerances");
  require(optimizer.max_iter >= 0 && optimizer.memory >= 1 && optimizer.grad_reduction > 1.0,
          "bad optimizer parameters");
  require(optimizer.initial_weight >= 0.0 && optimizer.initial_weight <= 1.0,
          "optimizer.initial_weight must be in [0, 1]");
  require(study.n_random >= 1 && study.trace_repetitions >= 1 && study.spectrum_values >= 1,
          "bad study parameters");
  for (int k : study.trace_counts) require(k >= 1, "study.trace_counts entries must be >= 1");
  for (int r : study.ranks) require(r >= 1, "study.ranks entries must be >= 1");
}

OEDConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  YAML::Node root;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
      root = YAML::Load(in);
    } catch (const YAML::Exception& e) {
      throw ConfigError("config file " + path.string() + ": " + e.what());
    }
  }
  return finish_config(root, overrides);
}

OEDConfig config_from_yaml_text(const std::string& text, const std::vector<std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return finish_config(root, overrides);
}

nlohmann::json config_to_json(const OEDConfig& c) {
  nlohmann::json holes = nlohmann::json::array();
  for (const Rect& r : c.mesh.holes) holes.push_back({r.x0, r.y0, r.x1, r.y1});
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"mesh", {{"resolution", c.mesh.resolution}, {"holes", holes}, {"file", c.mesh.file}}},
      {"prior", {{"alpha", c.prior.alpha}, {"beta", c.prior.beta}}},
      {"transport",
       {{"kappa", c.transport.kappa},
        {"final_time", c.transport.final_time},
        {"num_steps", c.transport.num_steps},
        {"velocity", c.transport.velocity},
        {"cutoff_width", c.transport.cutoff_width},
        {"max_speed", c.transport.max_speed},
        {"allow_small_kappa", c.transport.allow_small_kappa}}},
      {"observation",
       {{"spacing", c.observation.spacing},
        {"clearance", c.observation.clearance},
        {"sensor_file", c.observation.sensor_file},
        {"num_times", c.observation.num_times},
        {"t_start", c.observation.t_start},
        {"t_end", c.observation.t_end},
        {"noise_sigma", c.observation.noise_sigma}}},
      {"whitening", {{"mode", c.whitening.mode}, {"iterations", c.whitening.iterations}}},
      {"surrogate",
       {{"rank", c.surrogate.rank},
        {"oversampling", c.surrogate.oversampling},
        {"power_iterations", c.surrogate.power_iterations},
        {"seed", c.surrogate_seed()},
        {"residual_tolerance", c.surrogate.residual_tolerance},
        {"residual_probes", c.surrogate.residual_probes}}},
      {"estimator", {{"count", c.estimator.count}, {"seed", c.estimator_seed()}}},
      {"penalty",
       {{"kind", c.penalty.kind},
        {"gamma", c.penalty.gamma},
        {"eps_ratio", c.penalty.eps_ratio},
        {"eps_count", c.penalty.eps_count},
        {"binary_tol", c.penalty.binary_tol},
        {"l1_threshold", c.penalty.l1_threshold}}},
      {"optimizer",
       {{"max_iter", c.optimizer.max_iter},
        {"grad_reduction", c.optimizer.grad_reduction},
        {"memory", c.optimizer.memory},
        {"log_barrier", c.optimizer.log_barrier},
        {"initial_weight", c.optimizer.initial_weight}}},
      {"study",
       {{"n_random", c.study.n_random},
        {"compare_gammas", c.study.compare_gammas},
        {"compare_seed", c.compare_seed()},
        {"trace_counts", c.study.trace_counts},
        {"trace_repetitions", c.study.trace_repetitions},
        {"ranks", c.study.ranks},
        {"rank_gamma", c.study.rank_gamma},
        {"spectrum_values", c.study.spectrum_values}}},
  };
}

}  // namespace aoed
