#include "fbf/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace fbf {
namespace {

using Section = std::map<std::string, std::string>;
using Ini = std::map<std::string, Section>;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

Ini parse_ini(const std::string& text) {
  Ini sections;
  std::istringstream stream(text);
  std::string line;
  std::string current;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unterminated section header");
      }
      current = trim(t.substr(1, t.size() - 2));
      if (current.empty()) {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": empty section name");
      }
      sections.try_emplace(current);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    if (current.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": key outside any section");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    }
    if (!sections[current].emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    }
  }
  return sections;
}

/// Tracks which keys of a section were consumed so leftovers can be rejected.
class SectionReader {
 public:
  SectionReader(const Ini& ini, std::string name) : name_(std::move(name)) {
    const auto it = ini.find(name_);
    if (it != ini.end()) section_ = &it->second;
  }

  bool has(const std::string& key) const {
    return section_ != nullptr && section_->count(key) > 0;
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    const std::string* raw = take(key);
    return raw != nullptr ? *raw : fallback;
  }

  std::string require_string(const std::string& key) {
    const std::string* raw = take(key);
    if (raw == nullptr) {
      throw ConfigError("[" + name_ + "] missing required key '" + key + "'");
    }
    return *raw;
  }

  double get_double(const std::string& key, double fallback) {
    const std::string* raw = take(key);
    if (raw == nullptr) return fallback;
    return parse_double(key, *raw);
  }

  long get_int(const std::string& key, long fallback) {
    const std::string* raw = take(key);
    if (raw == nullptr) return fallback;
    return parse_int(key, *raw);
  }

  long require_int(const std::string& key) {
    const std::string* raw = take(key);
    if (raw == nullptr) {
      throw ConfigError("[" + name_ + "] missing required key '" + key + "'");
    }
    return parse_int(key, *raw);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    const std::string* raw = take(key);
    if (raw == nullptr) return fallback;
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(raw->c_str(), &end, 10);
    if (errno != 0 || end == raw->c_str() || *end != '\0' ||
        raw->front() == '-') {
      throw bad_value(key, *raw);
    }
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) {
    const std::string* raw = take(key);
    if (raw == nullptr) return fallback;
    if (*raw == "true" || *raw == "1") return true;
    if (*raw == "false" || *raw == "0") return false;
    throw bad_value(key, *raw);
  }

  void finish() const {
    if (section_ == nullptr) return;
    for (const auto& [key, value] : *section_) {
      if (consumed_.count(key) == 0) {
        throw ConfigError("[" + name_ + "] unknown key '" + key + "'");
      }
    }
  }

 private:
  const std::string* take(const std::string& key) {
    if (section_ == nullptr) return nullptr;
    const auto it = section_->find(key);
    if (it == section_->end()) return nullptr;
    consumed_.insert(key);
    return &it->second;
  }

  double parse_double(const std::string& key, const std::string& raw) const {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(raw.c_str(), &end);
    if (errno != 0 || end == raw.c_str() || *end != '\0') {
      throw bad_value(key, raw);
    }
    return v;
  }

  long parse_int(const std::string& key, const std::string& raw) const {
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(raw.c_str(), &end, 10);
    if (errno != 0 || end == raw.c_str() || *end != '\0') {
      throw bad_value(key, raw);
    }
    return v;
  }

  ConfigError bad_value(const std::string& key, const std::string& raw) const {
    return ConfigError("[" + name_ + "] bad value for '" + key + "': " + raw);
  }

  std::string name_;
  const Section* section_ = nullptr;
  std::set<std::string> consumed_;
};

SystemConfig read_system(const Ini& ini) {
  SectionReader reader(ini, "system");
  SystemConfig system;
  system.id = reader.require_string("id");
  system.steps = static_cast<int>(reader.require_int("steps"));
  system.trajectories = static_cast<int>(reader.require_int("trajectories"));
  system.test_trajectories =
      static_cast<int>(reader.get_int("test_trajectories", 0));
  if (system.steps < 1) throw ConfigError("[system] steps must be >= 1");
  if (system.trajectories < 1) {
    throw ConfigError("[system] trajectories must be >= 1");
  }
  if (system.test_trajectories < 0) {
    throw ConfigError("[system] test_trajectories must be >= 0");
  }

  if (system.id == "sinusoidal") {
    system.params["q2"] = reader.get_double("q2", 0.1);
    system.params["r2"] = reader.get_double("r2", 0.05);
  } else if (system.id == "lorenz96") {
    system.params["m"] = static_cast<double>(reader.get_int("m", 40));
    system.params["forcing"] = reader.get_double("forcing", 8.0);
    system.params["dt"] = reader.get_double("dt", 0.01);
  } else if (system.id == "advection_diffusion") {
    system.params["kappa"] = reader.get_double("kappa", 0.5);
    system.params["dc"] = reader.get_double("dc", 0.01);
    system.params["sigma"] = reader.get_double("sigma", 10.0);
    system.params["r2"] = reader.get_double("r2", 0.25);
    system.params["sensors"] =
        static_cast<double>(reader.get_int("sensors", 10));
    system.params["dt"] = reader.get_double("dt", 0.005);
  } else {
    throw ConfigError("[system] unknown id '" + system.id + "'");
  }
  reader.finish();
  return system;
}

ModelConfig read_model(const Ini& ini, const SystemConfig& system) {
  SectionReader reader(ini, "model");
  ModelConfig model;
  const std::string variant = reader.get_string("variant", "fbf");
  if (variant == "fbf") {
    model.variant = Variant::kFbf;
  } else if (variant == "fbf_prime") {
    model.variant = Variant::kFbfPrime;
  } else {
    throw ConfigError("[model] unknown variant '" + variant + "'");
  }
  std::tie(model.state_dim, model.meas_dim) = system_dims(system);

  const double clamp = reader.get_double("clamp", 2.0);
  model.t_flow.dim = model.state_dim;
  model.t_flow.blocks = static_cast<int>(reader.get_int("t_blocks", 6));
  model.t_flow.hidden_layers =
      static_cast<int>(reader.get_int("t_hidden_layers", 2));
  model.t_flow.units = reader.get_int("t_units", 64);
  model.t_flow.clamp = clamp;
  model.v_flow.dim = model.meas_dim;
  model.v_flow.blocks = static_cast<int>(reader.get_int("v_blocks", 6));
  model.v_flow.hidden_layers =
      static_cast<int>(reader.get_int("v_hidden_layers", 2));
  model.v_flow.units = reader.get_int("v_units", 64);
  model.v_flow.clamp = clamp;
  model.conditioner.hidden_layers =
      static_cast<int>(reader.get_int("cond_hidden_layers", 2));
  model.conditioner.units = reader.get_int("cond_units", 64);
  reader.finish();
  validate(model);
  return model;
}

TrainConfig read_training(const Ini& ini, std::uint64_t seed) {
  SectionReader reader(ini, "training");
  TrainConfig training;
  training.iterations =
      static_cast<int>(reader.get_int("iterations", training.iterations));
  training.batch_size =
      static_cast<int>(reader.get_int("batch_size", training.batch_size));
  training.lr0 = reader.get_double("lr0", training.lr0);
  training.decay = reader.get_double("decay", training.decay);
  training.alpha = reader.get_double("alpha", training.alpha);
  training.beta = reader.get_double("beta", training.beta);
  training.initial_loss =
      reader.get_bool("initial_loss", training.initial_loss);
  training.grad_clip = reader.get_double("grad_clip", training.grad_clip);
  training.sigma0_ridge =
      reader.get_double("sigma0_ridge", training.sigma0_ridge);
  training.seed = seed;
  reader.finish();
  if (training.iterations < 0) {
    throw ConfigError("[training] iterations must be >= 0");
  }
  if (training.batch_size < 1) {
    throw ConfigError("[training] batch_size must be >= 1");
  }
  return training;
}

EvaluationConfig read_evaluation(const Ini& ini) {
  SectionReader reader(ini, "evaluation");
  EvaluationConfig evaluation;
  const std::string metrics = reader.get_string("metrics", "rmse,mmd,crps");
  evaluation.metrics.clear();
  std::istringstream stream(metrics);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const std::string metric = trim(item);
    if (metric.empty()) continue;
    if (metric != "rmse" && metric != "mmd" && metric != "crps") {
      throw ConfigError("[evaluation] unknown metric '" + metric + "'");
    }
    evaluation.metrics.push_back(metric);
  }
  if (evaluation.metrics.empty()) {
    throw ConfigError("[evaluation] metrics list is empty");
  }
  evaluation.n_samples =
      static_cast<int>(reader.get_int("n_samples", evaluation.n_samples));
  evaluation.mmd_sigma = reader.get_double("mmd_sigma", evaluation.mmd_sigma);
  evaluation.pf_particles = static_cast<int>(
      reader.get_int("pf_particles", evaluation.pf_particles));
  reader.finish();
  if (evaluation.n_samples < 1) {
    throw ConfigError("[evaluation] n_samples must be >= 1");
  }
  if (evaluation.mmd_sigma <= 0.0) {
    throw ConfigError("[evaluation] mmd_sigma must be positive");
  }
  if (evaluation.pf_particles < 1) {
    throw ConfigError("[evaluation] pf_particles must be >= 1");
  }
  return evaluation;
}

}  // namespace

std::pair<Eigen::Index, Eigen::Index> system_dims(const SystemConfig& system) {
  if (system.id == "sinusoidal") return {2, 2};
  if (system.id == "lorenz96") {
    const auto m = static_cast<Eigen::Index>(system.params.at("m"));
    return {m, m};
  }
  if (system.id == "advection_diffusion") {
    const auto sensors =
        static_cast<Eigen::Index>(system.params.at("sensors"));
    return {100, sensors};
  }
  throw ConfigError("unknown system id '" + system.id + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  const Ini ini = parse_ini(text);
  static const std::set<std::string> known = {
      "experiment", "system", "model", "training", "evaluation", "paths"};
  for (const auto& [name, section] : ini) {
    if (known.count(name) == 0) {
      throw ConfigError("unknown config section [" + name + "]");
    }
  }

  ExperimentConfig config;
  {
    SectionReader reader(ini, "experiment");
    config.seed = reader.get_u64("seed", 0);
    reader.finish();
  }
  config.system = read_system(ini);
  config.model = read_model(ini, config.system);
  config.training = read_training(ini, config.seed);
  config.evaluation = read_evaluation(ini);
  {
    SectionReader reader(ini, "paths");
    config.workdir = reader.get_string("workdir", ".");
    reader.finish();
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open config");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config(text);
}

}  // namespace fbf
