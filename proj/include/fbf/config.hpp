#ifndef FBF_CONFIG_HPP
#define FBF_CONFIG_HPP

#include <string>
#include <vector>

#include "fbf/model.hpp"
#include "fbf/training.hpp"

namespace fbf {

struct SystemConfig {
  std::string id;  // sinusoidal | lorenz96 | advection_diffusion
  std::map<std::string, double> params;
  int trajectories = 0;
  int test_trajectories = 0;
  int steps = 0;
};

struct EvaluationConfig {
  std::vector<std::string> metrics = {"rmse", "mmd", "crps"};
  int n_samples = 1000;
  double mmd_sigma = 2.0;
  int pf_particles = 2000;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  SystemConfig system;
  ModelConfig model;  // dims resolved from the system block
  TrainConfig training;
  EvaluationConfig evaluation;
  std::string workdir = ".";
};

/// (state_dim, measurement_dim) implied by a system block.
std::pair<Eigen::Index, Eigen::Index> system_dims(const SystemConfig& system);

/// Parses the INI-style experiment description. Sections: [experiment],
/// [system], [model], [training], [evaluation], [paths]. Unknown sections,
/// unknown keys and duplicate keys are rejected.
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig load_config(const std::string& path);

}  // namespace fbf

#endif  // FBF_CONFIG_HPP
