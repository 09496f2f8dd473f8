#include "fbf/model.hpp"

namespace fbf {

void validate(const ModelConfig& config) {
  if (config.state_dim < 1 || config.meas_dim < 1)
    throw ConfigError("model config: dims must be positive");
  if (config.t_flow.dim != config.state_dim)
    throw ConfigError("model config: state flow dim != state_dim");
  if (config.v_flow.dim != config.meas_dim)
    throw ConfigError("model config: measurement flow dim != meas_dim");
  if (config.t_flow.blocks > 0 && config.state_dim < 2)
    throw ConfigError("model config: state coupling requires state_dim >= 2");
  if (config.v_flow.blocks > 0 && config.meas_dim < 2)
    throw ConfigError("model config: meas coupling requires meas_dim >= 2");
  if (config.variant == Variant::kFbf &&
      config.conditioner.hidden_layers > 0 && config.conditioner.units < 1)
    throw ConfigError("model config: conditioner units must be positive");
}

TrainedFilter make_initial_model(const ModelConfig& config,
                                 std::uint64_t seed) {
  validate(config);
  TrainedFilter filter;
  filter.config = config;
  RandomStream rng(derive_seed(seed, "model-init"));
  filter.t_flow = FlowTransform::create(filter.params, "flow_t", config.t_flow,
                                        rng);
  filter.v_flow = FlowTransform::create(filter.params, "flow_v", config.v_flow,
                                        rng);
  if (config.variant == Variant::kFbf) {
    filter.latent =
        FbfLatentModel::create(filter.params, config.state_dim,
                               config.meas_dim, config.conditioner, rng);
  } else {
    filter.latent_prime = FbfPrimeLatentModel::create(
        filter.params, config.state_dim, config.meas_dim);
  }
  filter.mu0 = Eigen::VectorXd::Zero(config.state_dim);
  filter.sigma0 =
      Eigen::MatrixXd::Identity(config.state_dim, config.state_dim);
  return filter;
}

void bind_handles(TrainedFilter& filter) {
  validate(filter.config);
  filter.t_flow =
      FlowTransform::attach(filter.params, "flow_t", filter.config.t_flow);
  filter.v_flow =
      FlowTransform::attach(filter.params, "flow_v", filter.config.v_flow);
  if (filter.config.variant == Variant::kFbf) {
    filter.latent =
        FbfLatentModel::attach(filter.params, filter.config.state_dim,
                               filter.config.meas_dim,
                               filter.config.conditioner);
  } else {
    filter.latent_prime = FbfPrimeLatentModel::attach(
        filter.params, filter.config.state_dim, filter.config.meas_dim);
  }
}

}  // namespace fbf
