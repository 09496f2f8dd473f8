#ifndef FBF_MODEL_HPP
#define FBF_MODEL_HPP

#include <cstdint>
#include <vector>

#include "fbf/latent_ssm.hpp"

namespace fbf {

enum class Variant { kFbf, kFbfPrime };

struct ModelConfig {
  Variant variant = Variant::kFbf;
  Eigen::Index state_dim = 0;
  Eigen::Index meas_dim = 0;
  FlowConfig t_flow;
  FlowConfig v_flow;
  ConditionerConfig conditioner;  // used by the kFbf variant only
};

void validate(const ModelConfig& config);

/// Flows, latent model and initial belief, bundled with the parameters they
/// read from. Immutable after training.
struct TrainedFilter {
  ModelConfig config;
  ad::ParameterStore params;
  FlowTransform t_flow;
  FlowTransform v_flow;
  FbfLatentModel latent;            // valid when variant == kFbf
  FbfPrimeLatentModel latent_prime; // valid when variant == kFbfPrime
  Eigen::VectorXd mu0;
  Eigen::MatrixXd sigma0;
  std::vector<double> loss_history;
};

/// Fresh parameters drawn from the derived "model-init" stream of the seed;
/// mu0 = 0 and sigma0 = I until estimated from data.
TrainedFilter make_initial_model(const ModelConfig& config,
                                 std::uint64_t seed);

/// Rebinds the flow/latent handles to the bundle's own parameter store.
/// Required after copying or deserializing a TrainedFilter.
void bind_handles(TrainedFilter& filter);

}  // namespace fbf

#endif  // FBF_MODEL_HPP
