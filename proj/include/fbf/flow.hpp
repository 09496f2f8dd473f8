#ifndef FBF_FLOW_HPP
#define FBF_FLOW_HPP

#include <functional>
#include <string>
#include <vector>

#include "fbf/mlp.hpp"

namespace fbf {

struct FlowConfig {
  Eigen::Index dim = 0;
  int blocks = 0;
  int hidden_layers = 0;  // hidden stack of each scale/shift net
  Eigen::Index units = 0;
  double clamp = 2.0;
};

/// One affine coupling layer. Active coordinates are transformed as
/// z_a = x_a * exp(s~(x_p)) + t(x_p) with the clamped scale
/// s~ = clamp * tanh(s / clamp); passive coordinates pass through. The mask
/// alternates by block parity: block b transforms coordinates i with
/// i % 2 == b % 2.
struct CouplingBlock {
  std::vector<Eigen::Index> passive;
  std::vector<Eigen::Index> active;
  std::vector<Eigen::Index> unshuffle;  // inverse of the (passive, active) order
  Mlp s;
  Mlp t;
  double clamp = 2.0;
};

/// Stack of coupling blocks; a flow with zero blocks is the identity. With at
/// least one block the dimension must be 2 or more so the mask can split.
class FlowTransform {
 public:
  FlowTransform() = default;

  static FlowTransform create(ad::ParameterStore& store, std::string prefix,
                              const FlowConfig& config, RandomStream& rng);
  static FlowTransform attach(const ad::ParameterStore& store,
                              std::string prefix, const FlowConfig& config);

  struct Forward {
    Eigen::VectorXd z;
    double logdet = 0.0;
  };
  Forward forward(const ad::ParameterStore& store,
                  const Eigen::VectorXd& x) const;
  Eigen::VectorXd inverse(const ad::ParameterStore& store,
                          const Eigen::VectorXd& z) const;

  struct TapeForward {
    ad::Var z;
    ad::Var logdet;
  };
  TapeForward forward(ad::Tape& tape, const ad::ParameterStore& store,
                      ad::Var x) const;

  Eigen::Index dim() const { return config_.dim; }
  const FlowConfig& config() const { return config_; }
  const std::vector<CouplingBlock>& blocks() const { return blocks_; }

 private:
  FlowConfig config_;
  std::vector<CouplingBlock> blocks_;
};

double standard_normal_log_pdf(const Eigen::VectorXd& z);

/// Change-of-variables density of x when flow(x) follows the base law.
double log_density(
    const FlowTransform& flow, const ad::ParameterStore& store,
    const std::function<double(const Eigen::VectorXd&)>& base_log_pdf,
    const Eigen::VectorXd& x);

}  // namespace fbf

#endif  // FBF_FLOW_HPP
