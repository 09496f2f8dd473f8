#ifndef FBF_MLP_HPP
#define FBF_MLP_HPP

#include <string>

#include "fbf/autodiff.hpp"
#include "fbf/random.hpp"

namespace fbf {

struct MlpSpec {
  Eigen::Index in = 0;
  Eigen::Index out = 0;
  int hidden_layers = 0;
  Eigen::Index units = 0;
  enum class Activation { kRelu, kTanh } activation = Activation::kRelu;
};

/// Initialization of the output layer. Hidden layers always draw
/// Kaiming-uniform weights (bound sqrt(6/fan_in), row-major draw order) with
/// zero biases.
enum class FinalInit {
  kZero,          // zero weights and bias: the net starts as the zero map
  kIdentityBias,  // zero weights, bias = row-major vec(I); requires out = d*d
};

/// Fully connected net; layer l computes y = W_l x + b_l with the hidden
/// activation between layers and a linear output. Parameters live in a
/// ParameterStore under "<prefix>.w<l>" / "<prefix>.b<l>".
class Mlp {
 public:
  Mlp() = default;

  static Mlp create(ad::ParameterStore& store, std::string prefix,
                    const MlpSpec& spec, FinalInit final_init,
                    RandomStream& rng);
  /// Binds to already-present parameters, validating their shapes.
  static Mlp attach(const ad::ParameterStore& store, std::string prefix,
                    const MlpSpec& spec);

  /// Plain evaluation; mirrors the tape path op for op, so both produce
  /// bit-identical values.
  Eigen::VectorXd eval(const ad::ParameterStore& store,
                       const Eigen::VectorXd& x) const;
  ad::Var eval(ad::Tape& tape, const ad::ParameterStore& store,
               ad::Var x) const;

  const MlpSpec& spec() const { return spec_; }
  const std::string& prefix() const { return prefix_; }
  int layer_count() const { return spec_.hidden_layers + 1; }

  std::string weight_name(int layer) const;
  std::string bias_name(int layer) const;

 private:
  Eigen::Index fan_in(int layer) const;
  Eigen::Index fan_out(int layer) const;

  std::string prefix_;
  MlpSpec spec_;
};

}  // namespace fbf

#endif  // FBF_MLP_HPP
