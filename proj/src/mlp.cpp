#include "fbf/mlp.hpp"

#include <cmath>

namespace fbf {

using ad::Tensor;

std::string Mlp::weight_name(int layer) const {
  return prefix_ + ".w" + std::to_string(layer);
}

std::string Mlp::bias_name(int layer) const {
  return prefix_ + ".b" + std::to_string(layer);
}

Eigen::Index Mlp::fan_in(int layer) const {
  return layer == 0 ? spec_.in : spec_.units;
}

Eigen::Index Mlp::fan_out(int layer) const {
  return layer == spec_.hidden_layers ? spec_.out : spec_.units;
}

Mlp Mlp::create(ad::ParameterStore& store, std::string prefix,
                const MlpSpec& spec, FinalInit final_init, RandomStream& rng) {
  if (spec.in <= 0 || spec.out <= 0 || spec.hidden_layers < 0 ||
      (spec.hidden_layers > 0 && spec.units <= 0))
    throw ConfigError("mlp spec: extents must be positive");
  Mlp net;
  net.prefix_ = std::move(prefix);
  net.spec_ = spec;
  for (int l = 0; l < net.layer_count(); ++l) {
    Eigen::Index rows = net.fan_out(l);
    Eigen::Index cols = net.fan_in(l);
    Tensor w = Tensor::zeros({rows, cols});
    Tensor b = Tensor::zeros({rows});
    if (l < spec.hidden_layers) {
      double bound = std::sqrt(6.0 / static_cast<double>(cols));
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
          w.data()(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
    } else if (final_init == FinalInit::kIdentityBias) {
      auto d = static_cast<Eigen::Index>(std::llround(
          std::sqrt(static_cast<double>(spec.out))));
      if (d * d != spec.out)
        throw ConfigError("identity-bias init requires a square output");
      for (Eigen::Index i = 0; i < d; ++i) b.data()(0, i * d + i) = 1.0;
    }
    store.add(net.weight_name(l), std::move(w));
    store.add(net.bias_name(l), std::move(b));
  }
  return net;
}

Mlp Mlp::attach(const ad::ParameterStore& store, std::string prefix,
                const MlpSpec& spec) {
  Mlp net;
  net.prefix_ = std::move(prefix);
  net.spec_ = spec;
  for (int l = 0; l < net.layer_count(); ++l) {
    const Tensor& w = store.at(net.weight_name(l));
    const Tensor& b = store.at(net.bias_name(l));
    if (w.rank() != 2 || w.shape()[0] != net.fan_out(l) ||
        w.shape()[1] != net.fan_in(l) || b.rank() != 1 ||
        b.shape()[0] != net.fan_out(l))
      throw ConfigError("mlp parameter shape mismatch at " +
                        net.weight_name(l));
  }
  return net;
}

Eigen::VectorXd Mlp::eval(const ad::ParameterStore& store,
                          const Eigen::VectorXd& x) const {
  if (x.size() != spec_.in) throw ConfigError("mlp input extent mismatch");
  Tensor::Storage h = Tensor::vector(x).data();
  for (int l = 0; l < layer_count(); ++l) {
    const Tensor& w = store.at(weight_name(l));
    const Tensor& b = store.at(bias_name(l));
    Tensor::Storage z = h * w.data().transpose();
    Tensor::Storage y = z + b.data();
    if (l < spec_.hidden_layers) {
      if (spec_.activation == MlpSpec::Activation::kRelu)
        h = y.cwiseMax(0.0);
      else
        h = y.array().tanh().matrix();
    } else {
      h = std::move(y);
    }
  }
  return h.row(0).transpose();
}

ad::Var Mlp::eval(ad::Tape& tape, const ad::ParameterStore& store,
                  ad::Var x) const {
  if (tape.value(x).rank() != 1 || tape.value(x).shape()[0] != spec_.in)
    throw ConfigError("mlp input extent mismatch");
  ad::Var h = x;
  for (int l = 0; l < layer_count(); ++l) {
    ad::Var w = tape.param(store, weight_name(l));
    ad::Var b = tape.param(store, bias_name(l));
    ad::Var y = ad::add(ad::matmul(w, h), b);
    if (l < spec_.hidden_layers) {
      h = spec_.activation == MlpSpec::Activation::kRelu ? ad::relu(y)
                                                         : ad::tanh(y);
    } else {
      h = y;
    }
  }
  return h;
}

}  // namespace fbf
