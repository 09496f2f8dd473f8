#include "fbf/flow.hpp"

#include <cmath>
#include <numbers>

namespace fbf {

using ad::Tensor;

namespace {

CouplingBlock make_block_layout(Eigen::Index dim, int index) {
  CouplingBlock block;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (i % 2 == index % 2)
      block.active.push_back(i);
    else
      block.passive.push_back(i);
  }
  block.unshuffle.resize(dim);
  Eigen::Index pos = 0;
  for (Eigen::Index i : block.passive) block.unshuffle[i] = pos++;
  for (Eigen::Index i : block.active) block.unshuffle[i] = pos++;
  return block;
}

MlpSpec conditioner_spec(const CouplingBlock& block, const FlowConfig& config) {
  MlpSpec spec;
  spec.in = static_cast<Eigen::Index>(block.passive.size());
  spec.out = static_cast<Eigen::Index>(block.active.size());
  spec.hidden_layers = config.hidden_layers;
  spec.units = config.units;
  spec.activation = MlpSpec::Activation::kRelu;
  return spec;
}

std::string block_prefix(const std::string& prefix, int index) {
  return prefix + ".b" + std::to_string(index);
}

}  // namespace

FlowTransform FlowTransform::create(ad::ParameterStore& store,
                                    std::string prefix,
                                    const FlowConfig& config,
                                    RandomStream& rng) {
  if (config.dim < 1 || config.blocks < 0 || config.clamp <= 0.0)
    throw ConfigError("flow config: invalid extents");
  if (config.blocks > 0 && config.dim < 2)
    throw ConfigError("flow config: coupling requires dim >= 2");
  FlowTransform flow;
  flow.config_ = config;
  for (int b = 0; b < config.blocks; ++b) {
    CouplingBlock block = make_block_layout(config.dim, b);
    block.clamp = config.clamp;
    MlpSpec spec = conditioner_spec(block, config);
    block.s = Mlp::create(store, block_prefix(prefix, b) + ".s", spec,
                          FinalInit::kZero, rng);
    block.t = Mlp::create(store, block_prefix(prefix, b) + ".t", spec,
                          FinalInit::kZero, rng);
    flow.blocks_.push_back(std::move(block));
  }
  return flow;
}

FlowTransform FlowTransform::attach(const ad::ParameterStore& store,
                                    std::string prefix,
                                    const FlowConfig& config) {
  if (config.dim < 1 || config.blocks < 0 || config.clamp <= 0.0)
    throw ConfigError("flow config: invalid extents");
  if (config.blocks > 0 && config.dim < 2)
    throw ConfigError("flow config: coupling requires dim >= 2");
  FlowTransform flow;
  flow.config_ = config;
  for (int b = 0; b < config.blocks; ++b) {
    CouplingBlock block = make_block_layout(config.dim, b);
    block.clamp = config.clamp;
    MlpSpec spec = conditioner_spec(block, config);
    block.s = Mlp::attach(store, block_prefix(prefix, b) + ".s", spec);
    block.t = Mlp::attach(store, block_prefix(prefix, b) + ".t", spec);
    flow.blocks_.push_back(std::move(block));
  }
  return flow;
}

FlowTransform::Forward FlowTransform::forward(const ad::ParameterStore& store,
                                              const Eigen::VectorXd& x) const {
  if (x.size() != config_.dim) throw ConfigError("flow input extent mismatch");
  Forward out;
  out.z = x;
  out.logdet = 0.0;
  for (const CouplingBlock& block : blocks_) {
    Eigen::VectorXd xp(block.passive.size());
    for (std::size_t j = 0; j < block.passive.size(); ++j)
      xp[static_cast<Eigen::Index>(j)] = out.z[block.passive[j]];
    Eigen::VectorXd sraw = block.s.eval(store, xp);
    Eigen::VectorXd traw = block.t.eval(store, xp);
    Tensor::Storage u = (1.0 / block.clamp) * Tensor::vector(sraw).data();
    Tensor::Storage th = u.array().tanh().matrix();
    Tensor::Storage st = block.clamp * th;
    Tensor::Storage e = st.array().exp().matrix();
    for (std::size_t j = 0; j < block.active.size(); ++j) {
      Eigen::Index col = static_cast<Eigen::Index>(j);
      Eigen::Index i = block.active[j];
      out.z[i] = out.z[i] * e(0, col) + traw[col];
    }
    out.logdet += st.sum();
  }
  return out;
}

Eigen::VectorXd FlowTransform::inverse(const ad::ParameterStore& store,
                                       const Eigen::VectorXd& z) const {
  if (z.size() != config_.dim) throw ConfigError("flow input extent mismatch");
  Eigen::VectorXd x = z;
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    const CouplingBlock& block = *it;
    Eigen::VectorXd zp(block.passive.size());
    for (std::size_t j = 0; j < block.passive.size(); ++j)
      zp[static_cast<Eigen::Index>(j)] = x[block.passive[j]];
    Eigen::VectorXd sraw = block.s.eval(store, zp);
    Eigen::VectorXd traw = block.t.eval(store, zp);
    Tensor::Storage u = (1.0 / block.clamp) * Tensor::vector(sraw).data();
    Tensor::Storage th = u.array().tanh().matrix();
    Tensor::Storage st = block.clamp * th;
    for (std::size_t j = 0; j < block.active.size(); ++j) {
      Eigen::Index col = static_cast<Eigen::Index>(j);
      Eigen::Index i = block.active[j];
      x[i] = (x[i] - traw[col]) * std::exp(-st(0, col));
    }
  }
  return x;
}

FlowTransform::TapeForward FlowTransform::forward(
    ad::Tape& tape, const ad::ParameterStore& store, ad::Var x) const {
  if (tape.value(x).rank() != 1 || tape.value(x).shape()[0] != config_.dim)
    throw ConfigError("flow input extent mismatch");
  TapeForward out;
  out.z = x;
  out.logdet = tape.constant(Tensor::scalar(0.0));
  for (const CouplingBlock& block : blocks_) {
    ad::Var xp = ad::gather(out.z, block.passive);
    ad::Var xa = ad::gather(out.z, block.active);
    ad::Var sraw = block.s.eval(tape, store, xp);
    ad::Var traw = block.t.eval(tape, store, xp);
    ad::Var st =
        ad::scale(ad::tanh(ad::scale(sraw, 1.0 / block.clamp)), block.clamp);
    ad::Var za = ad::add(ad::mul(xa, ad::exp(st)), traw);
    out.z = ad::gather(ad::concat(xp, za), block.unshuffle);
    out.logdet = ad::add(out.logdet, ad::sum(st));
  }
  return out;
}

double standard_normal_log_pdf(const Eigen::VectorXd& z) {
  return -0.5 * (z.squaredNorm() +
                 static_cast<double>(z.size()) *
                     std::log(2.0 * std::numbers::pi));
}

double log_density(
    const FlowTransform& flow, const ad::ParameterStore& store,
    const std::function<double(const Eigen::VectorXd&)>& base_log_pdf,
    const Eigen::VectorXd& x) {
  FlowTransform::Forward f = flow.forward(store, x);
  return base_log_pdf(f.z) + f.logdet;
}

}  // namespace fbf
