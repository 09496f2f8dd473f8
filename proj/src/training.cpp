#include "fbf/training.hpp"

#include <cmath>
#include <string>

namespace fbf {
namespace {

constexpr const char* kInitMeanSlot = "init.mu0";
constexpr const char* kInitVarianceSlot = "init.sigma0";  // pre-softplus diag

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

void validate_training_inputs(const TrainedFilter& model, const Dataset& data,
                              const TrainConfig& config) {
  if (model.config.state_dim < 2 || model.config.meas_dim < 2) {
    throw ConfigError("training requires state and measurement dims >= 2");
  }
  if (data.state_dim != model.config.state_dim ||
      data.meas_dim != model.config.meas_dim) {
    throw ConfigError("dataset dimensions do not match the model");
  }
  if (data.trajectories.empty() || data.steps < 1) {
    throw ConfigError("training requires at least one trajectory and one step");
  }
  if (config.iterations < 0 || config.batch_size < 1) {
    throw ConfigError("invalid iteration or batch size");
  }
  if (config.lr0 <= 0.0 || config.decay <= 0.0) {
    throw ConfigError("learning rate and decay must be positive");
  }
}

void ensure_initial_loss_slots(TrainedFilter& model) {
  const auto m = model.config.state_dim;
  if (!model.params.contains(kInitMeanSlot)) {
    model.params.add(kInitMeanSlot, ad::Tensor::zeros({m}));
  }
  if (!model.params.contains(kInitVarianceSlot)) {
    model.params.add(kInitVarianceSlot, ad::Tensor::zeros({m}));
  }
}

std::vector<Eigen::VectorXd> batch_initial_states(
    const Dataset& data, const std::vector<BatchIndex>& batch) {
  std::vector<Eigen::VectorXd> x0;
  x0.reserve(batch.size());
  for (const auto& [traj, k] : batch) {
    x0.push_back(data.trajectories[traj].states.row(0).transpose());
  }
  return x0;
}

}  // namespace

double lr_schedule(int iteration, double lr0, double decay, int e_train) {
  if (e_train <= 0) return lr0;
  return lr0 * std::pow(decay, static_cast<double>(iteration) /
                                   static_cast<double>(e_train));
}

ad::Var minibatch_objective(ad::Tape& tape, const TrainedFilter& model,
                            const Dataset& data,
                            const std::vector<BatchIndex>& batch,
                            const TrainConfig& config) {
  if (batch.empty()) throw ConfigError("empty minibatch");
  const auto n_traj = static_cast<int>(data.trajectories.size());
  ad::Var sum_fs;
  ad::Var sum_fo;
  bool first = true;
  for (const auto& [traj, k] : batch) {
    if (traj < 0 || traj >= n_traj || k < 1 || k > data.steps) {
      throw ConfigError("minibatch index out of range");
    }
    const auto& trajectory = data.trajectories[traj];
    const Eigen::VectorXd x_prev = trajectory.states.row(k - 1).transpose();
    const Eigen::VectorXd x_cur = trajectory.states.row(k).transpose();
    const Eigen::VectorXd y = trajectory.measurements.row(k - 1).transpose();

    const auto t_prev = model.t_flow.forward(
        tape, model.params, tape.constant(ad::Tensor::vector(x_prev)));
    const auto t_cur = model.t_flow.forward(
        tape, model.params, tape.constant(ad::Tensor::vector(x_cur)));
    const auto v_obs = model.v_flow.forward(
        tape, model.params, tape.constant(ad::Tensor::vector(y)));

    ad::Var fs;
    ad::Var fo;
    if (model.config.variant == Variant::kFbf) {
      fs = f_s_from(tape, model.params, model.latent, t_cur, t_prev.z,
                    v_obs.z);
      fo = f_o_from(tape, model.params, model.latent, t_prev.z, v_obs);
    } else {
      fs = f_s_prime_from(tape, model.params, model.latent_prime, t_cur,
                          t_prev.z);
      fo = f_o_prime_from(tape, model.params, model.latent_prime, t_cur.z,
                          v_obs);
    }
    if (first) {
      sum_fs = fs;
      sum_fo = fo;
      first = false;
    } else {
      sum_fs = ad::add(sum_fs, fs);
      sum_fo = ad::add(sum_fo, fo);
    }
  }
  const double inv_nb = 1.0 / static_cast<double>(batch.size());
  ad::Var objective = ad::add(ad::scale(sum_fs, config.alpha * inv_nb),
                              ad::scale(sum_fo, config.beta * inv_nb));
  if (config.initial_loss) {
    objective = ad::add(objective,
                        initial_distribution_loss(
                            tape, model, batch_initial_states(data, batch)));
  }
  return objective;
}

ad::Var initial_distribution_loss(ad::Tape& tape, const TrainedFilter& model,
                                  const std::vector<Eigen::VectorXd>& x0) {
  if (x0.empty()) throw ConfigError("initial-distribution loss needs samples");
  const ad::Var mu0 = tape.param(model.params, kInitMeanSlot);
  const ad::Var sigma0_diag =
      ad::softplus(tape.param(model.params, kInitVarianceSlot));
  ad::Var total;
  bool first = true;
  for (const auto& sample : x0) {
    const auto fwd = model.t_flow.forward(
        tape, model.params, tape.constant(ad::Tensor::vector(sample)));
    const ad::Var term = ad::add(
        diag_gaussian_logpdf(tape, ad::sub(fwd.z, mu0), sigma0_diag),
        fwd.logdet);
    total = first ? term : ad::add(total, term);
    first = false;
  }
  return ad::scale(total, 1.0 / static_cast<double>(x0.size()));
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> estimate_initial_belief(
    const FlowTransform& t_flow, const ad::ParameterStore& store,
    const std::vector<Eigen::VectorXd>& x0, double ridge) {
  if (x0.empty()) throw ConfigError("initial-belief estimate needs samples");
  const auto n = static_cast<Eigen::Index>(x0.size());
  const Eigen::Index m = t_flow.dim();
  Eigen::MatrixXd chi(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    chi.row(i) = t_flow.forward(store, x0[i]).z.transpose();
  }
  const Eigen::VectorXd mu = chi.colwise().mean().transpose();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(m, m);
  if (n > 1) {
    const Eigen::MatrixXd centered = chi.rowwise() - mu.transpose();
    sigma = centered.transpose() * centered / static_cast<double>(n - 1);
  }
  sigma += ridge * Eigen::MatrixXd::Identity(m, m);
  return {mu, sigma};
}

void AdamOptimizer::step(ad::ParameterStore& params,
                         const ad::GradientMap& grads, double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  ++t_;
  const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (auto& slot : params.slots()) {
    if (!slot.trainable) continue;
    const auto it = grads.find(slot.name);
    if (it == grads.end()) continue;
    const ad::Tensor::Storage& g = it->second.data();
    auto [entry, inserted] = moments_.try_emplace(slot.name);
    if (inserted) {
      entry->second.m = ad::Tensor::Storage::Zero(g.rows(), g.cols());
      entry->second.v = ad::Tensor::Storage::Zero(g.rows(), g.cols());
    }
    ad::Tensor::Storage& m = entry->second.m;
    ad::Tensor::Storage& v = entry->second.v;
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
    const ad::Tensor::Storage m_hat = m / bias1;
    const ad::Tensor::Storage v_hat = v / bias2;
    slot.value.data() -=
        lr * (m_hat.array() / (v_hat.array().sqrt() + kEps)).matrix();
  }
}

void train(TrainedFilter& model, const Dataset& data,
           const TrainConfig& config) {
  validate_training_inputs(model, data, config);
  if (config.initial_loss) ensure_initial_loss_slots(model);

  const auto n_traj = static_cast<std::uint64_t>(data.trajectories.size());
  const auto n_steps = static_cast<std::uint64_t>(data.steps);
  RandomStream batch_rng(derive_seed(config.seed, "train-batch"));
  AdamOptimizer adam;
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(config.iterations));

  for (int iter = 0; iter < config.iterations; ++iter) {
    std::vector<BatchIndex> batch(static_cast<std::size_t>(config.batch_size));
    for (auto& [traj, k] : batch) {
      traj = static_cast<int>(batch_rng.uniform_index(n_traj));
      k = 1 + static_cast<int>(batch_rng.uniform_index(n_steps));
    }
    try {
      ad::Tape tape;
      const ad::Var objective =
          minibatch_objective(tape, model, data, batch, config);
      history.push_back(tape.value(objective).scalar_value());
      ad::GradientMap grads = tape.backward(ad::scale(objective, -1.0));

      double sq_norm = 0.0;
      for (const auto& [name, g] : grads) sq_norm += g.data().squaredNorm();
      const double norm = std::sqrt(sq_norm);
      if (!std::isfinite(norm)) {
        throw NumericError("non-finite gradient norm");
      }
      if (config.grad_clip > 0.0 && norm > config.grad_clip) {
        const double shrink = config.grad_clip / norm;
        for (auto& [name, g] : grads) g.data() *= shrink;
      }
      adam.step(model.params, grads,
                lr_schedule(iter, config.lr0, config.decay,
                            config.iterations));
    } catch (const NumericError& err) {
      throw TrainingDiverged(std::string("iteration ") +
                                 std::to_string(iter) + ": " + err.what(),
                             std::move(history));
    }
  }

  if (config.initial_loss) {
    model.mu0 = model.params.at(kInitMeanSlot).as_vector();
    const Eigen::VectorXd raw = model.params.at(kInitVarianceSlot).as_vector();
    model.sigma0 = Eigen::MatrixXd::Zero(raw.size(), raw.size());
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
      model.sigma0(i, i) = stable_softplus(raw[i]);
    }
  } else {
    std::vector<Eigen::VectorXd> x0;
    x0.reserve(data.trajectories.size());
    for (const auto& trajectory : data.trajectories) {
      x0.push_back(trajectory.states.row(0).transpose());
    }
    std::tie(model.mu0, model.sigma0) = estimate_initial_belief(
        model.t_flow, model.params, x0, config.sigma0_ridge);
  }
  model.loss_history = std::move(history);
}

TrainedFilter train_model(const ModelConfig& model_config, const Dataset& data,
                          const TrainConfig& train_config) {
  TrainedFilter model = make_initial_model(model_config, train_config.seed);
  train(model, data, train_config);
  return model;
}

}  // namespace fbf
