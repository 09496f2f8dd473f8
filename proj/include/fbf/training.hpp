#ifndef FBF_TRAINING_HPP
#define FBF_TRAINING_HPP

#include <utility>
#include <vector>

#include "fbf/model.hpp"
#include "fbf/systems.hpp"

namespace fbf {

struct TrainConfig {
  int iterations = 500;  // E_train counts minibatch updates
  int batch_size = 64;
  double lr0 = 5e-4;
  double decay = 0.1;    // schedule lr0 * decay^(iter / iterations)
  double alpha = 1.0;    // transition-density weight
  double beta = 1.0;     // observation-density weight
  std::uint64_t seed = 0;
  bool initial_loss = false;  // also fit (mu0, diag Sigma0) by likelihood
  double grad_clip = 10.0;    // global gradient norm bound
  double sigma0_ridge = 1e-4;
};

double lr_schedule(int iteration, double lr0, double decay, int e_train);

/// Thrown when the objective or a gradient turns non-finite; carries the loss
/// history up to the failing iteration.
struct TrainingDiverged : NumericError {
  TrainingDiverged(const std::string& what, std::vector<double> history)
      : NumericError(what), loss_history(std::move(history)) {}
  std::vector<double> loss_history;
};

/// A minibatch entry is (trajectory, k) with 1 <= k <= K, selecting the
/// triple (x_{k-1}, x_k, y_k).
using BatchIndex = std::pair<int, int>;

/// (alpha/N_b) sum f_s + (beta/N_b) sum f_o (variant-matched densities), with
/// transform subgraphs shared between the two densities of each triple. With
/// the initial-distribution flag, adds the mean initial log-likelihood over
/// the batch trajectories' x_0.
ad::Var minibatch_objective(ad::Tape& tape, const TrainedFilter& model,
                            const Dataset& data,
                            const std::vector<BatchIndex>& batch,
                            const TrainConfig& config);

/// Monte Carlo estimate of E[ln N(T(x_0) | mu0, Sigma0) + ln|det dT/dx_0|]
/// over the given samples, reading the trainable slots "init.mu0" and
/// "init.sigma0" (pre-softplus diagonal).
ad::Var initial_distribution_loss(ad::Tape& tape, const TrainedFilter& model,
                                  const std::vector<Eigen::VectorXd>& x0);

/// mu0 = mean of T(x0), Sigma0 = unbiased sample covariance + ridge I
/// (ridge I alone when only one sample).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> estimate_initial_belief(
    const FlowTransform& t_flow, const ad::ParameterStore& store,
    const std::vector<Eigen::VectorXd>& x0, double ridge = 1e-4);

/// Moment-adaptive descent step (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
class AdamOptimizer {
 public:
  void step(ad::ParameterStore& params, const ad::GradientMap& grads,
            double lr);

 private:
  struct Moments {
    ad::Tensor::Storage m;
    ad::Tensor::Storage v;
  };
  std::map<std::string, Moments, std::less<>> moments_;
  long t_ = 0;
};

/// Runs the minibatch ascent loop in place, then sets (mu0, Sigma0) from the
/// training initial states (or from the fitted initial-distribution slots
/// when enabled) and records the loss history.
void train(TrainedFilter& model, const Dataset& data,
           const TrainConfig& config);

TrainedFilter train_model(const ModelConfig& model_config, const Dataset& data,
                          const TrainConfig& train_config);

}  // namespace fbf

#endif  // FBF_TRAINING_HPP
