#ifndef FBF_BASELINES_HPP
#define FBF_BASELINES_HPP

#include <functional>
#include <vector>

#include "fbf/filtering.hpp"

namespace fbf {

/// Sampler/likelihood bundle a bootstrap particle filter needs from the true
/// system.
struct SsmInterface {
  Eigen::Index state_dim = 0;
  std::function<Eigen::VectorXd(RandomStream&)> sample_initial;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, RandomStream&)>
      sample_transition;
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>
      obs_log_density;  // (x, y) -> ln p(y|x)
};

struct ParticleCloud {
  Eigen::MatrixXd particles;  // N x m, before any resampling this step
  Eigen::VectorXd weights;    // normalized
  double ess = 0.0;
  bool resampled = false;
  bool degenerate_reset = false;
};

struct ParticleFilterResult {
  std::vector<ParticleCloud> clouds;  // one per measurement
  double seconds = 0.0;
};

/// 1 / sum w_i^2 for normalized weights.
double ess(const Eigen::VectorXd& weights);

/// Indices of a systematic resample: particle i is copied floor(n w_i) or
/// ceil(n w_i) times.
std::vector<Eigen::Index> systematic_resample(const Eigen::VectorXd& weights,
                                              Eigen::Index n,
                                              RandomStream& rng);

/// Bootstrap filter: transition-prior proposal, log-space weights,
/// systematic resampling when ESS < N/2. Clouds are recorded before
/// resampling. All-non-finite weights trigger a uniform reset flagged on the
/// cloud.
ParticleFilterResult pf_filter(const SsmInterface& ssm,
                               const std::vector<Eigen::VectorXd>& ys,
                               int n_particles, std::uint64_t seed);

/// Weighted mean of a cloud.
Eigen::VectorXd cloud_mean(const ParticleCloud& cloud);

/// n equally weighted draws from a weighted cloud (systematic), as rows.
Eigen::MatrixXd cloud_resample(const ParticleCloud& cloud, Eigen::Index n,
                               RandomStream& rng);

struct LinearGaussianSSM {
  Eigen::MatrixXd f;      // x_k = f x_{k-1} + b + w, w ~ N(0, q)
  Eigen::VectorXd b;
  Eigen::MatrixXd q;
  Eigen::MatrixXd h;      // y_k = h x_k + c + v, v ~ N(0, r)
  Eigen::VectorXd c;
  Eigen::MatrixXd r;
  Eigen::VectorXd mu0;
  Eigen::MatrixXd sigma0;
};

/// Classical predict/update recursion; exact posterior for the model above.
std::vector<GaussianBelief> kalman_filter(
    const LinearGaussianSSM& ssm, const std::vector<Eigen::VectorXd>& ys);

/// Wraps a linear-Gaussian model for pf_filter.
SsmInterface make_linear_gaussian_interface(const LinearGaussianSSM& ssm);

}  // namespace fbf

#endif  // FBF_BASELINES_HPP
