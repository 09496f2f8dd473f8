#include "fbf/baselines.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace fbf {

double ess(const Eigen::VectorXd& weights) {
  double s = weights.squaredNorm();
  if (s <= 0.0) throw NumericError("ess of all-zero weights");
  return 1.0 / s;
}

std::vector<Eigen::Index> systematic_resample(const Eigen::VectorXd& weights,
                                              Eigen::Index n,
                                              RandomStream& rng) {
  if (n < 1) throw ConfigError("systematic_resample: n must be >= 1");
  std::vector<Eigen::Index> idx(n);
  double u0 = rng.uniform() / static_cast<double>(n);
  double cumulative = weights[0];
  Eigen::Index j = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double u = u0 + static_cast<double>(i) / static_cast<double>(n);
    while (cumulative < u && j + 1 < weights.size()) cumulative += weights[++j];
    idx[i] = j;
  }
  return idx;
}

ParticleFilterResult pf_filter(const SsmInterface& ssm,
                               const std::vector<Eigen::VectorXd>& ys,
                               int n_particles, std::uint64_t seed) {
  if (n_particles < 2) throw ConfigError("pf_filter: need at least 2 particles");
  if (!ssm.sample_initial || !ssm.sample_transition || !ssm.obs_log_density)
    throw ConfigError("pf_filter: incomplete system interface");
  auto t0 = std::chrono::steady_clock::now();

  RandomStream init_rng(derive_seed(seed, "pf-init"));
  Eigen::Index n = n_particles;
  Eigen::MatrixXd particles(n, ssm.state_dim);
  for (Eigen::Index i = 0; i < n; ++i)
    particles.row(i) = ssm.sample_initial(init_rng).transpose();
  Eigen::VectorXd logw = Eigen::VectorXd::Zero(n);

  ParticleFilterResult result;
  for (std::size_t k = 0; k < ys.size(); ++k) {
    RandomStream step_rng(derive_seed(seed, "pf-step", k));
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd moved =
          ssm.sample_transition(particles.row(i).transpose(), step_rng);
      particles.row(i) = moved.transpose();
      double ll = ssm.obs_log_density(moved, ys[k]);
      logw[i] += std::isfinite(ll)
                     ? ll
                     : -std::numeric_limits<double>::infinity();
    }

    ParticleCloud cloud;
    cloud.particles = particles;
    double max_logw = logw.maxCoeff();
    if (!std::isfinite(max_logw)) {
      cloud.degenerate_reset = true;
      cloud.weights = Eigen::VectorXd::Constant(
          n, 1.0 / static_cast<double>(n));
      logw.setZero();
    } else {
      Eigen::VectorXd shifted =
          (logw.array() - max_logw).exp().matrix();
      cloud.weights = shifted / shifted.sum();
    }
    cloud.ess = ess(cloud.weights);

    if (cloud.ess < static_cast<double>(n) / 2.0) {
      cloud.resampled = true;
      std::vector<Eigen::Index> idx =
          systematic_resample(cloud.weights, n, step_rng);
      Eigen::MatrixXd next(n, ssm.state_dim);
      for (Eigen::Index i = 0; i < n; ++i)
        next.row(i) = cloud.particles.row(idx[i]);
      particles = std::move(next);
      logw.setZero();
    }
    result.clouds.push_back(std::move(cloud));
  }

  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

Eigen::VectorXd cloud_mean(const ParticleCloud& cloud) {
  return cloud.particles.transpose() * cloud.weights;
}

Eigen::MatrixXd cloud_resample(const ParticleCloud& cloud, Eigen::Index n,
                               RandomStream& rng) {
  std::vector<Eigen::Index> idx = systematic_resample(cloud.weights, n, rng);
  Eigen::MatrixXd out(n, cloud.particles.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    out.row(i) = cloud.particles.row(idx[i]);
  return out;
}

std::vector<GaussianBelief> kalman_filter(
    const LinearGaussianSSM& ssm, const std::vector<Eigen::VectorXd>& ys) {
  GaussianBelief belief{ssm.mu0, ssm.sigma0};
  std::vector<GaussianBelief> out;
  out.reserve(ys.size());
  for (const Eigen::VectorXd& y : ys) {
    belief = kalman_step(belief, y, ssm.b, ssm.f, ssm.c, ssm.h, ssm.q, ssm.r);
    out.push_back(belief);
  }
  return out;
}

SsmInterface make_linear_gaussian_interface(const LinearGaussianSSM& ssm) {
  SsmInterface out;
  out.state_dim = ssm.mu0.size();
  Eigen::MatrixXd l0 = robust_cholesky(ssm.sigma0);
  Eigen::MatrixXd lq = robust_cholesky(ssm.q);
  out.sample_initial = [ssm, l0](RandomStream& rng) {
    return Eigen::VectorXd(ssm.mu0 + l0 * rng.normal_vector(ssm.mu0.size()));
  };
  out.sample_transition = [ssm, lq](const Eigen::VectorXd& x,
                                    RandomStream& rng) {
    return Eigen::VectorXd(ssm.f * x + ssm.b +
                           lq * rng.normal_vector(x.size()));
  };
  out.obs_log_density = [ssm](const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y) {
    return gaussian_log_pdf(y, ssm.h * x + ssm.c, ssm.r);
  };
  return out;
}

}  // namespace fbf
