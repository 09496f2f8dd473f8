#include "fbf/filtering.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

namespace fbf {

namespace {

Eigen::LLT<Eigen::MatrixXd> llt_with_jitter(const Eigen::MatrixXd& sigma) {
  Eigen::MatrixXd s = symmetrize(sigma);
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() == Eigen::Success) return llt;
  double scale = std::max(1.0, s.diagonal().mean());
  for (double jitter : {1e-12, 1e-10, 1e-8}) {
    Eigen::MatrixXd shifted = s;
    shifted.diagonal().array() += jitter * scale;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericError("covariance not positive definite after jitter");
}

void check_belief(const GaussianBelief& b) {
  if (b.mean.size() < 1 || b.cov.rows() != b.mean.size() ||
      b.cov.cols() != b.mean.size())
    throw ConfigError("belief extents inconsistent");
  if (!b.mean.allFinite() || !b.cov.allFinite())
    throw NumericError("non-finite belief");
}

}  // namespace

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& sigma) {
  return 0.5 * (sigma + sigma.transpose());
}

Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& sigma) {
  return llt_with_jitter(sigma).matrixL();
}

GaussianBelief measurement_update(const GaussianBelief& belief,
                                  const Eigen::VectorXd& gamma,
                                  const Eigen::VectorXd& c,
                                  const Eigen::MatrixXd& d,
                                  const Eigen::MatrixXd& qgamma,
                                  UpdateForm form) {
  check_belief(belief);
  Eigen::Index m = belief.mean.size();
  Eigen::Index n = gamma.size();
  if (c.size() != n || d.rows() != n || d.cols() != m || qgamma.rows() != n ||
      qgamma.cols() != n)
    throw ConfigError("measurement_update extents inconsistent");

  Eigen::MatrixXd dsigma = d * belief.cov;  // n x m
  Eigen::VectorXd innovation = gamma - c - d * belief.mean;

  Eigen::MatrixXd gain;  // m x n
  if (form == UpdateForm::kExact) {
    Eigen::MatrixXd s = dsigma * d.transpose() + qgamma;
    gain = llt_with_jitter(s).solve(dsigma).transpose();
  } else {
    gain = llt_with_jitter(qgamma).solve(dsigma).transpose();
  }

  GaussianBelief out;
  out.mean = belief.mean + gain * innovation;
  out.cov = symmetrize(belief.cov - gain * dsigma);
  return out;
}

GaussianBelief measurement_update_information(const GaussianBelief& belief,
                                              const Eigen::VectorXd& gamma,
                                              const Eigen::VectorXd& c,
                                              const Eigen::MatrixXd& d,
                                              const Eigen::MatrixXd& qgamma) {
  check_belief(belief);
  Eigen::Index m = belief.mean.size();
  Eigen::MatrixXd qinv_d = llt_with_jitter(qgamma).solve(d);  // n x m
  Eigen::MatrixXd prior_precision =
      llt_with_jitter(belief.cov)
          .solve(Eigen::MatrixXd::Identity(m, m));
  Eigen::MatrixXd precision =
      symmetrize(prior_precision + d.transpose() * qinv_d);
  auto llt = llt_with_jitter(precision);
  Eigen::VectorXd rhs =
      prior_precision * belief.mean + qinv_d.transpose() * (gamma - c);
  GaussianBelief out;
  out.mean = llt.solve(rhs);
  out.cov = symmetrize(llt.solve(Eigen::MatrixXd::Identity(m, m)));
  return out;
}

GaussianBelief state_propagate(const GaussianBelief& belief,
                               const Eigen::VectorXd& a,
                               const Eigen::MatrixXd& b,
                               const Eigen::MatrixXd& qchi) {
  check_belief(belief);
  Eigen::Index m = belief.mean.size();
  if (a.size() != m || b.rows() != m || b.cols() != m || qchi.rows() != m ||
      qchi.cols() != m)
    throw ConfigError("state_propagate extents inconsistent");
  GaussianBelief out;
  out.mean = a + b * belief.mean;
  out.cov = symmetrize(b * belief.cov * b.transpose() + qchi);
  return out;
}

GaussianBelief kalman_step(const GaussianBelief& belief,
                           const Eigen::VectorXd& gamma,
                           const Eigen::VectorXd& e, const Eigen::MatrixXd& f,
                           const Eigen::VectorXd& g, const Eigen::MatrixXd& h,
                           const Eigen::MatrixXd& pchi,
                           const Eigen::MatrixXd& pgamma) {
  GaussianBelief predicted = state_propagate(belief, e, f, pchi);
  return measurement_update(predicted, gamma, g, h, pgamma);
}

FilterRun fbf_filter(const TrainedFilter& model,
                     const std::vector<Eigen::VectorXd>& measurements,
                     UpdateForm form) {
  FilterRun run;
  run.initial = GaussianBelief{model.mu0, model.sigma0};
  check_belief(run.initial);
  auto t0 = std::chrono::steady_clock::now();

  GaussianBelief belief = run.initial;
  if (model.config.variant == Variant::kFbf) {
    for (std::size_t k = 0; k < measurements.size(); ++k) {
      Eigen::VectorXd gamma =
          model.v_flow.forward(model.params, measurements[k]).z;
      if (!gamma.allFinite())
        throw NumericError("non-finite transformed measurement at step " +
                           std::to_string(k + 1));
      auto coef = model.latent.eval_conditioners(model.params, gamma);
      GaussianBelief conditioned = measurement_update(
          belief, gamma, model.latent.c(model.params),
          model.latent.d(model.params),
          Eigen::MatrixXd(model.latent.qgamma(model.params).asDiagonal()),
          form);
      belief = state_propagate(conditioned, coef.a, coef.b,
                               Eigen::MatrixXd(coef.qchi.asDiagonal()));
      run.beliefs.push_back(belief);
    }
  } else {
    Eigen::VectorXd e = model.latent_prime.e(model.params);
    Eigen::MatrixXd f = model.latent_prime.f(model.params);
    Eigen::VectorXd g = model.latent_prime.g(model.params);
    Eigen::MatrixXd h = model.latent_prime.h(model.params);
    Eigen::MatrixXd pchi = model.latent_prime.pchi(model.params).asDiagonal();
    Eigen::MatrixXd pgamma =
        model.latent_prime.pgamma(model.params).asDiagonal();
    for (std::size_t k = 0; k < measurements.size(); ++k) {
      Eigen::VectorXd gamma =
          model.v_flow.forward(model.params, measurements[k]).z;
      if (!gamma.allFinite())
        throw NumericError("non-finite transformed measurement at step " +
                           std::to_string(k + 1));
      belief = kalman_step(belief, gamma, e, f, g, h, pchi, pgamma);
      run.beliefs.push_back(belief);
    }
  }

  run.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return run;
}

FilterRun fbf_filter_with_coefficients(
    const FbfEquivalentCoefficients& coef, const GaussianBelief& initial,
    const std::vector<Eigen::VectorXd>& gammas, UpdateForm form) {
  FilterRun run;
  run.initial = initial;
  GaussianBelief belief = initial;
  for (const Eigen::VectorXd& gamma : gammas) {
    GaussianBelief conditioned =
        measurement_update(belief, gamma, coef.c, coef.d, coef.qgamma, form);
    belief =
        state_propagate(conditioned, coef.eval_a(gamma), coef.b, coef.qchi);
    run.beliefs.push_back(belief);
  }
  return run;
}

namespace {

/// Square root for sampling: Cholesky when PD, eigenvalue square root with
/// negative eigenvalues clamped to zero otherwise (exact for singular
/// covariances, including Sigma = 0).
Eigen::MatrixXd covariance_sqrt(const Eigen::MatrixXd& sigma) {
  Eigen::MatrixXd s = symmetrize(sigma);
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success)
    throw NumericError("covariance eigendecomposition failed");
  Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
}

}  // namespace

Eigen::MatrixXd sample_posterior(const TrainedFilter& model,
                                 const GaussianBelief& belief, int n,
                                 RandomStream& rng) {
  check_belief(belief);
  if (n < 1) throw ConfigError("sample_posterior: n must be >= 1");
  Eigen::Index m = belief.mean.size();
  Eigen::MatrixXd l = covariance_sqrt(belief.cov);
  Eigen::MatrixXd samples(n, m);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd chi = belief.mean + l * rng.normal_vector(m);
    samples.row(j) = model.t_flow.inverse(model.params, chi).transpose();
  }
  return samples;
}

double gaussian_log_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                        const Eigen::MatrixXd& sigma) {
  auto llt = llt_with_jitter(sigma);
  Eigen::VectorXd w = llt.matrixL().solve(x - mu);
  double logdet =
      2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  return -0.5 * (w.squaredNorm() + logdet +
                 static_cast<double>(x.size()) *
                     std::log(2.0 * std::numbers::pi));
}

double posterior_logdensity(const TrainedFilter& model,
                            const GaussianBelief& belief,
                            const Eigen::VectorXd& x) {
  check_belief(belief);
  return log_density(
      model.t_flow, model.params,
      [&](const Eigen::VectorXd& chi) {
        return gaussian_log_pdf(chi, belief.mean, belief.cov);
      },
      x);
}

}  // namespace fbf
