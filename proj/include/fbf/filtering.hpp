#ifndef FBF_FILTERING_HPP
#define FBF_FILTERING_HPP

#include <vector>

#include "fbf/model.hpp"

namespace fbf {

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Covariance update used when conditioning on a measurement.
enum class UpdateForm {
  kExact,      // gain Sigma D^T (D Sigma D^T + Q)^{-1}, exact Bayes
  kAsPrinted,  // gain Sigma D^T Q^{-1}, valid when D Sigma D^T << Q
};

/// Conditions a Gaussian belief over chi on gamma = c + D chi + nu,
/// nu ~ N(0, qgamma). Result is symmetrized.
GaussianBelief measurement_update(const GaussianBelief& belief,
                                  const Eigen::VectorXd& gamma,
                                  const Eigen::VectorXd& c,
                                  const Eigen::MatrixXd& d,
                                  const Eigen::MatrixXd& qgamma,
                                  UpdateForm form = UpdateForm::kExact);

/// Same posterior through the precision-matrix route; reference path for
/// cross-checking the gain form.
GaussianBelief measurement_update_information(const GaussianBelief& belief,
                                              const Eigen::VectorXd& gamma,
                                              const Eigen::VectorXd& c,
                                              const Eigen::MatrixXd& d,
                                              const Eigen::MatrixXd& qgamma);

/// Pushes a belief through chi' = a + B chi + eps, eps ~ N(0, qchi).
GaussianBelief state_propagate(const GaussianBelief& belief,
                               const Eigen::VectorXd& a,
                               const Eigen::MatrixXd& b,
                               const Eigen::MatrixXd& qchi);

/// One step of the constant-coefficient Kalman recursion
/// (predict with E, F, P_chi; update with gamma = G + H chi + xi).
GaussianBelief kalman_step(const GaussianBelief& belief,
                           const Eigen::VectorXd& gamma,
                           const Eigen::VectorXd& e, const Eigen::MatrixXd& f,
                           const Eigen::VectorXd& g, const Eigen::MatrixXd& h,
                           const Eigen::MatrixXd& pchi,
                           const Eigen::MatrixXd& pgamma);

struct FilterRun {
  GaussianBelief initial;
  std::vector<GaussianBelief> beliefs;  // one per processed measurement
  double seconds = 0.0;
};

/// Runs the latent recursion matching the model variant over one measurement
/// sequence. Observation-conditioned variant: condition the belief over
/// chi_{k-1} on gamma_k, then propagate through the gamma-dependent
/// transition. Constant variant: classical predict/update.
FilterRun fbf_filter(const TrainedFilter& model,
                     const std::vector<Eigen::VectorXd>& measurements,
                     UpdateForm form = UpdateForm::kExact);

/// The observation-conditioned recursion with explicit coefficients
/// (A affine in gamma); used to cross-check converted constant models.
FilterRun fbf_filter_with_coefficients(
    const FbfEquivalentCoefficients& coef, const GaussianBelief& initial,
    const std::vector<Eigen::VectorXd>& gammas,
    UpdateForm form = UpdateForm::kExact);

/// Draws n samples x = T^{-1}(chi), chi ~ N(belief). Rows are samples.
Eigen::MatrixXd sample_posterior(const TrainedFilter& model,
                                 const GaussianBelief& belief, int n,
                                 RandomStream& rng);

/// ln p(x | y_{1:k}) = ln N(T(x) | mu, Sigma) + ln|det dT/dx|.
double posterior_logdensity(const TrainedFilter& model,
                            const GaussianBelief& belief,
                            const Eigen::VectorXd& x);

double gaussian_log_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                        const Eigen::MatrixXd& sigma);

/// Cholesky factor of a PSD matrix, retrying with escalating diagonal jitter
/// (1e-12, 1e-10, 1e-8 relative to the mean diagonal).
Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& sigma);

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& sigma);

}  // namespace fbf

#endif  // FBF_FILTERING_HPP
