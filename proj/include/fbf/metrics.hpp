#ifndef FBF_METRICS_HPP
#define FBF_METRICS_HPP

#include <Eigen/Core>
#include <vector>

namespace fbf {

/// Truth rows are states x_1..x_K; samples[k] holds the N posterior draws for
/// step k+1 as rows.

/// sqrt((1/(mK)) sum_k ||truth_k - mean_j samples_kj||^2).
double rmse(const Eigen::MatrixXd& truth,
            const std::vector<Eigen::MatrixXd>& samples);

/// Gaussian-kernel discrepancy ker(a,b) = exp(-||a-b||^2 / (2 sigma^2)),
/// averaged over steps:
/// (1/N^2) sum_ij ker(x_i,x_j) - (2/N) sum_j ker(x_j, truth) + 1.
double mmd(const Eigen::MatrixXd& truth,
           const std::vector<Eigen::MatrixXd>& samples, double sigma = 2.0);

/// Sample-based continuous ranked probability score, averaged over steps and
/// components: (1/N) sum_j |x_j - t| - (1/(2N^2)) sum_jl |x_j - x_l|.
double crps(const Eigen::MatrixXd& truth,
            const std::vector<Eigen::MatrixXd>& samples);

struct MetricReport {
  std::vector<double> rmse;
  std::vector<double> mmd;
  std::vector<double> crps;
  double rmse_mean = 0.0, rmse_std = 0.0;
  double mmd_mean = 0.0, mmd_std = 0.0;
  double crps_mean = 0.0, crps_std = 0.0;
};

/// Per-trajectory metrics with mean and unbiased standard deviation across
/// trajectories (std 0 for a single trajectory).
MetricReport evaluate_trajectories(
    const std::vector<Eigen::MatrixXd>& truths,
    const std::vector<std::vector<Eigen::MatrixXd>>& samples,
    double mmd_sigma = 2.0);

}  // namespace fbf

#endif  // FBF_METRICS_HPP
