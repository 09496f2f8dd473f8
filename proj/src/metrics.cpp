#include "fbf/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "fbf/errors.hpp"

namespace fbf {

namespace {

void check_shapes(const Eigen::MatrixXd& truth,
                  const std::vector<Eigen::MatrixXd>& samples) {
  if (truth.rows() < 1 || static_cast<std::size_t>(truth.rows()) !=
                              samples.size())
    throw ConfigError("metrics: steps of truth and samples differ");
  for (const Eigen::MatrixXd& s : samples)
    if (s.rows() < 1 || s.cols() != truth.cols())
      throw ConfigError("metrics: sample extents inconsistent");
}

double mean_std(const std::vector<double>& v, double* out_std) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  if (v.size() > 1) {
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size() - 1);
  }
  *out_std = std::sqrt(var);
  return mean;
}

}  // namespace

double rmse(const Eigen::MatrixXd& truth,
            const std::vector<Eigen::MatrixXd>& samples) {
  check_shapes(truth, samples);
  Eigen::Index k_steps = truth.rows();
  Eigen::Index m = truth.cols();
  double total = 0.0;
  for (Eigen::Index k = 0; k < k_steps; ++k) {
    Eigen::VectorXd mean = samples[k].colwise().mean().transpose();
    total += (truth.row(k).transpose() - mean).squaredNorm();
  }
  return std::sqrt(total / (static_cast<double>(m) *
                            static_cast<double>(k_steps)));
}

double mmd(const Eigen::MatrixXd& truth,
           const std::vector<Eigen::MatrixXd>& samples, double sigma) {
  check_shapes(truth, samples);
  if (sigma <= 0.0) throw ConfigError("mmd: sigma must be positive");
  double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  Eigen::Index k_steps = truth.rows();
  double total = 0.0;
  for (Eigen::Index k = 0; k < k_steps; ++k) {
    const Eigen::MatrixXd& s = samples[k];
    Eigen::Index n = s.rows();
    double pair_term = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        pair_term += std::exp(-(s.row(i) - s.row(j)).squaredNorm() * inv2s2);
    double cross_term = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      cross_term += std::exp(-(s.row(j) - truth.row(k)).squaredNorm() *
                             inv2s2);
    double dn = static_cast<double>(n);
    total += pair_term / (dn * dn) - 2.0 * cross_term / dn + 1.0;
  }
  return total / static_cast<double>(k_steps);
}

double crps(const Eigen::MatrixXd& truth,
            const std::vector<Eigen::MatrixXd>& samples) {
  check_shapes(truth, samples);
  Eigen::Index k_steps = truth.rows();
  Eigen::Index m = truth.cols();
  double total = 0.0;
  std::vector<double> sorted;
  for (Eigen::Index k = 0; k < k_steps; ++k) {
    const Eigen::MatrixXd& s = samples[k];
    Eigen::Index n = s.rows();
    double dn = static_cast<double>(n);
    for (Eigen::Index i = 0; i < m; ++i) {
      double t = truth(k, i);
      sorted.assign(s.col(i).data(), s.col(i).data() + n);
      std::sort(sorted.begin(), sorted.end());
      double abs_term = 0.0;
      double spread = 0.0;  // sum_jl |x_j - x_l| over sorted values
      for (Eigen::Index j = 0; j < n; ++j) {
        abs_term += std::abs(sorted[j] - t);
        spread += (2.0 * static_cast<double>(j) - dn + 1.0) * sorted[j];
      }
      total += abs_term / dn - spread / (dn * dn);
    }
  }
  return total / (static_cast<double>(m) * static_cast<double>(k_steps));
}

MetricReport evaluate_trajectories(
    const std::vector<Eigen::MatrixXd>& truths,
    const std::vector<std::vector<Eigen::MatrixXd>>& samples,
    double mmd_sigma) {
  if (truths.empty() || truths.size() != samples.size())
    throw ConfigError("metrics: trajectory counts differ");
  MetricReport report;
  for (std::size_t t = 0; t < truths.size(); ++t) {
    report.rmse.push_back(rmse(truths[t], samples[t]));
    report.mmd.push_back(mmd(truths[t], samples[t], mmd_sigma));
    report.crps.push_back(crps(truths[t], samples[t]));
  }
  report.rmse_mean = mean_std(report.rmse, &report.rmse_std);
  report.mmd_mean = mean_std(report.mmd, &report.mmd_std);
  report.crps_mean = mean_std(report.crps, &report.crps_std);
  return report;
}

}  // namespace fbf
