#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace fbf::test {

Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp[j] += h;
    xm[j] -= h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

double crps_quadrature(std::vector<double> samples, double truth) {
  // The integrand (F(z) - 1{z >= truth})^2 is piecewise constant with
  // breakpoints at the samples and the truth, and vanishes outside their
  // range, so evaluating it once per interval integrates the defining
  // integral exactly.
  std::vector<double> breaks = samples;
  breaks.push_back(truth);
  std::sort(breaks.begin(), breaks.end());
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  auto integrand = [&](double z) {
    const auto below = std::upper_bound(samples.begin(), samples.end(), z) -
                       samples.begin();
    const double cdf = static_cast<double>(below) / n;
    const double step = z >= truth ? 1.0 : 0.0;
    return (cdf - step) * (cdf - step);
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double width = breaks[i + 1] - breaks[i];
    if (width <= 0.0) continue;
    total += integrand(0.5 * (breaks[i] + breaks[i + 1])) * width;
  }
  return total;
}

double rmse_naive(const Eigen::MatrixXd& truth,
                  const std::vector<Eigen::MatrixXd>& samples) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < truth.rows(); ++k) {
    const Eigen::VectorXd mean =
        samples[static_cast<std::size_t>(k)].colwise().mean().transpose();
    total += (truth.row(k).transpose() - mean).squaredNorm();
  }
  return std::sqrt(total /
                   static_cast<double>(truth.rows() * truth.cols()));
}

double mmd_naive(const Eigen::MatrixXd& truth,
                 const std::vector<Eigen::MatrixXd>& samples, double sigma) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  double total = 0.0;
  for (Eigen::Index k = 0; k < truth.rows(); ++k) {
    const Eigen::MatrixXd& x = samples[static_cast<std::size_t>(k)];
    const auto n = x.rows();
    double pair = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        pair += std::exp(-(x.row(i) - x.row(j)).squaredNorm() * inv);
      }
    }
    double cross = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      cross += std::exp(-(x.row(i) - truth.row(k)).squaredNorm() * inv);
    }
    const auto dn = static_cast<double>(n);
    total += pair / (dn * dn) - 2.0 * cross / dn + 1.0;
  }
  return total / static_cast<double>(truth.rows());
}

double crps_naive(const Eigen::MatrixXd& truth,
                  const std::vector<Eigen::MatrixXd>& samples) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < truth.rows(); ++k) {
    const Eigen::MatrixXd& x = samples[static_cast<std::size_t>(k)];
    const auto n = x.rows();
    const auto dn = static_cast<double>(n);
    for (Eigen::Index c = 0; c < truth.cols(); ++c) {
      double first = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        first += std::abs(x(i, c) - truth(k, c));
      }
      double second = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          second += std::abs(x(i, c) - x(j, c));
        }
      }
      total += first / dn - second / (2.0 * dn * dn);
    }
  }
  return total / static_cast<double>(truth.rows() * truth.cols());
}

Eigen::VectorXd random_vector(Eigen::Index n, RandomStream& rng,
                              double scale) {
  return scale * rng.normal_vector(n);
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                              RandomStream& rng, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = scale * rng.normal();
    }
  }
  return m;
}

Eigen::MatrixXd random_spd(Eigen::Index n, RandomStream& rng, double lo,
                           double hi) {
  const Eigen::MatrixXd a = random_matrix(n, n, rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd eigs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    eigs[i] = lo + (hi - lo) * rng.uniform();
  }
  return q * eigs.asDiagonal() * q.transpose();
}

IsMoments importance_posterior_mean(const Eigen::VectorXd& mu,
                                    const Eigen::MatrixXd& sigma,
                                    const Eigen::VectorXd& gamma,
                                    const Eigen::VectorXd& c,
                                    const Eigen::MatrixXd& d,
                                    const Eigen::MatrixXd& r, int n_draws,
                                    RandomStream& rng) {
  const Eigen::MatrixXd prior_sqrt = Eigen::LLT<Eigen::MatrixXd>(sigma)
                                         .matrixL();
  const Eigen::LLT<Eigen::MatrixXd> r_llt(r);

  Eigen::MatrixXd draws(n_draws, mu.size());
  Eigen::VectorXd logw(n_draws);
  for (int i = 0; i < n_draws; ++i) {
    const Eigen::VectorXd chi = mu + prior_sqrt * rng.normal_vector(mu.size());
    draws.row(i) = chi.transpose();
    const Eigen::VectorXd resid = gamma - c - d * chi;
    logw[i] = -0.5 * resid.dot(r_llt.solve(resid));
  }
  const Eigen::ArrayXd w = (logw.array() - logw.maxCoeff()).exp();
  const double wsum = w.sum();
  const Eigen::ArrayXd wn = w / wsum;

  IsMoments out;
  out.mean = (draws.array().colwise() * wn).colwise().sum().transpose();
  out.se.resize(mu.size());
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    const Eigen::ArrayXd centered = draws.col(j).array() - out.mean[j];
    out.se[j] = std::sqrt((wn.square() * centered.square()).sum());
  }
  return out;
}

void jitter_params(ad::ParameterStore& params, RandomStream& rng,
                   double scale) {
  for (auto& slot : params.slots()) {
    if (!slot.trainable) continue;
    auto& data = slot.value.data();
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      for (Eigen::Index c = 0; c < data.cols(); ++c) {
        data(r, c) += scale * rng.normal();
      }
    }
  }
}

}  // namespace fbf::test
