#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "fbf/baselines.hpp"
#include "support/oracles.hpp"

using fbf::GaussianBelief;
using fbf::LinearGaussianSSM;
using fbf::ParticleCloud;
using fbf::RandomStream;
using fbf::SsmInterface;

namespace {

double scalar_normal_pdf(double x, double mean, double var) {
  const double r = x - mean;
  return std::exp(-0.5 * r * r / var) / std::sqrt(2.0 * M_PI * var);
}

LinearGaussianSSM scalar_ssm(double f, double q, double h, double r,
                             double mu0, double sigma0) {
  LinearGaussianSSM ssm;
  ssm.f = Eigen::MatrixXd::Constant(1, 1, f);
  ssm.b = Eigen::VectorXd::Zero(1);
  ssm.q = Eigen::MatrixXd::Constant(1, 1, q);
  ssm.h = Eigen::MatrixXd::Constant(1, 1, h);
  ssm.c = Eigen::VectorXd::Zero(1);
  ssm.r = Eigen::MatrixXd::Constant(1, 1, r);
  ssm.mu0 = Eigen::VectorXd::Constant(1, mu0);
  ssm.sigma0 = Eigen::MatrixXd::Constant(1, 1, sigma0);
  return ssm;
}

std::vector<Eigen::VectorXd> simulate_scalar(const LinearGaussianSSM& ssm,
                                             int steps, std::uint64_t seed) {
  RandomStream rng(seed);
  double x = ssm.mu0(0) + std::sqrt(ssm.sigma0(0, 0)) * rng.normal();
  std::vector<Eigen::VectorXd> ys;
  for (int k = 0; k < steps; ++k) {
    x = ssm.f(0, 0) * x + ssm.b(0) + std::sqrt(ssm.q(0, 0)) * rng.normal();
    const double y =
        ssm.h(0, 0) * x + ssm.c(0) + std::sqrt(ssm.r(0, 0)) * rng.normal();
    ys.push_back(Eigen::VectorXd::Constant(1, y));
  }
  return ys;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("effective sample size of reference weight vectors") {
  CHECK(fbf::ess(Eigen::VectorXd::Constant(8, 1.0 / 8.0)) ==
        doctest::Approx(8.0).epsilon(1e-14));
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(5);
  onehot(2) = 1.0;
  CHECK(fbf::ess(onehot) == doctest::Approx(1.0).epsilon(1e-14));
  Eigen::VectorXd w(3);
  w << 0.5, 0.25, 0.25;
  CHECK(fbf::ess(w) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("systematic resampling copies each particle floor or ceil times") {
  Eigen::VectorXd w(4);
  w << 0.4, 0.3, 0.2, 0.1;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomStream rng(400 + seed);
    const auto idx = fbf::systematic_resample(w, 10, rng);
    REQUIRE(idx.size() == 10);
    std::map<Eigen::Index, int> counts;
    for (const auto i : idx) {
      REQUIRE(i >= 0);
      REQUIRE(i < 4);
      ++counts[i];
    }
    for (Eigen::Index i = 0; i < 4; ++i) {
      const double expected = 10.0 * w(i);
      CHECK(counts[i] >= static_cast<int>(std::floor(expected)));
      CHECK(counts[i] <= static_cast<int>(std::ceil(expected)));
    }
  }
  // Deterministic under an identical stream.
  RandomStream a(421);
  RandomStream b(421);
  CHECK(fbf::systematic_resample(w, 10, a) ==
        fbf::systematic_resample(w, 10, b));
}

TEST_CASE("resampling preserves the weighted mean over many seeds") {
  RandomStream rng(430);
  ParticleCloud cloud;
  cloud.particles = fbf::test::random_matrix(30, 2, rng);
  Eigen::VectorXd w(30);
  for (Eigen::Index i = 0; i < 30; ++i) w(i) = rng.uniform() + 0.05;
  cloud.weights = w / w.sum();
  const Eigen::VectorXd target = cloud_mean(cloud);

  const int n_seeds = 200;
  const Eigen::Index n_draws = 64;
  Eigen::MatrixXd means(n_seeds, 2);
  for (int s = 0; s < n_seeds; ++s) {
    RandomStream draw_rng(500 + static_cast<std::uint64_t>(s));
    const Eigen::MatrixXd draws = fbf::cloud_resample(cloud, n_draws,
                                                      draw_rng);
    means.row(s) = draws.colwise().mean();
  }
  const Eigen::VectorXd grand = means.colwise().mean().transpose();
  for (Eigen::Index jdim = 0; jdim < 2; ++jdim) {
    const double sd = std::sqrt(
        (means.col(jdim).array() - grand(jdim)).square().sum() /
        (n_seeds - 1));
    const double se = sd / std::sqrt(static_cast<double>(n_seeds));
    CHECK(std::abs(grand(jdim) - target(jdim)) < 4.0 * se + 1e-12);
  }
}

TEST_CASE("a perfectly matching particle takes all the weight") {
  // Near-deterministic observation: the particle that matches the
  // measurement dominates the weights.
  SsmInterface ssm;
  ssm.state_dim = 1;
  int counter = 0;
  ssm.sample_initial = [&counter](RandomStream&) {
    // Ten distinct particles at 0, 1, ..., deterministic placement.
    return Eigen::VectorXd::Constant(1, static_cast<double>(counter++ % 10));
  };
  ssm.sample_transition = [](const Eigen::VectorXd& x, RandomStream&) {
    return x;
  };
  ssm.obs_log_density = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double r = y(0) - x(0);
    return -0.5 * r * r / 1e-8;
  };
  std::vector<Eigen::VectorXd> ys = {Eigen::VectorXd::Constant(1, 7.0)};
  const auto result = fbf::pf_filter(ssm, ys, 10, 441);
  REQUIRE(result.clouds.size() == 1);
  const auto& cloud = result.clouds[0];
  Eigen::Index best = 0;
  cloud.weights.maxCoeff(&best);
  CHECK(cloud.particles(best, 0) == 7.0);
  CHECK(cloud.weights(best) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(cloud.weights.sum() - 1.0) < 1e-12);
}

TEST_CASE("particle posterior tracks the Kalman posterior") {
  const LinearGaussianSSM ssm = scalar_ssm(0.9, 0.3, 1.0, 0.4, 0.5, 1.0);
  const auto ys = simulate_scalar(ssm, 30, 442);
  const auto kalman = fbf::kalman_filter(ssm, ys);
  const auto pf = fbf::pf_filter(fbf::make_linear_gaussian_interface(ssm), ys,
                                 100000, 443);
  REQUIRE(kalman.size() == 30);
  REQUIRE(pf.clouds.size() == 30);
  for (std::size_t k = 0; k < kalman.size(); ++k) {
    const auto& cloud = pf.clouds[k];
    const double post_std = std::sqrt(kalman[k].cov(0, 0));
    const double tol = 3.0 * post_std / std::sqrt(cloud.ess);
    CHECK(std::abs(cloud_mean(cloud)(0) - kalman[k].mean(0)) < tol);
    CHECK(std::abs(cloud.weights.sum() - 1.0) < 1e-12);
    CHECK(cloud.weights.minCoeff() >= 0.0);
  }
}

TEST_CASE("deterministic dynamics give deterministic particle paths") {
  SsmInterface ssm;
  ssm.state_dim = 1;
  ssm.sample_initial = [](RandomStream&) {
    return Eigen::VectorXd::Constant(1, 2.0);
  };
  ssm.sample_transition = [](const Eigen::VectorXd& x, RandomStream&) {
    return Eigen::VectorXd::Constant(1, 0.5 * x(0) + 1.0);
  };
  ssm.obs_log_density = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double r = y(0) - x(0);
    return -0.5 * r * r;
  };
  std::vector<Eigen::VectorXd> ys;
  double truth = 2.0;
  for (int k = 0; k < 5; ++k) {
    truth = 0.5 * truth + 1.0;
    ys.push_back(Eigen::VectorXd::Constant(1, truth));
  }
  const auto result = fbf::pf_filter(ssm, ys, 50, 444);
  double expected = 2.0;
  for (std::size_t k = 0; k < 5; ++k) {
    expected = 0.5 * expected + 1.0;
    const auto& cloud = result.clouds[k];
    CHECK((cloud.particles.col(0).array() - expected).abs().maxCoeff() ==
          0.0);
    CHECK_FALSE(cloud.degenerate_reset);
  }
}

TEST_CASE("all-invalid weights reset the cloud uniformly with a flag") {
  SsmInterface ssm;
  ssm.state_dim = 1;
  ssm.sample_initial = [](RandomStream& rng) {
    return Eigen::VectorXd::Constant(1, rng.normal());
  };
  ssm.sample_transition = [](const Eigen::VectorXd& x, RandomStream&) {
    return x;
  };
  ssm.obs_log_density = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return -std::numeric_limits<double>::infinity();
  };
  std::vector<Eigen::VectorXd> ys = {Eigen::VectorXd::Zero(1)};
  const auto result = fbf::pf_filter(ssm, ys, 20, 445);
  REQUIRE(result.clouds.size() == 1);
  CHECK(result.clouds[0].degenerate_reset);
  CHECK(result.clouds[0].weights.isApprox(
      Eigen::VectorXd::Constant(20, 1.0 / 20.0), 1e-14));
}

TEST_CASE("particle filter is deterministic under its seed") {
  const LinearGaussianSSM ssm = scalar_ssm(0.8, 0.2, 1.0, 0.3, 0.0, 1.0);
  const auto ys = simulate_scalar(ssm, 10, 446);
  const auto iface = fbf::make_linear_gaussian_interface(ssm);
  const auto a = fbf::pf_filter(iface, ys, 500, 447);
  const auto b = fbf::pf_filter(iface, ys, 500, 447);
  const auto c = fbf::pf_filter(iface, ys, 500, 448);
  REQUIRE(a.clouds.size() == b.clouds.size());
  bool any_difference_from_c = false;
  for (std::size_t k = 0; k < a.clouds.size(); ++k) {
    CHECK(a.clouds[k].particles == b.clouds[k].particles);
    CHECK(a.clouds[k].weights == b.clouds[k].weights);
    if (a.clouds[k].particles != c.clouds[k].particles)
      any_difference_from_c = true;
  }
  CHECK(any_difference_from_c);
}

TEST_CASE("Kalman filter with zero observation map is a prediction chain") {
  LinearGaussianSSM ssm = scalar_ssm(0.7, 0.4, 0.0, 1.0, 0.3, 0.5);
  std::vector<Eigen::VectorXd> ys(3, Eigen::VectorXd::Zero(1));
  const auto beliefs = fbf::kalman_filter(ssm, ys);
  double mu = 0.3;
  double var = 0.5;
  for (const auto& belief : beliefs) {
    mu = 0.7 * mu;
    var = 0.49 * var + 0.4;
    CHECK(belief.mean(0) == doctest::Approx(mu).epsilon(1e-13));
    CHECK(belief.cov(0, 0) == doctest::Approx(var).epsilon(1e-13));
  }
}

TEST_CASE("Kalman filter reproduces the scalar textbook update") {
  LinearGaussianSSM ssm = scalar_ssm(1.0, 1.0, 1.0, 1.0, 0.0, 1.0);
  std::vector<Eigen::VectorXd> ys = {Eigen::VectorXd::Constant(1, 2.0)};
  const auto beliefs = fbf::kalman_filter(ssm, ys);
  REQUIRE(beliefs.size() == 1);
  CHECK(beliefs[0].mean(0) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
  CHECK(beliefs[0].cov(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("Kalman filter matches grid-quadrature Bayes") {
  const LinearGaussianSSM ssm = scalar_ssm(0.9, 0.5, 1.2, 0.7, 0.2, 0.8);
  const auto ys = simulate_scalar(ssm, 3, 449);
  const auto beliefs = fbf::kalman_filter(ssm, ys);

  const int grid = 1601;
  const double lo = -10.0;
  const double hi = 10.0;
  const double dx = (hi - lo) / (grid - 1);
  std::vector<double> density(grid);
  for (int i = 0; i < grid; ++i)
    density[i] = scalar_normal_pdf(lo + i * dx, 0.2, 0.8);
  for (std::size_t k = 0; k < ys.size(); ++k) {
    // Predict by integrating the transition kernel, then update by Bayes.
    std::vector<double> predicted(grid, 0.0);
    for (int j = 0; j < grid; ++j) {
      const double w = density[j] * dx;
      if (w < 1e-300) continue;
      const double center = 0.9 * (lo + j * dx);
      for (int i = 0; i < grid; ++i)
        predicted[i] += w * scalar_normal_pdf(lo + i * dx, center, 0.5);
    }
    double z = 0.0;
    for (int i = 0; i < grid; ++i) {
      predicted[i] *= scalar_normal_pdf(ys[k](0), 1.2 * (lo + i * dx), 0.7);
      z += predicted[i] * dx;
    }
    double m1 = 0.0;
    double m2 = 0.0;
    for (int i = 0; i < grid; ++i) {
      predicted[i] /= z;
      const double x = lo + i * dx;
      m1 += x * predicted[i] * dx;
      m2 += x * x * predicted[i] * dx;
    }
    CHECK(beliefs[k].mean(0) == doctest::Approx(m1).epsilon(1e-4));
    CHECK(beliefs[k].cov(0, 0) ==
          doctest::Approx(m2 - m1 * m1).epsilon(1e-4));
    density = predicted;
  }
}

TEST_CASE("cloud resample returns equally plausible high-weight particles") {
  ParticleCloud cloud;
  cloud.particles = Eigen::MatrixXd::Zero(3, 1);
  cloud.particles << 1.0, 2.0, 3.0;
  Eigen::VectorXd w(3);
  w << 0.0, 1.0, 0.0;
  cloud.weights = w;
  RandomStream rng(450);
  const Eigen::MatrixXd draws = fbf::cloud_resample(cloud, 7, rng);
  REQUIRE(draws.rows() == 7);
  CHECK((draws.array() == 2.0).all());
}

}  // TEST_SUITE
