#include "fbf/systems.hpp"

#include <cmath>
#include <numbers>

namespace fbf {

namespace {

constexpr double kPi = std::numbers::pi;

double require_param(const std::map<std::string, double>& params,
                     const std::string& key) {
  auto it = params.find(key);
  if (it == params.end())
    throw ConfigError("missing system parameter: " + key);
  return it->second;
}

double diag_gauss_ll(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                     double var) {
  return -0.5 * ((y - mean).squaredNorm() / var +
                 static_cast<double>(y.size()) *
                     std::log(2.0 * kPi * var));
}

}  // namespace

Eigen::VectorXd sinusoidal_mean(const Eigen::VectorXd& x) {
  return (1.1 * x.array() + 0.1 * kPi).sin().matrix() * 0.9 +
         Eigen::VectorXd::Constant(x.size(), 0.01);
}

double sinusoidal_obs_value(const Eigen::VectorXd& x) {
  double x1 = x[0];
  double x2 = x[1];
  if (x1 == 0.0) return x2 == 0.0 ? 0.0 : std::copysign(kPi / 2.0, x2);
  return std::atan(x2 / x1);
}

Dataset simulate_sinusoidal(double q2, double r2, int steps, int n_traj,
                            std::uint64_t seed) {
  if (q2 <= 0.0 || r2 <= 0.0)
    throw ConfigError("sinusoidal: noise variances must be positive");
  if (steps < 1 || n_traj < 1)
    throw ConfigError("sinusoidal: steps and trajectories must be >= 1");
  Dataset data;
  data.system = "sinusoidal";
  data.params = {{"q2", q2}, {"r2", r2}};
  data.seed = seed;
  data.state_dim = 2;
  data.meas_dim = 2;
  data.steps = steps;
  double q = std::sqrt(q2);
  double r = std::sqrt(r2);
  double s0 = std::sqrt(0.1);
  Eigen::Vector2d mu0(1.0, 1.0);
  for (int t = 0; t < n_traj; ++t) {
    RandomStream rng(derive_seed(seed, "traj", static_cast<std::uint64_t>(t)));
    Dataset::Trajectory traj;
    traj.states.resize(steps + 1, 2);
    traj.measurements.resize(steps, 2);
    Eigen::VectorXd x = mu0 + s0 * rng.normal_vector(2);
    traj.states.row(0) = x.transpose();
    for (int k = 1; k <= steps; ++k) {
      x = sinusoidal_mean(x) + q * rng.normal_vector(2);
      traj.states.row(k) = x.transpose();
      double v = sinusoidal_obs_value(x);
      Eigen::VectorXd y =
          Eigen::Vector2d(v, v) + r * rng.normal_vector(2);
      traj.measurements.row(k - 1) = y.transpose();
    }
    if (!traj.states.allFinite())
      throw NumericError("sinusoidal: non-finite trajectory");
    data.trajectories.push_back(std::move(traj));
  }
  return data;
}

Eigen::VectorXd lorenz96_initial(Eigen::Index m) {
  Eigen::VectorXd x(m);
  for (Eigen::Index i = 0; i < m; ++i)
    x[i] = std::sin(2.0 * kPi * static_cast<double>(i + 1) /
                    static_cast<double>(m));
  return x;
}

Eigen::VectorXd lorenz96_drift(const Eigen::VectorXd& x, double forcing) {
  Eigen::Index m = x.size();
  Eigen::VectorXd d(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double xm1 = x[(j - 1 + m) % m];
    double xm2 = x[(j - 2 + m) % m];
    double xp1 = x[(j + 1) % m];
    d[j] = xm1 * (xp1 - xm2) - x[j] + forcing;
  }
  return d;
}

Eigen::VectorXd lorenz96_rk4(const Eigen::VectorXd& x, double forcing,
                             double dt) {
  Eigen::VectorXd k1 = lorenz96_drift(x, forcing);
  Eigen::VectorXd k2 = lorenz96_drift(x + 0.5 * dt * k1, forcing);
  Eigen::VectorXd k3 = lorenz96_drift(x + 0.5 * dt * k2, forcing);
  Eigen::VectorXd k4 = lorenz96_drift(x + dt * k3, forcing);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Dataset simulate_lorenz96(Eigen::Index m, double forcing, double dt, int steps,
                          int n_traj, std::uint64_t seed) {
  if (m < 4) throw ConfigError("lorenz96: stencil requires m >= 4");
  if (dt <= 0.0 || steps < 1 || n_traj < 1)
    throw ConfigError("lorenz96: invalid extents");
  Dataset data;
  data.system = "lorenz96";
  data.params = {{"m", static_cast<double>(m)},
                 {"forcing", forcing},
                 {"dt", dt}};
  data.seed = seed;
  data.state_dim = m;
  data.meas_dim = m;
  data.steps = steps;
  double sdt = std::sqrt(dt);
  Eigen::VectorXd x0 = lorenz96_initial(m);
  for (int t = 0; t < n_traj; ++t) {
    RandomStream rng(derive_seed(seed, "traj", static_cast<std::uint64_t>(t)));
    Dataset::Trajectory traj;
    traj.states.resize(steps + 1, m);
    traj.measurements.resize(steps, m);
    Eigen::VectorXd x = x0;
    traj.states.row(0) = x.transpose();
    for (int k = 1; k <= steps; ++k) {
      x = lorenz96_rk4(x, forcing, dt) + sdt * rng.normal_vector(m);
      if (!x.allFinite())
        throw NumericError("lorenz96: non-finite state at step " +
                           std::to_string(k));
      traj.states.row(k) = x.transpose();
      Eigen::VectorXd y = x.array().cube().matrix() + rng.normal_vector(m);
      traj.measurements.row(k - 1) = y.transpose();
    }
    data.trajectories.push_back(std::move(traj));
  }
  return data;
}

SensorLayout make_sensor_layout(Eigen::Index grid, Eigen::Index n) {
  if (n < 1 || n > grid)
    throw ConfigError("sensor layout: need 1 <= n <= grid");
  SensorLayout layout;
  for (Eigen::Index i = 0; i < n; ++i)
    layout.indices.push_back(i * grid / n);
  return layout;
}

AdvDiffSolver::AdvDiffSolver(double kappa, double dc, double dt,
                             Eigen::Index grid)
    : grid_(grid), dt_(dt) {
  if (grid < 2 || dt <= 0.0 || dc < 0.0)
    throw ConfigError("advdiff: invalid extents");
  h_ = 2.0 / static_cast<double>(grid + 1);
  s_.resize(grid);
  g_.resize(grid);
  for (Eigen::Index i = 0; i < grid; ++i) {
    s_[i] = -1.0 + static_cast<double>(i + 1) * h_;
    g_[i] = 5.0 * (s_[i] * s_[i] - 1.0);
  }
  // Upwind advection (kappa > 0 uses the backward difference) and central
  // diffusion; zero Dirichlet values drop the out-of-range terms.
  double adv = kappa / h_;
  double dif = dc / (h_ * h_);
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(grid, grid);
  for (Eigen::Index i = 0; i < grid; ++i) {
    l(i, i) = adv + 2.0 * dif;
    if (i > 0) l(i, i - 1) = -adv - dif;
    if (i + 1 < grid) l(i, i + 1) = -dif;
  }
  Eigen::MatrixXd a =
      Eigen::MatrixXd::Identity(grid, grid) + dt * l;
  lu_.compute(a);
}

Eigen::VectorXd AdvDiffSolver::initial() const {
  return (-(kPi * s_.array()).sin()).matrix();
}

Eigen::VectorXd AdvDiffSolver::step(const Eigen::VectorXd& u) const {
  return lu_.solve(u - dt_ * g_);
}

Eigen::VectorXd AdvDiffSolver::step(const Eigen::VectorXd& u, double sigma,
                                    const Eigen::VectorXd& xi) const {
  return lu_.solve(u - dt_ * g_ + sigma * std::sqrt(dt_) * xi);
}

Dataset simulate_advdiff(double kappa, double dc, double sigma, double r2,
                         Eigen::Index n_sensors, int steps, int n_traj,
                         std::uint64_t seed, double dt) {
  if (r2 <= 0.0) throw ConfigError("advdiff: r2 must be positive");
  if (steps < 1 || n_traj < 1)
    throw ConfigError("advdiff: steps and trajectories must be >= 1");
  AdvDiffSolver solver(kappa, dc, dt);
  SensorLayout sensors = make_sensor_layout(solver.grid(), n_sensors);
  Dataset data;
  data.system = "advdiff";
  data.params = {{"kappa", kappa}, {"dc", dc},           {"sigma", sigma},
                 {"r2", r2},       {"sensors", static_cast<double>(n_sensors)},
                 {"dt", dt}};
  data.seed = seed;
  data.state_dim = solver.grid();
  data.meas_dim = n_sensors;
  data.steps = steps;
  double r = std::sqrt(r2);
  for (int t = 0; t < n_traj; ++t) {
    RandomStream rng(derive_seed(seed, "traj", static_cast<std::uint64_t>(t)));
    Dataset::Trajectory traj;
    traj.states.resize(steps + 1, solver.grid());
    traj.measurements.resize(steps, n_sensors);
    Eigen::VectorXd u = solver.initial();
    traj.states.row(0) = u.transpose();
    for (int k = 1; k <= steps; ++k) {
      u = solver.step(u, sigma, rng.normal_vector(solver.grid()));
      if (!u.allFinite())
        throw NumericError("advdiff: non-finite state at step " +
                           std::to_string(k));
      traj.states.row(k) = u.transpose();
      Eigen::VectorXd y(n_sensors);
      for (Eigen::Index i = 0; i < n_sensors; ++i)
        y[i] = std::exp(-u[sensors.indices[i]] - 1.0);
      y += r * rng.normal_vector(n_sensors);
      traj.measurements.row(k - 1) = y.transpose();
    }
    data.trajectories.push_back(std::move(traj));
  }
  return data;
}

SsmInterface make_ssm_interface(const std::string& system,
                                const std::map<std::string, double>& params) {
  SsmInterface out;
  if (system == "sinusoidal") {
    double q = std::sqrt(require_param(params, "q2"));
    double r2 = require_param(params, "r2");
    out.state_dim = 2;
    out.sample_initial = [](RandomStream& rng) {
      return Eigen::VectorXd(Eigen::Vector2d(1.0, 1.0) +
                             std::sqrt(0.1) * rng.normal_vector(2));
    };
    out.sample_transition = [q](const Eigen::VectorXd& x, RandomStream& rng) {
      return Eigen::VectorXd(sinusoidal_mean(x) + q * rng.normal_vector(2));
    };
    out.obs_log_density = [r2](const Eigen::VectorXd& x,
                               const Eigen::VectorXd& y) {
      double v = sinusoidal_obs_value(x);
      return diag_gauss_ll(y, Eigen::Vector2d(v, v), r2);
    };
  } else if (system == "lorenz96") {
    auto m = static_cast<Eigen::Index>(require_param(params, "m"));
    double forcing = require_param(params, "forcing");
    double dt = require_param(params, "dt");
    double sdt = std::sqrt(dt);
    out.state_dim = m;
    Eigen::VectorXd x0 = lorenz96_initial(m);
    out.sample_initial = [x0](RandomStream&) { return x0; };
    out.sample_transition = [forcing, dt, sdt, m](const Eigen::VectorXd& x,
                                                  RandomStream& rng) {
      return Eigen::VectorXd(lorenz96_rk4(x, forcing, dt) +
                             sdt * rng.normal_vector(m));
    };
    out.obs_log_density = [](const Eigen::VectorXd& x,
                             const Eigen::VectorXd& y) {
      return diag_gauss_ll(y, x.array().cube().matrix(), 1.0);
    };
  } else if (system == "advdiff") {
    double kappa = require_param(params, "kappa");
    double dc = require_param(params, "dc");
    double sigma = require_param(params, "sigma");
    double r2 = require_param(params, "r2");
    auto n = static_cast<Eigen::Index>(require_param(params, "sensors"));
    double dt = require_param(params, "dt");
    auto solver = std::make_shared<const AdvDiffSolver>(kappa, dc, dt);
    SensorLayout sensors = make_sensor_layout(solver->grid(), n);
    out.state_dim = solver->grid();
    out.sample_initial = [solver](RandomStream&) { return solver->initial(); };
    out.sample_transition = [solver, sigma](const Eigen::VectorXd& u,
                                            RandomStream& rng) {
      return solver->step(u, sigma, rng.normal_vector(solver->grid()));
    };
    out.obs_log_density = [solver, sensors, r2, n](const Eigen::VectorXd& u,
                                                   const Eigen::VectorXd& y) {
      Eigen::VectorXd mean(n);
      for (Eigen::Index i = 0; i < n; ++i)
        mean[i] = std::exp(-u[sensors.indices[i]] - 1.0);
      return diag_gauss_ll(y, mean, r2);
    };
  } else {
    throw ConfigError("unknown system: " + system);
  }
  return out;
}

}  // namespace fbf
