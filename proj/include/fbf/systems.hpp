#ifndef FBF_SYSTEMS_HPP
#define FBF_SYSTEMS_HPP

#include <Eigen/LU>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fbf/baselines.hpp"

namespace fbf {

/// Trajectories plus the generator metadata needed to regenerate them
/// bit-exactly. Trajectory t draws from the stream derived as
/// ("traj", t) from the dataset seed; within a trajectory the draw order is
/// initial state, then per step process noise followed by measurement noise.
struct Dataset {
  std::string system;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;
  Eigen::Index state_dim = 0;
  Eigen::Index meas_dim = 0;
  int steps = 0;  // K

  struct Trajectory {
    Eigen::MatrixXd states;        // (K+1) x m, row 0 is the initial state
    Eigen::MatrixXd measurements;  // K x n, row k-1 pairs with state row k
  };
  std::vector<Trajectory> trajectories;
};

/// Two-dimensional sinusoidal system:
/// x_k = 0.9 sin(1.1 x_{k-1} + 0.1 pi) + 0.01 + e_k, e ~ N(0, q2 I2);
/// y_k replicates arctan(x_2/x_1) into both components plus N(0, r2 I2);
/// x_0 ~ N((1,1), 0.1 I2).
Dataset simulate_sinusoidal(double q2, double r2, int steps, int n_traj,
                            std::uint64_t seed);

/// Cyclic Lorenz-96 drift with forcing; RK4 over dt then additive
/// sqrt(dt) N(0, I) noise; y = x^3 + N(0, I). Initial state is the
/// deterministic sin profile.
Dataset simulate_lorenz96(Eigen::Index m, double forcing, double dt, int steps,
                          int n_traj, std::uint64_t seed);

/// Advection-diffusion on 100 interior grid points of [-1, 1] (boundaries
/// held at zero), backward Euler in time with upwind advection and central
/// diffusion; y_k = exp(-u(sensors) - 1) + N(0, r2 I).
Dataset simulate_advdiff(double kappa, double dc, double sigma, double r2,
                         Eigen::Index n_sensors, int steps, int n_traj,
                         std::uint64_t seed, double dt = 0.005);

/// PF bundle built from dataset metadata (system id + params).
SsmInterface make_ssm_interface(const std::string& system,
                                const std::map<std::string, double>& params);

Eigen::VectorXd sinusoidal_mean(const Eigen::VectorXd& x);
/// arctan(x2/x1) with the conventions atan(+-inf) = +-pi/2 and 0/0 -> 0.
double sinusoidal_obs_value(const Eigen::VectorXd& x);

Eigen::VectorXd lorenz96_initial(Eigen::Index m);
Eigen::VectorXd lorenz96_drift(const Eigen::VectorXd& x, double forcing);
/// One classical 4-stage Runge-Kutta step of the deterministic drift.
Eigen::VectorXd lorenz96_rk4(const Eigen::VectorXd& x, double forcing,
                             double dt);

struct SensorLayout {
  std::vector<Eigen::Index> indices;
};
/// n equally spaced sensors: index i maps to floor(i * grid / n).
SensorLayout make_sensor_layout(Eigen::Index grid, Eigen::Index n);

/// Backward-Euler discretization of du + (kappa du/ds - dc d2u/ds2 + g) dt =
/// sigma dW, zero Dirichlet boundaries, grid spacing h = 2/(grid+1). The
/// system matrix is factored once at construction.
class AdvDiffSolver {
 public:
  AdvDiffSolver(double kappa, double dc, double dt, Eigen::Index grid = 100);

  Eigen::VectorXd initial() const;  // -sin(pi s) on the interior grid
  /// Deterministic step: solves (I + dt L) u' = u - dt g.
  Eigen::VectorXd step(const Eigen::VectorXd& u) const;
  /// Noisy step: solves (I + dt L) u' = u - dt g + sigma sqrt(dt) xi.
  Eigen::VectorXd step(const Eigen::VectorXd& u, double sigma,
                       const Eigen::VectorXd& xi) const;

  Eigen::Index grid() const { return grid_; }
  double spacing() const { return h_; }
  const Eigen::VectorXd& coords() const { return s_; }

 private:
  Eigen::Index grid_;
  double dt_;
  double h_;
  Eigen::VectorXd s_;
  Eigen::VectorXd g_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

}  // namespace fbf

#endif  // FBF_SYSTEMS_HPP
