#ifndef FBF_LATENT_SSM_HPP
#define FBF_LATENT_SSM_HPP

#include "fbf/flow.hpp"
#include "fbf/mlp.hpp"

namespace fbf {

/// Hidden stack shared by the conditioner networks net_A, net_B, net_Qchi.
struct ConditionerConfig {
  int hidden_layers = 0;
  Eigen::Index units = 0;
};

/// Latent linear-Gaussian transition whose coefficients are functions of the
/// transformed measurement gamma:
///   chi_k   = A(gamma_k) + B(gamma_k) chi_{k-1} + eps,  eps ~ N(0, Q_chi(gamma_k))
///   gamma_k = C + D chi_{k-1} + nu,                     nu  ~ N(0, Q_gamma)
/// Covariances are diagonal with softplus-positive entries. At creation the
/// nets output A = 0, B = I, Q_chi = softplus(0) I, and C = 0, D = 0,
/// Q_gamma = softplus(0) I.
class FbfLatentModel {
 public:
  FbfLatentModel() = default;

  static FbfLatentModel create(ad::ParameterStore& store, Eigen::Index m,
                               Eigen::Index n, const ConditionerConfig& config,
                               RandomStream& rng);
  static FbfLatentModel attach(const ad::ParameterStore& store, Eigen::Index m,
                               Eigen::Index n,
                               const ConditionerConfig& config);

  struct Coefficients {
    Eigen::VectorXd a;
    Eigen::MatrixXd b;
    Eigen::VectorXd qchi;  // variances, softplus already applied
  };
  Coefficients eval_conditioners(const ad::ParameterStore& store,
                                 const Eigen::VectorXd& gamma) const;

  Eigen::VectorXd c(const ad::ParameterStore& store) const;
  Eigen::MatrixXd d(const ad::ParameterStore& store) const;
  /// Variances of nu (softplus already applied).
  Eigen::VectorXd qgamma(const ad::ParameterStore& store) const;

  Eigen::Index state_dim() const { return m_; }
  Eigen::Index meas_dim() const { return n_; }
  const Mlp& net_a() const { return net_a_; }
  const Mlp& net_b() const { return net_b_; }
  const Mlp& net_qchi() const { return net_qchi_; }

 private:
  Eigen::Index m_ = 0;
  Eigen::Index n_ = 0;
  Mlp net_a_;
  Mlp net_b_;
  Mlp net_qchi_;
};

/// Constant-coefficient latent linear-Gaussian model:
///   chi_k   = E + F chi_{k-1} + zeta,  zeta ~ N(0, P_chi)
///   gamma_k = G + H chi_k + xi,        xi   ~ N(0, P_gamma)
/// At creation E = 0, F = I, G = 0, H = 0 and both covariances start at
/// softplus(0) I.
class FbfPrimeLatentModel {
 public:
  FbfPrimeLatentModel() = default;

  static FbfPrimeLatentModel create(ad::ParameterStore& store, Eigen::Index m,
                                    Eigen::Index n);
  static FbfPrimeLatentModel attach(const ad::ParameterStore& store,
                                    Eigen::Index m, Eigen::Index n);

  Eigen::VectorXd e(const ad::ParameterStore& store) const;
  Eigen::MatrixXd f(const ad::ParameterStore& store) const;
  Eigen::VectorXd g(const ad::ParameterStore& store) const;
  Eigen::MatrixXd h(const ad::ParameterStore& store) const;
  Eigen::VectorXd pchi(const ad::ParameterStore& store) const;
  Eigen::VectorXd pgamma(const ad::ParameterStore& store) const;

  Eigen::Index state_dim() const { return m_; }
  Eigen::Index meas_dim() const { return n_; }

 private:
  Eigen::Index m_ = 0;
  Eigen::Index n_ = 0;
};

/// ln N(r | 0, diag(qvar)) for a rank-1 residual, assembled on the tape.
ad::Var diag_gaussian_logpdf(ad::Tape& tape, ad::Var r, ad::Var qvar);

/// Conditional log-density of the transition, including the state-flow
/// Jacobian at the current state:
/// ln N(T(x) | A(V(y)) + B(V(y)) T(x_prev), Q_chi(V(y))) + ln|det dT/dx|.
ad::Var f_s(ad::Tape& tape, const ad::ParameterStore& store,
            const FbfLatentModel& model, const FlowTransform& t_flow,
            const FlowTransform& v_flow, const Eigen::VectorXd& x_prev,
            const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Conditional log-density of the observation:
/// ln N(V(y) | C + D T(x_prev), Q_gamma) + ln|det dV/dy|.
ad::Var f_o(ad::Tape& tape, const ad::ParameterStore& store,
            const FbfLatentModel& model, const FlowTransform& t_flow,
            const FlowTransform& v_flow, const Eigen::VectorXd& x_prev,
            const Eigen::VectorXd& y);

/// ln N(T(x) | E + F T(x_prev), P_chi) + ln|det dT/dx|.
ad::Var f_s_prime(ad::Tape& tape, const ad::ParameterStore& store,
                  const FbfPrimeLatentModel& model,
                  const FlowTransform& t_flow, const Eigen::VectorXd& x_prev,
                  const Eigen::VectorXd& x);

/// ln N(V(y) | G + H T(x), P_gamma) + ln|det dV/dy|; conditions on the
/// current state.
ad::Var f_o_prime(ad::Tape& tape, const ad::ParameterStore& store,
                  const FbfPrimeLatentModel& model,
                  const FlowTransform& t_flow, const FlowTransform& v_flow,
                  const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Shared-subgraph forms used by the minibatch objective; the callers pass
/// flow forwards already recorded on the tape so repeated transforms of the
/// same sample are computed once.
ad::Var f_s_from(ad::Tape& tape, const ad::ParameterStore& store,
                 const FbfLatentModel& model,
                 const FlowTransform::TapeForward& t_cur, ad::Var t_prev_z,
                 ad::Var v_obs_z);
ad::Var f_o_from(ad::Tape& tape, const ad::ParameterStore& store,
                 const FbfLatentModel& model, ad::Var t_prev_z,
                 const FlowTransform::TapeForward& v_obs);
ad::Var f_s_prime_from(ad::Tape& tape, const ad::ParameterStore& store,
                       const FbfPrimeLatentModel& model,
                       const FlowTransform::TapeForward& t_cur,
                       ad::Var t_prev_z);
ad::Var f_o_prime_from(ad::Tape& tape, const ad::ParameterStore& store,
                       const FbfPrimeLatentModel& model, ad::Var t_cur_z,
                       const FlowTransform::TapeForward& v_obs);

/// Coefficients of the observation-conditioned recursion equivalent to a
/// constant-coefficient model: A(gamma) = a0 + kprime gamma with the other
/// coefficients constant. Covariances here are full matrices.
struct FbfEquivalentCoefficients {
  Eigen::VectorXd a0;
  Eigen::MatrixXd kprime;
  Eigen::MatrixXd b;
  Eigen::MatrixXd qchi;
  Eigen::VectorXd c;
  Eigen::MatrixXd d;
  Eigen::MatrixXd qgamma;

  Eigen::VectorXd eval_a(const Eigen::VectorXd& gamma) const {
    return a0 + kprime * gamma;
  }
};

FbfEquivalentCoefficients fbfprime_to_fbf(const ad::ParameterStore& store,
                                          const FbfPrimeLatentModel& model);

}  // namespace fbf

#endif  // FBF_LATENT_SSM_HPP
