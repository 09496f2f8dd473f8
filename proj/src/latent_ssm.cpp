#include "fbf/latent_ssm.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

namespace fbf {

using ad::Tensor;
using ad::Var;

namespace {

constexpr double kLn2Pi = 1.8378770664093453;

MlpSpec conditioner_spec(Eigen::Index in, Eigen::Index out,
                         const ConditionerConfig& config) {
  MlpSpec spec;
  spec.in = in;
  spec.out = out;
  spec.hidden_layers = config.hidden_layers;
  spec.units = config.units;
  spec.activation = MlpSpec::Activation::kRelu;
  return spec;
}

Eigen::VectorXd softplus_vec(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  });
}

}  // namespace

FbfLatentModel FbfLatentModel::create(ad::ParameterStore& store,
                                      Eigen::Index m, Eigen::Index n,
                                      const ConditionerConfig& config,
                                      RandomStream& rng) {
  if (m < 1 || n < 1) throw ConfigError("latent model: dims must be positive");
  FbfLatentModel model;
  model.m_ = m;
  model.n_ = n;
  model.net_a_ = Mlp::create(store, "latent.a", conditioner_spec(n, m, config),
                             FinalInit::kZero, rng);
  model.net_b_ =
      Mlp::create(store, "latent.b", conditioner_spec(n, m * m, config),
                  FinalInit::kIdentityBias, rng);
  model.net_qchi_ =
      Mlp::create(store, "latent.qchi", conditioner_spec(n, m, config),
                  FinalInit::kZero, rng);
  store.add("latent.c", Tensor::zeros({n}));
  store.add("latent.d", Tensor::zeros({n, m}));
  store.add("latent.qgamma", Tensor::zeros({n}));
  return model;
}

FbfLatentModel FbfLatentModel::attach(const ad::ParameterStore& store,
                                      Eigen::Index m, Eigen::Index n,
                                      const ConditionerConfig& config) {
  if (m < 1 || n < 1) throw ConfigError("latent model: dims must be positive");
  FbfLatentModel model;
  model.m_ = m;
  model.n_ = n;
  model.net_a_ = Mlp::attach(store, "latent.a", conditioner_spec(n, m, config));
  model.net_b_ =
      Mlp::attach(store, "latent.b", conditioner_spec(n, m * m, config));
  model.net_qchi_ =
      Mlp::attach(store, "latent.qchi", conditioner_spec(n, m, config));
  const Tensor& c = store.at("latent.c");
  const Tensor& d = store.at("latent.d");
  const Tensor& qg = store.at("latent.qgamma");
  if (c.rank() != 1 || c.shape()[0] != n || d.rank() != 2 ||
      d.shape()[0] != n || d.shape()[1] != m || qg.rank() != 1 ||
      qg.shape()[0] != n)
    throw ConfigError("latent model: constant parameter shape mismatch");
  return model;
}

FbfLatentModel::Coefficients FbfLatentModel::eval_conditioners(
    const ad::ParameterStore& store, const Eigen::VectorXd& gamma) const {
  if (gamma.size() != n_) throw ConfigError("gamma extent mismatch");
  Coefficients out;
  out.a = net_a_.eval(store, gamma);
  Eigen::VectorXd bflat = net_b_.eval(store, gamma);
  out.b = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                         Eigen::Dynamic, Eigen::RowMajor>>(
      bflat.data(), m_, m_);
  out.qchi = softplus_vec(net_qchi_.eval(store, gamma));
  if (!out.a.allFinite() || !out.b.allFinite() || !out.qchi.allFinite())
    throw NumericError("non-finite conditioner output");
  return out;
}

Eigen::VectorXd FbfLatentModel::c(const ad::ParameterStore& store) const {
  return store.at("latent.c").as_vector();
}

Eigen::MatrixXd FbfLatentModel::d(const ad::ParameterStore& store) const {
  return store.at("latent.d").as_matrix();
}

Eigen::VectorXd FbfLatentModel::qgamma(const ad::ParameterStore& store) const {
  return softplus_vec(store.at("latent.qgamma").as_vector());
}

FbfPrimeLatentModel FbfPrimeLatentModel::create(ad::ParameterStore& store,
                                                Eigen::Index m,
                                                Eigen::Index n) {
  if (m < 1 || n < 1) throw ConfigError("latent model: dims must be positive");
  FbfPrimeLatentModel model;
  model.m_ = m;
  model.n_ = n;
  store.add("latent.e", Tensor::zeros({m}));
  store.add("latent.f", Tensor::matrix(Eigen::MatrixXd::Identity(m, m)));
  store.add("latent.g", Tensor::zeros({n}));
  store.add("latent.h", Tensor::zeros({n, m}));
  store.add("latent.pchi", Tensor::zeros({m}));
  store.add("latent.pgamma", Tensor::zeros({n}));
  return model;
}

FbfPrimeLatentModel FbfPrimeLatentModel::attach(
    const ad::ParameterStore& store, Eigen::Index m, Eigen::Index n) {
  if (m < 1 || n < 1) throw ConfigError("latent model: dims must be positive");
  FbfPrimeLatentModel model;
  model.m_ = m;
  model.n_ = n;
  const Tensor& e = store.at("latent.e");
  const Tensor& f = store.at("latent.f");
  const Tensor& g = store.at("latent.g");
  const Tensor& h = store.at("latent.h");
  const Tensor& pc = store.at("latent.pchi");
  const Tensor& pg = store.at("latent.pgamma");
  if (e.rank() != 1 || e.shape()[0] != m || f.rank() != 2 ||
      f.shape()[0] != m || f.shape()[1] != m || g.rank() != 1 ||
      g.shape()[0] != n || h.rank() != 2 || h.shape()[0] != n ||
      h.shape()[1] != m || pc.rank() != 1 || pc.shape()[0] != m ||
      pg.rank() != 1 || pg.shape()[0] != n)
    throw ConfigError("latent model: constant parameter shape mismatch");
  return model;
}

Eigen::VectorXd FbfPrimeLatentModel::e(const ad::ParameterStore& s) const {
  return s.at("latent.e").as_vector();
}
Eigen::MatrixXd FbfPrimeLatentModel::f(const ad::ParameterStore& s) const {
  return s.at("latent.f").as_matrix();
}
Eigen::VectorXd FbfPrimeLatentModel::g(const ad::ParameterStore& s) const {
  return s.at("latent.g").as_vector();
}
Eigen::MatrixXd FbfPrimeLatentModel::h(const ad::ParameterStore& s) const {
  return s.at("latent.h").as_matrix();
}
Eigen::VectorXd FbfPrimeLatentModel::pchi(const ad::ParameterStore& s) const {
  return softplus_vec(s.at("latent.pchi").as_vector());
}
Eigen::VectorXd FbfPrimeLatentModel::pgamma(const ad::ParameterStore& s) const {
  return softplus_vec(s.at("latent.pgamma").as_vector());
}

Var diag_gaussian_logpdf(ad::Tape& tape, Var r, Var qvar) {
  const Tensor& rv = tape.value(r);
  if (rv.rank() != 1 || !rv.same_shape(tape.value(qvar)))
    throw ConfigError("diag_gaussian_logpdf: rank-1 operands of equal extent");
  auto d = static_cast<double>(rv.shape()[0]);
  Var quad = ad::sum(ad::div(ad::mul(r, r), qvar));
  Var logdet = ad::sum(ad::log(qvar));
  return ad::add(ad::scale(ad::add(quad, logdet), -0.5),
                 tape.constant(Tensor::scalar(-0.5 * d * kLn2Pi)));
}

Var f_s_from(ad::Tape& tape, const ad::ParameterStore& store,
             const FbfLatentModel& model,
             const FlowTransform::TapeForward& t_cur, Var t_prev_z,
             Var v_obs_z) {
  Eigen::Index m = model.state_dim();
  Var a = model.net_a().eval(tape, store, v_obs_z);
  Var b = ad::reshape(model.net_b().eval(tape, store, v_obs_z), {m, m});
  Var qchi = ad::softplus(model.net_qchi().eval(tape, store, v_obs_z));
  Var mean = ad::add(a, ad::matmul(b, t_prev_z));
  Var r = ad::sub(t_cur.z, mean);
  return ad::add(diag_gaussian_logpdf(tape, r, qchi), t_cur.logdet);
}

Var f_o_from(ad::Tape& tape, const ad::ParameterStore& store,
             const FbfLatentModel& model, Var t_prev_z,
             const FlowTransform::TapeForward& v_obs) {
  Var c = tape.param(store, "latent.c");
  Var d = tape.param(store, "latent.d");
  Var qgamma = ad::softplus(tape.param(store, "latent.qgamma"));
  Var mean = ad::add(c, ad::matmul(d, t_prev_z));
  Var r = ad::sub(v_obs.z, mean);
  return ad::add(diag_gaussian_logpdf(tape, r, qgamma), v_obs.logdet);
}

Var f_s_prime_from(ad::Tape& tape, const ad::ParameterStore& store,
                   const FbfPrimeLatentModel& model,
                   const FlowTransform::TapeForward& t_cur, Var t_prev_z) {
  Var e = tape.param(store, "latent.e");
  Var f = tape.param(store, "latent.f");
  Var pchi = ad::softplus(tape.param(store, "latent.pchi"));
  Var mean = ad::add(e, ad::matmul(f, t_prev_z));
  Var r = ad::sub(t_cur.z, mean);
  return ad::add(diag_gaussian_logpdf(tape, r, pchi), t_cur.logdet);
}

Var f_o_prime_from(ad::Tape& tape, const ad::ParameterStore& store,
                   const FbfPrimeLatentModel& model, Var t_cur_z,
                   const FlowTransform::TapeForward& v_obs) {
  Var g = tape.param(store, "latent.g");
  Var h = tape.param(store, "latent.h");
  Var pgamma = ad::softplus(tape.param(store, "latent.pgamma"));
  Var mean = ad::add(g, ad::matmul(h, t_cur_z));
  Var r = ad::sub(v_obs.z, mean);
  return ad::add(diag_gaussian_logpdf(tape, r, pgamma), v_obs.logdet);
}

Var f_s(ad::Tape& tape, const ad::ParameterStore& store,
        const FbfLatentModel& model, const FlowTransform& t_flow,
        const FlowTransform& v_flow, const Eigen::VectorXd& x_prev,
        const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  auto t_cur = t_flow.forward(tape, store, tape.constant(Tensor::vector(x)));
  auto t_prev =
      t_flow.forward(tape, store, tape.constant(Tensor::vector(x_prev)));
  auto v_obs = v_flow.forward(tape, store, tape.constant(Tensor::vector(y)));
  return f_s_from(tape, store, model, t_cur, t_prev.z, v_obs.z);
}

Var f_o(ad::Tape& tape, const ad::ParameterStore& store,
        const FbfLatentModel& model, const FlowTransform& t_flow,
        const FlowTransform& v_flow, const Eigen::VectorXd& x_prev,
        const Eigen::VectorXd& y) {
  auto t_prev =
      t_flow.forward(tape, store, tape.constant(Tensor::vector(x_prev)));
  auto v_obs = v_flow.forward(tape, store, tape.constant(Tensor::vector(y)));
  return f_o_from(tape, store, model, t_prev.z, v_obs);
}

Var f_s_prime(ad::Tape& tape, const ad::ParameterStore& store,
              const FbfPrimeLatentModel& model, const FlowTransform& t_flow,
              const Eigen::VectorXd& x_prev, const Eigen::VectorXd& x) {
  auto t_cur = t_flow.forward(tape, store, tape.constant(Tensor::vector(x)));
  auto t_prev =
      t_flow.forward(tape, store, tape.constant(Tensor::vector(x_prev)));
  return f_s_prime_from(tape, store, model, t_cur, t_prev.z);
}

Var f_o_prime(ad::Tape& tape, const ad::ParameterStore& store,
              const FbfPrimeLatentModel& model, const FlowTransform& t_flow,
              const FlowTransform& v_flow, const Eigen::VectorXd& x,
              const Eigen::VectorXd& y) {
  auto t_cur = t_flow.forward(tape, store, tape.constant(Tensor::vector(x)));
  auto v_obs = v_flow.forward(tape, store, tape.constant(Tensor::vector(y)));
  return f_o_prime_from(tape, store, model, t_cur.z, v_obs);
}

FbfEquivalentCoefficients fbfprime_to_fbf(const ad::ParameterStore& store,
                                          const FbfPrimeLatentModel& model) {
  Eigen::Index m = model.state_dim();
  Eigen::VectorXd e = model.e(store);
  Eigen::MatrixXd f = model.f(store);
  Eigen::VectorXd g = model.g(store);
  Eigen::MatrixXd h = model.h(store);
  Eigen::MatrixXd pchi = model.pchi(store).asDiagonal();
  Eigen::MatrixXd pgamma = model.pgamma(store).asDiagonal();

  Eigen::MatrixXd s = h * pchi * h.transpose() + pgamma;
  // kprime = pchi h^T s^{-1}, via the PD solve s^T x = (h pchi)^T.
  Eigen::MatrixXd kprime = s.llt().solve(h * pchi).transpose();

  FbfEquivalentCoefficients out;
  out.a0 = e - kprime * (g + h * e);
  out.kprime = kprime;
  out.b = f - kprime * h * f;
  out.qchi = (Eigen::MatrixXd::Identity(m, m) - kprime * h) * pchi;
  out.c = g + h * e;
  out.d = h * f;
  out.qgamma = s;
  return out;
}

}  // namespace fbf
