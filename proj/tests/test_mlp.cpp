#include <doctest.h>

#include <cmath>

#include "fbf/autodiff.hpp"
#include "fbf/mlp.hpp"
#include "fbf/random.hpp"

namespace ad = fbf::ad;
using fbf::ConfigError;
using fbf::FinalInit;
using fbf::Mlp;
using fbf::MlpSpec;
using fbf::RandomStream;
using ad::ParameterStore;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

MlpSpec spec_of(Eigen::Index in, Eigen::Index out, int hidden,
                Eigen::Index units,
                MlpSpec::Activation act = MlpSpec::Activation::kRelu) {
  MlpSpec s;
  s.in = in;
  s.out = out;
  s.hidden_layers = hidden;
  s.units = units;
  s.activation = act;
  return s;
}

}  // namespace

TEST_SUITE("mlp") {

TEST_CASE("zero final layer makes the net the zero map") {
  ParameterStore store;
  RandomStream rng(11);
  const Mlp net =
      Mlp::create(store, "f", spec_of(3, 2, 2, 8), FinalInit::kZero, rng);
  RandomStream xs(5);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd y = net.eval(store, xs.normal_vector(3));
    REQUIRE(y.size() == 2);
    CHECK(y.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("identity-bias final layer emits vec(I) at init") {
  ParameterStore store;
  RandomStream rng(12);
  const Eigen::Index d = 3;
  const Mlp net = Mlp::create(store, "b", spec_of(d, d * d, 2, 8),
                              FinalInit::kIdentityBias, rng);
  RandomStream xs(6);
  const Eigen::VectorXd y = net.eval(store, xs.normal_vector(d));
  REQUIRE(y.size() == d * d);
  Eigen::MatrixXd as_matrix(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) as_matrix(r, c) = y[r * d + c];
  CHECK(as_matrix == Eigen::MatrixXd::Identity(d, d));
}

TEST_CASE("identity-bias init requires a square output") {
  ParameterStore store;
  RandomStream rng(13);
  CHECK_THROWS_AS(Mlp::create(store, "b", spec_of(3, 5, 1, 4),
                              FinalInit::kIdentityBias, rng),
                  ConfigError);
}

TEST_CASE("hidden weights respect the Kaiming-uniform bound") {
  ParameterStore store;
  RandomStream rng(14);
  const Mlp net =
      Mlp::create(store, "k", spec_of(7, 2, 3, 33), FinalInit::kZero, rng);
  // Layer 0 has fan-in 7; later hidden layers have fan-in 33.
  for (int layer = 0; layer < net.layer_count() - 1; ++layer) {
    const Eigen::MatrixXd w = store.at(net.weight_name(layer)).as_matrix();
    const double bound = std::sqrt(6.0 / static_cast<double>(
                                             layer == 0 ? 7 : 33));
    CHECK(w.cwiseAbs().maxCoeff() <= bound);
    CHECK(w.cwiseAbs().maxCoeff() > 0.25 * bound);  // not degenerate
    CHECK(store.at(net.bias_name(layer)).data().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("no hidden layers reduces to an affine map") {
  ParameterStore store;
  RandomStream rng(15);
  const Mlp net =
      Mlp::create(store, "a", spec_of(3, 2, 0, 64), FinalInit::kZero, rng);
  // Perturb the single layer to a known affine map.
  Eigen::MatrixXd w(2, 3);
  w << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd b(2);
  b << -1, 0.5;
  store.at(net.weight_name(0)).data() = w;
  store.at(net.bias_name(0)).data() = b.transpose();
  Eigen::VectorXd x(3);
  x << 1, -1, 2;
  CHECK(net.eval(store, x).isApprox(w * x + b, 1e-15));
}

TEST_CASE("plain and tape evaluation agree bitwise") {
  for (const auto act :
       {MlpSpec::Activation::kRelu, MlpSpec::Activation::kTanh}) {
    ParameterStore store;
    RandomStream rng(16);
    Mlp net =
        Mlp::create(store, "m", spec_of(4, 3, 2, 16, act), FinalInit::kZero,
                    rng);
    // Give the final layer nonzero weights so the output is nontrivial.
    RandomStream jitter(17);
    auto& w_last = store.at(net.weight_name(net.layer_count() - 1)).data();
    for (Eigen::Index r = 0; r < w_last.rows(); ++r)
      for (Eigen::Index c = 0; c < w_last.cols(); ++c)
        w_last(r, c) = 0.3 * jitter.normal();

    RandomStream xs(18);
    for (int i = 0; i < 5; ++i) {
      const Eigen::VectorXd x = xs.normal_vector(4);
      const Eigen::VectorXd plain = net.eval(store, x);
      Tape tape;
      const Var out = net.eval(tape, store, tape.constant(Tensor::vector(x)));
      const Eigen::VectorXd taped = tape.value(out).as_vector();
      REQUIRE(plain.size() == taped.size());
      for (Eigen::Index j = 0; j < plain.size(); ++j) {
        CHECK(plain[j] == taped[j]);
      }
    }
  }
}

TEST_CASE("attach binds existing parameters and validates shapes") {
  ParameterStore store;
  RandomStream rng(19);
  const MlpSpec spec = spec_of(3, 2, 1, 8);
  Mlp::create(store, "n", spec, FinalInit::kZero, rng);
  const Mlp bound = Mlp::attach(store, "n", spec);
  RandomStream xs(20);
  const Eigen::VectorXd x = xs.normal_vector(3);
  CHECK(bound.eval(store, x) == Mlp::attach(store, "n", spec).eval(store, x));
  CHECK_THROWS_AS(Mlp::attach(store, "n", spec_of(3, 2, 2, 8)), ConfigError);
  CHECK_THROWS_AS(Mlp::attach(store, "missing", spec), ConfigError);
}

TEST_CASE("network gradients pass the finite-difference check") {
  for (const auto act :
       {MlpSpec::Activation::kRelu, MlpSpec::Activation::kTanh}) {
    ParameterStore store;
    RandomStream rng(21);
    Mlp net = Mlp::create(store, "g", spec_of(3, 2, 2, 6, act),
                          FinalInit::kZero, rng);
    RandomStream jitter(22);
    for (auto& slot : store.slots()) {
      auto& data = slot.value.data();
      for (Eigen::Index r = 0; r < data.rows(); ++r)
        for (Eigen::Index c = 0; c < data.cols(); ++c)
          data(r, c) += 0.2 * jitter.normal();
    }
    RandomStream xs(23);
    const Eigen::VectorXd x = xs.normal_vector(3);
    const double err = ad::grad_check(
        [&net, &x](Tape& tape, const ParameterStore& params) {
          const Var out =
              net.eval(tape, params, tape.constant(Tensor::vector(x)));
          return ad::sum(ad::mul(out, out));
        },
        store);
    CHECK(err < 1e-5);
  }
}

TEST_CASE("eval rejects inputs of the wrong length") {
  ParameterStore store;
  RandomStream rng(24);
  const Mlp net =
      Mlp::create(store, "e", spec_of(3, 2, 1, 4), FinalInit::kZero, rng);
  CHECK_THROWS_AS(net.eval(store, Eigen::VectorXd::Zero(4)), ConfigError);
}

}  // TEST_SUITE
