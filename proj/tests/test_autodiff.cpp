#include <doctest.h>

#include <cmath>

#include "fbf/autodiff.hpp"
#include "fbf/random.hpp"

namespace ad = fbf::ad;
using fbf::ConfigError;
using fbf::NumericError;
using fbf::RandomStream;
using ad::ParameterStore;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

/// Store with smooth, sign-safe values: no zeros (relu kinks), all positive
/// where logs and divisions appear.
ParameterStore make_store() {
  ParameterStore params;
  Eigen::VectorXd v(3);
  v << 0.7, 1.3, 2.1;
  Eigen::VectorXd w(3);
  w << 1.9, 0.6, 1.1;
  Eigen::MatrixXd m(2, 3);
  m << 0.4, 1.2, -0.8, 1.5, -0.3, 0.9;
  Eigen::MatrixXd n(3, 2);
  n << 0.2, -1.1, 0.8, 0.5, -0.6, 1.4;
  Eigen::VectorXd u(2);
  u << 1.2, -0.4;
  params.add("v", Tensor::vector(v));
  params.add("w", Tensor::vector(w));
  params.add("m", Tensor::matrix(m));
  params.add("n", Tensor::matrix(n));
  params.add("u", Tensor::vector(u));
  params.add("s", Tensor::scalar(0.8));
  return params;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("parameter store rejects duplicates and unknown names") {
  ParameterStore params;
  params.add("a", Tensor::scalar(1.0));
  CHECK_THROWS_AS(params.add("a", Tensor::scalar(2.0)), ConfigError);
  CHECK_THROWS_AS(params.at("missing"), ConfigError);
  CHECK(params.contains("a"));
  CHECK_FALSE(params.contains("b"));
}

TEST_CASE("repeated param lookups share one node") {
  ParameterStore params = make_store();
  Tape tape;
  const Var a = tape.param(params, "v");
  const Var b = tape.param(params, "v");
  CHECK(a.index == b.index);
}

TEST_CASE("forward values of the elementwise primitives") {
  ParameterStore params;
  Eigen::VectorXd x(4);
  x << -1.0, 0.0, 0.5, 2.0;
  params.add("x", Tensor::vector(x));
  Tape tape;
  const Var v = tape.param(params, "x");

  const Eigen::VectorXd r = tape.value(ad::relu(v)).as_vector();
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 0.5);
  CHECK(r[3] == 2.0);

  const Eigen::VectorXd sp = tape.value(ad::softplus(v)).as_vector();
  CHECK(sp[1] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(sp[3] == doctest::Approx(std::log1p(std::exp(2.0))).epsilon(1e-15));

  const Eigen::VectorXd th = tape.value(ad::tanh(v)).as_vector();
  CHECK(th[1] == 0.0);
  CHECK(th[3] == doctest::Approx(std::tanh(2.0)).epsilon(1e-15));

  const Eigen::VectorXd e = tape.value(ad::exp(v)).as_vector();
  CHECK(e[1] == 1.0);
  CHECK(e[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("softplus stays finite for extreme inputs") {
  ParameterStore params;
  Eigen::VectorXd x(2);
  x << 800.0, -800.0;
  params.add("x", Tensor::vector(x));
  Tape tape;
  const Eigen::VectorXd sp =
      tape.value(ad::softplus(tape.param(params, "x"))).as_vector();
  CHECK(sp[0] == doctest::Approx(800.0).epsilon(1e-15));
  CHECK(sp[1] >= 0.0);
  CHECK(sp[1] < 1e-300);
}

TEST_CASE("matmul covers all four rank pairings") {
  ParameterStore params = make_store();
  Tape tape;
  const Var m = tape.param(params, "m");  // 2x3
  const Var n = tape.param(params, "n");  // 3x2
  const Var v = tape.param(params, "v");  // 3
  const Var u = tape.param(params, "u");  // 2

  const Eigen::MatrixXd mm = tape.value(ad::matmul(m, n)).as_matrix();
  CHECK(mm.isApprox(params.at("m").as_matrix() * params.at("n").as_matrix(),
                    1e-15));

  const Eigen::VectorXd mv = tape.value(ad::matmul(m, v)).as_vector();
  CHECK(mv.isApprox(params.at("m").as_matrix() * params.at("v").as_vector(),
                    1e-15));

  const Eigen::VectorXd um = tape.value(ad::matmul(u, m)).as_vector();
  CHECK(um.isApprox((params.at("u").as_vector().transpose() *
                     params.at("m").as_matrix())
                        .transpose(),
                    1e-15));

  const double vv = tape.value(ad::matmul(v, v)).scalar_value();
  CHECK(vv == doctest::Approx(params.at("v").as_vector().squaredNorm())
                  .epsilon(1e-15));
}

TEST_CASE("structural primitives keep row-major order") {
  ParameterStore params = make_store();
  Tape tape;
  const Var m = tape.param(params, "m");
  const Var v = tape.param(params, "v");

  const Eigen::VectorXd flat = tape.value(ad::reshape(m, {6})).as_vector();
  CHECK(flat[0] == 0.4);
  CHECK(flat[2] == -0.8);
  CHECK(flat[3] == 1.5);

  const Eigen::MatrixXd back =
      tape.value(ad::reshape(ad::reshape(m, {6}), {2, 3})).as_matrix();
  CHECK(back == params.at("m").as_matrix());

  const Eigen::MatrixXd t = tape.value(ad::transpose(m)).as_matrix();
  CHECK(t == params.at("m").as_matrix().transpose());

  const Eigen::VectorXd c =
      tape.value(ad::concat(v, tape.constant(Tensor::scalar(9.0))))
          .as_vector();
  REQUIRE(c.size() == 4);
  CHECK(c[3] == 9.0);

  const Eigen::VectorXd g = tape.value(ad::gather(v, {2, 0, 0})).as_vector();
  CHECK(g[0] == 2.1);
  CHECK(g[1] == 0.7);
  CHECK(g[2] == 0.7);
}

TEST_CASE("reductions") {
  ParameterStore params = make_store();
  Tape tape;
  const Var m = tape.param(params, "m");
  const Eigen::MatrixXd mm = params.at("m").as_matrix();
  CHECK(tape.value(ad::sum(m)).scalar_value() ==
        doctest::Approx(mm.sum()).epsilon(1e-15));
  CHECK(tape.value(ad::mean(m)).scalar_value() ==
        doctest::Approx(mm.mean()).epsilon(1e-15));
  const Eigen::VectorXd rows = tape.value(ad::sum_last(m)).as_vector();
  CHECK(rows.isApprox(mm.rowwise().sum(), 1e-15));
}

TEST_CASE("shape mismatches are rejected") {
  ParameterStore params = make_store();
  Tape tape;
  const Var v = tape.param(params, "v");
  const Var u = tape.param(params, "u");
  const Var m = tape.param(params, "m");
  CHECK_THROWS_AS(ad::add(v, u), ConfigError);
  CHECK_THROWS_AS(ad::mul(v, m), ConfigError);
  CHECK_THROWS_AS(ad::matmul(v, u), ConfigError);
  CHECK_THROWS_AS(ad::reshape(m, {5}), ConfigError);
  CHECK_THROWS_AS(ad::gather(v, {3}), ConfigError);
  CHECK_THROWS_AS(ad::add_row(m, u), ConfigError);
}

TEST_CASE("non-finite results abort the op that produced them") {
  ParameterStore params;
  params.add("neg", Tensor::scalar(-1.0));
  params.add("zero", Tensor::scalar(0.0));
  Tape tape;
  CHECK_THROWS_AS(ad::log(tape.param(params, "neg")), NumericError);
  Tape tape2;
  CHECK_THROWS_AS(ad::div(tape2.constant(Tensor::scalar(1.0)),
                          tape2.param(params, "zero")),
                  NumericError);
}

TEST_CASE("gradients of every primitive pass the relative check") {
  auto check = [](const char* what,
                  const std::function<Var(Tape&, const ParameterStore&)>& fn) {
    ParameterStore params = make_store();
    const double err = ad::grad_check(fn, params);
    INFO(what);
    CHECK(err < 1e-6);
  };

  check("add/mul", [](Tape& t, const ParameterStore& p) {
    const Var v = t.param(p, "v");
    const Var w = t.param(p, "w");
    return ad::sum(ad::mul(ad::add(v, w), v));
  });
  check("sub/div", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::div(ad::sub(t.param(p, "v"), t.param(p, "w")),
                           t.param(p, "w")));
  });
  check("scale and operators", [](Tape& t, const ParameterStore& p) {
    const Var v = t.param(p, "v");
    return ad::sum(2.5 * v - ad::scale(v, 0.5) + v);
  });
  check("add_row", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::add_row(t.param(p, "m"), t.param(p, "v")));
  });
  check("matmul 2x2", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::matmul(t.param(p, "m"), t.param(p, "n")));
  });
  check("matmul 2x1", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::matmul(t.param(p, "m"), t.param(p, "v")));
  });
  check("matmul 1x2", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::matmul(t.param(p, "u"), t.param(p, "m")));
  });
  check("matmul 1x1", [](Tape& t, const ParameterStore& p) {
    return ad::matmul(t.param(p, "v"), t.param(p, "w"));
  });
  check("tanh", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::tanh(t.param(p, "m")));
  });
  check("relu", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::relu(t.param(p, "m")));
  });
  check("softplus", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::softplus(t.param(p, "m")));
  });
  check("exp", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::exp(t.param(p, "u")));
  });
  check("log", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::log(t.param(p, "v")));
  });
  check("mean", [](Tape& t, const ParameterStore& p) {
    return ad::mean(ad::mul(t.param(p, "m"), t.param(p, "m")));
  });
  check("sum_last", [](Tape& t, const ParameterStore& p) {
    return ad::matmul(ad::sum_last(t.param(p, "m")), t.param(p, "u"));
  });
  check("concat", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::mul(ad::concat(t.param(p, "v"), t.param(p, "u")),
                           ad::concat(t.param(p, "w"), t.param(p, "u"))));
  });
  check("reshape", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::mul(ad::reshape(t.param(p, "m"), {6}),
                           ad::concat(t.param(p, "v"), t.param(p, "w"))));
  });
  check("transpose", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::matmul(ad::transpose(t.param(p, "m")),
                              t.param(p, "u")));
  });
  check("gather with repeats", [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::mul(ad::gather(t.param(p, "v"), {0, 0, 2, 1}),
                           ad::gather(t.param(p, "w"), {1, 2, 0, 0})));
  });
}

TEST_CASE("composed graph passes the gradient check") {
  ParameterStore params = make_store();
  const double err = ad::grad_check(
      [](Tape& t, const ParameterStore& p) {
        const Var v = t.param(p, "v");
        const Var h = ad::tanh(ad::matmul(t.param(p, "m"), v));
        const Var z = ad::softplus(ad::matmul(t.param(p, "n"), h));
        return ad::add(ad::sum(ad::log(z)),
                       ad::mean(ad::exp(ad::scale(v, -0.5))));
      },
      params);
  CHECK(err < 1e-5);
}

TEST_CASE("gradient of a linear combination is the linear combination") {
  ParameterStore params = make_store();
  auto f = [](Tape& t, const ParameterStore& p) {
    return ad::sum(ad::tanh(t.param(p, "v")));
  };
  auto g = [](Tape& t, const ParameterStore& p) {
    return ad::matmul(t.param(p, "v"), t.param(p, "w"));
  };
  ad::GradientMap gf;
  ad::GradientMap gg;
  {
    Tape tape;
    gf = tape.backward(f(tape, params));
  }
  {
    Tape tape;
    gg = tape.backward(g(tape, params));
  }
  Tape tape;
  const ad::GradientMap combined =
      tape.backward(ad::add(ad::scale(f(tape, params), 2.0),
                            ad::scale(g(tape, params), 3.0)));
  for (const auto& [name, grad] : combined) {
    Tensor::Storage expected =
        Tensor::Storage::Zero(grad.data().rows(), grad.data().cols());
    if (auto it = gf.find(name); it != gf.end()) {
      expected += 2.0 * it->second.data();
    }
    if (auto it = gg.find(name); it != gg.end()) {
      expected += 3.0 * it->second.data();
    }
    CHECK((grad.data() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("identical graphs give bit-identical gradients") {
  ParameterStore params = make_store();
  auto build = [&params](Tape& tape) {
    const Var v = tape.param(params, "v");
    const Var h = ad::softplus(ad::matmul(tape.param(params, "m"), v));
    return ad::sum(ad::mul(h, h));
  };
  Tape t1;
  Tape t2;
  const ad::GradientMap g1 = t1.backward(build(t1));
  const ad::GradientMap g2 = t2.backward(build(t2));
  REQUIRE(g1.size() == g2.size());
  for (const auto& [name, grad] : g1) {
    CHECK(grad.data() == g2.at(name).data());
  }
}

TEST_CASE("gradient accumulates over repeated parameter use") {
  ParameterStore params;
  params.add("x", Tensor::scalar(3.0));
  Tape tape;
  const Var x = tape.param(params, "x");
  const ad::GradientMap grads = tape.backward(ad::mul(x, x));
  CHECK(grads.at("x").scalar_value() == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("a tape refuses a second backward pass") {
  ParameterStore params = make_store();
  Tape tape;
  const Var out = ad::sum(tape.param(params, "v"));
  tape.backward(out);
  CHECK_THROWS_AS(tape.backward(out), std::logic_error);
}

TEST_CASE("backward rejects non-scalar outputs without a seed") {
  ParameterStore params = make_store();
  Tape tape;
  CHECK_THROWS_AS(tape.backward(tape.param(params, "v")), ConfigError);
}

TEST_CASE("seeded backward computes vector-Jacobian products") {
  ParameterStore params = make_store();
  Tape tape;
  const Var y = ad::matmul(tape.param(params, "m"), tape.param(params, "v"));
  Eigen::VectorXd seed(2);
  seed << 1.5, -2.0;
  const ad::GradientMap grads = tape.backward(y, Tensor::vector(seed));
  const Eigen::VectorXd expected =
      params.at("m").as_matrix().transpose() * seed;
  CHECK(grads.at("v").as_vector().isApprox(expected, 1e-14));
}

TEST_CASE("grad_check restores parameter values") {
  ParameterStore params = make_store();
  const Eigen::MatrixXd before = params.at("m").as_matrix();
  ad::grad_check(
      [](Tape& t, const ParameterStore& p) {
        return ad::sum(ad::tanh(t.param(p, "m")));
      },
      params);
  CHECK(params.at("m").as_matrix() == before);
}

}  // TEST_SUITE
