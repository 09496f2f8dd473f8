#include <doctest.h>

#include "fbf/tensor.hpp"

using fbf::ConfigError;
using fbf::ad::Tensor;

TEST_SUITE("tensor") {

TEST_CASE("scalar is a rank-1 tensor of extent 1") {
  const Tensor t = Tensor::scalar(3.5);
  CHECK(t.rank() == 1);
  CHECK(t.size() == 1);
  CHECK(t.scalar_value() == 3.5);
}

TEST_CASE("vector round-trips through storage") {
  Eigen::VectorXd v(3);
  v << 1.0, -2.0, 0.5;
  const Tensor t = Tensor::vector(v);
  CHECK(t.rank() == 1);
  CHECK(t.shape() == std::vector<Eigen::Index>{3});
  CHECK(t.as_vector() == v);
  CHECK(t.data().rows() == 1);
}

TEST_CASE("matrix round-trips and keeps logical layout") {
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const Tensor t = Tensor::matrix(m);
  CHECK(t.rank() == 2);
  CHECK(t.as_matrix() == m);
  CHECK(t.data()(1, 2) == 6.0);
}

TEST_CASE("zeros builds either rank") {
  CHECK(Tensor::zeros({4}).as_vector() == Eigen::VectorXd::Zero(4));
  CHECK(Tensor::zeros({2, 2}).as_matrix() == Eigen::MatrixXd::Zero(2, 2));
}

TEST_CASE("with_shape validates extents") {
  Tensor::Storage s(1, 3);
  s << 1, 2, 3;
  CHECK(Tensor::with_shape({3}, s).as_vector()[2] == 3.0);
  CHECK_THROWS_AS(Tensor::with_shape({4}, s), ConfigError);
  CHECK_THROWS_AS(Tensor::with_shape({3, 1}, s), ConfigError);
  CHECK_THROWS_AS(Tensor::with_shape({}, s), ConfigError);
}

TEST_CASE("invalid shapes are rejected") {
  CHECK_THROWS_AS(Tensor::zeros({0}), ConfigError);
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), ConfigError);
  CHECK_THROWS_AS(Tensor::zeros({1, 2, 3}), ConfigError);
  CHECK_THROWS_AS(Tensor::vector(Eigen::VectorXd()), ConfigError);
}

TEST_CASE("rank accessors reject the other rank") {
  CHECK_THROWS_AS(Tensor::zeros({3}).as_matrix(), ConfigError);
  CHECK_THROWS_AS(Tensor::zeros({2, 2}).as_vector(), ConfigError);
  CHECK_THROWS_AS(Tensor::zeros({2}).scalar_value(), ConfigError);
}

TEST_CASE("same_shape compares shape not values") {
  CHECK(Tensor::zeros({2, 3}).same_shape(Tensor::zeros({2, 3})));
  CHECK_FALSE(Tensor::zeros({2, 3}).same_shape(Tensor::zeros({3, 2})));
  CHECK_FALSE(Tensor::zeros({3}).same_shape(Tensor::zeros({3, 1})));
}

TEST_CASE("all_finite detects contamination") {
  Tensor t = Tensor::zeros({2});
  CHECK(t.all_finite());
  t.data()(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
}

}  // TEST_SUITE
