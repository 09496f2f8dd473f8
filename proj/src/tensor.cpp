#include "fbf/tensor.hpp"

namespace fbf::ad {

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.shape_ = {1};
  t.data_.resize(1, 1);
  t.data_(0, 0) = v;
  return t;
}

Tensor Tensor::vector(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw ConfigError("tensor extents must be positive");
  Tensor t;
  t.shape_ = {v.size()};
  t.data_.resize(1, v.size());
  t.data_.row(0) = v.transpose();
  return t;
}

Tensor Tensor::matrix(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.cols() == 0)
    throw ConfigError("tensor extents must be positive");
  Tensor t;
  t.shape_ = {m.rows(), m.cols()};
  t.data_ = m;
  return t;
}

Tensor Tensor::zeros(const std::vector<Eigen::Index>& shape) {
  Storage s;
  if (shape.size() == 1 && shape[0] > 0) {
    s = Storage::Zero(1, shape[0]);
  } else if (shape.size() == 2 && shape[0] > 0 && shape[1] > 0) {
    s = Storage::Zero(shape[0], shape[1]);
  } else {
    throw ConfigError("tensor shape must be rank 1 or 2 with positive extents");
  }
  return with_shape(shape, std::move(s));
}

Tensor Tensor::with_shape(std::vector<Eigen::Index> shape, Storage data) {
  bool ok = false;
  if (shape.size() == 1) {
    ok = shape[0] > 0 && data.rows() == 1 && data.cols() == shape[0];
  } else if (shape.size() == 2) {
    ok = shape[0] > 0 && shape[1] > 0 && data.rows() == shape[0] &&
         data.cols() == shape[1];
  }
  if (!ok) throw ConfigError("tensor shape does not match storage extents");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

double Tensor::scalar_value() const {
  if (size() != 1) throw ConfigError("tensor is not a scalar");
  return data_(0, 0);
}

Eigen::VectorXd Tensor::as_vector() const {
  if (rank() != 1) throw ConfigError("tensor is not rank 1");
  return data_.row(0).transpose();
}

Eigen::MatrixXd Tensor::as_matrix() const {
  if (rank() != 2) throw ConfigError("tensor is not rank 2");
  return data_;
}

}  // namespace fbf::ad
